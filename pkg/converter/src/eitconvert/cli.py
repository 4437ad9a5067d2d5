"""Command line: convert one subject directory to an EIT1 trial set."""

from __future__ import annotations

import argparse
import sys

from .convert import convert_subject
from .dataset import DEFAULT_TIMINGS, DatasetError
from .fifmin import FifError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Usage(message)


class _Usage(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="eit-convert",
        description="Convert a subject's processed inner-speech epoch derivatives into an EIT1 trial set plus a channel-positions CSV.",
    )
    parser.add_argument("subject_dir", help="subject directory (sub-XX) containing ses-* sessions")
    parser.add_argument("out", help="output EIT1 path")
    parser.add_argument("--interval", choices=("action", "full"), default="action")
    parser.add_argument("--positions-out", default=None, help="positions CSV path (default: alongside the EIT1)")
    parser.add_argument("--expected-rate", type=float, default=256.0)
    parser.add_argument("--expected-channels", type=int, default=128)
    parser.add_argument(
        "--timings",
        default=",".join(f"{v:g}" for v in DEFAULT_TIMINGS),
        help="concentration,cue,action,relax durations in seconds",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
        timings = tuple(float(v) for v in args.timings.split(","))
        if len(timings) != 4 or any(v <= 0 for v in timings):
            raise _Usage("--timings needs four positive durations")
    except _Usage as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        result = convert_subject(
            args.subject_dir,
            args.out,
            interval=args.interval,
            positions_out=args.positions_out,
            expected_rate=args.expected_rate,
            expected_channels=args.expected_channels,
            timings=timings,
        )
    except (DatasetError, FifError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(
        f"{result.manifest.subject_id}: {result.n_trials} inner-speech trials "
        f"({', '.join(str(c) for c in result.manifest.trial_counts)} per session), "
        f"class counts {list(result.class_counts)}, positions from {result.positions_source}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
