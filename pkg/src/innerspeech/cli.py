"""Batch command-line front end for the pipeline.

Every subcommand reads a plain-text ``key = value`` config (unknown keys are
a hard error), writes its outputs into a run directory together with the
echoed effective config and a manifest (input/output hashes, versions, wall
time), and maps failures onto a fixed exit-code taxonomy:

0 success, 1 usage error, 2 data/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalError, UsageError, ValidationError
from .evaluation import (
    PipelineSpec,
    SelectorSpec,
    comparison_table,
    confusion_csv,
    confusion_text,
    cross_validate,
    subject_table,
)
from .features import (
    FeatureCatalog,
    build_feature_matrix,
    catalog_manifest_csv,
    fit_scaler,
    load_feature_matrix,
    save_feature_matrix,
)
from .models import (
    DEFAULT_ENSEMBLE_LAMBDAS,
    EnsembleTrainer,
    LdaTrainer,
    LogRegTrainer,
    TrainedPipeline,
    load_model,
    save_model,
)
from .preprocess import VmdParams, detect_artifacts, remove_artifacts
from .selection import k_sweep, mrmr_select, rank_features
from .topomap import compute_erp, load_positions_csv, render_topomap, write_topomap
from .trialset import GroundTruth, SynthSpec, generate_synthetic, load_trialset, save_trialset

SUBCOMMANDS = (
    "synth",
    "inspect",
    "clean",
    "features",
    "select",
    "sweep",
    "train",
    "evaluate",
    "predict",
    "topomap",
    "report",
)

_CONFIG_DEFAULTS: dict[str, str] = {
    "seed": "0",
    "threads": "1",
    # synth
    "synth.n_trials": "160",
    "synth.n_channels": "16",
    "synth.n_samples": "640",
    "synth.sample_rate": "256",
    "synth.class_freqs": "8,12,20,30",
    "synth.class_names": "",
    "synth.channels_per_class": "2",
    "synth.amplitude": "0.5",
    "synth.noise_level": "1.0",
    "synth.artifact_prob": "0.0",
    "synth.drift_amplitude": "10.0",
    "synth.drift_freq": "0.2",
    "synth.drift_kind": "sine",
    "synth.subject_id": "synthetic",
    # clean
    "clean.z_thresh": "3.0",
    "clean.drift_factor": "5.0",
    "vmd.K": "6",
    "vmd.alpha": "2000",
    "vmd.tau": "0",
    "vmd.tol": "1e-7",
    "vmd.max_iter": "500",
    # features
    "catalog.include_td": "true",
    "catalog.include_fd": "true",
    "catalog.td_extras": "",
    "catalog.fd_extra_bands": "",
    "catalog.tfd": "db4:5",
    # selection / model / cv
    "select.method": "mrmr_fcq",
    "select.k": "10",
    "model.type": "ensemble",
    "model.lambda": "1.0",
    "model.gamma": "0.1",
    "model.lambdas": ",".join(f"{v:g}" for v in DEFAULT_ENSEMBLE_LAMBDAS),
    "model.inner_folds": "5",
    "model.meta_lambda": "1.0",
    "cv.folds": "10",
    "cv.protocol": "leakage_safe",
    "sweep.k_values": "20:610:10",
    # topomap
    "topomap.grid": "64",
    "topomap.stat": "rms",
    "topomap.interval": "action",
    "topomap.class_index": "",
}


class RunConfig:
    """Effective configuration: defaults overlaid with a parsed config file."""

    def __init__(self, overrides: dict[str, str]):
        unknown = sorted(set(overrides) - set(_CONFIG_DEFAULTS))
        if unknown:
            raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
        self.values = dict(_CONFIG_DEFAULTS)
        self.values.update(overrides)

    @staticmethod
    def from_file(path: str | None) -> "RunConfig":
        if path is None:
            return RunConfig({})
        overrides: dict[str, str] = {}
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            overrides[key.strip()] = value.strip()
        return RunConfig(overrides)

    def echo(self) -> str:
        lines = [f"{k} = {self.values[k]}" for k in sorted(self.values)]
        return "\n".join(lines) + "\n"

    # typed getters ---------------------------------------------------------

    def text(self, key: str) -> str:
        return self.values[key]

    def integer(self, key: str) -> int:
        try:
            return int(self.values[key])
        except ValueError as exc:
            raise UsageError(f"config {key} = {self.values[key]!r} is not an integer") from exc

    def real(self, key: str) -> float:
        try:
            return float(self.values[key])
        except ValueError as exc:
            raise UsageError(f"config {key} = {self.values[key]!r} is not a number") from exc

    def boolean(self, key: str) -> bool:
        v = self.values[key].lower()
        if v in ("true", "1", "yes"):
            return True
        if v in ("false", "0", "no"):
            return False
        raise UsageError(f"config {key} = {self.values[key]!r} is not a boolean")

    def float_list(self, key: str) -> tuple[float, ...]:
        raw = self.values[key].strip()
        if not raw:
            return ()
        try:
            return tuple(float(v) for v in raw.split(","))
        except ValueError as exc:
            raise UsageError(f"config {key} = {raw!r} is not a comma list of numbers") from exc

    def text_list(self, key: str) -> tuple[str, ...]:
        raw = self.values[key].strip()
        if not raw:
            return ()
        return tuple(v.strip() for v in raw.split(",") if v.strip())

    def band_list(self, key: str) -> tuple[tuple[float, float], ...]:
        out = []
        for item in self.text_list(key):
            if "-" not in item:
                raise UsageError(f"config {key}: band {item!r} must look like 'lo-hi'")
            lo, hi = item.split("-", 1)
            try:
                out.append((float(lo), float(hi)))
            except ValueError as exc:
                raise UsageError(f"config {key}: bad band {item!r}") from exc
        return tuple(out)

    def tfd_list(self, key: str) -> tuple[tuple[str, int], ...]:
        out = []
        for item in self.text_list(key):
            if ":" not in item:
                raise UsageError(f"config {key}: entry {item!r} must look like 'wavelet:levels'")
            w, l = item.split(":", 1)
            try:
                out.append((w.strip(), int(l)))
            except ValueError as exc:
                raise UsageError(f"config {key}: bad levels in {item!r}") from exc
        return tuple(out)

    def k_grid(self, key: str) -> tuple[int, ...]:
        raw = self.values[key].strip()
        if ":" in raw:
            parts = raw.split(":")
            if len(parts) != 3:
                raise UsageError(f"config {key}: range must look like 'start:stop:step'")
            try:
                start, stop, step = (int(p) for p in parts)
            except ValueError as exc:
                raise UsageError(f"config {key}: bad range {raw!r}") from exc
            if step <= 0:
                raise UsageError(f"config {key}: step must be positive")
            return tuple(range(start, stop + 1, step))
        try:
            return tuple(int(v) for v in raw.split(","))
        except ValueError as exc:
            raise UsageError(f"config {key} = {raw!r} is not a K grid") from exc


def _synth_spec(cfg: RunConfig) -> SynthSpec:
    return SynthSpec(
        n_trials=cfg.integer("synth.n_trials"),
        n_channels=cfg.integer("synth.n_channels"),
        n_samples=cfg.integer("synth.n_samples"),
        sample_rate=cfg.real("synth.sample_rate"),
        class_freqs=cfg.float_list("synth.class_freqs"),
        class_names=cfg.text_list("synth.class_names"),
        channels_per_class=cfg.integer("synth.channels_per_class"),
        amplitude=cfg.real("synth.amplitude"),
        noise_level=cfg.real("synth.noise_level"),
        artifact_prob=cfg.real("synth.artifact_prob"),
        drift_amplitude=cfg.real("synth.drift_amplitude"),
        drift_freq=cfg.real("synth.drift_freq"),
        drift_kind=cfg.text("synth.drift_kind"),
        subject_id=cfg.text("synth.subject_id"),
    )


def _vmd_params(cfg: RunConfig) -> VmdParams:
    return VmdParams(
        K=cfg.integer("vmd.K"),
        alpha=cfg.real("vmd.alpha"),
        tau=cfg.real("vmd.tau"),
        tol=cfg.real("vmd.tol"),
        max_iter=cfg.integer("vmd.max_iter"),
    )


def _catalog(cfg: RunConfig) -> FeatureCatalog:
    return FeatureCatalog(
        include_td=cfg.boolean("catalog.include_td"),
        td_extras=cfg.text_list("catalog.td_extras"),
        include_fd=cfg.boolean("catalog.include_fd"),
        fd_extra_bands=cfg.band_list("catalog.fd_extra_bands"),
        tfd_configs=cfg.tfd_list("catalog.tfd"),
    )


def _model_factory(cfg: RunConfig):
    kind = cfg.text("model.type")
    seed = cfg.integer("seed")
    if kind == "logreg":
        lam = cfg.real("model.lambda")
        return lambda: LogRegTrainer(l2_lambda=lam)
    if kind == "lda":
        gamma = cfg.real("model.gamma")
        return lambda: LdaTrainer(gamma=gamma)
    if kind == "ensemble":
        lambdas = cfg.float_list("model.lambdas")
        inner = cfg.integer("model.inner_folds")
        meta = cfg.real("model.meta_lambda")
        return lambda: EnsembleTrainer(lambdas=lambdas, inner_folds=inner, seed=seed, meta_lambda=meta)
    raise UsageError(f"unknown model.type {kind!r} (logreg | lda | ensemble)")


def _pipeline(cfg: RunConfig) -> PipelineSpec:
    method = cfg.text("select.method")
    selector = None if method == "none" else SelectorSpec(method=method, k=cfg.integer("select.k"))
    return PipelineSpec(model_factory=_model_factory(cfg), selector=selector, scale=True)


# -- run directory plumbing -------------------------------------------------


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunDir:
    def __init__(self, out: str, subcommand: str, cfg: RunConfig, inputs: list[str]):
        self.dir = Path(out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.subcommand = subcommand
        self.cfg = cfg
        self.inputs = [Path(p) for p in inputs]
        self.outputs: list[Path] = []
        self.extra: dict = {}
        self.start = time.perf_counter()

    def path(self, name: str) -> Path:
        p = self.dir / name
        self.outputs.append(p)
        return p

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.write_text(text)
        return p

    def finish(self) -> None:
        (self.dir / "config.echo.txt").write_text(self.cfg.echo())
        manifest = {
            "subcommand": self.subcommand,
            "package_version": __version__,
            "numpy_version": np.__version__,
            "python_version": sys.version.split()[0],
            "inputs": {str(p): _sha256(p) for p in self.inputs},
            "outputs": {str(p): _sha256(p) for p in self.outputs if p.exists()},
            "wall_time_s": time.perf_counter() - self.start,
            "timestamp_utc": datetime.now(timezone.utc).isoformat(),
            **self.extra,
        }
        (self.dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# -- subcommands ----------------------------------------------------------------


def _cmd_synth(args, cfg: RunConfig) -> int:
    run = RunDir(args.out, "synth", cfg, [])
    ts, gt = generate_synthetic(_synth_spec(cfg), seed=cfg.integer("seed"))
    save_trialset(ts, run.path("synthetic.eit1"))
    run.write_text("groundtruth.json", gt.to_json() + "\n")
    run.extra["n_artifact_pairs"] = int(gt.artifact_flags.sum())
    run.finish()
    return 0


def _cmd_inspect(args, cfg: RunConfig) -> int:
    ts = load_trialset(args.input)
    print(f"subject_id     : {ts.subject_id}")
    print(f"trials         : {ts.n_trials}")
    print(f"channels       : {ts.n_channels}")
    print(f"samples        : {ts.n_samples}")
    print(f"sample_rate    : {ts.sample_rate:g} Hz")
    print(f"classes        : {', '.join(ts.class_names)}")
    counts = np.bincount(ts.labels, minlength=ts.n_classes) if ts.n_trials else []
    print(f"class counts   : {list(map(int, counts))}")
    print(f"positions      : {'yes' if ts.channel_positions is not None else 'no'}")
    for name, (a, b) in sorted(ts.intervals.items()):
        print(f"interval {name:<12}: [{a}, {b})")
    return 0


def _cmd_clean(args, cfg: RunConfig) -> int:
    run = RunDir(args.out, "clean", cfg, [args.input])
    ts = load_trialset(args.input)
    mask = detect_artifacts(
        ts, z_thresh=cfg.real("clean.z_thresh"), drift_factor=cfg.real("clean.drift_factor")
    )
    threads = cfg.integer("threads")
    workers = os.cpu_count() or 1 if threads == 0 else threads
    cleaned = remove_artifacts(ts, mask, vmd_params=_vmd_params(cfg), n_workers=workers)
    save_trialset(cleaned, run.path("cleaned.eit1"))
    lines = ["trial,channel,reason,z_mean,z_std,drift_ptp"]
    lines += [
        f"{t},{c},{reason},{zm:.6g},{zs:.6g},{dr:.6g}"
        for t, c, reason, zm, zs, dr in mask.report_rows()
    ]
    run.write_text("mask_report.csv", "\n".join(lines) + "\n")
    run.extra["n_flagged"] = mask.n_flagged
    run.finish()
    return 0


def _cmd_features(args, cfg: RunConfig) -> int:
    run = RunDir(args.out, "features", cfg, [args.input])
    ts = load_trialset(args.input)
    fm = build_feature_matrix(ts, _catalog(cfg))
    save_feature_matrix(fm, run.path("features.eitf"))
    run.write_text("catalog.csv", catalog_manifest_csv(fm))
    run.extra["n_features"] = fm.n_features
    run.finish()
    return 0


def _cmd_select(args, cfg: RunConfig) -> int:
    run = RunDir(args.out, "select", cfg, [args.input])
    fm = load_feature_matrix(args.input)
    method = cfg.text("select.method")
    k = cfg.integer("select.k")
    if method in ("mrmr_fcq", "mrmr_miq"):
        variant = "FCQ" if method == "mrmr_fcq" else "MIQ"
        ranked = mrmr_select(fm.values, fm.labels, K=k, variant=variant)
    else:
        ranked = rank_features(fm.values, fm.labels, method)
    lines = ["rank,column,descriptor,score"]
    for rank, (col, score) in enumerate(zip(ranked.ordered_indices, ranked.scores)):
        if rank >= k and method not in ("mrmr_fcq", "mrmr_miq"):
            break
        lines.append(f"{rank},{col},{fm.descriptors[col].label()},{score:.10g}")
    run.write_text("ranked.csv", "\n".join(lines) + "\n")
    run.finish()
    return 0


def _cmd_sweep(args, cfg: RunConfig) -> int:
    run = RunDir(args.out, "sweep", cfg, [args.input])
    fm = load_feature_matrix(args.input)
    result = k_sweep(
        fm,
        _pipeline(cfg),
        cfg.k_grid("sweep.k_values"),
        cv_folds=cfg.integer("cv.folds"),
        seed=cfg.integer("seed"),
        protocol=cfg.text("cv.protocol"),
    )
    run.write_text("sweep.csv", result.to_csv())
    run.extra["best_k"] = result.best_k
    run.finish()
    print(f"best K = {result.best_k}")
    return 0


def _cmd_train(args, cfg: RunConfig) -> int:
    run = RunDir(args.out, "train", cfg, [args.input])
    fm = load_feature_matrix(args.input)
    scaler = fit_scaler(fm)
    X = scaler.transform(fm.values)
    method = cfg.text("select.method")
    indices = None
    if method != "none":
        k = cfg.integer("select.k")
        if method in ("mrmr_fcq", "mrmr_miq"):
            variant = "FCQ" if method == "mrmr_fcq" else "MIQ"
            indices = mrmr_select(X, fm.labels, K=k, variant=variant).top()
        elif method == "pca":
            raise UsageError("train does not support select.method = pca; use column selectors")
        else:
            indices = rank_features(X, fm.labels, method).top(k)
        X = X[:, indices]
    trainer = _model_factory(cfg)()
    trainer.fit(X, fm.labels, n_classes=fm.n_classes)
    bundle = TrainedPipeline(scaler=scaler, selected_indices=indices, model=trainer.model)
    save_model(bundle, run.path("model.eim1"))
    run.finish()
    return 0


def _class_names_for(fm) -> tuple[str, ...]:
    return tuple(f"class{i}" for i in range(fm.n_classes))


def _cmd_evaluate(args, cfg: RunConfig) -> int:
    run = RunDir(args.out, "evaluate", cfg, [args.input])
    fm = load_feature_matrix(args.input)
    report = cross_validate(
        fm,
        _pipeline(cfg),
        k=cfg.integer("cv.folds"),
        seed=cfg.integer("seed"),
        protocol=cfg.text("cv.protocol"),
    )
    names = _class_names_for(fm)
    csv_text, plain = comparison_table([(report.pipeline, report.accuracy_pct, report.macro_f1_pct)])
    run.write_text("report.csv", csv_text)
    run.write_text("report.txt", plain)
    run.write_text("confusion.csv", confusion_csv(report.confusion, names))
    run.write_text("confusion.txt", confusion_text(report.confusion, names))
    run.write_text("metrics.json", json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n")
    run.finish()
    print(f"pooled accuracy = {report.accuracy_pct:.2f}%  macro F1 = {report.macro_f1_pct:.2f}%")
    return 0


def _cmd_predict(args, cfg: RunConfig) -> int:
    run = RunDir(args.out, "predict", cfg, [args.model, args.input])
    bundle = load_model(args.model)
    fm = load_feature_matrix(args.input)
    if not isinstance(bundle, TrainedPipeline):
        bundle = TrainedPipeline(scaler=None, selected_indices=None, model=bundle)
    pred = bundle.predict(fm.values)
    lines = ["trial,predicted,truth"]
    lines += [f"{i},{int(p)},{int(t)}" for i, (p, t) in enumerate(zip(pred, fm.labels))]
    run.write_text("predictions.csv", "\n".join(lines) + "\n")
    accuracy = 100.0 * float(np.mean(pred == fm.labels)) if fm.n_trials else 0.0
    run.extra["accuracy_pct"] = accuracy
    run.finish()
    print(f"accuracy vs stored labels = {accuracy:.2f}%")
    return 0


def _cmd_topomap(args, cfg: RunConfig) -> int:
    run = RunDir(args.out, "topomap", cfg, [args.input] + ([args.positions] if args.positions else []))
    ts = load_trialset(args.input)
    raw = cfg.text("topomap.class_index")
    class_index = None if raw == "" else int(raw)
    values = compute_erp(
        ts,
        interval_name=cfg.text("topomap.interval"),
        class_index=class_index,
        stat=cfg.text("topomap.stat"),
    )
    if args.positions:
        positions = load_positions_csv(args.positions, ts.channel_names)
    elif ts.channel_positions is not None:
        positions = ts.channel_positions
    else:
        raise ValidationError("no channel positions: pass --positions or embed them in the EIT1 file")
    field = render_topomap(values, positions, grid_size=cfg.integer("topomap.grid"))
    write_topomap(field, run.path("map.pgm"), run.path("map.csv"))
    run.finish()
    return 0


def _cmd_report(args, cfg: RunConfig) -> int:
    run = RunDir(args.out, "report", cfg, list(args.metrics))
    rows = []
    for item in args.metrics:
        if "=" in Path(item).name and not Path(item).exists():
            name, path = item.split("=", 1)
        else:
            name, path = Path(item).stem, item
        try:
            payload = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ValidationError(f"cannot read metrics file {path}: {exc}") from exc
        rows.append((payload.get("pipeline", name) if args.use_pipeline_names else name,
                     float(payload["accuracy_pct"]), float(payload["macro_f1_pct"])))
    if args.extra_rows:
        for lineno, line in enumerate(Path(args.extra_rows).read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.lower().startswith("name,"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValidationError(f"{args.extra_rows}:{lineno}: expected 'name,accuracy,f1'")
            rows.append((parts[0], float(parts[1]), float(parts[2])))
    if args.subject_table:
        csv_text, plain = subject_table(rows)
    else:
        csv_text, plain = comparison_table(rows)
    run.write_text("comparison.csv", csv_text)
    run.write_text("comparison.txt", plain)
    run.finish()
    print(plain, end="")
    return 0


# -- argument parsing -------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # turn argparse's exit(2) into our usage error
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="innerspeech", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, help_text, needs_input=True, needs_out=True):
        p = sub.add_parser(name, help=help_text)
        if needs_input:
            p.add_argument("input", help="input file")
        if needs_out:
            p.add_argument("--out", required=True, help="run output directory")
        p.add_argument("--config", default=None, help="key = value config file")
        return p

    add("synth", "generate a synthetic EIT1 trial set + ground truth", needs_input=False)
    add("inspect", "print an EIT1 header summary", needs_out=False)
    add("clean", "screen artifacts and remove drift (EIT1 -> EIT1 + mask report)")
    add("features", "extract the feature matrix (EIT1 -> EIT-F + catalog manifest)")
    add("select", "rank features on the full matrix (EIT-F -> CSV)")
    add("sweep", "cross-validated K-sweep (EIT-F -> CSV)")
    add("train", "fit scaler + selector + model on all rows (EIT-F -> EIM1)")
    add("evaluate", "cross-validated evaluation (EIT-F -> report files)")
    p_pred = add("predict", "apply a trained EIM1 bundle to an EIT-F matrix")
    p_pred.add_argument("--model", required=True, help="EIM1 model file")
    p_topo = add("topomap", "render a scalp map (EIT1 -> PGM + CSV)")
    p_topo.add_argument("--positions", default=None, help="channel positions CSV")
    p_rep = sub.add_parser("report", help="combine metrics.json files into comparison tables")
    p_rep.add_argument("metrics", nargs="+", help="metrics.json paths (or name=path)")
    p_rep.add_argument("--out", required=True)
    p_rep.add_argument("--config", default=None)
    p_rep.add_argument("--extra-rows", default=None, help="CSV of externally supplied name,acc,f1 rows")
    p_rep.add_argument("--subject-table", action="store_true", help="treat rows as subjects and add an Overall row")
    p_rep.add_argument("--use-pipeline-names", action="store_true")
    return parser


_HANDLERS = {
    "synth": _cmd_synth,
    "inspect": _cmd_inspect,
    "clean": _cmd_clean,
    "features": _cmd_features,
    "select": _cmd_select,
    "sweep": _cmd_sweep,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "predict": _cmd_predict,
    "topomap": _cmd_topomap,
    "report": _cmd_report,
}


def run(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = RunConfig.from_file(args.config)
    return _HANDLERS[args.subcommand](args, cfg)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        return run(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ValidationError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
