"""Acceptance suite: one test per criterion, each printing a PASS line with
its measured values (run pytest with -s to see them inline).

The end-to-end criteria drive the real CLI (synth -> clean -> features ->
evaluate) on the standard desk-scale fixture and then reuse that run's
artifacts for the chance-floor and ensemble-sanity checks.
"""

import json
import time

import numpy as np
import pytest

from conftest import STANDARD_SEED, STANDARD_SPEC
from oracles import dft_direct, logreg_loss_oracle, mrmr_fcq_oracle, a4_fixture

from innerspeech.cli import main
from innerspeech.evaluation import PipelineSpec, SelectorSpec, cross_validate, metrics_from_confusion
from innerspeech.features import FeatureMatrix, load_feature_matrix
from innerspeech.models import (
    EnsembleTrainer,
    LogRegTrainer,
    _logreg_loss_grad,
    logreg_train,
)
from innerspeech.preprocess import vmd
from innerspeech.selection import mrmr_select
from innerspeech.signal_math import dft, dwt, idft, psd
from innerspeech.trialset import GroundTruth

FS = 256.0

# The stacked-ensemble regularizer grid used by the acceptance pipeline.
# The penalty is lambda/(2n) per the training objective, so this grid keeps
# all five bases in the active-regularization regime at n ~= 150 while
# spanning the same two-decade diversity as the library default.
ACCEPTANCE_LAMBDAS = (1000.0, 300.0, 100.0, 30.0, 10.0)


def report(criterion: str, detail: str) -> None:
    print(f"{criterion} PASS  {detail}")


@pytest.fixture(scope="session")
def a5_run(tmp_path_factory):
    """The A5 chain via the CLI; several criteria reuse its artifacts."""
    root = tmp_path_factory.mktemp("a5")
    spec = STANDARD_SPEC
    cfg = root / "run.cfg"
    cfg.write_text(
        "\n".join(
            [
                f"seed = {STANDARD_SEED}",
                f"synth.n_trials = {spec.n_trials}",
                f"synth.n_channels = {spec.n_channels}",
                f"synth.n_samples = {spec.n_samples}",
                f"synth.sample_rate = {spec.sample_rate:g}",
                "synth.class_freqs = " + ",".join(f"{v:g}" for v in spec.class_freqs),
                f"synth.channels_per_class = {spec.channels_per_class}",
                f"synth.amplitude = {spec.amplitude:g}",
                f"synth.noise_level = {spec.noise_level:g}",
                f"synth.artifact_prob = {spec.artifact_prob:g}",
                f"synth.drift_amplitude = {spec.drift_amplitude:g}",
                f"synth.drift_freq = {spec.drift_freq:g}",
                "select.method = mrmr_fcq",
                "select.k = 12",
                "model.type = ensemble",
                "model.lambdas = " + ",".join(f"{v:g}" for v in ACCEPTANCE_LAMBDAS),
                "cv.folds = 10",
                "cv.protocol = leakage_safe",
                "threads = 2",
            ]
        )
        + "\n"
    )
    dirs = {name: root / name for name in ("synth", "clean", "features", "evaluate")}
    start = time.perf_counter()
    assert main(["synth", "--out", str(dirs["synth"]), "--config", str(cfg)]) == 0
    assert main(["clean", str(dirs["synth"] / "synthetic.eit1"), "--out", str(dirs["clean"]), "--config", str(cfg)]) == 0
    assert main(["features", str(dirs["clean"] / "cleaned.eit1"), "--out", str(dirs["features"]), "--config", str(cfg)]) == 0
    assert main(["evaluate", str(dirs["features"] / "features.eitf"), "--out", str(dirs["evaluate"]), "--config", str(cfg)]) == 0
    elapsed = time.perf_counter() - start
    return {"dirs": dirs, "elapsed": elapsed}


def test_a1_vmd_two_tone_recovery():
    t = np.arange(512) / FS
    x = np.sin(2 * np.pi * 10 * t) + np.sin(2 * np.pi * 40 * t)
    start = time.perf_counter()
    # dual ascent on (tau=1): the criterion bounds full-sum reconstruction,
    # which needs the exact-reconstruction mode of the decomposition
    res = vmd(x, K=2, tau=1.0, tol=1e-10, sample_rate=FS)
    elapsed = time.perf_counter() - start
    err = np.abs(np.asarray(res.center_freqs_hz) - np.array([10.0, 40.0]))
    rel = float(np.linalg.norm(res.reconstruction() - x) / np.linalg.norm(x))
    assert np.all(err < 1.0), f"center frequencies off by {err}"
    assert rel < 1e-2, f"reconstruction rel L2 {rel}"
    assert elapsed < 1.0, f"runtime {elapsed:.3f}s"
    report("A1", f"centers {np.round(res.center_freqs_hz, 3)} Hz, rel L2 {rel:.2e}, {elapsed * 1e3:.0f} ms")


def test_a2_drift_removal_band_energies():
    t = np.arange(640) / FS
    tone = np.sin(2 * np.pi * 10 * t)
    drift = np.sin(2 * np.pi * 0.2 * t + 0.7)
    contaminated = tone + drift
    res = vmd(contaminated, K=6)  # module defaults: alpha=2000, tau=0
    cleaned = res.modes[1:].sum(axis=0)

    def band(x, lo, hi):
        return psd(np.asarray(x), FS).band_power(lo, hi)

    low_reduction = 1.0 - band(cleaned, 0.0, 0.5) / band(contaminated, 0.0, 0.5)
    alpha_ratio = band(cleaned, 8.0, 13.0) / band(contaminated, 8.0, 13.0)
    assert low_reduction >= 0.90, f"sub-0.5 Hz reduction only {low_reduction:.3f}"
    assert abs(alpha_ratio - 1.0) <= 0.10, f"8-13 Hz ratio {alpha_ratio:.3f}"
    report("A2", f"sub-0.5 Hz reduced {100 * low_reduction:.2f}%, 8-13 Hz ratio {alpha_ratio:.4f}")


def test_a3_dwt_energy_and_dft_round_trip():
    gen = np.random.default_rng(1234)
    wavelets = ("haar", "db2", "db4")
    levels = (1, 2, 3, 4, 5)
    worst_energy = 0.0
    worst_round_trip = 0.0
    for i in range(1000):
        x = gen.standard_normal(640)
        dec = dwt(x, wavelet=wavelets[i % 3], levels=levels[i % 5])
        energy = np.sum(x * x)
        worst_energy = max(worst_energy, abs(dec.energy - energy) / energy)
        worst_round_trip = max(worst_round_trip, float(np.max(np.abs(idft(dft(x)) - x))))
    assert worst_energy < 1e-9, f"worst relative energy error {worst_energy:.2e}"
    assert worst_round_trip < 1e-10, f"worst DFT round-trip error {worst_round_trip:.2e}"
    report("A3", f"1000 signals, worst energy err {worst_energy:.2e}, worst round-trip {worst_round_trip:.2e}")


def test_a4_mrmr_oracle_and_prefix_property():
    X, y = a4_fixture()
    picked = mrmr_select(X, y, K=3, variant="FCQ")
    assert set(picked.ordered_indices.tolist()) == {0, 1, 2}
    chain = mrmr_select(X, y, K=10, variant="FCQ").ordered_indices.tolist()
    for K in range(1, 11):
        ours = mrmr_select(X, y, K=K, variant="FCQ").ordered_indices.tolist()
        assert ours == chain[:K], "greedy prefix property violated"
        assert ours == mrmr_fcq_oracle(X, y, K), f"disagrees with independent greedy at K={K}"
    report("A4", f"K=3 picks {sorted(picked.ordered_indices.tolist())}; prefix + oracle agreement for K=1..10")


def test_a5_end_to_end_synthetic(a5_run):
    dirs = a5_run["dirs"]
    metrics = json.loads((dirs["evaluate"] / "metrics.json").read_text())
    accuracy = metrics["accuracy_pct"]

    gt = GroundTruth.from_json((dirs["synth"] / "groundtruth.json").read_text())
    injected = {tuple(p) for p in zip(*np.nonzero(gt.artifact_flags))}
    rows = (dirs["clean"] / "mask_report.csv").read_text().strip().splitlines()[1:]
    flagged = {(int(r.split(",")[0]), int(r.split(",")[1])) for r in rows}
    missed = injected - flagged
    recall = 1.0 - len(missed) / len(injected)

    assert accuracy >= 90.0, f"pooled accuracy {accuracy:.2f}%"
    assert recall == 1.0, f"artifact recall {recall:.4f} ({len(missed)} missed)"
    assert a5_run["elapsed"] < 300.0, f"chain took {a5_run['elapsed']:.0f}s"
    report(
        "A5",
        f"pooled accuracy {accuracy:.2f}%, macro F1 {metrics['macro_f1_pct']:.2f}%, "
        f"artifact recall {recall:.2f}, chain {a5_run['elapsed']:.0f}s",
    )


def test_a6_gradient_check_and_monotone_loss():
    gen = np.random.default_rng(99)
    worst = 0.0
    for _ in range(5):
        X = gen.standard_normal((20, 6))
        y = gen.integers(0, 3, 20)
        if np.unique(y).size < 2:
            continue
        onehot = np.zeros((20, 3))
        onehot[np.arange(20), y] = 1.0
        Xb = np.hstack([X, np.ones((20, 1))])
        lam = float(gen.uniform(0.0, 2.0))
        W = gen.standard_normal((3, 7)) * 0.5
        _, grad = _logreg_loss_grad(W, Xb, onehot, lam)
        h = 1e-5
        fd = np.zeros_like(W)
        for i in range(W.shape[0]):
            for j in range(W.shape[1]):
                up, down = W.copy(), W.copy()
                up[i, j] += h
                down[i, j] -= h
                fd[i, j] = (logreg_loss_oracle(up, X, y, lam) - logreg_loss_oracle(down, X, y, lam)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(grad - fd))))
    assert worst < 1e-5, f"worst gradient deviation {worst:.2e}"

    Xt = gen.standard_normal((60, 4))
    yt = np.arange(60) % 3
    Xt[:, 0] += yt
    model = logreg_train(Xt, yt, 0.5)
    trace = np.array(model.loss_trace)
    assert np.all(np.diff(trace) <= 1e-12), "loss trace not monotone"
    report("A6", f"worst grad vs FD {worst:.2e}; loss monotone over {trace.size} steps")


def test_a7_metrics_exactness():
    m = metrics_from_confusion(np.array([[5, 5], [5, 5]]))
    assert m.accuracy_pct == 50.0
    assert m.macro_f1_pct == 50.0
    assert m.per_class[0].f1_pct == 50.0

    # balanced pooled predictions: micro-F1 must equal accuracy exactly
    gen = np.random.default_rng(7)
    labels = np.arange(120) % 4
    preds = labels.copy()
    flip = gen.choice(120, size=30, replace=False)
    preds[flip] = (labels[flip] + gen.integers(1, 4, size=30)) % 4
    conf = np.zeros((4, 4), dtype=int)
    np.add.at(conf, (labels, preds), 1)
    mm = metrics_from_confusion(conf)
    assert mm.micro_f1_pct == mm.accuracy_pct
    report("A7", f"[[5,5],[5,5]] -> acc {m.accuracy_pct}%, F1 {m.per_class[0].f1_pct}%; micro-F1 == accuracy")


def test_a8_chance_floor_on_permuted_labels(a5_run):
    fm = load_feature_matrix(a5_run["dirs"]["features"] / "features.eitf")
    gen = np.random.default_rng(1)
    permuted = FeatureMatrix(
        values=fm.values,
        descriptors=fm.descriptors,
        labels=gen.permutation(fm.labels),
        provenance=fm.provenance + "|label-permuted",
    )
    pipe = PipelineSpec(
        model_factory=lambda: EnsembleTrainer(lambdas=ACCEPTANCE_LAMBDAS, seed=STANDARD_SEED),
        selector=SelectorSpec(method="mrmr_fcq", k=12),
    )
    rep = cross_validate(permuted, pipe, k=10, seed=STANDARD_SEED)
    assert 19.0 <= rep.accuracy_pct <= 31.0, f"permuted accuracy {rep.accuracy_pct:.2f}%"
    report("A8", f"label-permuted pooled accuracy {rep.accuracy_pct:.2f}% (chance band [19, 31])")


def test_a9_ensemble_vs_best_single_base(a5_run):
    fm = load_feature_matrix(a5_run["dirs"]["features"] / "features.eitf")
    metrics = json.loads((a5_run["dirs"]["evaluate"] / "metrics.json").read_text())
    ensemble_acc = metrics["accuracy_pct"]
    base_accs = {}
    for lam in ACCEPTANCE_LAMBDAS:
        pipe = PipelineSpec(
            model_factory=lambda lam=lam: LogRegTrainer(l2_lambda=lam),
            selector=SelectorSpec(method="mrmr_fcq", k=12),
        )
        base_accs[lam] = cross_validate(fm, pipe, k=10, seed=STANDARD_SEED).accuracy_pct
    best = max(base_accs.values())
    assert ensemble_acc >= best - 2.0, f"ensemble {ensemble_acc:.2f}% vs best base {best:.2f}%"
    report(
        "A9",
        f"ensemble {ensemble_acc:.2f}% vs best single base {best:.2f}% "
        f"(bases: {', '.join(f'{k:g}:{v:.1f}' for k, v in base_accs.items())})",
    )
