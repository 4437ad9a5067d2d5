import json

import numpy as np
import pytest

from innerspeech.cli import main
from innerspeech.features import load_feature_matrix
from innerspeech.topomap import write_positions_csv
from innerspeech.trialset import load_trialset

# a small, fast synthetic set reused across CLI tests
SMALL_SYNTH = """
synth.n_trials = 40
synth.n_channels = 6
synth.n_samples = 256
synth.class_freqs = 8,12,20,30
synth.channels_per_class = 1
synth.amplitude = 1.0
synth.noise_level = 0.5
synth.artifact_prob = 0.0
seed = 11
"""


def write_cfg(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


@pytest.fixture()
def small_set(tmp_path):
    cfg = write_cfg(tmp_path, "synth.cfg", SMALL_SYNTH)
    out = tmp_path / "synth"
    assert main(["synth", "--out", str(out), "--config", cfg]) == 0
    return out / "synthetic.eit1", cfg


class TestConfig:
    def test_unknown_key_is_usage_error(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "bad.cfg", "synth.n_trails = 7\n")
        code = main(["synth", "--out", str(tmp_path / "o"), "--config", cfg])
        assert code == 1
        assert "unknown config key" in capsys.readouterr().err

    def test_comments_and_blanks_ok(self, tmp_path):
        cfg = write_cfg(tmp_path, "c.cfg", "# comment\n\nseed = 3  # inline\n")
        out = tmp_path / "o"
        assert main(["synth", "--out", str(out), "--config", cfg]) == 0
        assert "seed = 3" in (out / "config.echo.txt").read_text()

    def test_malformed_line_is_usage_error(self, tmp_path):
        cfg = write_cfg(tmp_path, "m.cfg", "just some words\n")
        assert main(["synth", "--out", str(tmp_path / "o"), "--config", cfg]) == 1

    def test_missing_subcommand_is_usage_error(self):
        assert main([]) == 1

    def test_missing_input_file_is_data_error(self, tmp_path):
        assert main(["inspect", str(tmp_path / "nope.eit1")]) == 2


class TestSynth:
    def test_deterministic_bytes(self, tmp_path):
        cfg = write_cfg(tmp_path, "s.cfg", SMALL_SYNTH)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["synth", "--out", str(out1), "--config", cfg]) == 0
        assert main(["synth", "--out", str(out2), "--config", cfg]) == 0
        assert (out1 / "synthetic.eit1").read_bytes() == (out2 / "synthetic.eit1").read_bytes()
        assert (out1 / "groundtruth.json").read_text() == (out2 / "groundtruth.json").read_text()

    def test_manifest_written(self, small_set):
        path, _ = small_set
        manifest = json.loads((path.parent / "manifest.json").read_text())
        assert manifest["subcommand"] == "synth"
        assert str(path) in manifest["outputs"]

    def test_inspect_prints_summary(self, small_set, capsys):
        path, _ = small_set
        assert main(["inspect", str(path)]) == 0
        out = capsys.readouterr().out
        assert "trials         : 40" in out
        assert "256" in out


class TestClean:
    def test_zero_artifacts_identity(self, tmp_path, small_set):
        path, _ = small_set
        # thresholds relaxed so ordinary statistical tails are not flagged;
        # with nothing flagged the cleaned file must be byte-identical
        cfg = write_cfg(tmp_path, "clean.cfg", "clean.z_thresh = 25\nclean.drift_factor = 50\n")
        out = tmp_path / "clean"
        assert main(["clean", str(path), "--out", str(out), "--config", cfg]) == 0
        assert (out / "cleaned.eit1").read_bytes() == path.read_bytes()
        assert (out / "mask_report.csv").read_text().strip() == "trial,channel,reason,z_mean,z_std,drift_ptp"

    def test_flagged_artifacts_cleaned(self, tmp_path):
        synth_cfg = write_cfg(
            tmp_path,
            "s.cfg",
            SMALL_SYNTH.replace("synth.artifact_prob = 0.0", "synth.artifact_prob = 0.15"),
        )
        out_s = tmp_path / "s"
        assert main(["synth", "--out", str(out_s), "--config", synth_cfg]) == 0
        out_c = tmp_path / "c"
        assert main(["clean", str(out_s / "synthetic.eit1"), "--out", str(out_c)]) == 0
        report = (out_c / "mask_report.csv").read_text().strip().splitlines()
        gt = json.loads((out_s / "groundtruth.json").read_text())
        flagged = {(int(r.split(",")[0]), int(r.split(",")[1])) for r in report[1:]}
        injected = {tuple(p) for p in gt["artifact_pairs"]}
        assert injected <= flagged  # full recall
        assert (out_c / "cleaned.eit1").read_bytes() != (out_s / "synthetic.eit1").read_bytes()


class TestFeaturePipeline:
    def test_features_select_evaluate_chain(self, tmp_path, small_set):
        path, _ = small_set
        out_f = tmp_path / "feat"
        assert main(["features", str(path), "--out", str(out_f)]) == 0
        fm = load_feature_matrix(out_f / "features.eitf")
        assert fm.n_trials == 40 and fm.n_features == 6 * 78
        assert (out_f / "catalog.csv").read_text().startswith("column,")

        sel_cfg = write_cfg(tmp_path, "sel.cfg", "select.method = mrmr_fcq\nselect.k = 8\n")
        out_sel = tmp_path / "sel"
        assert main(["select", str(out_f / "features.eitf"), "--out", str(out_sel), "--config", sel_cfg]) == 0
        ranked = (out_sel / "ranked.csv").read_text().strip().splitlines()
        assert ranked[0] == "rank,column,descriptor,score"
        assert len(ranked) == 9

        ev_cfg = write_cfg(
            tmp_path,
            "ev.cfg",
            "select.method = mrmr_fcq\nselect.k = 8\nmodel.type = logreg\ncv.folds = 5\nseed = 1\n",
        )
        out_ev = tmp_path / "ev"
        assert main(["evaluate", str(out_f / "features.eitf"), "--out", str(out_ev), "--config", ev_cfg]) == 0
        metrics = json.loads((out_ev / "metrics.json").read_text())
        assert metrics["accuracy_pct"] > 80.0  # strong tones, easy set
        assert (out_ev / "confusion.csv").read_text().count("\n") >= 4

    def test_train_and_predict_round_trip(self, tmp_path, small_set):
        path, _ = small_set
        out_f = tmp_path / "feat"
        assert main(["features", str(path), "--out", str(out_f)]) == 0
        tr_cfg = write_cfg(
            tmp_path, "tr.cfg", "select.method = anova_f\nselect.k = 8\nmodel.type = lda\n"
        )
        out_tr = tmp_path / "train"
        assert main(["train", str(out_f / "features.eitf"), "--out", str(out_tr), "--config", tr_cfg]) == 0
        out_p = tmp_path / "pred"
        assert (
            main(
                [
                    "predict",
                    str(out_f / "features.eitf"),
                    "--model",
                    str(out_tr / "model.eim1"),
                    "--out",
                    str(out_p),
                ]
            )
            == 0
        )
        rows = (out_p / "predictions.csv").read_text().strip().splitlines()
        assert rows[0] == "trial,predicted,truth"
        assert len(rows) == 41
        manifest = json.loads((out_p / "manifest.json").read_text())
        assert manifest["accuracy_pct"] > 80.0

    def test_sweep_writes_table(self, tmp_path, small_set):
        path, _ = small_set
        out_f = tmp_path / "feat"
        assert main(["features", str(path), "--out", str(out_f)]) == 0
        cfg = write_cfg(
            tmp_path,
            "sw.cfg",
            "sweep.k_values = 2,8\nselect.method = anova_f\nmodel.type = logreg\ncv.folds = 4\n",
        )
        out_sw = tmp_path / "sweep"
        assert main(["sweep", str(out_f / "features.eitf"), "--out", str(out_sw), "--config", cfg]) == 0
        lines = (out_sw / "sweep.csv").read_text().strip().splitlines()
        assert lines[0] == "K,accuracy_pct,macro_f1_pct"
        assert len(lines) == 3
        manifest = json.loads((out_sw / "manifest.json").read_text())
        assert manifest["best_k"] in (2, 8)


class TestTopomapAndReport:
    def test_topomap_outputs(self, tmp_path, small_set):
        path, _ = small_set
        ts = load_trialset(path)
        pos_path = tmp_path / "pos.csv"
        angles = 2 * np.pi * np.arange(ts.n_channels) / ts.n_channels
        write_positions_csv(pos_path, ts.channel_names, np.stack([0.8 * np.cos(angles), 0.8 * np.sin(angles)], axis=1))
        out = tmp_path / "topo"
        assert main(["topomap", str(path), "--positions", str(pos_path), "--out", str(out)]) == 0
        pgm = (out / "map.pgm").read_bytes()
        assert pgm.startswith(b"P5\n64 64\n255\n")
        assert (out / "map.csv").exists()

    def test_topomap_requires_positions(self, tmp_path, small_set):
        path, _ = small_set
        assert main(["topomap", str(path), "--out", str(tmp_path / "t")]) == 2

    def test_report_combines_metrics(self, tmp_path):
        m1 = tmp_path / "sub01.json"
        m2 = tmp_path / "sub02.json"
        m1.write_text(json.dumps({"accuracy_pct": 60.0, "macro_f1_pct": 61.0, "pipeline": "p"}))
        m2.write_text(json.dumps({"accuracy_pct": 80.0, "macro_f1_pct": 79.0, "pipeline": "p"}))
        out = tmp_path / "rep"
        assert main(["report", str(m1), str(m2), "--out", str(out), "--subject-table"]) == 0
        csv_text = (out / "comparison.csv").read_text()
        assert "Overall,70.00,70.00" in csv_text

    def test_report_extra_rows(self, tmp_path):
        m1 = tmp_path / "ours.json"
        m1.write_text(json.dumps({"accuracy_pct": 81.0, "macro_f1_pct": 81.0, "pipeline": "stack"}))
        extra = tmp_path / "baselines.csv"
        extra.write_text("name,accuracy,f1\npublished-baseline,66.53,67.09\n")
        out = tmp_path / "rep2"
        assert main(["report", str(m1), "--out", str(out), "--extra-rows", str(extra)]) == 0
        text = (out / "comparison.csv").read_text()
        assert "published-baseline,66.53,67.09" in text


class TestRerunDeterminism:
    def test_outputs_reproducible_excluding_manifest(self, tmp_path, small_set):
        path, _ = small_set
        out1, out2 = tmp_path / "f1", tmp_path / "f2"
        for out in (out1, out2):
            assert main(["features", str(path), "--out", str(out)]) == 0
        assert (out1 / "features.eitf").read_bytes() == (out2 / "features.eitf").read_bytes()
        assert (out1 / "catalog.csv").read_text() == (out2 / "catalog.csv").read_text()
        assert (out1 / "config.echo.txt").read_text() == (out2 / "config.echo.txt").read_text()
