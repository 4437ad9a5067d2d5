import numpy as np
import pytest

from conftest import CHANNEL_NAMES, N_CHANNELS, N_SAMPLES, RATE, make_subject, synth_epochs, write_events, write_session

from eitconvert.cli import main
from eitconvert.convert import convert_subject
from eitconvert.dataset import CLASS_NAMES, LABEL_MAP, DatasetError, discover_sessions, load_events
from eitconvert.fifmin import FifError, read_epochs_file, write_epochs_file
from eitconvert.positions import project_to_disc, schematic_positions

from innerspeech.trialset import load_trialset


class TestFifSubset:
    def test_round_trip(self, tmp_path):
        data = synth_epochs(3, seed=5)
        path = tmp_path / "x-epo.fif"
        write_epochs_file(path, data, RATE, CHANNEL_NAMES, cal=1.0)
        back = read_epochs_file(path)
        assert back.sfreq == pytest.approx(RATE)
        assert back.channel_names == CHANNEL_NAMES
        assert back.data.shape == data.shape
        # f4 storage quantizes; tolerance reflects that
        assert np.max(np.abs(back.data - data)) < 1e-10

    def test_calibration_applied_on_read(self, tmp_path):
        data = synth_epochs(2, seed=6)
        path = tmp_path / "cal-epo.fif"
        write_epochs_file(path, data, RATE, CHANNEL_NAMES, cal=2.5e-7)
        back = read_epochs_file(path)
        assert np.max(np.abs(back.data - data)) < 1e-12 + 1e-6 * np.abs(data).max()

    def test_not_a_fif_rejected(self, tmp_path):
        path = tmp_path / "bogus.fif"
        path.write_bytes(b"\x00" * 64)
        with pytest.raises(FifError, match="not a FIF"):
            read_epochs_file(path)

    def test_truncated_rejected(self, tmp_path):
        data = synth_epochs(1, seed=7)
        path = tmp_path / "t-epo.fif"
        write_epochs_file(path, data, RATE, CHANNEL_NAMES)
        path.write_bytes(path.read_bytes()[:-100])
        with pytest.raises(FifError):
            read_epochs_file(path)


class TestDatasetLayout:
    def test_discovery(self, subject_dir):
        subject_id, sessions = discover_sessions(subject_dir)
        assert subject_id == "sub-99"
        assert [s.session_id for s in sessions] == ["ses-01", "ses-02"]

    def test_missing_events_rejected(self, subject_dir):
        (subject_dir / "ses-02" / "sub-99_ses-02_events.dat").unlink()
        with pytest.raises(DatasetError, match="missing"):
            discover_sessions(subject_dir)

    def test_unknown_class_code_rejected(self, tmp_path):
        path = tmp_path / "events.dat"
        write_events(path, [[0, 7, 1, 1]])
        with pytest.raises(DatasetError, match="unknown class code"):
            load_events(path)

    def test_unknown_condition_code_rejected(self, tmp_path):
        path = tmp_path / "events.dat"
        write_events(path, [[0, 1, 9, 1]])
        with pytest.raises(DatasetError, match="unknown condition code"):
            load_events(path)

    def test_label_map_fixed(self):
        assert LABEL_MAP == {"Arriba": 0, "Abajo": 1, "Derecha": 2, "Izquierda": 3}
        assert CLASS_NAMES == ("Arriba", "Abajo", "Derecha", "Izquierda")


class TestConvert:
    def test_a11_fixture_round_trip(self, subject_dir, tmp_path):
        out = tmp_path / "sub-99.eit1"
        result = convert_subject(subject_dir, out)
        # loads and validates with the core toolkit (format-level interface)
        ts = load_trialset(out)
        assert ts.n_trials == 8
        assert ts.n_channels == 128
        assert ts.subject_id == "sub-99"
        assert ts.class_names == CLASS_NAMES
        assert ts.sample_rate == 256.0
        counts = np.bincount(ts.labels, minlength=4)
        assert np.all(counts == 2), "balanced-label check"
        assert result.manifest.trial_counts == (4, 4)
        assert not result.warnings

    def test_a11_byte_determinism(self, subject_dir, tmp_path):
        out1, out2 = tmp_path / "a.eit1", tmp_path / "b.eit1"
        convert_subject(subject_dir, out1)
        convert_subject(subject_dir, out2)
        assert out1.read_bytes() == out2.read_bytes()
        assert (
            out1.with_name("a.positions.csv").read_text()
            == out2.with_name("b.positions.csv").read_text()
        )

    def test_action_interval_640_samples(self, subject_dir, tmp_path):
        out = tmp_path / "act.eit1"
        convert_subject(subject_dir, out, interval="action")
        ts = load_trialset(out)
        assert ts.n_samples == 640  # 2.5 s at 256 Hz
        assert ts.intervals == {"action": (0, 640)}

    def test_full_interval_markers(self, subject_dir, tmp_path):
        out = tmp_path / "full.eit1"
        convert_subject(subject_dir, out, interval="full")
        ts = load_trialset(out)
        assert ts.n_samples == N_SAMPLES
        assert ts.intervals == {
            "concentration": (0, 128),
            "cue": (128, 256),
            "action": (256, 896),
            "relax": (896, 1152),
        }

    def test_microvolt_scaling(self, subject_dir, tmp_path):
        out = tmp_path / "uv.eit1"
        convert_subject(subject_dir, out, interval="full")
        ts = load_trialset(out)
        # fixture waves are tens of microvolts peak once scaled from volts
        peak = float(np.abs(ts.data).max())
        assert 10.0 < peak < 200.0

    def test_inner_condition_filter(self, subject_dir, tmp_path):
        out = tmp_path / "f.eit1"
        result = convert_subject(subject_dir, out)
        assert result.n_trials == 8  # 12 fixture trials, 8 inner

    def test_wrong_rate_rejected(self, subject_dir, tmp_path):
        with pytest.raises(DatasetError, match="sampling rate"):
            convert_subject(subject_dir, tmp_path / "x.eit1", expected_rate=512.0)

    def test_wrong_channel_count_rejected(self, subject_dir, tmp_path):
        with pytest.raises(DatasetError, match="channels"):
            convert_subject(subject_dir, tmp_path / "x.eit1", expected_channels=64)

    def test_session_mismatch_rejected(self, subject_dir, tmp_path):
        # session 2 rewritten with one missing event row
        data = synth_epochs(4, seed=2)
        write_session(subject_dir / "ses-02", "sub-99", "ses-02", data, [[0, 0, 1, 2]])
        with pytest.raises(DatasetError, match="event rows"):
            convert_subject(subject_dir, tmp_path / "x.eit1")

    def test_unbalanced_labels_warn_not_fail(self, tmp_path):
        sub = tmp_path / "sub-77"
        data = synth_epochs(4, seed=3)
        write_session(sub / "ses-01", "sub-77", "ses-01", data, [
            [0, 0, 1, 1],
            [1152, 0, 1, 1],
            [2304, 1, 1, 1],
            [3456, 2, 1, 1],
        ])
        result = convert_subject(sub, tmp_path / "u.eit1")
        assert any("unbalanced" in w for w in result.warnings)
        ts = load_trialset(tmp_path / "u.eit1")
        assert ts.n_trials == 4

    def test_report_json_written(self, subject_dir, tmp_path):
        out = tmp_path / "r.eit1"
        convert_subject(subject_dir, out)
        report = (tmp_path / "r.report.json").read_text()
        assert '"positions_source": "schematic"' in report


class TestPositions:
    def test_schematic_layout_valid(self):
        pos = schematic_positions(N_CHANNELS)
        norms = np.hypot(pos[:, 0], pos[:, 1])
        assert norms.max() <= 1.0
        assert np.unique(pos, axis=0).shape[0] == N_CHANNELS

    def test_electrodes_tsv_used_when_present(self, subject_dir_with_electrodes, tmp_path):
        out = tmp_path / "e.eit1"
        result = convert_subject(subject_dir_with_electrodes, out)
        assert result.positions_source == "electrodes.tsv"
        ts = load_trialset(out)
        assert ts.channel_positions is not None
        norms = np.hypot(ts.channel_positions[:, 0], ts.channel_positions[:, 1])
        assert norms.max() <= 1.0

    def test_projection_preserves_azimuth(self):
        xyz = {
            "front": np.array([0.0, 0.09, 0.02]),
            "back": np.array([0.0, -0.09, 0.02]),
            "vertex": np.array([0.0, 0.0, 0.095]),
        }
        pos = project_to_disc(xyz, ("front", "back", "vertex"))
        assert pos[0][1] > 0 and abs(pos[0][0]) < 1e-9  # anterior maps up
        assert pos[1][1] < 0
        assert np.hypot(*pos[2]) < 0.2  # vertex near the center


class TestCli:
    def test_happy_path(self, subject_dir, tmp_path, capsys):
        out = tmp_path / "cli.eit1"
        assert main([str(subject_dir), str(out)]) == 0
        assert "8 inner-speech trials" in capsys.readouterr().out
        assert out.exists()

    def test_usage_error(self, capsys):
        assert main([]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_data_error_exit_code(self, tmp_path, capsys):
        assert main([str(tmp_path / "sub-00"), str(tmp_path / "o.eit1")]) == 2
        assert "data error" in capsys.readouterr().err
