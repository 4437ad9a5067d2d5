"""Optional real-data reproduction harness (not a gating test).

Runs only when INNERSPEECH_DATASET_DIR points to a directory of converted
per-subject EIT1 files (action interval), e.g. produced by the companion
converter package:

    INNERSPEECH_DATASET_DIR=/data/converted pytest tests/test_reproduction.py -s

Per subject: 191-per-channel catalog, MRMR K=590 under paper_protocol,
10-fold CV with the stacked five-LR ensemble. The resulting table is printed
alongside the published benchmark rows for this dataset; the overall
accuracy is compared informationally (no hard assert) against the published
81.13% figure, with a +-5 point target.
"""

import os
from pathlib import Path

import pytest

from innerspeech.evaluation import PipelineSpec, SelectorSpec, cross_validate, subject_table
from innerspeech.features import PAPER_SCALE_CATALOG, build_feature_matrix
from innerspeech.models import EnsembleTrainer
from innerspeech.trialset import load_trialset

DATASET_ENV = "INNERSPEECH_DATASET_DIR"

# Published benchmark (stacked five-LR pipeline on this dataset): overall
# accuracy / F1 and the best single-subject accuracy.
PUBLISHED_OVERALL_ACCURACY = 81.13
PUBLISHED_OVERALL_F1 = 81.12
PUBLISHED_BEST_SUBJECT_ACCURACY = 93.00

REPRO_K = 590
REPRO_FOLDS = 10
REPRO_SEED = 0


@pytest.mark.skipif(DATASET_ENV not in os.environ, reason=f"{DATASET_ENV} not set")
def test_a10_reproduction_harness():
    root = Path(os.environ[DATASET_ENV])
    files = sorted(root.glob("*.eit1"))
    assert files, f"no .eit1 files under {root}"

    entries = []
    for path in files:
        ts = load_trialset(path)
        fm = build_feature_matrix(ts, PAPER_SCALE_CATALOG)
        pipeline = PipelineSpec(
            model_factory=lambda: EnsembleTrainer(seed=REPRO_SEED),
            selector=SelectorSpec(method="mrmr_fcq", k=min(REPRO_K, fm.n_features)),
        )
        report = cross_validate(fm, pipeline, k=REPRO_FOLDS, seed=REPRO_SEED, protocol="paper_protocol")
        entries.append((ts.subject_id, report.accuracy_pct, report.macro_f1_pct))
        print(f"{ts.subject_id}: accuracy {report.accuracy_pct:.2f}%  macro F1 {report.macro_f1_pct:.2f}%")

    csv_text, plain = subject_table(entries)
    print(plain)
    overall = float(csv_text.strip().splitlines()[-1].split(",")[1])
    delta = overall - PUBLISHED_OVERALL_ACCURACY
    within = abs(delta) <= 5.0
    print(
        f"A10 {'PASS' if within else 'INFO'}  overall {overall:.2f}% vs published "
        f"{PUBLISHED_OVERALL_ACCURACY:.2f}% (delta {delta:+.2f} points; informational target +-5)"
    )
