"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from innerspeech.trialset import SynthSpec, generate_synthetic

# The desk-scale end-to-end fixture: 160 trials, 16 channels, 640 samples at
# 256 Hz, four classes with distinct spectral signatures (8/12/20/30 Hz on
# disjoint 3-channel subsets), 20% injected drift artifacts at 10x noise.
STANDARD_SPEC = SynthSpec(
    n_trials=160,
    n_channels=16,
    n_samples=640,
    sample_rate=256.0,
    class_freqs=(8.0, 12.0, 20.0, 30.0),
    channels_per_class=3,
    amplitude=0.5,
    noise_level=1.0,
    artifact_prob=0.2,
    drift_amplitude=10.0,
    drift_freq=0.2,
)
STANDARD_SEED = 7


@pytest.fixture(scope="session")
def standard_synth():
    return generate_synthetic(STANDARD_SPEC, seed=STANDARD_SEED)


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
