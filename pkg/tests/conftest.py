import numpy as np
import pytest

from starkit import SynthSpec, synth_ecg


@pytest.fixture
def clean_synth():
    """Default noise-free 12-lead fixture with ground-truth peaks."""
    return synth_ecg(SynthSpec(seed=0))


@pytest.fixture
def small_record():
    record, peaks, _ = synth_ecg(
        SynthSpec(fs_hz=250.0, duration_s=5.0, n_leads=2, seed=3)
    )
    return record, peaks


def rel_l2(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))
