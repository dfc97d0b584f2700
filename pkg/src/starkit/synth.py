"""Deterministic synthetic 12-lead ECG generator with analytic ground truth.

Beats are sums of Gaussian bumps (P, Q, R, S, T) placed at jittered R-R
intervals; leads are fixed scalar mixtures of one base waveform.  Widths are
floored so the clean signal is bandlimited well below fs/8, which makes the
generator a valid oracle for interpolation-error claims.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .records import EcgRecord
from .rpeaks import RPeakSet

# sigma >= 7/fs keeps Gaussian spectral energy above fs/8 below 1e-6.
WIDTH_FLOOR_SAMPLES = 7.0

DEFAULT_WAVES = {
    # name: (amplitude, center offset as fraction of R-R, width seconds)
    "P": (0.12, -0.18, 0.025),
    "Q": (-0.10, -0.040, 0.016),
    "R": (1.00, 0.0, 0.018),
    "S": (-0.12, 0.040, 0.016),
    "T": (0.22, 0.24, 0.050),
}

# Distinct per-lead gains; lead 0 carries the base waveform unscaled.
LEAD_GAINS = (1.0, 0.9, 0.8, 1.1, 0.7, 0.95, 1.05, 0.85, 0.75, 1.15, 0.65, 1.2)


@dataclass(frozen=True)
class WaveSpec:
    amplitude: float
    center_fraction: float
    width_s: float

    def __post_init__(self):
        if self.width_s <= 0:
            raise ValueError("wave width must be positive")


@dataclass(frozen=True)
class SynthSpec:
    fs_hz: float = 500.0
    duration_s: float = 10.0
    heart_rate_bpm: float = 60.0
    hr_jitter_fraction: float = 0.0
    waves: dict = field(default_factory=lambda: {
        k: WaveSpec(*v) for k, v in DEFAULT_WAVES.items()
    })
    noise_sigma: float = 0.0
    n_leads: int = 12
    seed: int = 0

    def __post_init__(self):
        if self.fs_hz <= 0:
            raise ValueError("fs_hz must be positive")
        if self.heart_rate_bpm <= 0:
            raise ValueError("heart_rate_bpm must be positive")
        if not (0.0 <= self.hr_jitter_fraction < 1.0):
            raise ValueError("hr_jitter_fraction must be in [0,1)")
        if not (1 <= self.n_leads <= len(LEAD_GAINS)):
            raise ValueError(f"n_leads must be in [1, {len(LEAD_GAINS)}]")


def _effective_width(width_s: float, fs: float) -> float:
    return max(width_s, WIDTH_FLOOR_SAMPLES / fs)


def synth_ecg(spec: SynthSpec) -> tuple[EcgRecord, RPeakSet, np.ndarray]:
    """Generate (record, ground-truth peaks on lead 0, per-beat R amplitudes)."""
    fs = spec.fs_hz
    total = int(round(spec.duration_s * fs))
    rr = 60.0 / spec.heart_rate_bpm
    if spec.duration_s < 1.5 * rr:
        raise ValueError("duration too short for one full beat")
    rng = np.random.default_rng(spec.seed)

    # Jittered beat schedule: first R at half an interval, centers kept at
    # least half an interval from the trace end so beats are complete.
    centers = []
    t_center = 0.5 * rr
    while t_center < spec.duration_s - 0.45 * rr:
        centers.append(t_center)
        jitter = rng.uniform(-spec.hr_jitter_fraction, spec.hr_jitter_fraction) \
            if spec.hr_jitter_fraction > 0 else 0.0
        t_center += rr * (1.0 + jitter)
    centers = np.asarray(centers)

    t = np.arange(total) / fs
    base = np.zeros(total)
    for center in centers:
        for wave in spec.waves.values():
            width = _effective_width(wave.width_s, fs)
            mu = center + wave.center_fraction * rr
            base += wave.amplitude * np.exp(-0.5 * ((t - mu) / width) ** 2)

    gains = np.asarray(LEAD_GAINS[: spec.n_leads])
    data = gains[:, None] * base[None, :]
    if spec.noise_sigma > 0:
        data = data + rng.normal(0.0, spec.noise_sigma, size=data.shape)

    peak_indices = np.round(centers * fs).astype(np.int64)
    peak_indices = peak_indices[(peak_indices >= 0) & (peak_indices < total)]
    amplitudes = base[peak_indices].copy()
    record = EcgRecord(
        data=data,
        fs_hz=fs,
        lead_names=tuple(f"lead{i}" for i in range(spec.n_leads)),
        record_id=f"synth-{spec.seed}",
        source="synth",
    )
    return record, RPeakSet(indices=tuple(int(i) for i in peak_indices),
                            ref_lead=0), np.asarray(amplitudes)
