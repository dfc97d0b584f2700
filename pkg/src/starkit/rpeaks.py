"""R-peak detection and the induced R-R segmentation.

Detection follows the classic derivative/energy recipe: 5-25 Hz band-pass,
squared derivative, 150 ms moving-window integration, adaptive threshold at
half the running median of integrated peak heights, 200 ms refractory, with a
final refinement to the local absolute maximum of the raw reference lead.
Detection is fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .records import EcgRecord

BAND_HZ = (5.0, 25.0)
INTEGRATION_MS = 150.0
REFRACTORY_MS = 200.0
REFINE_MS = 50.0
THRESHOLD_FRACTION = 0.5
HEIGHT_FLOOR_FRACTION = 0.05
RUNNING_MEDIAN_SPAN = 8
MIN_GAP_SAMPLES = 2


@dataclass(frozen=True)
class RPeakSet:
    """Strictly increasing peak indices on one reference lead."""

    indices: tuple[int, ...]
    ref_lead: int = 0

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.size and np.any(np.diff(idx) < MIN_GAP_SAMPLES):
            raise ValueError("peak indices must increase by at least 2 samples")
        object.__setattr__(self, "indices", tuple(int(i) for i in idx))

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class SegmentMap:
    """Head / R-R segments / tail partition of a length-T trace."""

    head_len: int
    segment_lens: tuple[int, ...]
    tail_len: int

    @property
    def total(self) -> int:
        return self.head_len + sum(self.segment_lens) + self.tail_len


def _bandpass(x: np.ndarray, fs: float) -> np.ndarray:
    nyq = fs / 2.0
    hi = min(BAND_HZ[1], 0.9 * nyq)
    lo = min(BAND_HZ[0], 0.5 * hi)
    sos = sps.butter(2, [lo / nyq, hi / nyq], btype="band", output="sos")
    return sps.sosfiltfilt(sos, x)


def detect_rpeaks(record: EcgRecord, ref_lead: int = 0) -> RPeakSet:
    """Detect R-peaks on ``ref_lead``; zero or one peak is a legal result."""
    if not (0 <= ref_lead < record.leads):
        raise ValueError(f"ref_lead {ref_lead} out of range for {record.leads} leads")
    x = record.data[ref_lead]
    fs = record.fs_hz
    t = x.size
    if t < 8:
        return RPeakSet(indices=(), ref_lead=ref_lead)

    filtered = _bandpass(x, fs)
    energy = np.square(np.gradient(filtered))
    win = max(1, int(round(INTEGRATION_MS * 1e-3 * fs)))
    mwi = np.convolve(energy, np.ones(win) / win, mode="same")

    refractory = max(1, int(round(REFRACTORY_MS * 1e-3 * fs)))
    # Absolute floor: P/T bumps integrate to ~1% of QRS energy, genuine QRS
    # candidates stay above a few percent of the strongest even after
    # amplitude scaling by warping transforms.
    floor = HEIGHT_FLOOR_FRACTION * max(float(np.max(mwi)), 1e-300)
    candidates, props = sps.find_peaks(mwi, distance=refractory, height=floor)
    if candidates.size == 0:
        return RPeakSet(indices=(), ref_lead=ref_lead)
    heights = props["peak_heights"]

    # Running median over recently accepted peak heights, seeded globally.
    accepted: list[int] = []
    recent: list[float] = [float(np.median(heights))]
    for pos, h in zip(candidates, heights):
        threshold = THRESHOLD_FRACTION * float(np.median(recent))
        if h >= threshold:
            accepted.append(int(pos))
            recent.append(float(h))
            if len(recent) > RUNNING_MEDIAN_SPAN:
                recent.pop(0)

    # Refine to the local absolute maximum of the raw lead.
    refine = max(1, int(round(REFINE_MS * 1e-3 * fs)))
    refined = []
    for pos in accepted:
        lo = max(0, pos - refine)
        hi = min(t, pos + refine + 1)
        refined.append(lo + int(np.argmax(np.abs(x[lo:hi]))))

    # Deduplicate and enforce the minimum inter-peak gap.
    final: list[int] = []
    for idx in sorted(set(refined)):
        if final and idx - final[-1] < max(MIN_GAP_SAMPLES, refractory // 2):
            # Keep whichever candidate sits on the larger raw deflection.
            if abs(x[idx]) > abs(x[final[-1]]):
                final[-1] = idx
            continue
        final.append(idx)
    return RPeakSet(indices=tuple(final), ref_lead=ref_lead)


def rr_segments(rpeaks: RPeakSet, total_len: int) -> SegmentMap:
    """Partition [0, T) into head, R-R segments and tail.

    Fewer than two peaks yields the degenerate map (head covers everything).
    """
    idx = np.asarray(rpeaks.indices, dtype=np.int64)
    if idx.size and (idx[0] < 0 or idx[-1] >= total_len):
        raise ValueError("rpeaks out of bounds for trace length")
    if idx.size < 2:
        return SegmentMap(head_len=total_len, segment_lens=(), tail_len=0)
    lens = tuple(int(n) for n in np.diff(idx))
    return SegmentMap(
        head_len=int(idx[0]),
        segment_lens=lens,
        tail_len=int(total_len - idx[-1]),
    )


def load_peak_list(path: str) -> tuple[int, ...]:
    """One integer index per line."""
    with open(path, "r", encoding="utf-8") as fh:
        return tuple(int(ln) for ln in fh.read().split())


def save_peak_list(indices, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(str(int(i)) for i in indices) + "\n")
