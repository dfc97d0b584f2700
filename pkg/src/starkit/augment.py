"""Comparator augmentation catalogue and the probability-gated policy engine.

Every transform maps an (L x T) record to an (L x T) record.  Randomness is
injected only through explicit seeds; the policy engine derives one counter
substream per (master seed, record id, step index), so batches are
record-parallel reproducible.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps
from scipy.interpolate import CubicSpline

from .records import EcgRecord, StarMetadata, StarParams
from .rpeaks import detect_rpeaks
from .star import KERNEL_LINEAR, sinusoidal_schedule, star_forward

POLICY_VERSION = "starpolicy/1"


@dataclass(frozen=True)
class TriangleParams:
    """Triangular gain window: unit height at the edges, peak gain at the apex."""

    alpha: float = 2.0
    apex_fraction: float | str = "random"
    activation_p: float = 0.5

    def __post_init__(self):
        if self.alpha < 1.0:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")
        if not (0.0 <= self.activation_p <= 1.0):
            raise ValueError("activation_p must be in [0,1]")


@dataclass(frozen=True)
class PolicyStep:
    kind: str
    params: dict = field(default_factory=dict)
    probability: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.probability <= 1.0):
            raise ValueError("step probability must be in [0,1]")


@dataclass(frozen=True)
class PolicyConfig:
    steps: tuple[PolicyStep, ...]
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))


def triangle_window(total_len: int, apex_index: float, gain: float) -> np.ndarray:
    """Piecewise-linear profile: 1 at both edges, ``gain`` at the apex."""
    t = np.arange(total_len, dtype=np.float64)
    apex = float(np.clip(apex_index, 0.0, total_len - 1.0))
    w = np.ones(total_len)
    if apex > 0:
        left = t <= apex
        w[left] = 1.0 + (gain - 1.0) * t[left] / apex
    if apex < total_len - 1:
        right = t >= apex
        w[right] = gain + (1.0 - gain) * (t[right] - apex) / (total_len - 1.0 - apex)
    return w


def multiply_triangle(
    record: EcgRecord,
    params: TriangleParams,
    rng_seed: int = 0,
    gain: float | None = None,
) -> EcgRecord:
    """Multiply every lead by one shared triangular gain profile.

    The peak gain is drawn from [1/alpha, alpha] and the apex position
    uniformly over the window unless pinned by ``params.apex_fraction`` /
    ``gain``.
    """
    rng = np.random.default_rng(rng_seed)
    t = record.samples_per_lead
    if gain is None:
        gain = float(rng.uniform(1.0 / params.alpha, params.alpha))
    if params.apex_fraction == "random":
        apex = float(rng.uniform(0.0, t - 1.0))
    else:
        apex = float(params.apex_fraction) * (t - 1.0)
    w = triangle_window(t, apex, gain)
    return record.with_data(record.data * w[None, :])


# ---------------------------------------------------------------------------
# Catalogue helpers


def _fit_length(data: np.ndarray, total_len: int, pad: str = "edge") -> np.ndarray:
    cur = data.shape[1]
    if cur == total_len:
        return data
    if cur > total_len:
        return data[:, :total_len]
    if pad == "zero":
        tail = np.zeros((data.shape[0], total_len - cur))
    else:
        tail = np.repeat(data[:, -1:], total_len - cur, axis=1)
    return np.concatenate([data, tail], axis=1)


def _linear_regrid(data: np.ndarray, new_len: int) -> np.ndarray:
    dst = np.linspace(0.0, data.shape[1] - 1.0, new_len)
    return _sample_at(data, dst)


def _sample_at(data: np.ndarray, positions: np.ndarray) -> np.ndarray:
    pos = np.clip(positions, 0.0, data.shape[1] - 1.0)
    i0 = np.clip(np.floor(pos).astype(np.int64), 0, data.shape[1] - 2)
    frac = pos - i0
    return data[:, i0] * (1.0 - frac) + data[:, i0 + 1] * frac


def _first_peak(record: EcgRecord, ref_lead: int = 0) -> int | None:
    peaks = detect_rpeaks(record, ref_lead=ref_lead)
    return peaks.indices[0] if len(peaks) else None


def _band(value, lo, hi, name, kind):
    if not (lo <= value <= hi):
        raise ValueError(
            f"{kind}: parameter {name}={value} outside band [{lo}, {hi}]"
        )
    return value


# ---------------------------------------------------------------------------
# Catalogue transforms.  Each returns (record, extra-log-payload-or-None).


def _t_star(record, params, rng):
    p = StarParams(
        a2=float(params.get("a2", 1.6)),
        a3=float(params.get("a3", 0.6)),
        phase_phi=float(params.get("phi", 0.0)),
        periods_n=int(params.get("periods", 1)),
    )
    ref_lead = int(params.get("ref_lead", 0))
    kernel = params.get("kernel", KERNEL_LINEAR)
    peaks = detect_rpeaks(record, ref_lead=ref_lead)
    out, meta = star_forward(record, peaks, p, kernel=kernel)
    return out, {"metadata": meta}


def _t_multiply_triangle(record, params, rng):
    tp = TriangleParams(
        alpha=_band(float(params.get("alpha", 2.0)), 1.0, 4.0, "alpha",
                    "multiply_triangle"),
        apex_fraction=params.get("apex_fraction", "random"),
    )
    seed = int(rng.integers(0, 2**63 - 1))
    return multiply_triangle(record, tp, rng_seed=seed,
                             gain=params.get("gain")), None


def _t_temporal_shift(record, params, rng):
    j = int(_band(int(params.get("max_shift", 128)), 0, 4096, "max_shift",
                  "temporal_shift"))
    shift = int(rng.integers(-j, j + 1)) if j else 0
    data = record.data
    out = np.zeros_like(data)
    t = data.shape[1]
    if shift >= 0:
        out[:, shift:] = data[:, : t - shift]
    else:
        out[:, :shift] = data[:, -shift:]
    return record.with_data(out), {"shift": shift}


def _t_add_noise(record, params, rng):
    sigma = _band(float(params.get("sigma", 0.01)), 0.0, 0.05, "sigma",
                  "add_noise")
    if sigma == 0.0:
        return record.with_data(record.data.copy()), None
    noise = rng.normal(0.0, sigma, size=record.data.shape)
    return record.with_data(record.data + noise), None


def _t_lead_dropout(record, params, rng):
    p_drop = _band(float(params.get("p_drop", 0.1)), 0.0, 1.0, "p_drop",
                   "lead_dropout")
    seg_len = int(params.get("segment_len", 256))
    data = record.data.copy()
    if rng.random() < p_drop:
        lead = int(rng.integers(0, record.leads))
        seg_len = min(seg_len, data.shape[1])
        start = int(rng.integers(0, data.shape[1] - seg_len + 1))
        data[lead, start:start + seg_len] = 0.0
        return record.with_data(data), {"lead": lead, "start": start}
    return record.with_data(data), None


def _t_roll(record, params, rng):
    if "shift" in params:
        shift = int(params["shift"])
    else:
        j = int(params.get("max_shift", 128))
        shift = int(rng.integers(-j, j + 1)) if j else 0
    return record.with_data(np.roll(record.data, shift, axis=1)), {"shift": shift}


def _t_notch_filter(record, params, rng):
    freq = float(params.get("freq_hz", 50.0))
    q = float(params.get("q", 30.0))
    nyq = record.fs_hz / 2.0
    if freq >= nyq:
        raise ValueError(f"notch_filter: freq_hz {freq} at or above Nyquist {nyq}")
    b, a = sps.iirnotch(freq, q, fs=record.fs_hz)
    return record.with_data(sps.filtfilt(b, a, record.data, axis=1)), None


def _stretch_common(record, params, rng, regrid):
    if "factor" in params:
        factor = float(params["factor"])
    else:
        lo = float(params.get("low", 0.9))
        hi = float(params.get("high", 1.1))
        factor = float(rng.uniform(lo, hi))
    _band(factor, 0.5, 2.0, "factor", "stretch")
    t = record.data.shape[1]
    new_len = max(2, int(round(factor * t)))
    if new_len == t:
        return record.with_data(record.data.copy()), {"factor": factor}
    out = _fit_length(regrid(record.data, new_len), t)
    return record.with_data(out), {"factor": factor}


def _t_uniform_stretch(record, params, rng):
    return _stretch_common(record, params, rng, _linear_regrid)


def _t_fourier_resample(record, params, rng):
    def regrid(data, new_len):
        return sps.resample(data, new_len, axis=1)
    return _stretch_common(record, params, rng, regrid)


def _t_spline_interpolation(record, params, rng):
    def regrid(data, new_len):
        src = np.arange(data.shape[1], dtype=np.float64)
        dst = np.linspace(0.0, data.shape[1] - 1.0, new_len)
        return CubicSpline(src, data, axis=1)(dst)
    return _stretch_common(record, params, rng, regrid)


def _t_random_stretch(record, params, rng):
    return _stretch_common(record, params, rng, _linear_regrid)


def _t_band_pass(record, params, rng):
    low = float(params.get("low_hz", 0.5))
    high = float(params.get("high_hz", 50.0))
    order = int(params.get("order", 4))
    nyq = record.fs_hz / 2.0
    high = min(high, 0.99 * nyq)
    if not (0 < low < high):
        raise ValueError(f"band_pass: invalid band [{low}, {high}]")
    sos = sps.butter(order, [low / nyq, high / nyq], btype="band", output="sos")
    return record.with_data(sps.sosfiltfilt(sos, record.data, axis=1)), None


def _t_normalize(record, params, rng):
    from .dataset import normalize_leads

    mode = params.get("mode", "minmax")
    return normalize_leads(record, mode=mode), None


def _t_roll_to_first_peak(record, params, rng):
    ref_index = int(params.get("ref_index", 0))
    first = _first_peak(record, ref_lead=int(params.get("ref_lead", 0)))
    if first is None:
        return record.with_data(record.data.copy()), {"shift": 0}
    shift = ref_index - first
    return record.with_data(np.roll(record.data, shift, axis=1)), {"shift": shift}


def _t_flipy(record, params, rng):
    return record.with_data(-record.data), None


def _t_flipx(record, params, rng):
    return record.with_data(record.data[:, ::-1].copy()), None


def _t_multiply_sine(record, params, rng):
    a = float(params.get("amplitude", 0.1))
    f = float(params.get("freq_hz", 0.5))
    t = np.arange(record.data.shape[1]) / record.fs_hz
    gain = 1.0 + a * np.sin(2.0 * np.pi * f * t)
    return record.with_data(record.data * gain[None, :]), None


def _t_multiply_linear(record, params, rng):
    m = float(params.get("factor", 1.2))
    gain = np.linspace(1.0, m, record.data.shape[1])
    return record.with_data(record.data * gain[None, :]), None


def _t_random_clip(record, params, rng):
    t = record.data.shape[1]
    width = int(params.get("width", t))
    width = max(1, min(width, t))
    start = int(rng.integers(0, t - width + 1))
    out = np.zeros_like(record.data)
    out[:, :width] = record.data[:, start:start + width]
    return record.with_data(out), {"start": start, "width": width}


def _t_resample_sine(record, params, rng):
    s = float(params.get("scale_samples", 8.0))
    cycles = float(params.get("cycles", 2.0))
    t = record.data.shape[1]
    # Monotone warp requires |s| * 2*pi*cycles / T < 1.
    limit = t / (2.0 * np.pi * max(cycles, 1e-9))
    if abs(s) >= limit:
        raise ValueError(
            f"resample_sine: scale_samples {s} breaks monotonicity "
            f"(limit {limit:.3f} for {cycles} cycles)"
        )
    grid = np.arange(t, dtype=np.float64)
    positions = grid + s * np.sin(2.0 * np.pi * cycles * grid / t)
    return record.with_data(_sample_at(record.data, positions)), None


def _t_resample_linear(record, params, rng):
    d = float(params.get("delta", 0.1))
    if not (0.0 <= d < 1.0):
        raise ValueError(f"resample_linear: delta {d} must be in [0,1)")
    t = record.data.shape[1]
    grid = np.arange(t, dtype=np.float64)
    # Rate drifts linearly from 1-d to 1+d; renormalized so endpoints map
    # to endpoints.
    rate = 1.0 - d + 2.0 * d * grid / max(t - 1, 1)
    positions = np.concatenate([[0.0], np.cumsum(rate[:-1])])
    positions *= (t - 1.0) / positions[-1] if positions[-1] > 0 else 1.0
    return record.with_data(_sample_at(record.data, positions)), None


def _t_val_clip(record, params, rng):
    t = record.data.shape[1]
    target = int(params.get("target_len", t))
    out = np.zeros_like(record.data)
    keep = min(target, t)
    out[:, :keep] = record.data[:, :keep]
    return record.with_data(out), None


def _t_equal_segment_resampler(record, params, rng):
    out, extra = _t_star(record, params, rng)
    return out, None


def _t_resample_linear_align_first_peak(record, params, rng):
    ref_fraction = float(params.get("ref_fraction", 0.1))
    t = record.data.shape[1]
    first = _first_peak(record, ref_lead=int(params.get("ref_lead", 0)))
    if first is None or first == 0:
        return record.with_data(record.data.copy()), None
    ref = max(1.0, ref_fraction * (t - 1.0))
    grid = np.arange(t, dtype=np.float64)
    # Two-piece linear grid: [0, ref] <- [0, first], (ref, T-1] <- (first, T-1].
    positions = np.where(
        grid <= ref,
        grid * first / ref,
        first + (grid - ref) * (t - 1.0 - first) / (t - 1.0 - ref),
    )
    return record.with_data(_sample_at(record.data, positions)), {"first_peak": first}


def _t_resample_triangle(record, params, rng):
    factor = float(params.get("factor", 1.1))
    _band(factor, 1.0, 2.0, "factor", "resample_triangle")
    stretch_first = bool(params.get("stretch_first", rng.random() < 0.5))
    t = record.data.shape[1]
    half = t // 2
    first_len = int(round(factor * half)) if stretch_first else t - int(
        round(factor * (t - half)))
    first_len = int(np.clip(first_len, 1, t - 1))
    a = _linear_regrid(record.data[:, :half], first_len)
    b = _linear_regrid(record.data[:, half:], t - first_len)
    return record.with_data(np.concatenate([a, b], axis=1)), {
        "stretch_first": stretch_first
    }


_CATALOGUE = {
    "star": _t_star,
    "multiply_triangle": _t_multiply_triangle,
    "temporal_shift": _t_temporal_shift,
    "add_noise": _t_add_noise,
    "lead_dropout": _t_lead_dropout,
    "roll": _t_roll,
    "notch_filter": _t_notch_filter,
    "uniform_stretch": _t_uniform_stretch,
    "fourier_resample": _t_fourier_resample,
    "spline_interpolation": _t_spline_interpolation,
    "band_pass": _t_band_pass,
    "normalize": _t_normalize,
    "roll_to_first_peak": _t_roll_to_first_peak,
    "flipy": _t_flipy,
    "flipx": _t_flipx,
    "multiply_sine": _t_multiply_sine,
    "multiply_linear": _t_multiply_linear,
    "random_clip": _t_random_clip,
    "random_stretch": _t_random_stretch,
    "resample_sine": _t_resample_sine,
    "resample_linear": _t_resample_linear,
    "val_clip": _t_val_clip,
    "equal_segment_resampler": _t_equal_segment_resampler,
    "resample_linear_align_first_peak": _t_resample_linear_align_first_peak,
    "resample_triangle": _t_resample_triangle,
}


def transform_kinds() -> tuple[str, ...]:
    return tuple(sorted(_CATALOGUE))


def _apply(record: EcgRecord, kind: str, params: dict,
           rng: np.random.Generator):
    if kind not in _CATALOGUE:
        raise ValueError(f"unknown transform kind {kind!r}")
    out, extra = _CATALOGUE[kind](record, params or {}, rng)
    if out.data.shape != record.data.shape:
        raise AssertionError(
            f"{kind}: shape changed from {record.data.shape} to {out.data.shape}"
        )
    return out, extra


def apply_transform(record: EcgRecord, kind: str, params: dict | None = None,
                    rng_seed: int = 0) -> EcgRecord:
    """Apply one catalogue transform with an explicit seed."""
    rng = np.random.default_rng(rng_seed)
    out, _ = _apply(record, kind, params or {}, rng)
    return out


def substream_seed(master_seed: int, record_id: str, step_index: int) -> int:
    """Counter-based substream: hash of (seed, record id, step index)."""
    digest = hashlib.sha256(
        f"{master_seed}\x1f{record_id}\x1f{step_index}".encode("utf-8")
    ).digest()
    return int.from_bytes(digest[:8], "little")


def apply_policy(record: EcgRecord, policy: PolicyConfig):
    """Apply ordered, probability-gated steps; returns (record, applied log).

    Each step draws from its own substream, so whether a step fires for one
    record never depends on other records or other steps.
    """
    out = record
    log = []
    for i, step in enumerate(policy.steps):
        seed = substream_seed(policy.master_seed, record.record_id, i)
        rng = np.random.default_rng(seed)
        fired = bool(rng.random() < step.probability)
        entry = {
            "step": i,
            "kind": step.kind,
            "probability": step.probability,
            "seed": seed,
            "fired": fired,
            "params": dict(step.params),
        }
        if fired:
            try:
                out, extra = _apply(out, step.kind, step.params, rng)
            except Exception as exc:
                raise RuntimeError(f"policy step {i} ({step.kind}) failed: {exc}") from exc
            if extra:
                entry.update(extra)
            log.append(entry)
    return out, log


def save_policy(policy: PolicyConfig, path: str) -> None:
    doc = {
        "format": POLICY_VERSION,
        "master_seed": policy.master_seed,
        "steps": [
            {"kind": s.kind, "probability": s.probability, "params": dict(s.params)}
            for s in policy.steps
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_policy(path: str) -> PolicyConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != POLICY_VERSION:
        raise ValueError(f"{path}: expected format {POLICY_VERSION!r}")
    steps = tuple(
        PolicyStep(
            kind=s["kind"],
            params=dict(s.get("params", {})),
            probability=float(s.get("probability", 1.0)),
        )
        for s in doc.get("steps", [])
    )
    return PolicyConfig(steps=steps, master_seed=int(doc.get("master_seed", 0)))
