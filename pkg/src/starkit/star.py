"""Beat-wise sinusoidal time-amplitude resampling and its algorithmic inverse.

The forward pass partitions the trace at the R-peaks, equalizes segment
lengths, warps each equalized segment by a coefficient from a sinusoidal
schedule, scales amplitudes by the same coefficient, and reattaches the
untouched head and tail.  Everything needed to invert the transform is
captured in the returned metadata.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import PchipInterpolator

from .records import EcgRecord, StarMetadata, StarParams
from .rpeaks import RPeakSet

KERNEL_LINEAR = "linear-monotone"
KERNEL_CUBIC = "cubic-monotone"
KERNELS = (KERNEL_LINEAR, KERNEL_CUBIC)


def sinusoidal_schedule(num_segments: int, params: StarParams) -> np.ndarray:
    """Coefficients c_i = a3 + (a2-a3) * (sin(2*pi*n*(i-1)/M + phi) + 1) / 2."""
    if num_segments < 1:
        raise ValueError("num_segments must be >= 1")
    i = np.arange(num_segments, dtype=np.float64)
    angle = 2.0 * np.pi * params.periods_n * i / num_segments + params.phase_phi
    c = params.a3 + (params.a2 - params.a3) * (np.sin(angle) + 1.0) / 2.0
    return np.clip(c, params.a3, params.a2)


def equalized_targets(n_body: int, num_segments: int) -> np.ndarray:
    """Integer lengths S_i >= 1 with sum S_i == n_body and |S_i - n_body/M| < 1.

    Largest-remainder split with the leftmost tie-break.
    """
    if num_segments < 1:
        raise ValueError("num_segments must be >= 1")
    if n_body < num_segments:
        raise ValueError(
            f"cannot split body of {n_body} samples into {num_segments} "
            "segments of at least one sample"
        )
    base, rem = divmod(n_body, num_segments)
    targets = np.full(num_segments, base, dtype=np.int64)
    targets[:rem] += 1
    return targets


def _resample_block(block: np.ndarray, m: int, kernel: str) -> np.ndarray:
    """Monotone resampling of an (L x a) block to (L x m); endpoints clamped."""
    if m < 1:
        raise ValueError("target length must be >= 1")
    a = block.shape[1]
    if m == a:
        return block.copy()
    if a == 1:
        return np.repeat(block, m, axis=1)
    dst = np.linspace(0.0, a - 1.0, m)
    if kernel == KERNEL_LINEAR:
        i0 = np.clip(np.floor(dst).astype(np.int64), 0, a - 2)
        frac = dst - i0
        return block[:, i0] * (1.0 - frac) + block[:, i0 + 1] * frac
    if kernel == KERNEL_CUBIC:
        return PchipInterpolator(np.arange(a), block, axis=1)(dst)
    raise ValueError(f"unknown interpolation kernel {kernel!r}")


def interp_resample(segment: np.ndarray, m: int, kernel: str = KERNEL_LINEAR) -> np.ndarray:
    """Monotone interpolation of a 1-D signal to length ``m``."""
    seg = np.asarray(segment, dtype=np.float64)
    if seg.ndim != 1:
        raise ValueError("segment must be 1-D")
    return _resample_block(seg[None, :], m, kernel)[0]


def _interp_at(positions: np.ndarray, xp: np.ndarray, block: np.ndarray,
               kernel: str) -> np.ndarray:
    """Evaluate each lead of ``block`` (sampled at ``xp``) at ``positions``.

    Queries are clamped to the sampled range (value hold, no extrapolation).
    """
    if xp.size == 1:
        return np.repeat(block[:, :1], positions.size, axis=1)
    q = np.clip(positions, xp[0], xp[-1])
    if kernel == KERNEL_CUBIC:
        return PchipInterpolator(xp, block, axis=1)(q)
    out = np.empty((block.shape[0], q.size), dtype=np.float64)
    for lead in range(block.shape[0]):
        out[lead] = np.interp(q, xp, block[lead])
    return out


def _empty_metadata(rpeaks: RPeakSet, params: StarParams | None,
                    kernel: str) -> StarMetadata:
    return StarMetadata(
        rpeaks=tuple(rpeaks.indices),
        equalized_lengths=(),
        realized_lengths=(),
        coefficients=(),
        params=params,
        interp_kernel_id=kernel,
    )


def star_forward(
    record: EcgRecord,
    rpeaks: RPeakSet,
    params: StarParams,
    rng_seed: int = 0,
    kernel: str = KERNEL_LINEAR,
    coefficients: np.ndarray | None = None,
) -> tuple[EcgRecord, StarMetadata]:
    """Forward transform; length-preserving, head and tail reattached exactly.

    ``coefficients`` overrides the sinusoidal schedule (test harness hook).
    The transform itself is deterministic; ``rng_seed`` is accepted for
    interface parity with the seeded pipeline and recorded nowhere.
    """
    del rng_seed
    if kernel not in KERNELS:
        raise ValueError(f"unknown interpolation kernel {kernel!r}")
    t = record.samples_per_lead
    idx = np.asarray(rpeaks.indices, dtype=np.int64)
    if idx.size and (idx[0] < 0 or idx[-1] >= t):
        raise ValueError("rpeaks inconsistent with record length")
    k = idx.size
    if k < 2:
        return record.with_data(record.data.copy()), _empty_metadata(
            rpeaks, params, kernel
        )

    m_segments = k - 1
    n_body = int(idx[-1] - idx[0])
    targets = equalized_targets(n_body, m_segments)
    if coefficients is None:
        coeffs = sinusoidal_schedule(m_segments, params)
    else:
        coeffs = np.asarray(coefficients, dtype=np.float64)
        if coeffs.shape != (m_segments,):
            raise ValueError("coefficient override must have one entry per segment")
        if np.any(coeffs <= 0):
            raise ValueError("coefficients must be positive")
    realized = np.maximum(1, np.floor(coeffs * targets)).astype(np.int64)

    data = record.data
    pieces = []
    for i in range(m_segments):
        seg = data[:, idx[i]:idx[i + 1]]
        equalized = _resample_block(seg, int(targets[i]), kernel)
        warped = _resample_block(equalized, int(realized[i]), kernel)
        pieces.append(coeffs[i] * warped)
    body = np.concatenate(pieces, axis=1)
    if body.shape[1] > n_body:
        body = body[:, :n_body]
    elif body.shape[1] < n_body:
        pad = np.repeat(body[:, -1:], n_body - body.shape[1], axis=1)
        body = np.concatenate([body, pad], axis=1)

    out = np.concatenate([data[:, : idx[0]], body, data[:, idx[-1]:]], axis=1)
    meta = StarMetadata(
        rpeaks=tuple(int(i) for i in idx),
        equalized_lengths=tuple(int(s) for s in targets),
        realized_lengths=tuple(int(m) for m in realized),
        coefficients=tuple(float(c) for c in coeffs),
        params=params,
        interp_kernel_id=kernel,
    )
    return record.with_data(out), meta


def star_inverse(record: EcgRecord, meta: StarMetadata) -> EcgRecord:
    """Reconstruct the pre-transform record from the metadata.

    Per lead: split at the stored peaks, de-concatenate by the realized
    lengths, divide each segment by its coefficient, interpolate back to the
    equalized then the original grid, and reattach head/tail.  Warped samples
    that fell past the fixed body length were trimmed by the forward pass;
    the missing suffix of such a segment is reconstructed by value hold from
    the last surviving sample.
    """
    problems = meta.validate(total_len=record.samples_per_lead)
    if problems:
        raise ValueError(f"invalid metadata: {problems}")
    if meta.is_identity:
        return record.with_data(record.data.copy())
    kernel = meta.interp_kernel_id
    if kernel not in KERNELS:
        raise ValueError(f"unknown interpolation kernel {kernel!r}")

    idx = np.asarray(meta.rpeaks, dtype=np.int64)
    targets = np.asarray(meta.equalized_lengths, dtype=np.int64)
    realized = np.asarray(meta.realized_lengths, dtype=np.int64)
    coeffs = np.asarray(meta.coefficients, dtype=np.float64)
    seg_lens = np.diff(idx)
    n_body = int(idx[-1] - idx[0])
    data = record.data
    body = data[:, idx[0]:idx[-1]]

    offsets = np.concatenate([[0], np.cumsum(realized)])
    pieces = []
    last_value = body[:, :1]
    for i in range(len(coeffs)):
        start = int(min(offsets[i], n_body))
        stop = int(min(offsets[i + 1], n_body))
        if stop > start:
            warped = body[:, start:stop] / coeffs[i]
            last_value = warped[:, -1:]
        else:
            # Segment fully trimmed away: nothing survives, hold the last
            # reconstructed value.
            warped = np.repeat(last_value, 1, axis=1)
        s_i = int(targets[i])
        # Positions the surviving samples occupy on the equalized grid.
        full_grid = (
            np.linspace(0.0, s_i - 1.0, int(realized[i]))
            if realized[i] > 1
            else np.zeros(1)
        )
        xp = full_grid[: warped.shape[1]]
        equalized = _interp_at(np.arange(s_i, dtype=np.float64), xp, warped, kernel)
        restored = _resample_block(equalized, int(seg_lens[i]), kernel)
        pieces.append(restored)
    restored_body = np.concatenate(pieces, axis=1)
    out = np.concatenate(
        [data[:, : idx[0]], restored_body, data[:, idx[-1]:]], axis=1
    )
    return record.with_data(out)
