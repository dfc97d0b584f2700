"""Array-in/array-out bindings around the starkit transforms.

Data loaders hand over contiguous L x T buffers and get buffers back; no
file round-trips, no hidden state.  All randomness flows from explicit
seeds, so the bindings are safe to call concurrently from multiple loader
workers or processes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from starkit import (
    EcgRecord,
    PolicyConfig,
    PolicyStep,
    RPeakSet,
    StarParams,
    __version__ as _starkit_version,
    apply_policy,
    detect_rpeaks,
    star_forward,
)

__version__ = _starkit_version

__all__ = ["ArrayView", "bind_star_forward", "bind_apply_policy",
           "__version__"]


@dataclass(frozen=True)
class ArrayView:
    """Contiguous L x T float buffer plus its sampling rate.

    Construction is zero-copy when the buffer is already a contiguous
    float64 array; anything else is converted with one explicit copy.
    """

    data: np.ndarray
    fs_hz: float

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if arr.ndim != 2:
            raise ValueError(f"buffer must be 2-D (L x T), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("buffer must be finite")
        if not (np.isfinite(self.fs_hz) and self.fs_hz > 0):
            raise ValueError("fs_hz must be positive")
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


def _metadata_document(meta) -> dict:
    doc = {
        "rpeaks": list(meta.rpeaks),
        "equalized_lengths": list(meta.equalized_lengths),
        "realized_lengths": list(meta.realized_lengths),
        "coefficients": list(meta.coefficients),
        "interp_kernel_id": meta.interp_kernel_id,
    }
    if meta.params is not None:
        doc["params"] = {
            "a2": meta.params.a2,
            "a3": meta.params.a3,
            "phase_phi": meta.params.phase_phi,
            "periods_n": meta.params.periods_n,
            "activation_p": meta.params.activation_p,
        }
    return doc


def bind_star_forward(
    array: ArrayView,
    rpeaks: list[int] | None = None,
    params: StarParams | None = None,
    seed: int = 0,
    kernel: str = "linear-monotone",
) -> tuple[ArrayView, dict]:
    """Run the beat-wise resampler on a raw buffer.

    Peaks are detected on lead 0 when none are supplied.  Fewer than two
    peaks leaves the buffer unchanged.  Returns the transformed view and a
    plain-dict metadata document sufficient for inversion.
    """
    params = params or StarParams(a2=1.6, a3=0.6)
    record = EcgRecord(data=array.data, fs_hz=array.fs_hz)
    peak_set = (detect_rpeaks(record) if rpeaks is None
                else RPeakSet(indices=tuple(int(i) for i in rpeaks)))
    out, meta = star_forward(record, peak_set, params, rng_seed=seed,
                             kernel=kernel)
    return ArrayView(data=out.data, fs_hz=array.fs_hz), _metadata_document(meta)


def _policy_from_document(policy, master_seed: int) -> PolicyConfig:
    if isinstance(policy, PolicyConfig):
        return PolicyConfig(steps=policy.steps, master_seed=master_seed)
    steps = tuple(
        PolicyStep(
            kind=step["kind"],
            params=dict(step.get("params", {})),
            probability=float(step.get("probability", 1.0)),
        )
        for step in policy.get("steps", [])
    )
    return PolicyConfig(steps=steps, master_seed=master_seed)


def bind_apply_policy(
    batch: np.ndarray,
    policy,
    master_seed: int,
    record_ids: list[str],
    fs_hz: float,
) -> tuple[np.ndarray, list[list[dict]]]:
    """Apply a policy document to an N x L x T batch.

    ``policy`` is either a PolicyConfig or a plain dict in the shape of a
    starpolicy/1 file body.  Per-record substreams make the result
    independent of batch composition and worker layout.
    """
    arr = np.ascontiguousarray(np.asarray(batch, dtype=np.float64))
    if arr.ndim != 3:
        raise ValueError(f"batch must be N x L x T, got shape {arr.shape}")
    if len(record_ids) != arr.shape[0]:
        raise ValueError(
            f"{len(record_ids)} record ids for batch of {arr.shape[0]}")
    config = _policy_from_document(policy, master_seed)
    out = np.empty_like(arr)
    logs = []
    for i, record_id in enumerate(record_ids):
        record = EcgRecord(data=arr[i], fs_hz=fs_hz, record_id=record_id)
        result, log = apply_policy(record, config)
        out[i] = result.data
        logs.append([{k: v for k, v in entry.items() if k != "metadata"}
                     for entry in log])
    return out, logs
