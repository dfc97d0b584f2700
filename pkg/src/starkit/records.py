"""Canonical in-memory signal model and bit-exact file formats.

A record on disk is a raw little-endian float32 body (lead-major) plus a
plain-text sidecar header at ``<path>.hdr``.  A CSV variant (hand-auditable
fixtures) is selected by the ``.csv`` suffix.  Transform metadata uses the
``starmeta/1`` text format.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

FORMAT_VERSION = "starfmt/1"
META_VERSION = "starmeta/1"


@dataclass(frozen=True)
class EcgRecord:
    """Multi-lead sample matrix with sampling rate, labels and provenance.

    ``data`` is lead-major (L x T) and held in float64 regardless of the
    storage precision.  Records are immutable after construction; transforms
    return fresh records.
    """

    data: np.ndarray
    fs_hz: float
    lead_names: tuple[str, ...] = ()
    labels: frozenset[str] = frozenset()
    source: str = ""
    record_id: str = ""

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if arr.ndim != 2:
            raise ValueError(f"data must be 2-D (L x T), got shape {arr.shape}")
        object.__setattr__(self, "data", arr)
        if not self.lead_names:
            object.__setattr__(
                self, "lead_names", tuple(f"lead{i}" for i in range(arr.shape[0]))
            )
        else:
            object.__setattr__(self, "lead_names", tuple(self.lead_names))
        object.__setattr__(self, "labels", frozenset(self.labels))

    @property
    def leads(self) -> int:
        return self.data.shape[0]

    @property
    def samples_per_lead(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray) -> "EcgRecord":
        """Fresh record carrying the same header fields but new samples."""
        return replace(self, data=data)


@dataclass(frozen=True)
class StarParams:
    """Sinusoidal schedule parameters (upper/lower bounds, phase, periods)."""

    a2: float
    a3: float
    phase_phi: float = 0.0
    periods_n: int = 1
    activation_p: float = 1.0

    def __post_init__(self):
        if not (self.a2 > self.a3 > 0):
            raise ValueError(f"require a2 > a3 > 0, got a2={self.a2}, a3={self.a3}")
        if not (0.0 <= self.activation_p <= 1.0):
            raise ValueError(f"activation_p must be in [0,1], got {self.activation_p}")
        if self.periods_n < 1:
            raise ValueError(f"periods_n must be >= 1, got {self.periods_n}")


@dataclass(frozen=True)
class StarMetadata:
    """Inversion record for one forward transform.

    ``rpeaks`` are the anchor indices, ``equalized_lengths`` the per-segment
    targets before warping, ``realized_lengths`` the warped lengths, and
    ``coefficients`` the applied time/amplitude factors.  An empty schedule
    (no segments) marks a pass-through forward.
    """

    rpeaks: tuple[int, ...]
    equalized_lengths: tuple[int, ...]
    realized_lengths: tuple[int, ...]
    coefficients: tuple[float, ...]
    params: StarParams | None = None
    interp_kernel_id: str = "linear-monotone"

    @property
    def is_identity(self) -> bool:
        return len(self.coefficients) == 0

    def validate(self, total_len: int | None = None) -> list[str]:
        problems = []
        r = np.asarray(self.rpeaks, dtype=np.int64)
        if r.size and np.any(np.diff(r) <= 0):
            problems.append("rpeaks must be strictly increasing")
        if total_len is not None and r.size and (r[0] < 0 or r[-1] >= total_len):
            problems.append("rpeaks out of bounds")
        k = r.size
        nseg = max(k - 1, 0)
        for name, seq in (
            ("equalized_lengths", self.equalized_lengths),
            ("realized_lengths", self.realized_lengths),
            ("coefficients", self.coefficients),
        ):
            if len(seq) != nseg:
                problems.append(f"{name} must have length K-1={nseg}, got {len(seq)}")
        if nseg and len(self.equalized_lengths) == nseg:
            if sum(self.equalized_lengths) != int(r[-1] - r[0]):
                problems.append("sum of equalized_lengths must equal R_K - R_1")
        if any(c <= 0 for c in self.coefficients):
            problems.append("coefficients must be positive")
        if self.params is not None:
            lo, hi = self.params.a3, self.params.a2
            if any(not (lo - 1e-12 <= c <= hi + 1e-12) for c in self.coefficients):
                problems.append("coefficients must lie in [a3, a2]")
        return problems


def validate_record(record: EcgRecord) -> list[str]:
    """Report invariant violations; empty list means the record is valid."""
    problems = []
    if record.data.ndim != 2 or record.data.shape[0] < 1 or record.data.shape[1] < 1:
        problems.append(f"data must be L x T with L,T >= 1, got {record.data.shape}")
        return problems
    bad = ~np.isfinite(record.data)
    if bad.any():
        lead, t = np.argwhere(bad)[0]
        problems.append(f"non-finite at lead={lead},t={t}")
    if not (np.isfinite(record.fs_hz) and record.fs_hz > 0):
        problems.append("fs_hz must be positive")
    if len(record.lead_names) != record.leads:
        problems.append(
            f"lead_names length {len(record.lead_names)} != leads {record.leads}"
        )
    return problems


def _header_path(path: str) -> str:
    return str(path) + ".hdr"


def _write_header(path: str, record: EcgRecord, body: str) -> None:
    lines = [
        FORMAT_VERSION,
        f"record_id: {record.record_id}",
        f"fs_hz: {record.fs_hz!r}",
        f"leads: {record.leads}",
        f"samples: {record.samples_per_lead}",
        f"lead_names: {','.join(record.lead_names)}",
        f"labels: {';'.join(sorted(record.labels))}",
        f"source: {record.source}",
        f"body: {body}",
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_header(text: str, origin: str) -> dict:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != FORMAT_VERSION:
        raise ValueError(f"{origin}: missing '{FORMAT_VERSION}' version line")
    fields = {}
    for ln in lines[1:]:
        key, _, value = ln.partition(":")
        fields[key.strip()] = value.strip()
    if "fs_hz" not in fields:
        raise ValueError(f"{origin}: header missing fs_hz")
    return fields


def save_record(record: EcgRecord, path: str) -> None:
    """Write a record; ``.csv`` suffix selects the text variant."""
    problems = validate_record(record)
    if problems:
        raise ValueError(f"refusing to save invalid record: {problems}")
    path = str(path)
    if path.endswith(".csv"):
        _save_csv(record, path)
        return
    body = record.data.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(body)
    _write_header(_header_path(path), record, body="f32le")


def _save_csv(record: EcgRecord, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# format: {FORMAT_VERSION}\n")
        fh.write(f"# record_id: {record.record_id}\n")
        fh.write(f"# fs_hz: {record.fs_hz!r}\n")
        fh.write(f"# labels: {';'.join(sorted(record.labels))}\n")
        fh.write(f"# source: {record.source}\n")
        fh.write(",".join(record.lead_names) + "\n")
        for row in record.data.T:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _load_csv(path: str) -> EcgRecord:
    meta = {}
    rows = []
    lead_names = None
    with open(path, "r", encoding="utf-8") as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln:
                continue
            if ln.startswith("#"):
                key, _, value = ln.lstrip("# ").partition(":")
                meta[key.strip()] = value.strip()
                continue
            if lead_names is None:
                lead_names = [c.strip() for c in ln.split(",")]
                continue
            rows.append([float(v) for v in ln.split(",")])
    if lead_names is None or not rows:
        raise ValueError(f"{path}: empty CSV record")
    data = np.asarray(rows, dtype=np.float64).T
    if data.shape[0] != len(lead_names):
        raise ValueError(
            f"{path}: size mismatch: {len(lead_names)} lead names vs "
            f"{data.shape[0]} value columns"
        )
    if "fs_hz" not in meta:
        raise ValueError(f"{path}: missing fs_hz")
    labels = {s for s in meta.get("labels", "").split(";") if s}
    return EcgRecord(
        data=data,
        fs_hz=float(meta["fs_hz"]),
        lead_names=tuple(lead_names),
        labels=frozenset(labels),
        source=meta.get("source", ""),
        record_id=meta.get("record_id", ""),
    )


def load_record(path: str) -> EcgRecord:
    """Load a record, normalizing byte order and rejecting malformed files."""
    path = str(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    if path.endswith(".csv"):
        record = _load_csv(path)
    else:
        hdr = _header_path(path)
        if not os.path.exists(hdr):
            raise FileNotFoundError(f"missing sidecar header {hdr}")
        with open(hdr, "r", encoding="utf-8") as fh:
            fields = _parse_header(fh.read(), hdr)
        leads = int(fields["leads"])
        samples = int(fields["samples"])
        raw = open(path, "rb").read()
        expected = leads * samples * 4
        if len(raw) != expected:
            raise ValueError(
                f"{path}: size mismatch: body has {len(raw)} bytes, "
                f"expected {expected} (L={leads}, T={samples})"
            )
        data = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        data = data.reshape(leads, samples)
        labels = {s for s in fields.get("labels", "").split(";") if s}
        record = EcgRecord(
            data=data,
            fs_hz=float(fields["fs_hz"]),
            lead_names=tuple(fields.get("lead_names", "").split(","))
            if fields.get("lead_names")
            else (),
            labels=frozenset(labels),
            source=fields.get("source", ""),
            record_id=fields.get("record_id", ""),
        )
    bad = ~np.isfinite(record.data)
    if bad.any():
        lead, t = np.argwhere(bad)[0]
        raise ValueError(f"{path}: non-finite sample at lead={lead},t={t}")
    problems = validate_record(record)
    if problems:
        raise ValueError(f"{path}: invalid record: {problems}")
    return record


def save_metadata(meta: StarMetadata, path: str) -> None:
    p = meta.params
    lines = [
        META_VERSION,
        f"kernel: {meta.interp_kernel_id}",
        f"a2: {p.a2!r}" if p else "a2:",
        f"a3: {p.a3!r}" if p else "a3:",
        f"phi: {p.phase_phi!r}" if p else "phi:",
        f"periods: {p.periods_n}" if p else "periods:",
        f"activation_p: {p.activation_p!r}" if p else "activation_p:",
        "rpeaks: " + ",".join(str(i) for i in meta.rpeaks),
        "equalized: " + ",".join(str(i) for i in meta.equalized_lengths),
        "realized: " + ",".join(str(i) for i in meta.realized_lengths),
        "coeffs: " + ",".join(repr(c) for c in meta.coefficients),
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_metadata(path: str) -> StarMetadata:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines or lines[0].strip() != META_VERSION:
        raise ValueError(f"{path}: missing '{META_VERSION}' version line")
    fields = {}
    for ln in lines[1:]:
        key, _, value = ln.partition(":")
        fields[key.strip()] = value.strip()

    def ints(key):
        v = fields.get(key, "")
        return tuple(int(x) for x in v.split(",")) if v else ()

    def floats(key):
        v = fields.get(key, "")
        return tuple(float(x) for x in v.split(",")) if v else ()

    params = None
    if fields.get("a2"):
        params = StarParams(
            a2=float(fields["a2"]),
            a3=float(fields["a3"]),
            phase_phi=float(fields.get("phi", "0") or 0),
            periods_n=int(fields.get("periods", "1") or 1),
            activation_p=float(fields.get("activation_p", "1") or 1),
        )
    return StarMetadata(
        rpeaks=ints("rpeaks"),
        equalized_lengths=ints("equalized"),
        realized_lengths=ints("realized"),
        coefficients=floats("coeffs"),
        params=params,
        interp_kernel_id=fields.get("kernel", "linear-monotone"),
    )
