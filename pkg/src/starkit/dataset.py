"""Window harmonization and source-aware multi-label stratification."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .records import EcgRecord


@dataclass(frozen=True)
class CorpusEntry:
    record_id: str
    source: str
    labels: tuple[int, ...]
    path: str


@dataclass(frozen=True)
class CorpusIndex:
    entries: tuple[CorpusEntry, ...]
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        ids = [e.record_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("record_ids must be unique")
        c = {len(e.labels) for e in self.entries}
        if len(c) > 1:
            raise ValueError("label vectors must share one length")


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    mapping: dict = field(default_factory=dict)

    def fold_of(self, record_id: str) -> int:
        return self.mapping[record_id]


def harmonize_window(record: EcgRecord, target_len: int = 4096,
                     min_fs: float = 250.0, rng_seed: int = 0) -> EcgRecord:
    """Rate-harmonize then fix the window to ``target_len`` samples.

    Below ``min_fs`` the signal is FFT-resampled up first.  Longer traces are
    clipped at a seeded random start; shorter ones are placed at a seeded
    random offset inside a zero buffer.
    """
    rng = np.random.default_rng(rng_seed)
    data = record.data
    fs = record.fs_hz
    if fs < min_fs:
        new_len = int(round(data.shape[1] * min_fs / fs))
        data = sps.resample(data, new_len, axis=1)
        fs = fs * new_len / record.data.shape[1]
    t = data.shape[1]
    if t > target_len:
        start = int(rng.integers(0, t - target_len + 1))
        data = data[:, start:start + target_len]
    elif t < target_len:
        offset = int(rng.integers(0, target_len - t + 1))
        buf = np.zeros((data.shape[0], target_len))
        buf[:, offset:offset + t] = data
        data = buf
    else:
        data = data.copy()
    out = record.with_data(data)
    return EcgRecord(
        data=data, fs_hz=fs, lead_names=out.lead_names, labels=out.labels,
        source=out.source, record_id=out.record_id,
    )


def normalize_leads(record: EcgRecord, mode: str = "minmax") -> EcgRecord:
    """Per-lead normalization; constant leads map to zeros in both modes."""
    if mode == "none":
        return record.with_data(record.data.copy())
    data = record.data
    if mode == "minmax":
        lo = data.min(axis=1, keepdims=True)
        hi = data.max(axis=1, keepdims=True)
        span = hi - lo
        out = np.zeros_like(data)
        np.divide(data - lo, span, out=out, where=span > 0)
        return record.with_data(out)
    if mode == "meanstd":
        mean = data.mean(axis=1, keepdims=True)
        std = data.std(axis=1, keepdims=True)
        out = np.zeros_like(data)
        np.divide(data - mean, std, out=out, where=std > 0)
        return record.with_data(out)
    raise ValueError(f"unknown normalization mode {mode!r}")


def encode_labels(raw_labels, class_names) -> tuple[np.ndarray, set]:
    """Multi-hot vector over ``class_names``; unknowns reported, not dropped."""
    names = list(class_names)
    if len(set(names)) != len(names):
        raise ValueError("class names must be unique")
    vec = np.zeros(len(names), dtype=np.int64)
    unknown = set()
    for label in raw_labels:
        if label in names:
            vec[names.index(label)] = 1
        else:
            unknown.add(label)
    return vec, unknown


def _stratify_one_source(entries, k: int, rng: np.random.Generator) -> dict:
    """Greedy iterative stratification of one source's records over k folds.

    Labels are processed rarest-first; each record carrying the current label
    goes to the fold with the greatest remaining demand for it, ties broken
    by smallest fold, then lowest fold index.
    """
    n = len(entries)
    c = len(entries[0].labels) if entries else 0
    order = rng.permutation(n)
    entries = [entries[i] for i in order]
    labels = np.asarray([e.labels for e in entries], dtype=np.float64)

    desired = np.full(k, n / k)                       # remaining record budget
    desired_label = np.tile(labels.sum(axis=0) / k, (k, 1))
    assigned = np.full(n, -1, dtype=np.int64)
    remaining = set(range(n))

    while remaining:
        counts = labels[list(sorted(remaining))].sum(axis=0)
        active = np.where(counts > 0)[0]
        if active.size == 0:
            # Label-free leftovers: fill the fold with the largest budget.
            for i in sorted(remaining):
                fold = int(np.lexsort((np.arange(k), -desired))[0])
                assigned[i] = fold
                desired[fold] -= 1
            break
        label = int(active[np.argmin(counts[active])])
        for i in sorted(remaining):
            if labels[i, label] <= 0:
                continue
            demand = desired_label[:, label]
            best = np.max(demand)
            tied = np.where(demand >= best - 1e-12)[0]
            if tied.size > 1:
                budgets = desired[tied]
                tied = tied[budgets >= budgets.max() - 1e-12]
            fold = int(tied[0])
            assigned[i] = fold
            desired[fold] -= 1
            desired_label[fold] -= labels[i]
            remaining.discard(i)
    return {entries[i].record_id: int(assigned[i]) for i in range(n)}


def stratify_folds(index: CorpusIndex, k: int = 5, seed: int = 0) -> FoldAssignment:
    """Per-source iterative multi-label stratification, merged across sources."""
    if k < 2:
        raise ValueError("k must be >= 2")
    by_source: dict[str, list] = {}
    for e in index.entries:
        by_source.setdefault(e.source, []).append(e)
    mapping: dict[str, int] = {}
    for source in sorted(by_source):
        entries = by_source[source]
        if len(entries) < k:
            raise ValueError(
                f"source {source!r} has {len(entries)} records, fewer than k={k}"
            )
        # Salt the stream with the source name via stable byte values.
        rng = np.random.default_rng(
            np.random.SeedSequence([seed] + [ord(ch) for ch in source[:16]]))
        mapping.update(_stratify_one_source(entries, k, rng))
    return FoldAssignment(k=k, mapping=mapping)


def prevalence_by_fold(index: CorpusIndex, assignment: FoldAssignment):
    """Per-source, per-fold, per-class prevalence table for diagnostics."""
    sources = sorted({e.source for e in index.entries})
    c = len(index.entries[0].labels)
    table = {}
    for source in sources:
        entries = [e for e in index.entries if e.source == source]
        per_fold = np.zeros((assignment.k, c))
        counts = np.zeros(assignment.k)
        for e in entries:
            f = assignment.fold_of(e.record_id)
            per_fold[f] += np.asarray(e.labels)
            counts[f] += 1
        with np.errstate(invalid="ignore", divide="ignore"):
            table[source] = np.where(counts[:, None] > 0,
                                     per_fold / counts[:, None], 0.0)
    return table


def load_corpus_index(path: str, class_names=None) -> CorpusIndex:
    """Tab-separated lines: record_id, source, semicolon-joined labels, path."""
    entries = []
    names = list(class_names) if class_names else None
    raw_rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln in fh:
            ln = ln.rstrip("\n")
            if not ln or ln.startswith("#"):
                continue
            parts = ln.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}: expected 4 tab-separated fields: {ln!r}")
            record_id, source, labels, p = parts
            raw_rows.append((record_id, source,
                             [s for s in labels.split(";") if s], p))
    if names is None:
        names = sorted({lbl for _, _, labels, _ in raw_rows for lbl in labels})
    for record_id, source, labels, p in raw_rows:
        vec, unknown = encode_labels(labels, names)
        if unknown:
            raise ValueError(f"{path}: unknown labels {sorted(unknown)} "
                             f"for record {record_id}")
        entries.append(CorpusEntry(record_id=record_id, source=source,
                                   labels=tuple(int(v) for v in vec), path=p))
    return CorpusIndex(entries=tuple(entries), class_names=tuple(names))


def save_fold_assignment(assignment: FoldAssignment, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record_id in sorted(assignment.mapping):
            fh.write(f"{record_id}\t{assignment.mapping[record_id]}\n")


def load_fold_assignment(path: str) -> FoldAssignment:
    mapping = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln:
                continue
            record_id, fold = ln.split("\t")
            mapping[record_id] = int(fold)
    k = max(mapping.values()) + 1 if mapping else 0
    return FoldAssignment(k=k, mapping=mapping)
