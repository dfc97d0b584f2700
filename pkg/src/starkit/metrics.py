"""Threshold-free and thresholded multi-label metrics with bootstrap CIs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PredictionSet:
    """Per-record class scores and binary labels, with optional source tags."""

    scores: np.ndarray
    labels: np.ndarray
    record_ids: tuple[str, ...] = ()
    sources: tuple[str, ...] = ()
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        scores = np.atleast_2d(np.asarray(self.scores, dtype=np.float64))
        labels = np.atleast_2d(np.asarray(self.labels, dtype=np.int64))
        if scores.shape != labels.shape:
            raise ValueError("scores and labels must share shape")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)
        if not self.record_ids:
            object.__setattr__(
                self, "record_ids",
                tuple(f"r{i}" for i in range(scores.shape[0])))
        if not self.sources:
            object.__setattr__(self, "sources", ("",) * scores.shape[0])

    @property
    def n_records(self) -> int:
        return self.scores.shape[0]

    @property
    def n_classes(self) -> int:
        return self.scores.shape[1]

    def subset(self, rows) -> "PredictionSet":
        rows = np.asarray(rows)
        return PredictionSet(
            scores=self.scores[rows],
            labels=self.labels[rows],
            record_ids=tuple(self.record_ids[i] for i in rows),
            sources=tuple(self.sources[i] for i in rows),
            class_names=self.class_names,
        )


def _binary_auroc(scores: np.ndarray, labels: np.ndarray) -> float | None:
    """Mann-Whitney AUROC with ties counted one half; None when degenerate."""
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    # Average ranks over tied groups.
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = float(ranks[pos].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def _binary_ap(scores: np.ndarray, labels: np.ndarray) -> float | None:
    """Average precision: mean precision at each positive's rank.

    Ties are resolved by a stable sort on (score descending, input order).
    """
    n_pos = int((labels == 1).sum())
    if n_pos == 0:
        return None
    order = np.argsort(-scores, kind="mergesort")
    sorted_labels = labels[order]
    hits = np.cumsum(sorted_labels)
    ranks = np.arange(1, labels.size + 1)
    precision_at_pos = hits[sorted_labels == 1] / ranks[sorted_labels == 1]
    return float(np.mean(precision_at_pos))


def _aggregate(preds: PredictionSet, per_class_fn):
    per_class = []
    excluded = []
    for c in range(preds.n_classes):
        value = per_class_fn(preds.scores[:, c], preds.labels[:, c])
        per_class.append(np.nan if value is None else value)
        if value is None:
            excluded.append(c)
    defined = [v for v in per_class if not np.isnan(v)]
    macro = float(np.mean(defined)) if defined else float("nan")
    micro = per_class_fn(preds.scores.ravel(), preds.labels.ravel())
    micro = float("nan") if micro is None else float(micro)
    return np.asarray(per_class), macro, micro, excluded


def auroc(preds: PredictionSet):
    """(per-class, macro, micro, excluded classes); macro skips degenerates."""
    return _aggregate(preds, _binary_auroc)


def average_precision(preds: PredictionSet):
    """(per-class, macro, micro, excluded classes)."""
    return _aggregate(preds, _binary_ap)


def _f1(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom > 0 else 0.0


def _youden_j(tp, fp, fn, tn):
    tpr = tp / (tp + fn) if tp + fn else 0.0
    fpr = fp / (fp + tn) if fp + tn else 0.0
    return tpr - fpr


def select_threshold(preds: PredictionSet, criterion: str = "youden_j"):
    """Per-class threshold maximizing the criterion over observed scores.

    A record is predicted positive at score >= threshold.  Among maximizing
    candidates the lowest threshold wins.  Degenerate classes default to 0.5
    and are reported.
    """
    if criterion not in ("youden_j", "f1"):
        raise ValueError(f"unknown criterion {criterion!r}")
    thresholds = np.empty(preds.n_classes)
    degenerate = []
    for c in range(preds.n_classes):
        scores = preds.scores[:, c]
        labels = preds.labels[:, c]
        n_pos = int((labels == 1).sum())
        n_neg = labels.size - n_pos
        if n_pos == 0 or n_neg == 0:
            thresholds[c] = 0.5
            degenerate.append(c)
            continue
        best_value = -np.inf
        best_threshold = None
        for cand in sorted(set(scores)):
            predicted = scores >= cand
            tp = int(np.sum(predicted & (labels == 1)))
            fp = int(np.sum(predicted & (labels == 0)))
            fn = n_pos - tp
            tn = n_neg - fp
            value = (_f1(tp, fp, fn) if criterion == "f1"
                     else _youden_j(tp, fp, fn, tn))
            if value > best_value + 1e-15:
                best_value = value
                best_threshold = cand
        thresholds[c] = best_threshold
    return thresholds, degenerate


_METRIC_IDS = {
    "auroc_micro": lambda p: auroc(p)[2],
    "auroc_macro": lambda p: auroc(p)[1],
    "ap_micro": lambda p: average_precision(p)[2],
    "ap_macro": lambda p: average_precision(p)[1],
}


def evaluate_metric(preds: PredictionSet, metric: str) -> float:
    if metric not in _METRIC_IDS:
        raise ValueError(f"unknown metric {metric!r}; known: {sorted(_METRIC_IDS)}")
    return _METRIC_IDS[metric](preds)


def bootstrap_ci(preds: PredictionSet, metric: str, n_boot: int = 1000,
                 alpha: float = 0.05, seed: int = 0):
    """Record-level percentile bootstrap, stratified by source when present.

    Returns (point, lower, upper, redrawn) where redrawn counts resamples
    rejected because the metric was undefined on them.
    """
    if n_boot < 100:
        raise ValueError("n_boot must be >= 100")
    point = evaluate_metric(preds, metric)
    rng = np.random.default_rng(seed)
    sources = np.asarray(preds.sources)
    groups = [np.where(sources == s)[0] for s in sorted(set(preds.sources))]
    values = []
    redrawn = 0
    while len(values) < n_boot:
        rows = np.concatenate([
            g[rng.integers(0, g.size, size=g.size)] for g in groups
        ])
        value = evaluate_metric(preds.subset(rows), metric)
        if np.isnan(value):
            redrawn += 1
            if redrawn > 100 * n_boot:
                raise RuntimeError("metric undefined on virtually all resamples")
            continue
        values.append(value)
    lower, upper = np.quantile(values, [alpha / 2.0, 1.0 - alpha / 2.0])
    return float(point), float(lower), float(upper), redrawn


def load_predictions(path: str) -> PredictionSet:
    """Header row of class names; rows: id, source, C scores, C labels (TSV)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty predictions file")
    class_names = [c for c in lines[0].split("\t") if c]
    c = len(class_names)
    ids, sources, scores, labels = [], [], [], []
    for ln in lines[1:]:
        parts = ln.split("\t")
        if len(parts) != 2 + 2 * c:
            raise ValueError(
                f"{path}: row has {len(parts)} fields, expected {2 + 2 * c}")
        ids.append(parts[0])
        sources.append(parts[1])
        scores.append([float(v) for v in parts[2:2 + c]])
        labels.append([int(v) for v in parts[2 + c:]])
    return PredictionSet(
        scores=np.asarray(scores), labels=np.asarray(labels),
        record_ids=tuple(ids), sources=tuple(sources),
        class_names=tuple(class_names),
    )


def save_predictions(preds: PredictionSet, path: str) -> None:
    names = preds.class_names or tuple(
        f"class{i}" for i in range(preds.n_classes))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(names) + "\n")
        for i in range(preds.n_records):
            row = [preds.record_ids[i], preds.sources[i]]
            row += [repr(float(v)) for v in preds.scores[i]]
            row += [str(int(v)) for v in preds.labels[i]]
            fh.write("\t".join(row) + "\n")
