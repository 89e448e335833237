"""Ranking metrics and multi-seed / multi-method aggregation."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class MetricReport:
    auc_roc: float
    auc_pr: float
    n_pos: int
    n_neg: int
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _prepare(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise MetricError(f"scores ({s.size}) and labels ({y.size}) differ in length")
    if not np.all((y == 0) | (y == 1)):
        raise MetricError("labels must be 0 or 1")
    return s, y.astype(np.int64)


def auc_roc(scores, labels) -> float:
    """Mann-Whitney estimate of P(score_pos > score_neg), ties counted half."""
    s, y = _prepare(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("auc_roc needs both positive and negative labels")
    ranks = rankdata(s)  # average ranks, so ties contribute 1/2
    u = float(ranks[y == 1].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def auc_pr(scores, labels) -> float:
    """Average precision with rows ordered by descending score, ties broken by
    ascending index."""
    s, y = _prepare(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise MetricError("auc_pr needs at least one positive label")
    order = np.lexsort((np.arange(s.size), -s))
    hits = np.cumsum(y[order])
    ranks = np.flatnonzero(y[order] == 1) + 1
    return math.fsum(int(hits[r - 1]) / int(r) for r in ranks) / n_pos


def evaluate(scores, labels, seed: int = 0) -> MetricReport:
    s, y = _prepare(scores, labels)
    n_pos = int(y.sum())
    return MetricReport(auc_roc(s, y), auc_pr(s, y), n_pos, y.size - n_pos, seed)


def aggregate(runs: dict[tuple[str, str], list[MetricReport]]) -> dict:
    """Average seeds per (method, dataset) cell, rank methods per dataset
    (1 = best, ties share the average rank) and average the ranks.

    ``runs`` maps ``(method, dataset)`` to that cell's reports.
    """
    methods = sorted({m for m, _ in runs})
    datasets = sorted({d for _, d in runs})
    counts = {len(v) for v in runs.values()}
    missing = [(m, d) for m in methods for d in datasets if (m, d) not in runs]
    if missing:
        raise MetricError(f"missing cells: {missing}")
    if len(counts) > 1 or 0 in counts:
        raise MetricError(f"unequal run counts per cell: {sorted(counts)}")

    means = defaultdict(dict)
    for (m, d), reports in runs.items():
        means[m][d] = {
            "auc_roc": float(np.mean([r.auc_roc for r in reports])),
            "auc_pr": float(np.mean([r.auc_pr for r in reports])),
        }

    avg_rank = {}
    for metric in ("auc_roc", "auc_pr"):
        per_dataset = []
        for d in datasets:
            vals = np.array([means[m][d][metric] for m in methods])
            per_dataset.append(rankdata(-vals))
        ranks = np.mean(per_dataset, axis=0)
        avg_rank[metric] = {m: float(r) for m, r in zip(methods, ranks)}

    return {
        "methods": methods,
        "datasets": datasets,
        "runs_per_cell": counts.pop(),
        "mean": {m: dict(means[m]) for m in methods},
        "avg_rank": avg_rank,
    }
