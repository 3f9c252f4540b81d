"""Evaluation metrics: OSPA distance, cardinality error and label persistence."""
from __future__ import annotations

from collections import Counter
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment


def ospa(estimates: Sequence, truth: Sequence, c: float = 5.0, p: float = 1.0) -> float:
    """Optimal sub-pattern assignment distance between two finite point sets.

    Distances are Euclidean and cut off at ``c``; every unassigned point of the
    larger set costs ``c``. Two empty sets are at distance zero.
    """
    if c <= 0:
        raise ValueError("cutoff c must be positive")
    if p < 1:
        raise ValueError("order p must be >= 1")
    X = np.asarray(estimates, dtype=float).reshape(-1, 2)
    Y = np.asarray(truth, dtype=float).reshape(-1, 2)
    m, n = len(X), len(Y)
    if m == 0 and n == 0:
        return 0.0
    if m == 0 or n == 0:
        return float(c)
    if m > n:
        X, Y, m, n = Y, X, n, m
    d = np.minimum(np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=2), c) ** p
    rows, cols = linear_sum_assignment(d)
    total = d[rows, cols].sum() + (n - m) * c**p
    return float((total / n) ** (1.0 / p))


def cardinality_error(n_estimated: int, n_true: int) -> int:
    return int(n_estimated) - int(n_true)


def associate(
    records: Mapping[int, Sequence[tuple[str, float, float]]],
    truth: Mapping[int, Sequence[tuple[int, float, float]]],
    gate: float = 2.0,
) -> dict[int, list[str]]:
    """Truth id -> labels of the nearest estimate within ``gate`` m, one entry per associated frame.

    ``records`` maps frame -> (label, x, y); ``truth`` maps frame -> (id, x, y).
    Ties between estimates are broken by the order they appear in.
    """
    out: dict[int, list[str]] = {}
    for k in sorted(truth):
        ests = records.get(k, ())
        for tid, tx, ty in truth[k]:
            out.setdefault(tid, [])
            if not ests:
                continue
            dists = [np.hypot(x - tx, y - ty) for _, x, y in ests]
            j = int(np.argmin(dists))
            if dists[j] <= gate:
                out[tid].append(str(ests[j][0]))
    return out


def label_consistency_per_target(records, truth, gate: float = 2.0) -> dict[int, float]:
    """Truth id -> fraction of its associated frames carrying its modal label (0 if never associated)."""
    scores = {}
    for tid, labels in associate(records, truth, gate).items():
        if not labels:
            scores[tid] = 0.0
            continue
        # most_common breaks count ties by first appearance
        _, count = Counter(labels).most_common(1)[0]
        scores[tid] = count / len(labels)
    return scores


def label_consistency(records, truth, gate: float = 2.0) -> float:
    """Per-target modal-label fraction averaged over truth ids; 0 without truth."""
    scores = label_consistency_per_target(records, truth, gate)
    if not scores:
        return 0.0
    return float(np.mean(list(scores.values())))


def group_by_frame(rows: Iterable[tuple]) -> dict[int, list[tuple]]:
    """(k, *rest) rows -> frame -> list of rest tuples."""
    out: dict[int, list[tuple]] = {}
    for k, *rest in rows:
        out.setdefault(int(k), []).append(tuple(rest))
    return out
