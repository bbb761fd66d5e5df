"""Rank statistics: tie-averaged ranks, ROC AUC, signed-rank test, method ranking."""

from __future__ import annotations

import math

import numpy as np

from dsv.errors import DegenerateError, ValidationError

# Largest n (non-zero differences) handled by exact enumeration.
EXACT_MAX_N = 25


def rankdata(values) -> np.ndarray:
    """Ascending ranks starting at 1; tied values share their average rank."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    n = arr.size
    order = np.argsort(arr, kind="mergesort")
    sorted_vals = arr[order]
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc(scores, labels) -> float:
    """Rank-based ROC AUC; higher scores mean "more anomalous", label 1 = anomaly.

    Equivalent to the Mann-Whitney U statistic over (anomaly, normal) pairs,
    with tied pairs counted as one half.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ValidationError(f"auc: {s.size} scores but {y.size} labels")
    if not np.all(np.isin(y, (0, 1))):
        raise ValidationError("auc: labels must be 0 or 1")
    if not np.all(np.isfinite(s)):
        raise ValidationError("auc: non-finite score")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("auc: need at least one positive and one negative label")
    r = rankdata(s)
    u = r[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def spearman(x, y) -> float:
    """Spearman rank correlation with tie-averaged ranks (NaN if a side is constant)."""
    rx = rankdata(x)
    ry = rankdata(y)
    if rx.size != ry.size:
        raise ValidationError("spearman: length mismatch")
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    denom = math.sqrt(float(np.dot(rx, rx)) * float(np.dot(ry, ry)))
    if denom == 0.0:
        return float("nan")
    return float(np.dot(rx, ry) / denom)


def _exact_upper_tail(ranks: np.ndarray, w_obs: float) -> float:
    """P(W+ >= w_obs) when each rank's sign is an independent fair coin.

    Ranks may be half-integers (ties), so the count distribution is built
    over doubled ranks.
    """
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:-r]
        counts = counts + shifted
    threshold = int(math.ceil(2.0 * w_obs - 1e-9))
    return float(counts[threshold:].sum() / 2.0 ** ranks.size)


def wilcoxon_signed_rank(x, y, *, alternative: str = "greater", mode: str = "auto") -> float:
    """Paired signed-rank test; returns the p-value.

    ``alternative="greater"`` tests whether ``x`` tends to exceed ``y``.
    Zero differences are dropped and tied magnitudes get averaged ranks.
    ``mode="auto"`` enumerates the null distribution exactly for up to 25
    non-zero pairs and otherwise uses the normal approximation with tie
    correction and a 0.5 continuity correction.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValidationError("wilcoxon: x and y must have equal length")
    if alternative not in ("greater", "less", "two-sided"):
        raise ValidationError(f"wilcoxon: unknown alternative {alternative!r}")
    d = x - y
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        raise DegenerateError("wilcoxon: all differences are zero")
    if n < 5:
        raise ValidationError(f"wilcoxon: need at least 5 non-zero differences, got {n}")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    total = float(ranks.sum())
    if mode == "auto":
        mode = "exact" if n <= EXACT_MAX_N else "normal"

    if mode == "exact":
        upper = _exact_upper_tail(ranks, w_plus)
        lower = _exact_upper_tail(ranks, total - w_plus)  # P(W+ <= w) by symmetry
        if alternative == "greater":
            p = upper
        elif alternative == "less":
            p = lower
        else:
            p = 2.0 * min(upper, lower)
    elif mode == "normal":
        mean = n * (n + 1) / 4.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
        sd = math.sqrt(var)
        if alternative == "greater":
            z = (w_plus - mean - 0.5) / sd
            p = 0.5 * math.erfc(z / math.sqrt(2.0))
        elif alternative == "less":
            z = (w_plus - mean + 0.5) / sd
            p = 0.5 * math.erfc(-z / math.sqrt(2.0))
        else:
            z = (abs(w_plus - mean) - 0.5) / sd
            p = math.erfc(max(z, 0.0) / math.sqrt(2.0))
    else:
        raise ValidationError(f"wilcoxon: unknown mode {mode!r}")
    return float(min(1.0, p))


def average_rank(auc_matrix) -> np.ndarray:
    """Mean rank per method; rows are methods, columns tasks.

    Within each task the highest AUC gets rank 1 and ties share the
    average of their positions.
    """
    M = np.asarray(auc_matrix, dtype=np.float64)
    if M.ndim != 2 or M.size == 0:
        raise ValidationError("average_rank: expected a non-empty methods x tasks matrix")
    ranks = np.column_stack([rankdata(-M[:, j]) for j in range(M.shape[1])])
    return ranks.mean(axis=1)
