"""Baseline model selectors.

Embedding-based: ``base`` (discordance surrogate alone), ``mmd`` (the same
ratio with kernel MMD in place of the set distance), ``std`` (spread of
train-test distances) and ``rand`` (seeded uniform pick).

Score-based internal performance measures operate only on the candidates x
test-samples score matrix: ``mc`` (mean correlation with the other models),
``sel`` (correlation with the averaged pseudo ground truth) and ``hits``
(hub score on the model/sample bipartite graph).

Every selector returns a :class:`SelectorResult`. Ties go to the lowest
candidate index, which on an ascending grid means the smallest HP.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from dsv.errors import DegenerateError, ValidationError
from dsv.geometry import embedding_set, pairwise_distances, population_std
from dsv.loss import l_dis_hat

SELECTOR_NAMES = ("avg", "rand", "base", "mmd", "std", "mc", "sel", "hits", "dsv")

HITS_TOL = 1e-9
HITS_MAX_ITER = 100


@dataclass(frozen=True)
class ScoreMatrix:
    """Anomaly scores, one row per candidate and one column per test sample."""

    scores: np.ndarray
    candidate_ids: tuple = ()

    def __post_init__(self) -> None:
        arr = np.array(self.scores, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValidationError("score matrix must be a non-empty 2-D array")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("score matrix contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)
        ids = tuple(self.candidate_ids) or tuple(range(arr.shape[0]))
        if len(ids) != arr.shape[0]:
            raise ValidationError("candidate_ids length does not match the number of rows")
        object.__setattr__(self, "candidate_ids", ids)

    @property
    def sample_count(self) -> int:
        return self.scores.shape[1]


@dataclass
class SelectorResult:
    method: str
    chosen_index: int | None
    criterion: np.ndarray
    direction: str
    info: dict = field(default_factory=dict)


def pick(method: str, criterion, direction: str, info: dict | None = None) -> SelectorResult:
    """Index of the extreme finite criterion value; NaN marks an excluded candidate."""
    crit = np.asarray(criterion, dtype=np.float64)
    finite = np.isfinite(crit)
    if not finite.any():
        chosen = None
    elif direction == "minimize":
        chosen = int(np.flatnonzero(crit == crit[finite].min())[0])
    elif direction == "maximize":
        chosen = int(np.flatnonzero(crit == crit[finite].max())[0])
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return SelectorResult(method, chosen, crit, direction, dict(info or {}))


def _require_chosen(result: SelectorResult, reasons: Sequence[str] = ()) -> SelectorResult:
    if result.chosen_index is None:
        detail = "; ".join(reasons)
        raise DegenerateError(f"{result.method}: no valid candidate" + (f" ({detail})" if detail else ""))
    return result


# -- embedding-based -------------------------------------------------------------------------------

def select_base(trn, augs: Sequence, tests: Sequence) -> SelectorResult:
    """Argmin of the discordance surrogate over candidates.

    ``augs[i]`` and ``tests[i]`` are candidate ``i``'s augmented and test
    embeddings (the test set may differ per candidate when encoders differ).
    """
    crit = np.full(len(augs), np.nan)
    reasons = []
    for i, (aug, test) in enumerate(zip(augs, tests)):
        try:
            crit[i] = l_dis_hat(trn, aug, test)
        except DegenerateError as exc:
            reasons.append(f"candidate {i}: {exc}")
    return _require_chosen(pick("base", crit, "minimize"), reasons)


def median_bandwidth(X) -> float:
    """Median of the distinct-pair distances within ``X`` (self-pairs excluded)."""
    X = embedding_set(X, "X")
    if X.shape[0] < 2:
        raise DegenerateError("median heuristic needs at least two points")
    D = pairwise_distances(X, X)
    iu = np.triu_indices(X.shape[0], k=1)
    h = float(np.median(D[iu]))
    if h == 0.0:
        raise DegenerateError("median pairwise distance is zero")
    return h


def mmd(A, B, bandwidth: float | None = None) -> float:
    """Biased (V-statistic) MMD with a Gaussian kernel, returned as a distance.

    ``k(x, y) = exp(-||x - y||^2 / (2 h^2))``; ``h`` defaults to the median
    pairwise distance of the pooled sample.
    """
    A = embedding_set(A, "A")
    B = embedding_set(B, "B", dim=A.shape[1])
    h = median_bandwidth(np.concatenate([A, B])) if bandwidth is None else float(bandwidth)
    if not h > 0.0:
        raise DegenerateError("kernel bandwidth must be positive")
    scale = 2.0 * h * h

    def kmean(X, Y):
        D = pairwise_distances(X, Y)
        return float(np.exp(-(D * D) / scale).mean())

    sq = kmean(A, A) + kmean(B, B) - 2.0 * kmean(A, B)
    return float(np.sqrt(max(sq, 0.0)))


def select_mmd(trn, augs: Sequence, tests: Sequence) -> SelectorResult:
    """Base with MMD in both numerator and denominator of the ratio."""
    trn = embedding_set(trn, "trn")
    crit = np.full(len(augs), np.nan)
    reasons = []
    for i, (aug, test) in enumerate(zip(augs, tests)):
        try:
            denom = mmd(trn, aug)
            if denom == 0.0:
                raise DegenerateError("zero MMD between train and augmented sets")
            crit[i] = mmd(np.concatenate([trn, embedding_set(aug, "aug")]), test) / denom
        except DegenerateError as exc:
            reasons.append(f"candidate {i}: {exc}")
    return _require_chosen(pick("mmd", crit, "minimize"), reasons)


def select_std(trn, tests: Sequence) -> SelectorResult:
    """Argmax of the spread of all train-test pairwise distances."""
    crit = np.array([population_std(pairwise_distances(trn, test)) for test in tests])
    return pick("std", crit, "maximize")


def select_random(n_candidates: int, seed: int) -> SelectorResult:
    """Uniform draw from a generator seeded with ``seed``."""
    if n_candidates < 1:
        raise ValidationError("select_random: need at least one candidate")
    rng = np.random.default_rng(seed)
    chosen = int(rng.integers(n_candidates))
    crit = np.zeros(n_candidates)
    crit[chosen] = 1.0
    return SelectorResult("rand", chosen, crit, "maximize", {"seed": int(seed)})


def evaluate_average(candidate_aucs) -> float:
    """Mean realized AUC over all candidates (evaluation-only reference row)."""
    arr = np.asarray(candidate_aucs, dtype=np.float64)
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise ValidationError("evaluate_average: needs one finite AUC per candidate")
    return float(arr.mean())


# -- score-based internal performance measures ---------------------------------------------------

def zscore_rows(scores) -> np.ndarray:
    """Standardize each row; a constant row becomes all zeros."""
    S = np.asarray(scores, dtype=np.float64)
    centered = S - S.mean(axis=1, keepdims=True)
    sd = np.sqrt((centered * centered).mean(axis=1, keepdims=True))
    out = np.zeros_like(centered)
    np.divide(centered, sd, out=out, where=sd > 0)
    return out


def correlation_matrix(scores) -> np.ndarray:
    """Pearson correlations between rows; any pair with a constant row gets 0."""
    Z = zscore_rows(scores)
    return (Z @ Z.T) / Z.shape[1]


def _as_matrix(scores) -> ScoreMatrix:
    return scores if isinstance(scores, ScoreMatrix) else ScoreMatrix(scores)


def select_mc(scores) -> SelectorResult:
    """Model centrality: mean correlation of each model with all the others."""
    S = _as_matrix(scores).scores
    m = S.shape[0]
    if m == 1:
        return pick("mc", [0.0], "maximize")
    C = correlation_matrix(S)
    crit = (C.sum(axis=1) - np.diag(C)) / (m - 1)
    return pick("mc", crit, "maximize")


def select_sel(scores) -> SelectorResult:
    """Correlation of each model with the mean of the standardized score rows."""
    S = _as_matrix(scores).scores
    Z = zscore_rows(S)
    pseudo = zscore_rows(Z.mean(axis=0, keepdims=True))[0]
    crit = (Z @ pseudo) / Z.shape[1]
    return pick("sel", crit, "maximize", {"pseudo_ground_truth": pseudo})


def minmax_rows(scores) -> np.ndarray:
    """Rescale each row to [0, 1].

    A constant row has no range to stretch; it keeps its value clipped to
    [0, 1], so already-normalized constant rows pass through unchanged.
    """
    S = np.asarray(scores, dtype=np.float64)
    lo = S.min(axis=1, keepdims=True)
    span = S.max(axis=1, keepdims=True) - lo
    out = np.clip(S, 0.0, 1.0)
    np.divide(S - lo, span, out=out, where=span > 0)
    return out


def hits_scores(W, tol: float = HITS_TOL, max_iter: int = HITS_MAX_ITER):
    """Hub and authority vectors of the bipartite graph with weight matrix ``W``.

    Rows are hubs, columns authorities. Returns ``(hubs, authorities,
    deltas)`` where ``deltas[k]`` is the L2 distance between successive hub
    iterates.
    """
    W = np.asarray(W, dtype=np.float64)
    if not np.any(W):
        raise DegenerateError("hits: weight matrix is all zero")
    hubs = np.full(W.shape[0], 1.0 / np.sqrt(W.shape[0]))
    auth = np.full(W.shape[1], 1.0 / np.sqrt(W.shape[1]))
    deltas = []
    for _ in range(max_iter):
        new_auth = W.T @ hubs
        new_auth /= np.linalg.norm(new_auth)
        new_hubs = W @ new_auth
        new_hubs /= np.linalg.norm(new_hubs)
        change = max(np.max(np.abs(new_hubs - hubs)), np.max(np.abs(new_auth - auth)))
        deltas.append(float(np.linalg.norm(new_hubs - hubs)))
        hubs, auth = new_hubs, new_auth
        if change < tol:
            break
    return hubs, auth, deltas


def select_hits(scores) -> SelectorResult:
    """Argmax hub score, with models as hubs and min-max normalized scores as edge weights."""
    S = _as_matrix(scores).scores
    hubs, auth, deltas = hits_scores(minmax_rows(S))
    return pick("hits", hubs, "maximize", {"authorities": auth, "deltas": deltas, "iterations": len(deltas)})
