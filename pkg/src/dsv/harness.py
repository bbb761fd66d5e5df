"""Selection runs, anomaly scoring, and aggregate evaluation.

A :class:`SelectionRun` holds one task: the training embeddings, the test
embeddings (optionally labeled) and the candidate models, one per
augmentation hyperparameter. ``run_selection`` applies DSV and the baseline
selectors to it without ever exposing the labels to them.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from dsv import baselines
from dsv.baselines import SELECTOR_NAMES, ScoreMatrix, SelectorResult
from dsv.errors import DegenerateError, ValidationError
from dsv.geometry import embedding_set
from dsv.loss import LossBreakdown, l_val
from dsv.stats import auc, average_rank as _average_rank, wilcoxon_signed_rank

REPORT_SCHEMA = "dsv.selection/1"
EVALUATION_SCHEMA = "dsv.evaluation/1"


@dataclass(frozen=True)
class CandidateModel:
    """One augmentation setting.

    ``Z_test`` overrides the run's test embeddings for this candidate; each
    candidate has its own encoder, so the test set can look different
    through each of them.
    """

    hp_value: float
    Z_aug: np.ndarray
    scores: np.ndarray | None = None
    Z_test: np.ndarray | None = None


@dataclass(frozen=True)
class SelectionRun:
    task_id: str
    Z_trn: np.ndarray
    Z_test: np.ndarray
    candidates: tuple
    labels: np.ndarray | None = None

    def __post_init__(self) -> None:
        trn = embedding_set(self.Z_trn, "Z_trn")
        dim = trn.shape[1]
        test = embedding_set(self.Z_test, "Z_test", dim=dim)
        object.__setattr__(self, "Z_trn", trn)
        object.__setattr__(self, "Z_test", test)
        if len(self.candidates) == 0:
            raise ValidationError(f"{self.task_id}: a run needs at least one candidate")
        cands = []
        for i, c in enumerate(self.candidates):
            if not (np.isfinite(c.hp_value) and c.hp_value > 0):
                raise ValidationError(f"{self.task_id}: candidate {i} has non-positive hp {c.hp_value!r}")
            aug = embedding_set(c.Z_aug, f"candidate {i} Z_aug", dim=dim)
            ctest = None if c.Z_test is None else embedding_set(c.Z_test, f"candidate {i} Z_test", dim=dim)
            n_test = test.shape[0] if ctest is None else ctest.shape[0]
            if ctest is not None and ctest.shape[0] != test.shape[0]:
                raise ValidationError(f"{self.task_id}: candidate {i} test set has {ctest.shape[0]} rows, run has {test.shape[0]}")
            scores = None
            if c.scores is not None:
                scores = np.array(c.scores, dtype=np.float64).ravel()
                if scores.shape != (n_test,) or not np.all(np.isfinite(scores)):
                    raise ValidationError(f"{self.task_id}: candidate {i} scores must be {n_test} finite values")
                scores.setflags(write=False)
            cands.append(CandidateModel(float(c.hp_value), aug, scores, ctest))
        object.__setattr__(self, "candidates", tuple(cands))
        if self.labels is not None:
            y = np.array(self.labels).ravel()
            if y.shape != (test.shape[0],):
                raise ValidationError(f"{self.task_id}: {y.size} labels for {test.shape[0]} test vectors")
            if not np.all(np.isin(y, (0, 1))):
                raise ValidationError(f"{self.task_id}: labels must be 0 or 1")
            y = y.astype(np.int64)
            y.setflags(write=False)
            object.__setattr__(self, "labels", y)

    @property
    def dim(self) -> int:
        return self.Z_trn.shape[1]

    def test_for(self, i: int) -> np.ndarray:
        c = self.candidates[i]
        return self.Z_test if c.Z_test is None else c.Z_test

    def unlabeled(self) -> "SelectionRun":
        """The selector-facing view: identical except that labels are removed."""
        return replace(self, labels=None)

    @property
    def hp_values(self) -> list:
        return [c.hp_value for c in self.candidates]


@dataclass(frozen=True)
class EvaluationTable:
    methods: tuple
    tasks: tuple
    auc: np.ndarray  # methods x tasks

    def __post_init__(self) -> None:
        arr = np.array(self.auc, dtype=np.float64)
        if arr.shape != (len(self.methods), len(self.tasks)):
            raise ValidationError(f"AUC matrix shape {arr.shape} does not match {len(self.methods)} methods x {len(self.tasks)} tasks")
        if not np.all((arr >= 0.0) & (arr <= 1.0)):
            raise ValidationError("AUC values must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "auc", arr)
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "tasks", tuple(self.tasks))

    def column(self, method: str) -> np.ndarray:
        return self.auc[self.methods.index(method)]


# -- anomaly scoring --------------------------------------------------------------------------------

class GaussianScorer:
    """Negative log-likelihood style anomaly scores from a Gaussian fit to training embeddings.

    With one component the score is the squared Mahalanobis distance under
    covariance ``cov + lam * I`` with ``lam = 1e-6 * trace(cov) / dim``.
    More components use a scikit-learn Gaussian mixture and return the
    negative log-likelihood.
    """

    def __init__(self, Z_trn, n_components: int = 1, seed: int = 0) -> None:
        trn = embedding_set(Z_trn, "Z_trn")
        if trn.shape[0] < 2:
            raise ValidationError("gaussian scoring needs at least two training vectors")
        self.n_components = n_components
        if n_components == 1:
            self.mean_ = trn.mean(axis=0)
            centered = trn - self.mean_
            cov = centered.T @ centered / trn.shape[0]
            lam = 1e-6 * np.trace(cov) / trn.shape[1]
            cov = cov + lam * np.eye(trn.shape[1])
            try:
                self.chol_ = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as exc:
                raise DegenerateError("regularized training covariance is singular") from exc
        else:
            from sklearn.mixture import GaussianMixture

            self.gmm_ = GaussianMixture(n_components=n_components, reg_covar=1e-6, random_state=seed).fit(trn)

    def score(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        if self.n_components == 1:
            w = np.linalg.solve(self.chol_, (Z - self.mean_).T)
            return np.einsum("ij,ij->j", w, w)
        return -self.gmm_.score_samples(Z)


def gaussian_score(Z_trn, z) -> float:
    """Squared Mahalanobis distance of one vector under the regularized training Gaussian."""
    return float(GaussianScorer(Z_trn).score(np.asarray(z, dtype=np.float64))[0])


def candidate_scores(run: SelectionRun, n_components: int = 1) -> ScoreMatrix:
    """Scores stored on the candidates, or Gaussian scores for candidates without any."""
    rows = []
    scorer = None
    for i, c in enumerate(run.candidates):
        if c.scores is not None:
            rows.append(c.scores)
            continue
        if scorer is None:
            scorer = GaussianScorer(run.Z_trn, n_components=n_components)
        rows.append(scorer.score(run.test_for(i)))
    return ScoreMatrix(np.vstack(rows), tuple(run.hp_values))


# -- selection --------------------------------------------------------------------------------------

def worker_count() -> int:
    """Worker cap from ``DSV_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("DSV_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValidationError(f"DSV_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise ValidationError("DSV_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def candidate_losses(run: SelectionRun, clamp: str = "max") -> list:
    """``(LossBreakdown | None, error | None)`` per candidate, in candidate order."""

    def one(i):
        try:
            return l_val(run.Z_trn, run.candidates[i].Z_aug, run.test_for(i), clamp=clamp), None
        except DegenerateError as exc:
            return None, str(exc)

    idx = range(len(run.candidates))
    workers = min(worker_count(), len(run.candidates))
    if workers <= 1:
        return [one(i) for i in idx]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, idx))


def select_dsv(losses: Sequence) -> SelectorResult:
    crit = np.array([np.nan if b is None else b.l_val for b, _ in losses])
    result = baselines.pick("dsv", crit, "minimize")
    if result.chosen_index is None:
        reasons = "; ".join(f"candidate {i}: {err}" for i, (_, err) in enumerate(losses))
        raise DegenerateError(f"dsv: no valid candidate ({reasons})")
    return result


@dataclass
class SelectionReport:
    task_id: str
    hp_values: list
    seed: int
    clamp: str
    losses: list
    results: dict
    candidate_auc: list | None = None
    average_auc: float | None = None
    notes: list = field(default_factory=list)

    def chosen_hp(self, method: str):
        idx = self.results[method].chosen_index
        return None if idx is None else self.hp_values[idx]

    def realized_auc(self, method: str):
        idx = self.results[method].chosen_index
        if self.candidate_auc is None or idx is None:
            return None
        return self.candidate_auc[idx]

    def to_dict(self) -> dict:
        methods = []
        for name, res in self.results.items():
            methods.append({
                "method": name,
                "chosen_index": res.chosen_index,
                "chosen_hp": self.chosen_hp(name),
                "direction": res.direction,
                "criterion": [_num(v) for v in res.criterion],
                "auc": self.realized_auc(name),
            })
        candidates = []
        for i, (hp, (b, err)) in enumerate(zip(self.hp_values, self.losses)):
            candidates.append({
                "index": i,
                "hp": hp,
                "valid": b is not None,
                "l_dis": None if b is None else _num(b.l_dis),
                "l_sep": None if b is None else _num(b.l_sep),
                "l_val": None if b is None else _num(b.l_val),
                "error": err,
            })
        return {
            "schema": REPORT_SCHEMA,
            "task_id": self.task_id,
            "seed": self.seed,
            "clamp": self.clamp,
            "methods": methods,
            "candidates": candidates,
            "candidate_auc": self.candidate_auc,
            "average_auc": self.average_auc,
            "notes": list(self.notes),
        }


def _num(v):
    v = float(v)
    return v if np.isfinite(v) else None


def run_selection(run: SelectionRun, methods: Iterable[str] = SELECTOR_NAMES, seed: int = 0,
                  clamp: str = "max", n_components: int = 1) -> SelectionReport:
    """Apply each requested selector to ``run``.

    Selectors only see ``run.unlabeled()``. When labels are present the
    realized AUC of every candidate is attached afterwards for evaluation.
    """
    methods = list(dict.fromkeys(methods))
    unknown = [m for m in methods if m not in SELECTOR_NAMES]
    if unknown:
        raise ValidationError(f"unknown method(s): {', '.join(unknown)}")
    view = run.unlabeled()
    augs = [c.Z_aug for c in view.candidates]
    tests = [view.test_for(i) for i in range(len(view.candidates))]
    losses = candidate_losses(view, clamp=clamp)
    notes = []

    score_matrix = None
    if any(m in ("mc", "sel", "hits") for m in methods) or run.labels is not None:
        score_matrix = candidate_scores(view, n_components=n_components)

    results: dict = {}
    for m in methods:
        if m == "avg":
            continue
        if m == "dsv":
            results[m] = select_dsv(losses)
        elif m == "base":
            results[m] = baselines.select_base(view.Z_trn, augs, tests)
        elif m == "mmd":
            results[m] = baselines.select_mmd(view.Z_trn, augs, tests)
        elif m == "std":
            results[m] = baselines.select_std(view.Z_trn, tests)
        elif m == "rand":
            results[m] = baselines.select_random(len(view.candidates), seed)
            notes.append("rand is a seeded uniform draw over candidates, not per-inference HP resampling")
        elif m == "mc":
            results[m] = baselines.select_mc(score_matrix)
        elif m == "sel":
            results[m] = baselines.select_sel(score_matrix)
        elif m == "hits":
            results[m] = baselines.select_hits(score_matrix)

    candidate_auc = None
    average_auc = None
    if run.labels is not None:
        y = run.labels
        if 0 < int(y.sum()) < y.size:
            candidate_auc = [auc(row, y) for row in score_matrix.scores]
            average_auc = baselines.evaluate_average(candidate_auc)
        else:
            notes.append("labels contain a single class; AUC not computed")
    elif "avg" in methods:
        notes.append("avg needs labels and was skipped")

    return SelectionReport(run.task_id, run.hp_values, int(seed), clamp, losses, results,
                           candidate_auc, average_auc, notes)


# -- aggregate evaluation --------------------------------------------------------------------------

def aggregate_results(table: EvaluationTable) -> dict:
    """Mean AUC per method across tasks."""
    return {m: float(v) for m, v in zip(table.methods, table.auc.mean(axis=1))}


def average_rank(table: EvaluationTable) -> dict:
    """Mean per-task rank per method (1 = highest AUC, ties averaged)."""
    return {m: float(v) for m, v in zip(table.methods, _average_rank(table.auc))}


def wilcoxon_matrix(tables: Sequence[EvaluationTable]) -> dict:
    """One-sided p-value for "row method beats column method" over pooled (task, table) pairs."""
    methods = tables[0].methods
    for t in tables[1:]:
        if t.methods != methods:
            raise ValidationError("tables must share the same method order to be pooled")
    pooled = np.hstack([t.auc for t in tables])
    out: dict = {}
    for i, a in enumerate(methods):
        out[a] = {}
        for j, b in enumerate(methods):
            if i == j:
                out[a][b] = None
                continue
            try:
                out[a][b] = wilcoxon_signed_rank(pooled[i], pooled[j], alternative="greater")
            except (DegenerateError, ValidationError):
                out[a][b] = None
    return out


def evaluate_tables(tables: dict, per_augmentation: bool = False) -> dict:
    """Mean AUC, average rank and pooled Wilcoxon p-values for named tables."""
    report = {
        "schema": EVALUATION_SCHEMA,
        "augmentations": list(tables),
        "mean_auc": {name: aggregate_results(t) for name, t in tables.items()},
        "average_rank": {name: average_rank(t) for name, t in tables.items()},
        "wilcoxon": {"pooled": wilcoxon_matrix(list(tables.values())),
                     "pairs": int(sum(len(t.tasks) for t in tables.values()))},
        "notes": ["rand values are taken from the fixture tables as given; they are not recomputed"],
    }
    if per_augmentation:
        report["wilcoxon"]["per_augmentation"] = {name: wilcoxon_matrix([t]) for name, t in tables.items()}
    return report
