"""Alignment, discordance/separability and the DSV validation loss.

All losses take embedding sets: training embeddings ``trn``, augmented
training embeddings ``aug`` and (unlabeled) test embeddings ``test``.
The labeled quantities (alignment, discordance, separability) need the
anomalous test subset ``test_a`` and exist for analysis only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dsv.errors import DegenerateError, ValidationError
from dsv.geometry import embedding_set, mean_vector, population_std, projected_norms, set_distance

CLAMPS = ("max", "min")


@dataclass(frozen=True)
class LossBreakdown:
    """The two surrogate losses and their combination for one candidate.

    ``alignment`` is only set when test labels were supplied.
    """

    l_dis: float
    l_sep: float
    l_val: float
    alignment: float | None = None

    def as_dict(self) -> dict:
        return {"l_dis": self.l_dis, "l_sep": self.l_sep, "l_val": self.l_val, "alignment": self.alignment}


def _base_distance(trn, aug) -> float:
    base = set_distance(trn, aug)
    if base == 0.0:
        raise DegenerateError("train and augmented embeddings coincide (zero set distance)")
    return base


def alignment_loss(aug, test_a) -> float:
    """Set distance between augmented embeddings and true test anomalies."""
    return set_distance(embedding_set(aug, "aug"), embedding_set(test_a, "test_a"))


def discordance(trn, aug, test_a) -> float:
    """How far the anomalies sit off the train->aug segment, relative to its length."""
    trn = embedding_set(trn, "trn")
    aug = embedding_set(aug, "aug")
    test_a = embedding_set(test_a, "test_a")
    base = _base_distance(trn, aug)
    return (set_distance(trn, test_a) + set_distance(aug, test_a)) / base - 1.0


def separability(trn, aug, test_a) -> float:
    """Mean projection of anomalies onto every train->aug direction, in base units.

    Equals 1 when the anomalies project exactly onto the augmented points.
    """
    trn = embedding_set(trn, "trn")
    aug = embedding_set(aug, "aug", dim=trn.shape[1])
    test_a = embedding_set(test_a, "test_a", dim=trn.shape[1])
    base = _base_distance(trn, aug)
    # sum_c (c - a).(b - a) = (sum_c c - n_c a).(b - a)
    total_c = test_a.sum(axis=0)
    n_c = test_a.shape[0]
    acc = 0.0
    for i, a in enumerate(trn):
        directions = aug - a
        norms = np.sqrt(np.einsum("ij,ij->i", directions, directions))
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise DegenerateError(
                f"separability: train vector {i} coincides with augmented vector {int(zero[0])}"
            )
        acc += float(np.sum((directions @ (total_c - n_c * a)) / norms))
    return acc / (base * trn.shape[0] * aug.shape[0] * n_c)


def l_dis_hat(trn, aug, test) -> float:
    """Discordance surrogate: distance from train+aug (multiset union) to test."""
    trn = embedding_set(trn, "trn")
    aug = embedding_set(aug, "aug", dim=trn.shape[1])
    test = embedding_set(test, "test", dim=trn.shape[1])
    base = _base_distance(trn, aug)
    return set_distance(np.concatenate([trn, aug]), test) / base


def l_sep_hat(trn, aug, test) -> float:
    """Separability surrogate: spread of test projections along mean->aug directions."""
    trn = embedding_set(trn, "trn")
    aug = embedding_set(aug, "aug", dim=trn.shape[1])
    test = embedding_set(test, "test", dim=trn.shape[1])
    base = _base_distance(trn, aug)
    try:
        proj = projected_norms(mean_vector(trn), aug, test)
    except DegenerateError as exc:
        raise DegenerateError(f"l_sep_hat: augmented vector equals the train mean ({exc})") from exc
    return population_std(proj) / base


def combine(l_dis: float, l_sep: float, clamp: str = "max") -> float:
    """``l_dis - clamp(l_sep, 1/2) / l_dis``.

    ``clamp="max"`` is the standard loss; ``"min"`` caps the separability
    reward at 1/2 instead and exists for comparison only.
    """
    if clamp == "max":
        sep = max(l_sep, 0.5)
    elif clamp == "min":
        sep = min(l_sep, 0.5)
    else:
        raise ValidationError(f"unknown clamp {clamp!r}; expected one of {CLAMPS}")
    if l_dis == 0.0:
        raise DegenerateError("l_dis is zero")
    return l_dis - sep / l_dis


def l_val(trn, aug, test, labels=None, clamp: str = "max") -> LossBreakdown:
    """Full DSV validation loss for one candidate; lower is better.

    If ``labels`` (1 = anomaly) are given the alignment loss is attached
    for evaluation. Labels never influence ``l_dis``, ``l_sep`` or ``l_val``.
    """
    test = embedding_set(test, "test")
    ld = l_dis_hat(trn, aug, test)
    ls = l_sep_hat(trn, aug, test)
    alignment = None
    if labels is not None:
        mask = np.asarray(labels).astype(bool)
        if mask.shape != (test.shape[0],):
            raise ValidationError("labels length does not match the test set")
        if mask.any():
            alignment = alignment_loss(aug, test[mask])
    return LossBreakdown(l_dis=ld, l_sep=ls, l_val=combine(ld, ls, clamp), alignment=alignment)
