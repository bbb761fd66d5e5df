import itertools

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings, strategies as st

from dsv.errors import DegenerateError, ValidationError
from dsv.stats import auc, average_rank, rankdata, spearman, wilcoxon_signed_rank


def pair_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    hits = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return hits / (len(pos) * len(neg))


def enum_wilcoxon(d):
    d = [v for v in d if v != 0]
    r = rankdata(np.abs(d))
    w = sum(ri for ri, v in zip(r, d) if v > 0)
    ge = sum(1 for signs in itertools.product((0, 1), repeat=len(d))
             if sum(ri for ri, s in zip(r, signs) if s) >= w - 1e-9)
    return ge / 2 ** len(d)


def test_auc_examples():
    assert auc([0.1, 0.2, 0.9], [0, 0, 1]) == 1.0
    assert auc([0.5, 0.5], [0, 1]) == 0.5
    assert auc([0.3, 0.7, 0.5, 0.2], [1, 0, 1, 0]) == 0.5


def test_auc_rejects():
    with pytest.raises(ValidationError):
        auc([1, 2], [1, 1])
    with pytest.raises(ValidationError):
        auc([1, 2], [0, 2])
    with pytest.raises(ValidationError):
        auc([1, 2, 3], [0, 1])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(0, 1)), min_size=2, max_size=30))
def test_auc_matches_pair_count_and_transforms(pairs):
    s = [float(p[0]) for p in pairs]
    y = [p[1] for p in pairs]
    if len(set(y)) < 2:
        return
    a = auc(s, y)
    assert a == pytest.approx(pair_auc(s, y), abs=1e-12)
    assert auc(np.exp(np.array(s)) * 3 + 1, y) == pytest.approx(a, abs=1e-12)
    if len(set(s)) == len(s):
        assert a + auc([-v for v in s], y) == pytest.approx(1.0, abs=1e-12)


def test_rankdata_matches_scipy(rng):
    x = rng.integers(0, 6, size=40).astype(float)
    assert np.array_equal(rankdata(x), scipy.stats.rankdata(x))


def test_spearman(rng):
    x, y = rng.normal(size=30), rng.normal(size=30)
    assert spearman(x, y) == pytest.approx(scipy.stats.spearmanr(x, y)[0], abs=1e-12)
    assert np.isnan(spearman([1, 1, 1], [1, 2, 3]))


def test_wilcoxon_all_positive_n10():
    x = np.arange(10) + 1.0
    assert wilcoxon_signed_rank(x, np.zeros(10)) == pytest.approx(1 / 1024, abs=1e-15)


def test_wilcoxon_exact_matches_sign_enumeration(rng):
    for n in range(5, 13):
        d = np.round(rng.normal(size=n), 1)  # rounding creates ties and zeros
        if np.count_nonzero(d) < 5:
            continue
        assert wilcoxon_signed_rank(d, np.zeros(n), mode="exact") == pytest.approx(enum_wilcoxon(d), abs=1e-12)


def test_wilcoxon_against_scipy(rng):
    x, y = rng.normal(size=20) + 0.3, rng.normal(size=20)
    ref = scipy.stats.wilcoxon(x, y, alternative="greater", method="exact").pvalue
    assert wilcoxon_signed_rank(x, y) == pytest.approx(ref, rel=1e-10)
    x, y = rng.normal(size=84) + 0.2, rng.normal(size=84)
    ref = scipy.stats.wilcoxon(x, y, alternative="greater", method="approx", correction=True).pvalue
    assert wilcoxon_signed_rank(x, y) == pytest.approx(ref, rel=1e-8)


def test_wilcoxon_null_is_centered(rng):
    ps = [wilcoxon_signed_rank(rng.normal(size=30), rng.normal(size=30)) for _ in range(400)]
    assert abs(np.mean(ps) - 0.5) < 0.05


def test_wilcoxon_degenerate():
    with pytest.raises(DegenerateError):
        wilcoxon_signed_rank([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])
    with pytest.raises(ValidationError):
        wilcoxon_signed_rank([1, 2], [0, 0])


def test_average_rank_examples(rng):
    assert list(average_rank([[0.9], [0.5]])) == [1.0, 2.0]
    assert list(average_rank([[0.7], [0.7]])) == [1.5, 1.5]
    M = rng.integers(0, 4, size=(9, 21)) / 4
    assert average_rank(M).sum() * 1 == pytest.approx(9 * 10 / 2, abs=1e-12)
