import math

import numpy as np
import pytest

from dsv.baselines import (ScoreMatrix, hits_scores, median_bandwidth, minmax_rows, mmd, pick,
                           select_base, select_hits, select_mc, select_mmd, select_random, select_sel,
                           select_std, evaluate_average)
from dsv.errors import DegenerateError, ValidationError
from dsv.loss import l_dis_hat


def brute_mmd(A, B, h):
    k = lambda x, y: math.exp(-sum((p - q) ** 2 for p, q in zip(x, y)) / (2 * h * h))
    m = lambda X, Y: sum(k(x, y) for x in X for y in Y) / (len(X) * len(Y))
    return math.sqrt(max(m(A, A) + m(B, B) - 2 * m(A, B), 0.0))


def pearson(a, b):
    a, b = a - a.mean(), b - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    return 0.0 if den == 0 else float(a @ b) / den


def test_pick_tie_and_nan():
    assert pick("x", [0.5, 0.9], "minimize").chosen_index == 0
    assert pick("x", [0.3, 0.3], "minimize").chosen_index == 0
    assert pick("x", [np.nan, 0.2, 0.1], "maximize").chosen_index == 1
    assert pick("x", [np.nan], "maximize").chosen_index is None


def test_select_base_matches_recomputation(rng):
    trn = rng.normal(size=(20, 3))
    augs = [rng.normal(size=(20, 3)) + s for s in (0.5, 2.0, 4.0)]
    tests = [rng.normal(size=(15, 3)) + 1 for _ in augs]
    res = select_base(trn, augs, tests)
    crit = [l_dis_hat(trn, a, x) for a, x in zip(augs, tests)]
    assert res.chosen_index == int(np.argmin(crit))
    assert np.allclose(res.criterion, crit)


def test_select_base_skips_degenerate_candidate():
    trn = [[0.0, 0.0]]
    res = select_base(trn, [[[0.0, 0.0]], [[2.0, 0.0]]], [[[1.0, 0.0]], [[1.0, 0.0]]])
    assert res.chosen_index == 1 and np.isnan(res.criterion[0])
    with pytest.raises(DegenerateError):
        select_base(trn, [[[0.0, 0.0]]], [[[1.0, 0.0]]])


def test_mmd_examples(rng):
    A = rng.normal(size=(6, 2))
    assert mmd(A, A) == pytest.approx(0.0, abs=1e-7)
    h = 4.0
    assert mmd([[0, 0]], [[10, 0]], bandwidth=h) == pytest.approx(math.sqrt(2 * (1 - math.exp(-100 / (2 * h * h)))))
    B = rng.normal(size=(5, 2)) + 1
    pooled = np.vstack([A, B])
    dists = [np.linalg.norm(pooled[i] - pooled[j]) for i in range(11) for j in range(i + 1, 11)]
    assert median_bandwidth(pooled) == pytest.approx(float(np.median(dists)), rel=1e-14)
    assert mmd(A, B) == pytest.approx(brute_mmd(A, B, float(np.median(dists))), rel=1e-10)


def test_select_mmd_identical_candidates_tie(rng):
    trn, aug, test = rng.normal(size=(8, 2)), rng.normal(size=(8, 2)) + 3, rng.normal(size=(6, 2))
    assert select_mmd(trn, [aug, aug], [test, test]).chosen_index == 0


def test_select_mmd_prefers_matching_mixture(rng):
    trn, aug = rng.normal(size=(30, 2)), rng.normal(size=(30, 2)) + 5
    good = np.vstack([trn[:10], aug[:10]])
    bad = rng.normal(size=(20, 2)) + [20, 20]
    assert select_mmd(trn, [aug, aug], [bad, good]).chosen_index == 1


def test_select_std_examples(rng):
    assert select_std([[0, 0]], [[[1, 1]]]).criterion[0] == 0.0
    assert select_std([[0, 0]], [[[0, 0], [2, 0]]]).criterion[0] == 1.0
    trn = rng.normal(size=(7, 3))
    tests = [rng.normal(scale=s, size=(5, 3)) for s in (0.5, 3.0, 1.0)]
    crit = [np.std([np.linalg.norm(a - b) for a in trn for b in x]) for x in tests]
    res = select_std(trn, tests)
    assert np.allclose(res.criterion, crit) and res.chosen_index == int(np.argmax(crit))


def test_select_random():
    assert select_random(1, 5).chosen_index == 0
    assert select_random(10, 7).chosen_index == select_random(10, 7).chosen_index
    freq = np.bincount([select_random(4, s).chosen_index for s in range(100_000)], minlength=4) / 1e5
    assert np.all(np.abs(freq - 0.25) < 0.01)


def test_evaluate_average():
    assert evaluate_average([0.8, 0.8, 0.8]) == pytest.approx(0.8)
    assert evaluate_average([0.4, 0.6]) == 0.5
    with pytest.raises(ValidationError):
        evaluate_average([])


def test_score_matrix_validation():
    with pytest.raises(ValidationError):
        ScoreMatrix(np.zeros((0, 3)))
    with pytest.raises(ValidationError):
        ScoreMatrix([[1.0, np.inf]])


def test_mc_examples_and_oracle(rng):
    base = rng.normal(size=12)
    assert select_mc([base, base, -base]).chosen_index == 0
    assert select_mc(np.tile(base, (3, 1))).chosen_index == 0
    S = rng.normal(size=(6, 40))
    crit = [np.mean([pearson(S[i], S[j]) for j in range(6) if j != i]) for i in range(6)]
    assert np.allclose(select_mc(S).criterion, crit, atol=1e-12)


def test_sel_examples_and_oracle(rng):
    S = rng.normal(size=(5, 30))
    Z = (S - S.mean(1, keepdims=True)) / S.std(1, keepdims=True)
    target = Z.mean(0)
    crit = [pearson(row, target) for row in S]
    res = select_sel(S)
    assert np.allclose(res.criterion, crit, atol=1e-12)
    S2 = np.vstack([S, target])
    assert select_sel(S2).chosen_index == 5 or select_sel(S2).criterion[5] == pytest.approx(
        max(select_sel(S2).criterion), abs=1e-12)
    mirror = select_sel([[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]])
    assert mirror.chosen_index == 0


def test_mc_sel_affine_invariance(rng):
    S = rng.normal(size=(5, 25))
    T = S * rng.uniform(0.5, 4, size=(5, 1)) + rng.normal(size=(5, 1))
    assert np.allclose(select_mc(S).criterion, select_mc(T).criterion, atol=1e-12)
    assert np.allclose(select_sel(S).criterion, select_sel(T).criterion, atol=1e-12)


def test_hits_examples():
    assert select_hits(np.ones((4, 5))).chosen_index == 0
    S = np.zeros((3, 6))
    S[1] = 1.0
    assert select_hits(S).chosen_index == 1
    assert minmax_rows([[0.3, 0.3], [7.0, 7.0], [1.0, 3.0]]).tolist() == [[0.3, 0.3], [1.0, 1.0], [0.0, 1.0]]


def test_hits_matches_eigenvector_and_converges(rng):
    for _ in range(20):
        S = rng.uniform(size=(6, 30))
        W = minmax_rows(S)
        hubs, _, deltas = hits_scores(W)
        vals, vecs = np.linalg.eigh(W @ W.T)
        ref = np.abs(vecs[:, -1])
        assert np.allclose(hubs, ref, atol=1e-6)
        assert deltas[-1] < 1e-9


def test_hits_rejects_zero_matrix():
    with pytest.raises(DegenerateError):
        hits_scores(np.zeros((2, 3)))


def test_permutation_equivariance(rng):
    S = rng.normal(size=(6, 20))
    perm = rng.permutation(6)
    for sel in (select_mc, select_sel, select_hits):
        a, b = sel(S), sel(S[perm])
        assert np.allclose(a.criterion[perm], b.criterion, atol=1e-9)
        assert perm[b.chosen_index] == a.chosen_index
