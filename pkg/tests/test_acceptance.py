"""Exit criteria, one test each. Every test prints a single PASS/FAIL line."""

import hashlib
import itertools
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from dsv import io
from dsv.baselines import SELECTOR_NAMES, hits_scores, minmax_rows, mmd
from dsv.cli import main
from dsv.geometry import set_distance
from dsv.harness import SelectionRun, evaluate_tables, run_selection
from dsv.stats import auc, rankdata, wilcoxon_signed_rank
from dsv.synth import SynthConfig, alignment_sweep, default_grid, generate_run
from dsv.theory import certify, corollary_family, lemma2_identity, random_lemma2_instance

pytestmark = pytest.mark.acceptance

AUGS = ("cutout", "cutavg", "cutdiff", "cutpaste")
TARGET_MEAN = {"cutout": 0.813, "cutavg": 0.806, "cutdiff": 0.811, "cutpaste": 0.884}
TARGET_RANK = {"cutout": 3.79, "cutavg": 4.19, "cutdiff": 3.60, "cutpaste": 4.57}


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def _evaluation():
    return evaluate_tables(io.load_fixtures())


def test_c01_fixture_means(verdict):
    t0 = time.perf_counter()
    rep = _evaluation()
    elapsed = time.perf_counter() - t0
    got = {a: rep["mean_auc"][a]["dsv"] for a in AUGS}
    errs = {a: abs(got[a] - TARGET_MEAN[a]) for a in AUGS}
    ok = all(e <= 5e-4 for e in errs.values()) and elapsed < 1.0
    detail = ", ".join(f"{a} {got[a]:.7f} (|err| {errs[a]:.2e})" for a in AUGS)
    verdict(1, ok, f"{detail}; tol 5e-4; {elapsed:.3f}s")


def test_c02_fixture_significance(verdict):
    t0 = time.perf_counter()
    rep = _evaluation()
    elapsed = time.perf_counter() - t0
    pooled = rep["wilcoxon"]["pooled"]["dsv"]
    others = [m for m in SELECTOR_NAMES if m != "dsv"]
    worst = max(pooled[m] for m in others)
    ok = rep["wilcoxon"]["pairs"] == 84 and all(pooled[m] < 1e-3 for m in others) and elapsed < 1.0
    verdict(2, ok, f"{rep['wilcoxon']['pairs']} pairs, max p over 8 baselines {worst:.2e} (< 1e-3); {elapsed:.3f}s")


def test_c03_fixture_ranks(verdict):
    rep = _evaluation()
    got = {a: rep["average_rank"][a]["dsv"] for a in AUGS}
    ok = all(abs(got[a] - TARGET_RANK[a]) <= 0.2 for a in AUGS)
    detail = ", ".join(f"{a} {got[a]:.3f} vs {TARGET_RANK[a]}" for a in AUGS)
    verdict(3, ok, f"{detail}; tol 0.2")


def test_c04_lemma1_certification(verdict, capsys):
    t0 = time.perf_counter()
    rep = certify(instances=1000, seed=0)
    code = main(["verify", "--instances", "1000", "--seed", "0"])
    capsys.readouterr()
    elapsed = time.perf_counter() - t0
    rec = next(r for r in rep["records"] if r["lemma"] == "lemma1")
    ok = rec["passed"] == 1000 and code == 0 and elapsed < 30.0
    verdict(4, ok, f"{rec['passed']}/1000 sandwiched (max violation {rec['max_violation']:.1e}), "
                   f"verify exit {code}; {elapsed:.1f}s")


def test_c05_lemma2_identity(verdict):
    ex = lemma2_identity([0, 0], [2, 0], [[0, 0], [2, 0]], [0, 1])
    rng = np.random.default_rng(5)
    errs = []
    for _ in range(500):
        chk = lemma2_identity(*random_lemma2_instance(rng))
        errs.append(abs(chk.lhs - chk.rhs))
    n_ok = sum(e < 1e-9 for e in errs)
    ok = ex.lhs == 0.5 and ex.rhs == 0.5 and n_ok == 500
    verdict(5, ok, f"worked example lhs={ex.lhs} rhs={ex.rhs}; {n_ok}/500 random instances within 1e-9 "
                   f"(max |lhs-rhs| {max(errs):.3g})")


def test_c06_corollary_regime(verdict):
    rng = np.random.default_rng(6)
    fams = [corollary_family(rng) for _ in range(20)]
    mono = all(g[0] > g[1] > g[2] for g in fams)
    final = max(g[-1] for g in fams)
    ok = mono and final < 0.01
    verdict(6, ok, f"20 families, monotone={mono}, worst gap at 1e3 scale {final:.2e} (< 1e-2)")


def test_c07_synthetic_alignment(verdict):
    t0 = time.perf_counter()
    cfg = SynthConfig()
    assert cfg.hp_grid == default_grid() and len(cfg.hp_grid) == 17
    out = alignment_sweep(cfg, seeds=range(20))
    elapsed = time.perf_counter() - t0
    med = float(np.median([o.spearman for o in out]))
    hit = sum(o.within_one_step for o in out) / len(out)
    ok = med >= 0.8 and hit >= 0.8 and elapsed < 60.0
    verdict(7, ok, f"median Spearman {med:.3f} (>= 0.8), argmin within one step {hit:.0%} (>= 80%); {elapsed:.1f}s")


def _brute_set_distance(A, B):
    return sum(math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b))) for a in A for b in B) / (len(A) * len(B))


def _brute_mmd(A, B):
    P = np.vstack([A, B])
    d = [math.dist(P[i], P[j]) for i in range(len(P)) for j in range(i + 1, len(P))]
    h = float(np.median(d))
    k = lambda X, Y: sum(math.exp(-math.dist(x, y) ** 2 / (2 * h * h)) for x in X for y in Y) / (len(X) * len(Y))
    return math.sqrt(max(k(A, A) + k(B, B) - 2 * k(A, B), 0.0))


def _brute_auc(s, y):
    pos = [a for a, l in zip(s, y) if l]
    neg = [a for a, l in zip(s, y) if not l]
    return sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg) / (len(pos) * len(neg))


def _brute_wilcoxon(d):
    d = [v for v in d if v != 0]
    r = rankdata(np.abs(d))
    w = sum(ri for ri, v in zip(r, d) if v > 0)
    return sum(sum(ri for ri, s in zip(r, signs) if s) >= w - 1e-9
               for signs in itertools.product((0, 1), repeat=len(d))) / 2 ** len(d)


def test_c08_oracle_equivalence(verdict):
    rng = np.random.default_rng(8)
    worst = {"set_distance": 0.0, "mmd": 0.0, "auc": 0.0, "hits": 0.0, "wilcoxon": 0.0}
    for _ in range(200):
        dim = int(rng.integers(1, 6))
        A = rng.normal(size=(int(rng.integers(1, 12)), dim))
        B = rng.normal(size=(int(rng.integers(1, 12)), dim)) + rng.normal()
        ref = _brute_set_distance(A, B)
        worst["set_distance"] = max(worst["set_distance"], abs(set_distance(A, B) - ref) / max(ref, 1e-300))

        A2 = rng.normal(size=(int(rng.integers(2, 10)), dim))
        B2 = rng.normal(size=(int(rng.integers(2, 10)), dim)) + rng.uniform(0, 2)
        worst["mmd"] = max(worst["mmd"], abs(mmd(A2, B2) - _brute_mmd(A2, B2)))

        n = int(rng.integers(2, 40))
        y = rng.integers(0, 2, size=n)
        y[0], y[1] = 0, 1
        s = np.round(rng.normal(size=n), 1)
        worst["auc"] = max(worst["auc"], abs(auc(s, y) - _brute_auc(s, y)))

        W = minmax_rows(rng.uniform(size=(int(rng.integers(2, 8)), int(rng.integers(3, 30)))))
        hubs, _, _ = hits_scores(W)
        ref_h = np.abs(np.linalg.eigh(W @ W.T)[1][:, -1])
        worst["hits"] = max(worst["hits"], float(np.max(np.abs(hubs - ref_h))))

        m = int(rng.integers(5, 13))
        d = np.round(rng.normal(size=m), 1)
        d[d == 0] = 0.05
        worst["wilcoxon"] = max(worst["wilcoxon"],
                                abs(wilcoxon_signed_rank(d, np.zeros(m), mode="exact") - _brute_wilcoxon(d)))
    tol = {"set_distance": 1e-12, "mmd": 1e-10, "auc": 1e-12, "hits": 1e-6, "wilcoxon": 1e-12}
    ok = all(worst[k] <= tol[k] for k in tol)
    verdict(8, ok, ", ".join(f"{k} {worst[k]:.1e} (<= {tol[k]:.0e})" for k in tol) + "; 200 instances each")


def test_c09_label_firewall(verdict):
    rng = np.random.default_rng(9)
    changed = 0
    for k in range(50):
        grid = tuple(sorted(rng.choice(default_grid(), size=int(rng.integers(3, 8)), replace=False)))
        cfg = SynthConfig(dim=int(rng.integers(4, 17)), n_trn=int(rng.integers(20, 80)),
                          n_test_n=int(rng.integers(5, 30)), n_test_a=int(rng.integers(5, 30)),
                          ortho_noise=float(rng.uniform(0, 6)), hp_grid=grid, seed=int(rng.integers(2 ** 31)))
        run = generate_run(cfg)
        seed = int(rng.integers(1000))
        base = {m: r.chosen_index for m, r in run_selection(run, seed=seed).results.items()}
        for labels in (None, 1 - run.labels, rng.permutation(run.labels)):
            alt = SelectionRun(run.task_id, run.Z_trn, run.Z_test, run.candidates, labels)
            got = {m: r.chosen_index for m, r in run_selection(alt, seed=seed).results.items()}
            changed += got != base
    verdict(9, changed == 0, f"50 runs x 3 label corruptions (flip, shuffle, delete): {changed} selection changes")


def _digest(path: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(path.rglob("*")):
        if p.is_file():
            h.update(p.name.encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_c10_determinism(verdict, tmp_path):
    cli = [sys.executable, "-m", "dsv"]
    digests, reports = [], []
    for k in range(2):
        out = tmp_path / f"run{k}"
        subprocess.run(cli + ["synth", "--out", str(out), "--seed", "7"], check=True, capture_output=True)
        digests.append(_digest(out))
        rep = tmp_path / f"sel{k}.json"
        subprocess.run(cli + ["select", "--run", str(tmp_path / "run0"), "--seed", "7", "--out", str(rep)],
                       check=True, capture_output=True)
        reports.append(rep.read_bytes())
    ok = digests[0] == digests[1] and reports[0] == reports[1]
    verdict(10, ok, f"synth digests equal={digests[0] == digests[1]}, "
                    f"select reports byte-identical={reports[0] == reports[1]} ({len(reports[0])} bytes)")
