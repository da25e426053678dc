"""Acceptance gate: the nine headline checks, each timed against its budget.

Every test prints one PASS/FAIL line (visible even under capture) and then
asserts both the property and the runtime budget. Random instances are
seeded, so reruns are deterministic.
"""

import math
import time
from fractions import Fraction

import numpy as np

from gmtree import (
    BinaryTreeSource,
    ChannelContext,
    binarize,
    binary_cov,
    check_embed_conditions,
    converse_witness,
    embed3,
    equality_rates,
    f_node,
    fixture_path,
    lattice_analytic_bound,
    lattice_mc_distortion,
    lattice_sum_rate,
    lattice_tail_prob,
    LatticePair,
    llse_equivalence_check,
    load_model,
    markov_graph,
    markov_graph_exact,
    matchup_verify,
    polymatroid_audit,
    reroot,
    separation_min_sum_rate,
    tabulate_rank,
    tree_to_cov,
)
from conftest import random_binary_tree


def _report(capsys, num, title, ok, elapsed, budget, detail=""):
    status = "PASS" if ok and elapsed < budget else "FAIL"
    line = f"[{status}] {num}. {title}: {detail} ({elapsed:.2f}s, budget {budget:.0f}s)"
    with capsys.disabled():
        print(line)
    assert ok, f"{title}: {detail}"
    assert elapsed < budget, f"{title} took {elapsed:.2f}s (budget {budget}s)"


def test_1_rational_precision_fixtures(capsys):
    t0 = time.perf_counter()
    q = Fraction(1, 4)
    full = [[1, q, q], [q, 1, q], [q, q, 1]]
    P, adj, forest = markov_graph_exact(full)
    ninth = Fraction(1, 9)
    want_full = [[ninth * (10 if i == j else -2) for j in range(3)] for i in range(3)]
    ok = P == want_full and not forest and adj.sum() == 6

    h = Fraction(1, 2)
    star = [[1, h, h, h], [h, 1, q, q], [h, q, 1, q], [h, q, q, 1]]
    Ps, adjs, forests = markov_graph_exact(star)
    third2 = Fraction(2, 3)
    want_star = [
        [3 * third2, -third2, -third2, -third2],
        [-third2, 2 * third2, 0, 0],
        [-third2, 0, 2 * third2, 0],
        [-third2, 0, 0, 2 * third2],
    ]
    ok = ok and Ps == want_star and forests

    dev = 0.0
    for M, Pe in ((full, want_full), (star, want_star)):
        Mf = np.array([[float(v) for v in row] for row in M])
        Pf, _, _ = markov_graph(Mf)
        dev = max(dev, float(np.max(np.abs(Pf - np.array([[float(v) for v in r] for r in Pe])))))
    ok = ok and dev <= 1e-12

    elapsed = time.perf_counter() - t0
    _report(capsys, 1, "exact precision matrices of the two worked fixtures",
            ok, elapsed, 1.0,
            f"rational entries exact, float path within {dev:.1e} of exact")


def test_2_embedding_round_trip_and_witnesses(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)

    def corr3():
        while True:
            A = rng.standard_normal((3, 4))
            K = A @ A.T
            d = np.sqrt(np.diag(K))
            if np.all(d > 1e-6):
                return K / np.outer(d, d)

    n_pass = n_fail = 0
    worst_rt = 0.0
    witnessed = True
    for _ in range(1000):
        K = corr3()
        if check_embed_conditions(K):
            n_fail += 1
            w = converse_witness(K)
            witnessed = witnessed and w is not None and w.product < 0
        else:
            n_pass += 1
            cov = tree_to_cov(embed3(K))
            idx = [cov.index(f"x{i}") for i in (1, 2, 3)]
            G = np.asarray(cov.matrix)[np.ix_(idx, idx)]
            worst_rt = max(worst_rt, float(np.max(np.abs(G - K))))
    ok = worst_rt <= 1e-12 and witnessed and n_pass > 0 and n_fail > 0
    elapsed = time.perf_counter() - t0
    _report(capsys, 2, "three-variable embedding round trip and converse witnesses",
            ok, elapsed, 10.0,
            f"{n_pass} embeddable within {worst_rt:.1e}, {n_fail} witnessed")


def test_3_contra_polymatroid_audit(capsys):
    t0 = time.perf_counter()
    violations = 0
    for trial in range(100):
        L = 2 + trial % 2
        tree = random_binary_tree(L, 9000 + trial)
        rng = np.random.default_rng(trial)
        a = rng.uniform(0.05, 0.95, tree.leaf_count)
        violations += len(polymatroid_audit(tabulate_rank(tree, a), tol=1e-9))
    ok = violations == 0
    elapsed = time.perf_counter() - t0
    _report(capsys, 3, "rank function is a contra-polymatroid on 100 random channels",
            ok, elapsed, 30.0, f"{violations} inequality violations at 1e-9")


def test_4_node_cap_equals_gaussian_information(capsys):
    # the closed-form cap at a split node against the covariance-based
    # conditional mutual information, both conditioned and unconditioned
    t0 = time.perf_counter()
    worst = 0.0
    for trial in range(200):
        if trial % 2 == 0:
            tree = random_binary_tree(2, 31000 + trial)
            node, l, r = (1, 1), (2, 1), (2, 2)
        else:
            tree = random_binary_tree(3, 31000 + trial)
            node, l, r = (2, 1), (3, 1), (3, 2)
        rng = np.random.default_rng(trial)
        a = rng.uniform(0.05, 0.95, tree.leaf_count)
        rates = equality_rates(tree, a)
        got = f_node(tree, node, rates[l], rates[r])
        worst = max(worst, abs(got - rates[node]))
    ok = worst <= 1e-9
    elapsed = time.perf_counter() - t0
    _report(capsys, 4, "split-node cap equals exact Gaussian information on 200 draws",
            ok, elapsed, 5.0, f"max deviation {worst:.2e}")


def test_5_inner_outer_matchup(capsys):
    t0 = time.perf_counter()

    def weight_vectors(m, seed, count=20):
        rng = np.random.default_rng(seed)
        out = [[1.0] * m]
        while len(out) < count:
            out.append(list(rng.uniform(0.1, 1.0, m)))
        return out

    def levels(tree):
        ctx = ChannelContext(tree)
        return [ctx.d_floor + f * (tree.root_var - ctx.d_floor)
                for f in (0.2, 0.5, 0.8)]

    worst = {2: 0.0, 3: 0.0}
    tol = {2: 2e-3, 3: 5e-3}
    ok = True
    cases = [(2, 101 + j) for j in range(20)] + [(3, 501 + j) for j in range(5)]
    for L, seed in cases:
        tree = random_binary_tree(L, seed)
        for j, d in enumerate(levels(tree)):
            rep = matchup_verify(tree, d, weight_vectors(tree.leaf_count, seed * 7 + j),
                                 tol=tol[L], seed=seed + j)
            worst[L] = max(worst[L], rep.max_gap)
            ok = ok and rep.passed
    elapsed = time.perf_counter() - t0
    _report(capsys, 5, "achievable and converse optima agree on every instance",
            ok, elapsed, 600.0,
            "equality holds up to optimizer tolerance: "
            f"max gap depth-2 {worst[2]:.2e} (tol 2e-3), "
            f"depth-3 {worst[3]:.2e} (tol 5e-3)")


def test_6_many_help_one_reduction(capsys):
    t0 = time.perf_counter()
    model = load_model(fixture_path("figure_tree"))
    rerooted = reroot(model, "x1")
    bt, leaf_map = binarize(rerooted)
    ok = leaf_map == {"x1": 1, "x2": 9, "x3": 13, "x4": 14}

    orig = tree_to_cov(model)
    bcov = binary_cov(bt)
    keep = ["x1", "x2", "x3", "x4"]
    oi = [orig.index(v) for v in keep]
    bi = [bcov.index("x1_1")] + [
        bcov.index(f"x{bt.depth}_{leaf_map[v]}") for v in keep[1:]
    ]
    dev = float(np.max(np.abs(
        np.asarray(orig.matrix)[np.ix_(oi, oi)]
        - np.asarray(bcov.matrix)[np.ix_(bi, bi)]
    )))
    ok = ok and dev <= 1e-10
    elapsed = time.perf_counter() - t0
    _report(capsys, 6, "reduction to complete binary many-help-one form",
            ok, elapsed, 1.0,
            f"leaf map {{1, 9, 13, 14}} reproduced, covariance dev {dev:.1e}")


def test_7_lattice_beats_separation(capsys):
    t0 = time.perf_counter()
    d = 0.5
    lp = LatticePair(8, 4)
    bound = lattice_analytic_bound(lp)
    const_rate = 2 * (lp.n + lp.m) * math.log(2.0)
    ok = bound <= d
    mses, seps = [], []
    for j, sigma2 in enumerate((1e2, 1e4, 1e6)):
        est = lattice_mc_distortion(sigma2, lp, samples=1_000_000, seed=700 + j)
        mses.append(est.value)
        ok = ok and est.value <= bound
        seps.append(separation_min_sum_rate(sigma2, d, seed=j))
        ok = ok and lattice_sum_rate(lp) == const_rate
    ok = ok and seps[0] < seps[1] < seps[2]
    elapsed = time.perf_counter() - t0
    _report(capsys, 7, "modular-lattice code beats separate quantization",
            ok, elapsed, 120.0,
            f"MC distortion ≤ {bound:.2e} ≤ {d} at every variance, "
            f"separation rates {seps[0]:.2f} < {seps[1]:.2f} < {seps[2]:.2f} nats "
            f"vs constant {const_rate:.2f}")


def test_8_wraparound_tail_bound(capsys):
    t0 = time.perf_counter()
    ok = True
    details = []
    for m in (2, 3):
        lp = LatticePair(8, m)
        est = lattice_tail_prob(100.0, lp, samples=10_000_000, seed=60 + m)
        cap = 2.0 * math.exp(-(2.0 ** (2 * m - 3)))
        ok = ok and est.value <= cap + 3 * est.se
        details.append(f"m={m}: {est.value:.2e} ≤ {cap:.2e}+3se")
    elapsed = time.perf_counter() - t0
    _report(capsys, 8, "coarse-cell wraparound probability bound",
            ok, elapsed, 60.0, "; ".join(details))


def test_9_non_gaussian_distortion_equivalence(capsys):
    t0 = time.perf_counter()
    tree = BinaryTreeSource(2, 1.0, {(2, 1): 0.9, (2, 2): 0.7},
                            {(2, 1): 0.19, (2, 2): 0.51})
    ok = True
    details = []
    for dist in ("uniform", "laplace"):
        rep = llse_equivalence_check(tree, [0.8, 0.6], dist,
                                     samples=1_000_000, seed=0)
        ok = ok and rep.passed
        details.append(f"{dist}: |gap| {abs(rep.gap):.1e} ≤ 3se {3 * rep.se:.1e}")
    elapsed = time.perf_counter() - t0
    _report(capsys, 9, "linear estimate of non-Gaussian sources matches Gaussian MMSE",
            ok, elapsed, 60.0, "; ".join(details))
