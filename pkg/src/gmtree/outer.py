"""Converse (outer) bound built from per-node noise-quantization rates.

Every tree node (k, i) gets a nonnegative rate r_i^(k) measuring how much the
codes reveal about the noise injected there. Feasibility at distortion d
(``frd_contains``) pins the root rate from below by half the log ratio of the
root variance to d and caps every internal node by a concave function of its
children's rates:

    f(r1, r2) = 1/2 log(1 + c1 (1 - e^(-2 r1)) + c2 (1 - e^(-2 r2))),

with c = alpha^2 * (own noise variance) / (child noise variance), the root
using its full variance in place of a noise variance. Telescoping f down to
the leaves and summing over the ancestors of an encoder subset yields a lower
bound on that subset's sum rate; minimizing the weighted combination over the
equality manifold (leaf rates free, internal rates saturated, root pinned)
gives the reported outer value. ``matchup_verify`` cross-checks it against
the independently computed inner bound.

Rates are dicts keyed by (level, position); information is in nats.
"""

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np
from scipy.optimize import brentq

from ._search import multi_start
from .errors import DomainError, ModelError
from .gauss import gaussian_cmi
from .inner import ChannelContext, build_joint, min_weighted_sum, weight_order
from .trees import BinaryTreeSource, node_sets, ancestors_set

__all__ = [
    "f_node",
    "frd_contains",
    "telescope_f",
    "rd_out_subset_bound",
    "rd_out_min_weighted",
    "rd_out_min_weighted_free",
    "matchup_verify",
    "equality_rates",
    "max_root_rate",
    "OuterSolution",
    "MatchupReport",
]

NOISE_FLOOR_REL = 1e-9  # zero noise variances are lifted to this times the root variance


def _factor(r: float) -> float:
    """1 - e^(-2r), saturating cleanly at r = +inf."""
    if r == math.inf:
        return 1.0
    if r < 0:
        raise DomainError("rates must be nonnegative", code="negative-rate")
    return -math.expm1(-2.0 * r)


class _OuterEval:
    """Per-node coefficients of one tree, with degenerate noises perturbed."""

    def __init__(self, tree: BinaryTreeSource):
        self.tree = tree
        self.L = tree.depth
        self.m = tree.leaf_count
        eps = NOISE_FLOOR_REL * tree.root_var
        self.coeffs: dict = {}
        for k in range(1, self.L):
            for i in range(1, 2 ** (k - 1) + 1):
                own = tree.root_var if k == 1 else max(tree.noise_var[(k, i)], eps)
                cs = []
                for ch in BinaryTreeSource.children((k, i)):
                    a = tree.alpha[ch]
                    nv = max(tree.noise_var[ch], eps)
                    cs.append(a * a * own / nv if own > 0 else 0.0)
                self.coeffs[(k, i)] = tuple(cs)
        self.real = [i for i in range(1, self.m + 1) if i not in tree.padding]

    def f(self, node, r1: float, r2: float) -> float:
        c1, c2 = self.coeffs[node]
        return 0.5 * math.log1p(c1 * _factor(r1) + c2 * _factor(r2))

    def compose(self, leaf_rates) -> dict:
        """All node rates with internals saturated at f of their children."""
        vals = {(self.L, i + 1): float(leaf_rates[i]) for i in range(self.m)}
        for k in range(self.L - 1, 0, -1):
            for i in range(1, 2 ** (k - 1) + 1):
                l, r = BinaryTreeSource.children((k, i))
                vals[(k, i)] = self.f((k, i), vals[l], vals[r])
        return vals


def f_node(tree: BinaryTreeSource, node, r1: float, r2: float) -> float:
    """Rate cap at an internal node given its children's rates (nats).

    Zero noise variances below are perturbed to NOISE_FLOOR_REL times the
    root variance; the cap is continuous in that limit.
    """
    k, i = node
    if not (1 <= k < tree.depth and 1 <= i <= 2 ** (k - 1)):
        raise ModelError(f"node {node} is not internal", code="unknown-node")
    return _OuterEval(tree).f((k, i), r1, r2)


def _check_rates(tree: BinaryTreeSource, r: dict) -> dict:
    want = set(tree.nodes())
    got = {tuple(k): float(v) for k, v in r.items()}
    if set(got) != want:
        raise ModelError("rates must cover every tree node", code="bad-rates")
    return got


def frd_contains(tree: BinaryTreeSource, r: dict, d: float, tol: float = 1e-10) -> bool:
    """Membership of r in the feasible noise-quantization set at distortion d."""
    if d <= 0:
        raise DomainError("distortion must be positive", code="infeasible-distortion")
    rates = _check_rates(tree, r)
    if any(v < -tol for v in rates.values()):
        return False
    ev = _OuterEval(tree)
    if tree.root_var > 0:
        pin = 0.5 * math.log(tree.root_var / d)
        if rates[(1, 1)] < pin - tol:
            return False
    for node, _ in ev.coeffs.items():
        l, rgt = BinaryTreeSource.children(node)
        cap = ev.f(node, max(rates[l], 0.0), max(rates[rgt], 0.0))
        if rates[node] > cap + tol:
            return False
    return True


def _compile_telescope(L: int, node, kept: frozenset, only: bool):
    """Evaluation plan: rates of nodes fully outside ``kept`` are zeroed
    (only-mode) or passed through (both-mode)."""
    obs = node_sets(L, node).observations
    if obs <= kept:
        return ("r", node)
    if obs.isdisjoint(kept):
        return ("r", node) if not only else ("zero",)
    l, r = BinaryTreeSource.children(node)
    return ("f", node, _compile_telescope(L, l, kept, only), _compile_telescope(L, r, kept, only))


def _eval_telescope(plan, rates: dict, ev: _OuterEval) -> float:
    tag = plan[0]
    if tag == "r":
        return rates[plan[1]]
    if tag == "zero":
        return 0.0
    return ev.f(plan[1], _eval_telescope(plan[2], rates, ev), _eval_telescope(plan[3], rates, ev))


def telescope_f(tree: BinaryTreeSource, node, A: Iterable[int], r: dict, mode: str = "both") -> float:
    """Recursive f-composition of r at ``node`` relative to leaf set A.

    Nodes whose observations sit fully inside A (or fully outside) bottom the
    recursion out at their own rate; in "only" mode the rates of nodes fully
    outside A are zeroed instead. Mixed nodes recurse through f.
    """
    if mode not in ("both", "only"):
        raise ModelError("mode must be 'both' or 'only'", code="bad-mode")
    rates = _check_rates(tree, r)
    kept = frozenset(int(i) for i in A)
    if not kept <= set(range(1, tree.leaf_count + 1)):
        raise ModelError("A must be a set of leaf positions", code="bad-subset")
    ev = _OuterEval(tree)
    plan = _compile_telescope(tree.depth, tuple(node), kept, mode == "only")
    return _eval_telescope(plan, rates, ev)


def _compile_bound(L: int, A: frozenset):
    """Rows of the subset bound: ancestor nodes of A paired with the
    telescope plan that credits complement-side rates back."""
    rows = []
    comp = frozenset(range(1, 2 ** (L - 1) + 1)) - A
    for k in range(1, L + 1):
        for i in sorted(ancestors_set(L, A, k)):
            rows.append(((k, i), _compile_telescope(L, (k, i), comp, True)))
    return rows


def _eval_bound(rows, rates: dict, ev: _OuterEval) -> float:
    return sum(rates[node] - _eval_telescope(plan, rates, ev) for node, plan in rows)


def rd_out_subset_bound(tree: BinaryTreeSource, r: dict, A: Iterable[int]) -> float:
    """Lower bound on the sum rate of encoder subset A from rates r.

    Sums, over every level and every ancestor of A, the node rate minus the
    telescoped credit for what the complement's codes already convey.
    """
    rates = _check_rates(tree, r)
    Aset = frozenset(int(i) for i in A)
    if not Aset:
        return 0.0
    if not Aset <= set(range(1, tree.leaf_count + 1)):
        raise ModelError("A must be a set of leaf positions", code="bad-subset")
    ev = _OuterEval(tree)
    return _eval_bound(_compile_bound(tree.depth, Aset), rates, ev)


def max_root_rate(tree: BinaryTreeSource) -> float:
    """Supremum of the composed root rate (padding rates pinned to zero)."""
    ev = _OuterEval(tree)
    leaf = [0.0 if (i + 1) in tree.padding else math.inf for i in range(ev.m)]
    return ev.compose(leaf)[(1, 1)]


def equality_rates(tree: BinaryTreeSource, alpha) -> dict:
    """Noise-quantization rates induced by a Gaussian test channel.

    r at node (k, i) is I(x_(k,i); u_{O(k,i)} | parent) (no conditioning at
    the root); these saturate every internal cap and witness feasibility at
    the channel's achieved distortion. Oracle-grade (covariance based), used
    by verification paths rather than optimizers.
    """
    joint = build_joint(tree, alpha)
    M = joint.matrix
    L = tree.depth
    n_nodes = len(joint.labels) - tree.leaf_count
    out = {}
    for k in range(1, L + 1):
        for i in range(1, 2 ** (k - 1) + 1):
            xi = joint.index(f"x{k}_{i}")
            obs = sorted(node_sets(L, (k, i)).observations)
            uo = [n_nodes + j - 1 for j in obs]
            cond = [] if k == 1 else [joint.index("x%d_%d" % BinaryTreeSource.parent((k, i)))]
            out[(k, i)] = gaussian_cmi(M, [xi], uo, cond)
    return out


class OuterSolution(NamedTuple):
    value: float
    rates: dict
    theta: np.ndarray


def _weighted_plan(L: int, weights) -> list[tuple[float, list]]:
    """Nested suffix sets of the ascending weight order with their deltas."""
    perm = weight_order(weights)  # descending
    sigma = list(reversed(perm))  # ascending
    w = [float(v) for v in weights]
    plans = []
    prev = 0.0
    for j, s in enumerate(sigma):
        delta = w[s - 1] - prev
        prev = w[s - 1]
        if delta <= 0.0:
            continue
        A = frozenset(sigma[j:])
        plans.append((delta, _compile_bound(L, A)))
    return plans


def rd_out_min_weighted(
    tree: BinaryTreeSource,
    weights,
    d: float,
    *,
    starts: int = 32,
    sweeps: int = 200,
    golden_iters: int = 18,
    tol: float = 1e-6,
    seed: int = 0,
    warm=None,
    _ev: _OuterEval | None = None,
) -> OuterSolution:
    """Best (largest) computable lower bound on the weighted sum rate.

    Searches the equality manifold: leaf rates run free along a direction,
    every internal rate saturates its cap, and the root is pinned to
    half log(root variance / d) by a scalar solve. Returns the minimized
    weighted combination of nested-subset bounds (a valid lower bound for
    every point of the rate region at distortion d).
    """
    ev = _ev if _ev is not None else _OuterEval(tree)
    m = ev.m
    w = [float(v) for v in weights]
    if len(w) != m:
        raise ModelError(f"expected {m} weights", code="bad-weights")
    if any(v < 0 for v in w):
        raise DomainError("weights must be nonnegative", code="bad-weights")
    if d <= 0:
        raise DomainError("distortion must be positive", code="infeasible-distortion")
    s2 = tree.root_var
    zero = OuterSolution(0.0, {n: 0.0 for n in tree.nodes()}, np.zeros(m))
    if s2 == 0.0 or d >= s2:
        return zero
    rho = 0.5 * math.log(s2 / d)
    cap = max_root_rate(tree)
    if rho >= cap * (1 - 1e-12):
        raise DomainError(
            f"distortion {d} requires root rate {rho:.6f} beyond the achievable "
            f"maximum {cap:.6f}",
            code="infeasible-distortion",
        )
    plans = _weighted_plan(tree.depth, w)
    real0 = [i - 1 for i in ev.real]

    def solve_rates(x):
        mx = max(x[i] for i in real0)
        if mx <= 1e-12:
            return None
        u = [0.0] * m
        for i in real0:
            u[i] = x[i] / mx
        pos = [v for v in u if v > 0]
        t_hi = 60.0 / min(pos)

        def g(t):
            return ev.compose([t * ui for ui in u])[(1, 1)] - rho

        if g(t_hi) < 0:
            return None
        t = brentq(g, 0.0, t_hi, xtol=1e-13, rtol=1e-13, maxiter=300)
        return ev.compose([t * ui for ui in u])

    def objective(x):
        rates = solve_rates(x)
        if rates is None:
            return math.inf
        return sum(delta * _eval_bound(rows, rates, ev) for delta, rows in plans)

    extra = []
    if warm is not None:
        warm = [float(v) for v in warm]
        if len(warm) == m and max(warm) > 0:
            extra.append(warm)
    best_x, best_f = multi_start(
        objective,
        m,
        real0,
        starts=starts,
        seed=seed,
        sweeps=sweeps,
        golden_iters=golden_iters,
        tol=tol,
        extra_starts=extra,
    )
    rates = solve_rates(best_x)
    if rates is None or not math.isfinite(best_f):
        raise DomainError(
            "no feasible rate assignment found for the requested distortion",
            code="infeasible-distortion",
        )
    theta = np.array([best_x[i] if i in real0 else 0.0 for i in range(m)])
    return OuterSolution(best_f, rates, theta)


def rd_out_min_weighted_free(
    tree: BinaryTreeSource,
    weights,
    d: float,
    *,
    starts: int = 32,
    sweeps: int = 120,
    golden_iters: int = 16,
    tol: float = 1e-6,
    seed: int = 0,
) -> float:
    """Audit twin of rd_out_min_weighted over fully free node rates.

    Candidate rates are projected into feasibility (internal caps applied
    bottom-up, root pinned) instead of being parameterized on the equality
    manifold. Slower and only used to confirm that the restricted
    parameterization is not leaving value on the table.
    """
    ev = _OuterEval(tree)
    m = ev.m
    w = [float(v) for v in weights]
    if d <= 0:
        raise DomainError("distortion must be positive", code="infeasible-distortion")
    s2 = tree.root_var
    if s2 == 0.0 or d >= s2:
        return 0.0
    rho = 0.5 * math.log(s2 / d)
    if rho >= max_root_rate(tree) * (1 - 1e-12):
        raise DomainError("unreachable distortion", code="infeasible-distortion")
    plans = _weighted_plan(tree.depth, w)
    L = tree.depth
    coords_nodes = [
        n for n in tree.nodes()
        if n != (1, 1) and not (n[0] == L and n[1] in tree.padding)
    ]
    rmax = 4.0 * rho + 8.0

    def sweep(x, scale):
        """Bottom-up cap pass at the scaled proposal; root left unpinned."""
        rates = {n: 0.0 for n in tree.nodes()}
        for val, n in zip(x, coords_nodes):
            rates[n] = val * rmax * scale
        root_cap = rho
        for k in range(L - 1, 0, -1):
            for i in range(1, 2 ** (k - 1) + 1):
                node = (k, i)
                l, r = BinaryTreeSource.children(node)
                capv = ev.f(node, rates[l], rates[r])
                if node == (1, 1):
                    root_cap = capv
                    rates[node] = rho
                else:
                    rates[node] = min(rates[node], capv)
        if L == 1:
            rates[(1, 1)] = rho
        return rates, root_cap

    def project(x):
        if not any(v > 0 for v in x):
            x = [1.0] * len(x)
        rates, root_cap = sweep(x, 1.0)
        if root_cap >= rho:
            return rates
        # repair: inflate the proposal along its ray until the root cap
        # reaches the pin (the cap is nondecreasing in the scale)
        t_hi = 2.0
        while sweep(x, t_hi)[1] < rho:
            t_hi *= 2.0
            if t_hi > 2.0 ** 60:
                return None  # support of the ray cannot reach the pin
        t = brentq(lambda s: sweep(x, s)[1] - rho, 1.0, t_hi,
                   xtol=1e-13, rtol=1e-13, maxiter=300)
        return sweep(x, t)[0]

    def objective(x):
        rates = project(x)
        if rates is None:
            return math.inf
        return sum(delta * _eval_bound(rows, rates, ev) for delta, rows in plans)

    _, best_f = multi_start(
        objective,
        len(coords_nodes),
        list(range(len(coords_nodes))),
        starts=starts,
        seed=seed,
        sweeps=sweeps,
        golden_iters=golden_iters,
        tol=tol,
    )
    return best_f


@dataclass
class MatchupReport:
    """Per-weight comparison of the two independently optimized bounds."""

    distortion: float
    tol: float
    rows: list = field(default_factory=list)  # (weights, inner, outer, gap)

    @property
    def max_gap(self) -> float:
        return max((abs(g) for *_, g in self.rows), default=0.0)

    @property
    def passed(self) -> bool:
        return all(abs(g) <= self.tol for *_, g in self.rows)


def matchup_verify(
    tree: BinaryTreeSource,
    d: float,
    weight_vectors,
    *,
    tol: float = 2e-3,
    starts: int = 16,
    warm_starts: int = 6,
    sweeps: int = 60,
    golden_iters: int = 18,
    seed: int = 0,
) -> MatchupReport:
    """Run both bound optimizers per weight vector and report the gaps.

    The two computations share nothing beyond the weight-ordering convention;
    agreement within combined optimizer tolerance is the machine check that
    the region's inner and outer descriptions coincide. Later weight vectors
    reuse the previous optimum as a warm start with a reduced start budget.
    """
    report = MatchupReport(d, tol)
    ictx = ChannelContext(tree)
    ev = _OuterEval(tree)
    warm_in = warm_out = None
    for idx, wv in enumerate(weight_vectors):
        budget = starts if idx == 0 else warm_starts
        isol = min_weighted_sum(
            tree, wv, d,
            starts=budget, sweeps=sweeps, golden_iters=golden_iters,
            seed=seed + idx, warm=warm_in, _ctx=ictx,
        )
        osol = rd_out_min_weighted(
            tree, wv, d,
            starts=budget, sweeps=sweeps, golden_iters=golden_iters,
            seed=seed + idx, warm=warm_out, _ev=ev,
        )
        warm_in, warm_out = isol.alpha, osol.theta
        report.rows.append(
            (tuple(float(v) for v in wv), isol.value, osol.value, isol.value - osol.value)
        )
    return report
