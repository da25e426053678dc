"""Achievable (inner) bound: Gaussian test channels plus binning.

Each encoder i quantizes its leaf observation through the variance-preserving
test channel u_i = alpha_i x_i + w_i, Var(w_i) = (1 - alpha_i^2) Var(x_i),
alpha_i in [0, 1]. For a fixed channel the achievable rate vectors form a
contra-polymatroid {R : sum_{i in A} R_i >= f(A)} whose rank function is
f(A) = I(x_A; u_A | u_{A^c}); its vertices come from permutation chains, and
a weighted sum rate is minimized at the vertex of the descending-weight
permutation. The channel itself is searched by seeded multi-start coordinate
descent over directions with an exact scalar repair onto the distortion
boundary.

Leaf/encoder positions are 1-based throughout the public subset API, matching
the tree node indexing.
"""

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from . import gauss
from ._search import multi_start
from .errors import DomainError, ModelError
from .gauss import Cov, gaussian_cmi
from .trees import BinaryTreeSource, binary_cov

__all__ = [
    "build_joint",
    "rank_f",
    "distortion",
    "RankFunction",
    "tabulate_rank",
    "polymatroid_audit",
    "vertex_rates",
    "weight_order",
    "min_weighted_sum",
    "region_slice",
    "InnerSolution",
    "ChannelContext",
]


# ---------------------------------------------------------------------------
# small dense kernels (pure Python beats numpy dispatch at these sizes)


def _logdet(M) -> float:
    """log det of a small positive-definite matrix; -inf when singular."""
    n = len(M)
    if n == 0:
        return 0.0
    a = [row[:] for row in M]
    acc = 0.0
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(a[r][col]))
        if a[piv][col] <= 0.0:  # PSD input: a nonpositive pivot means singular
            return -math.inf
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        acc += math.log(p)
        for r in range(col + 1, n):
            f = a[r][col] / p
            if f != 0.0:
                arow, crow = a[r], a[col]
                for j in range(col + 1, n):
                    arow[j] -= f * crow[j]
    return acc


def _solve(M, b):
    """Gaussian elimination with partial pivoting; raises on tiny pivots."""
    n = len(M)
    a = [row[:] + [bv] for row, bv in zip(M, b)]
    scale = max((abs(v) for row in M for v in row), default=0.0)
    floor = 1e-13 * max(scale, 1e-300)
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(a[r][col]))
        if abs(a[piv][col]) <= floor:
            raise ZeroDivisionError("near-singular system")
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        for r in range(col + 1, n):
            f = a[r][col] / p
            if f != 0.0:
                arow, crow = a[r], a[col]
                for j in range(col + 1, n + 1):
                    arow[j] -= f * crow[j]
    x = [0.0] * n
    for i in range(n - 1, -1, -1):
        s = a[i][n] - sum(a[i][j] * x[j] for j in range(i + 1, n))
        x[i] = s / a[i][i]
    return x


# ---------------------------------------------------------------------------
# channels and rank functions


def _check_alpha(tree: BinaryTreeSource, alpha) -> np.ndarray:
    a = np.asarray(alpha, dtype=float)
    if a.shape != (tree.leaf_count,):
        raise ModelError(
            f"alpha must have one entry per leaf ({tree.leaf_count})", code="bad-channel"
        )
    if np.any(a < -1e-12) or np.any(a > 1 + 1e-12):
        raise ModelError("alpha entries must lie in [0, 1]", code="bad-channel")
    a = np.clip(a, 0.0, 1.0)
    for i in tree.padding:
        if a[i - 1] != 0.0:
            raise ModelError(
                f"padding leaf {i} must have alpha 0", code="padding-rate-pinned"
            )
    return a


def build_joint(tree: BinaryTreeSource, alpha) -> Cov:
    """Covariance of all tree nodes plus the quantized observations u_1..u_m.

    Var(u_i) equals the leaf variance (variance-preserving channel) and every
    cross-covariance picks up one factor alpha_i.
    """
    a = _check_alpha(tree, alpha)
    cov = binary_cov(tree)
    K = cov.matrix
    n = K.shape[0]
    m = tree.leaf_count
    L = tree.depth
    leaf_idx = [cov.index(f"x{L}_{i}") for i in range(1, m + 1)]
    J = np.zeros((n + m, n + m))
    J[:n, :n] = K
    for j, li in enumerate(leaf_idx):
        J[n + j, :n] = a[j] * K[li, :]
        J[:n, n + j] = J[n + j, :n]
        for j2, lj in enumerate(leaf_idx):
            J[n + j, n + j2] = a[j] * a[j2] * K[li, lj]
        J[n + j, n + j] = K[li, li]
    labels = cov.labels + tuple(f"u{i}" for i in range(1, m + 1))
    return Cov(labels, J)


def _joint_layout(joint: Cov):
    u_pos = [i for i, l in enumerate(joint.labels) if l.startswith("u")]
    m = len(u_pos)
    L = max(int(l[1:].split("_")[0]) for l in joint.labels if l.startswith("x"))
    leaf_pos = {i: joint.index(f"x{L}_{i}") for i in range(1, m + 1)}
    return m, leaf_pos, u_pos


def rank_f(joint: Cov, A: Iterable[int]) -> float:
    """f(A) = I(x_A; u_A | u_{A^c}) in nats; +inf in the degenerate case."""
    m, leaf_pos, u_pos = _joint_layout(joint)
    A = sorted(set(int(i) for i in A))
    if any(not 1 <= i <= m for i in A):
        raise ModelError(f"subset out of range 1..{m}", code="bad-subset")
    if not A:
        return 0.0
    xA = [leaf_pos[i] for i in A]
    uA = [u_pos[i - 1] for i in A]
    uAc = [u_pos[i - 1] for i in range(1, m + 1) if i not in A]
    return gaussian_cmi(joint.matrix, xA, uA, uAc)


def distortion(joint: Cov) -> float:
    """MMSE of the root given all quantized observations."""
    m, _, u_pos = _joint_layout(joint)
    root = joint.index("x1_1")
    return gauss.mmse(joint.matrix, root, u_pos)


@dataclass(frozen=True)
class RankFunction:
    """Tabulated f(A) over every subset of 1..ground (extended reals)."""

    ground: int
    table: dict

    def __post_init__(self):
        want = 1 << self.ground
        if len(self.table) != want:
            raise ModelError(
                f"rank table must cover all {want} subsets", code="bad-rank-table"
            )

    def __call__(self, A: Iterable[int]) -> float:
        return self.table[frozenset(A)]

    def subsets(self):
        return sorted(self.table, key=lambda s: (len(s), sorted(s)))


def tabulate_rank(tree: BinaryTreeSource, alpha) -> RankFunction:
    """Tabulate f over all encoder subsets via the Gaussian oracle."""
    joint = build_joint(tree, alpha)
    m = tree.leaf_count
    table = {frozenset(): 0.0}
    ground = list(range(1, m + 1))
    for size in range(1, m + 1):
        for A in combinations(ground, size):
            table[frozenset(A)] = rank_f(joint, A)
    return RankFunction(m, table)


def polymatroid_audit(f: RankFunction, tol: float = 1e-9):
    """Check nonnegativity, normalization, monotonicity, supermodularity.

    Returns a list of (kind, A, B, amount) violations; empty means f is a
    contra-polymatroid rank function to tolerance. Infinite values are legal
    and satisfy every inequality they appear on the large side of.
    """
    out = []
    ground = set(range(1, f.ground + 1))
    empty = f(())
    if not abs(empty) <= tol:
        out.append(("empty", frozenset(), None, empty))
    for A in f.subsets():
        fA = f(A)
        if fA < -tol:
            out.append(("nonnegative", A, None, fA))
        for e in sorted(ground - A):
            fAe = f(A | {e})
            if fAe < fA - tol:
                out.append(("monotone", A, frozenset({e}), fAe - fA))
    subsets = f.subsets()
    for A in subsets:
        for B in subsets:
            lhs = f(A | B) + f(A & B)
            rhs = f(A) + f(B)
            if lhs < rhs - tol:
                out.append(("supermodular", A, B, lhs - rhs))
    return out


def weight_order(weights) -> list[int]:
    """Vertex permutation for a weight vector: descending, ties by position.

    Positions are 1-based. The chain starts at the most expensive encoder, so
    the large supermodular increments land on the cheap ones.
    """
    w = list(map(float, weights))
    if any(v < 0 for v in w):
        raise DomainError("weights must be nonnegative", code="bad-weights")
    return sorted(range(1, len(w) + 1), key=lambda i: (-w[i - 1], i))


def vertex_rates(f: RankFunction, perm: Sequence[int]) -> np.ndarray:
    """Rate vector of the chain vertex b^(perm); needs finite f on the chain."""
    if sorted(perm) != list(range(1, f.ground + 1)):
        raise ModelError("perm must be a permutation of 1..ground", code="bad-permutation")
    rates = np.zeros(f.ground)
    prev = 0.0
    chain = set()
    for i in perm:
        chain.add(i)
        cur = f(chain)
        if not math.isfinite(cur):
            raise DomainError(
                f"rank is infinite on chain prefix {sorted(chain)}", code="infinite-rank"
            )
        rates[i - 1] = max(cur - prev, 0.0)
        prev = cur
    return rates


# ---------------------------------------------------------------------------
# fast evaluation context for the optimizer


class ChannelContext:
    """Precomputed second moments of one tree for fast channel evaluation."""

    def __init__(self, tree: BinaryTreeSource):
        cov = binary_cov(tree)
        K = cov.matrix
        L, m = tree.depth, tree.leaf_count
        idx = [cov.index(f"x{L}_{i}") for i in range(1, m + 1)]
        self.tree = tree
        self.m = m
        self.leaf_cov = [[float(K[a, b]) for b in idx] for a in idx]
        self.leaf_var = [self.leaf_cov[i][i] for i in range(m)]
        self.root_leaf = [float(K[0, j]) for j in idx]
        self.root_var = float(K[0, 0])
        self.padding = frozenset(i - 1 for i in tree.padding)
        self.real = [i for i in range(m) if i not in self.padding]
        if L == 1:
            self.d_floor = 0.0  # the root is observed directly
        else:
            self.d_floor = gauss.mmse(K, 0, [idx[i] for i in self.real])

    def u_cov(self, alpha):
        m = self.m
        Kl = self.leaf_cov
        U = [[0.0] * m for _ in range(m)]
        for i in range(m):
            ai = alpha[i]
            Ui = U[i]
            Ki = Kl[i]
            for j in range(i):
                v = ai * alpha[j] * Ki[j]
                Ui[j] = v
                U[j][i] = v
            Ui[i] = self.leaf_var[i]
        return U

    def distortion(self, alpha) -> float:
        U = self.u_cov(alpha)
        q = [alpha[i] * self.root_leaf[i] for i in range(self.m)]
        try:
            y = _solve(U, q)
            d = self.root_var - sum(qi * yi for qi, yi in zip(q, y))
        except ZeroDivisionError:
            m = self.m
            J = np.empty((m + 1, m + 1))
            J[0, 0] = self.root_var
            J[0, 1:] = q
            J[1:, 0] = q
            J[1:, 1:] = U
            d = gauss.mmse(J, 0, range(1, m + 1))
        return max(d, 0.0)

    def _suffix_logdet(self, U, suffix):
        if not suffix:
            return 0.0
        sub = [[U[i - 1][j - 1] for j in suffix] for i in suffix]
        return _logdet(sub)

    def chain_value(self, alpha, perm, weights) -> float:
        """Weighted sum rate at the chain vertex of ``perm`` (may be +inf)."""
        U = self.u_cov(alpha)
        ld_full = _logdet(U)
        if ld_full == -math.inf:
            return math.inf
        val = 0.0
        prev_f = 0.0
        cum = 0.0
        for pos, enc in enumerate(perm):
            w = weights[enc - 1]
            if w <= 0.0:
                break  # descending order: every later weight is zero too
            a = alpha[enc - 1]
            noise = (1.0 - a * a) * self.leaf_var[enc - 1]
            if noise <= 0.0:
                return math.inf
            cum += math.log(noise)
            f = 0.5 * (ld_full - self._suffix_logdet(U, perm[pos + 1 :]) - cum)
            val += w * (f - prev_f)
            prev_f = f
        return val

    def chain_rates(self, alpha, perm) -> np.ndarray:
        """All vertex increments for ``perm`` (math.inf on degenerate steps)."""
        U = self.u_cov(alpha)
        ld_full = _logdet(U)
        rates = np.zeros(self.m)
        prev_f = 0.0
        cum = 0.0
        for pos, enc in enumerate(perm):
            a = alpha[enc - 1]
            noise = (1.0 - a * a) * self.leaf_var[enc - 1]
            if noise <= 0.0 or ld_full == -math.inf:
                rates[enc - 1] = math.inf
                prev_f = math.inf
                continue
            cum += math.log(noise)
            f = 0.5 * (ld_full - self._suffix_logdet(U, perm[pos + 1 :]) - cum)
            rates[enc - 1] = max(f - prev_f, 0.0) if math.isfinite(prev_f) else math.inf
            prev_f = f
        return rates

    def rank_fast(self, alpha, A) -> float:
        """f(A) via the log-determinant identity (optimizer-grade)."""
        A = sorted(A)
        if not A:
            return 0.0
        U = self.u_cov(alpha)
        ld_full = _logdet(U)
        if ld_full == -math.inf:
            return math.inf
        comp = [i for i in range(1, self.m + 1) if i not in set(A)]
        acc = ld_full - self._suffix_logdet(U, comp)
        for i in A:
            a = alpha[i - 1]
            noise = (1.0 - a * a) * self.leaf_var[i - 1]
            if noise <= 0.0:
                return math.inf
            acc -= math.log(noise)
        return max(0.0, 0.5 * acc)

    def repair(self, direction, d):
        """Scale a direction onto the distortion-d boundary; None if it can't reach."""
        mx = max((direction[i] for i in self.real), default=0.0)
        if mx <= 1e-12:
            return None
        u = [0.0] * self.m
        for i in self.real:
            u[i] = direction[i] / mx

        def g(t):
            return self.distortion([t * ui for ui in u]) - d

        if g(1.0) > 0.0:
            return None
        t = brentq(g, 0.0, 1.0, xtol=1e-15, rtol=8.9e-16, maxiter=200)
        return [t * ui for ui in u]


class InnerSolution(NamedTuple):
    value: float
    alpha: np.ndarray
    rates: np.ndarray
    distortion: float
    perm: tuple[int, ...]


def min_weighted_sum(
    tree: BinaryTreeSource,
    weights,
    d: float,
    *,
    starts: int = 16,
    sweeps: int = 60,
    golden_iters: int = 18,
    tol: float = 1e-8,
    seed: int = 0,
    warm=None,
    _ctx: ChannelContext | None = None,
) -> InnerSolution:
    """Minimize sum_i w_i R_i over channels meeting distortion d.

    The distortion constraint is active at any optimum (rates grow with every
    alpha), so the search runs over direction vectors with an exact scalar
    repair onto the boundary; the rate vector is the chain vertex of the
    descending-weight permutation. Multi-start coordinate descent; results
    are deterministic for a fixed seed.
    """
    ctx = _ctx if _ctx is not None else ChannelContext(tree)
    m = ctx.m
    w = [float(v) for v in weights]
    if len(w) != m:
        raise ModelError(f"expected {m} weights", code="bad-weights")
    perm = weight_order(w)
    if d <= 0:
        raise DomainError("distortion must be positive", code="infeasible-distortion")
    zeros = InnerSolution(0.0, np.zeros(m), np.zeros(m), ctx.root_var, tuple(perm))
    if ctx.root_var == 0.0 or d >= ctx.root_var:
        return zeros
    if d <= ctx.d_floor * (1 + 1e-12):
        raise DomainError(
            f"distortion {d} is at or below the all-observations MMSE "
            f"{ctx.d_floor:.6e}",
            code="infeasible-distortion",
        )

    def objective(x):
        rep = ctx.repair(x, d)
        if rep is None:
            return math.inf
        return ctx.chain_value(rep, perm, w)

    extra = []
    if warm is not None:
        warm = list(map(float, warm))
        if len(warm) == m and max(warm) > 0:
            extra.append(warm)
    best_x, best_f = multi_start(
        objective,
        m,
        ctx.real,
        starts=starts,
        seed=seed,
        sweeps=sweeps,
        golden_iters=golden_iters,
        tol=tol,
        extra_starts=extra,
    )
    alpha = ctx.repair(best_x, d)
    if alpha is None or not math.isfinite(best_f):
        raise DomainError(
            "no feasible channel found for the requested distortion",
            code="infeasible-distortion",
        )
    rates = ctx.chain_rates(alpha, perm)
    achieved = ctx.distortion(alpha)
    return InnerSolution(best_f, np.asarray(alpha), rates, achieved, tuple(perm))


def region_slice(
    tree: BinaryTreeSource,
    d: float,
    pair: tuple[int, int],
    fixed_rates: dict | None = None,
    *,
    points: int = 17,
    starts: int = 8,
    sweeps: int = 40,
    golden_iters: int = 14,
    seed: int = 0,
) -> list[tuple[float, float]]:
    """Boundary polyline of the (R_a, R_b) slice at distortion d.

    Rates of the remaining encoders are held at ``fixed_rates`` (default:
    unconstrained). Sweeps supporting weights over the two free coordinates
    and collects the Pareto corners; points are achievable by construction.
    With a single encoder the slice degenerates to one threshold point.
    """
    ctx = ChannelContext(tree)
    m = ctx.m
    if m == 1:
        if d <= 0:
            raise DomainError("distortion must be positive", code="infeasible-distortion")
        if d >= ctx.root_var:
            return [(0.0, 0.0)]
        return [(0.5 * math.log(ctx.root_var / d), 0.0)]
    a, b = pair
    if not (1 <= a <= m and 1 <= b <= m) or a == b:
        raise ModelError("pair must be two distinct encoder positions", code="bad-pair")
    if (a - 1) in ctx.padding or (b - 1) in ctx.padding:
        raise ModelError("pair encoders must not be padding", code="bad-pair")
    others = [i for i in range(1, m + 1) if i not in (a, b)]
    fixed = {i: (0.0 if (i - 1) in ctx.padding else math.inf) for i in others}
    if fixed_rates:
        for k, v in fixed_rates.items():
            if int(k) not in fixed:
                raise ModelError(f"fixed rate for non-free encoder {k}", code="bad-pair")
            fixed[int(k)] = float(v)

    helper_subsets = [
        frozenset(extra)
        for r in range(len(others) + 1)
        for extra in combinations(others, r)
    ]

    def corners(alpha):
        # best (R_a, R_b) corners of the slice polytope at this channel
        for A in helper_subsets:
            have = sum(fixed[i] for i in A)
            if not math.isinf(have) and have < ctx.rank_fast(alpha, A) - 1e-9:
                return None  # the fixed helper rates cannot support this channel

        def cval(core):
            best = 0.0
            for A in helper_subsets:
                slack = sum(fixed[i] for i in A)
                if math.isinf(slack):
                    continue  # unconstrained helpers absorb the requirement
                f = ctx.rank_fast(alpha, set(A) | core)
                if math.isinf(f):
                    return math.inf
                best = max(best, f - slack)
            return best

        ca, cb, cab = cval({a}), cval({b}), cval({a, b})
        if math.isinf(ca) or math.isinf(cb) or math.isinf(cab):
            return None
        p1 = (ca, max(cb, cab - ca))
        p2 = (max(ca, cab - cb), cb)
        return p1, p2

    out = []
    lambdas = [j / (points - 1) for j in range(points)] if points > 1 else [0.5]
    for lam in lambdas:
        def objective(x):
            rep = ctx.repair(x, d)
            if rep is None:
                return math.inf
            cs = corners(rep)
            if cs is None:
                return math.inf
            return min(lam * ra + (1 - lam) * rb for ra, rb in cs)

        best_x, best_f = multi_start(
            objective,
            m,
            ctx.real,
            starts=starts,
            seed=seed,
            sweeps=sweeps,
            golden_iters=golden_iters,
            tol=1e-7,
        )
        if not math.isfinite(best_f):
            continue
        rep = ctx.repair(best_x, d)
        cs = corners(rep)
        pt = min(cs, key=lambda p: lam * p[0] + (1 - lam) * p[1])
        out.append((float(pt[0]), float(pt[1])))

    # Pareto-filter and order by R_a
    out.sort()
    front = []
    best_rb = math.inf
    for ra, rb in out:
        if rb < best_rb - 1e-12:
            front.append((ra, rb))
            best_rb = rb
    return front
