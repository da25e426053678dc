"""Seeded multi-start coordinate descent with golden-section line search.

Both bound optimizers search a box [0,1]^m of direction coordinates with a
scalar feasibility repair folded into the objective, so a tiny derivative-free
loop is all that is needed. Objectives may return math.inf for infeasible
points; determinism is guaranteed by the explicit seed.
"""

import math

import numpy as np

__all__ = ["golden_min", "coordinate_descent", "multi_start"]

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_min(fn, lo: float, hi: float, iters: int = 18):
    """Golden-section minimum of fn on [lo, hi]; returns (x, fn(x)).

    Keeps the best evaluated point, so a non-unimodal section still returns
    something no worse than the samples seen.
    """
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    if fc <= fd:
        best, fbest = c, fc
    else:
        best, fbest = d, fd
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
            if fc < fbest:
                best, fbest = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
            if fd < fbest:
                best, fbest = d, fd
    return best, fbest


def coordinate_descent(fn, x0, coords, *, sweeps=60, golden_iters=18, tol=1e-8):
    """Cyclic per-coordinate golden-section descent of fn over [0,1]^m."""
    x = list(map(float, x0))
    fx = fn(x)
    for _ in range(sweeps):
        f_before = fx
        for c in coords:
            def section(v, _c=c):
                y = x.copy()
                y[_c] = v
                return fn(y)

            v, fv = golden_min(section, 0.0, 1.0, golden_iters)
            if fv < fx:
                x[c] = v
                fx = fv
        if not math.isfinite(fx):
            break
        if f_before - fx <= tol:
            break
    return x, fx


def multi_start(
    fn,
    dim: int,
    coords,
    *,
    starts=16,
    seed=0,
    sweeps=60,
    golden_iters=18,
    tol=1e-8,
    extra_starts=(),
):
    """Best coordinate_descent result over deterministic + seeded random starts.

    The all-ones direction is always tried first; ``extra_starts`` (warm
    points) are tried next; the remaining ``starts - 1`` come from the seeded
    generator. Coordinates not in ``coords`` stay at their start value (zero
    for random starts).
    """
    rng = np.random.default_rng(seed)
    pool = []
    ones = [0.0] * dim
    for c in coords:
        ones[c] = 1.0
    pool.append(ones)
    for w in extra_starts:
        pool.append([float(v) for v in w])
    for _ in range(max(0, starts - 1)):
        x = [0.0] * dim
        draw = rng.uniform(0.05, 1.0, size=len(coords))
        for c, v in zip(coords, draw):
            x[c] = float(v)
        pool.append(x)

    best_x, best_f = None, math.inf
    for x0 in pool:
        x, fx = coordinate_descent(
            fn, x0, coords, sweeps=sweeps, golden_iters=golden_iters, tol=tol
        )
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, best_f
