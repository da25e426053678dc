"""Distortion robustness of Gaussian codes under non-Gaussian tree sources.

The linear estimator derived from the Gaussian joint is applied, coefficients
unchanged, to samples of an alternate source with the same tree covariance
(the innovations are merely moment-matched, not Gaussian). Its empirical
mean-square error must then agree with the Gaussian MMSE, because linear
estimation only sees second moments. ``llse_equivalence_check`` runs that
comparison as a Monte Carlo experiment.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ModelError
from .gauss import llse_coefficients
from .inner import build_joint, _check_alpha
from .trees import BinaryTreeSource

__all__ = ["llse_equivalence_check", "alternate_sampler", "LlseReport"]

SHARD_SIZE = 250_000

_SQRT3 = math.sqrt(3.0)
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def _innov_uniform(rng, size):
    return rng.uniform(-_SQRT3, _SQRT3, size)


def _innov_laplace(rng, size):
    return rng.laplace(0.0, _INV_SQRT2, size)


def _innov_signmix(rng, size):
    sign = rng.integers(0, 2, size) * 2.0 - 1.0
    return _INV_SQRT2 * (sign + rng.standard_normal(size))


def _innov_gaussian(rng, size):
    return rng.standard_normal(size)


_SAMPLERS = {
    "uniform": _innov_uniform,
    "laplace": _innov_laplace,
    "signmix": _innov_signmix,
    "gaussian": _innov_gaussian,
}


def alternate_sampler(dist):
    """Resolve a zero-mean unit-variance innovation sampler by name."""
    if callable(dist):
        return dist
    try:
        return _SAMPLERS[dist]
    except KeyError:
        raise ModelError(
            f"unknown innovation distribution {dist!r}; choose from "
            + ", ".join(sorted(_SAMPLERS)),
            code="bad-distribution",
        ) from None


@dataclass(frozen=True)
class LlseReport:
    """Monte Carlo comparison of Gaussian MMSE against alternate-source LLSE."""

    dist: str
    samples: int
    gaussian_mmse: float
    empirical_mse: float
    se: float
    cov_max_dev: float  # worst leaf/root second-moment deviation, in SE units

    @property
    def gap(self) -> float:
        return self.empirical_mse - self.gaussian_mmse

    @property
    def passed(self) -> bool:
        return abs(self.gap) <= 3.0 * self.se


def _sample_states(tree: BinaryTreeSource, innov, rng, size: int) -> dict:
    """Tree-structural draw: same recursion as the Gaussian source, alternate
    iid innovations (zero mean, unit variance) at every node."""
    x = {(1, 1): math.sqrt(tree.root_var) * innov(rng, size)}
    for k in range(2, tree.depth + 1):
        for i in range(1, 2 ** (k - 1) + 1):
            node = (k, i)
            parent = x[BinaryTreeSource.parent(node)]
            nv = tree.noise_var[node]
            val = tree.alpha[node] * parent
            if nv > 0.0:
                val = val + math.sqrt(nv) * innov(rng, size)
            x[node] = val
    return x


def llse_equivalence_check(
    tree: BinaryTreeSource,
    alpha,
    dist="uniform",
    samples: int = 1_000_000,
    seed: int = 0,
    *,
    validate_sampler: bool = True,
) -> LlseReport:
    """Check that the Gaussian-design linear estimator keeps its distortion.

    The estimator of the root from the quantized leaves is computed once from
    the Gaussian joint; samples are then drawn from the alternate source (the
    quantization noises stay Gaussian) and pushed through the identical
    coefficients. Agreement within 3 standard errors is a pass. With
    ``validate_sampler`` the leaf and root second moments are themselves
    checked first, so a miscalibrated sampler raises instead of producing a
    misleading failure.
    """
    if not isinstance(samples, int) or samples <= 0:
        raise ModelError("samples must be a positive integer", code="bad-samples")
    innov = alternate_sampler(dist)
    name = dist if isinstance(dist, str) else getattr(dist, "__name__", "custom")
    a = _check_alpha(tree, alpha)
    joint = build_joint(tree, a)
    m = tree.leaf_count
    L = tree.depth
    n_states = len(joint.labels) - m
    u_idx = list(range(n_states, n_states + m))
    W, err_cov = llse_coefficients(joint.matrix, [joint.index("x1_1")], u_idx)
    gaussian_mmse = max(float(err_cov[0, 0]), 0.0)
    w = np.asarray(W)[0]

    leaf_sd = [math.sqrt(tree.var((L, i + 1))) for i in range(m)]
    chan_sd = [leaf_sd[i] * math.sqrt(max(1.0 - a[i] * a[i], 0.0)) for i in range(m)]

    mom_idx = [joint.index("x1_1")] + [joint.index(f"x{L}_{i + 1}") for i in range(m)]
    K = np.asarray(joint.matrix)[np.ix_(mom_idx, mom_idx)]
    nm = len(mom_idx)

    err_sum, err_sq = [], []
    mom_sum = np.zeros((nm, nm))
    mom_sq = np.zeros((nm, nm))
    done = 0
    seq = np.random.SeedSequence(seed)
    while done < samples:
        size = min(SHARD_SIZE, samples - done)
        rng = np.random.default_rng(seq.spawn(1)[0])
        states = _sample_states(tree, innov, rng, size)
        leaves = [states[(L, i + 1)] for i in range(m)]
        u = [
            a[i] * leaves[i] + chan_sd[i] * rng.standard_normal(size)
            for i in range(m)
        ]
        resid = states[(1, 1)] - sum(w[i] * u[i] for i in range(m))
        e = resid * resid
        err_sum.append(float(e.sum()))
        err_sq.append(float((e * e).sum()))
        vecs = [states[(1, 1)]] + leaves
        for r in range(nm):
            for c in range(r, nm):
                prod = vecs[r] * vecs[c]
                mom_sum[r, c] += float(prod.sum())
                mom_sq[r, c] += float((prod * prod).sum())
        done += size

    mse = math.fsum(err_sum) / samples
    var = max(math.fsum(err_sq) / samples - mse * mse, 0.0)
    se = math.sqrt(var / samples)

    dev = 0.0
    for r in range(nm):
        for c in range(r, nm):
            mean = mom_sum[r, c] / samples
            mvar = max(mom_sq[r, c] / samples - mean * mean, 0.0)
            mse_se = math.sqrt(mvar / samples)
            if mse_se > 0.0:
                dev = max(dev, abs(mean - K[r, c]) / mse_se)
            elif abs(mean - K[r, c]) > 1e-12:
                dev = math.inf
    if validate_sampler and dev > 3.0:
        raise DomainError(
            f"alternate sampler covariance is off by {dev:.1f} standard errors",
            code="sampler-mismatch",
        )
    return LlseReport(name, samples, gaussian_mmse, mse, se, dev)
