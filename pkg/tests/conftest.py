import numpy as np
import pytest

from gmtree import BinaryTreeSource


def random_binary_tree(
    L: int,
    seed: int,
    *,
    alpha_lo: float = 0.2,
    alpha_hi: float = 0.95,
    noise_lo: float = 0.05,
    noise_hi: float = 1.0,
) -> BinaryTreeSource:
    rng = np.random.default_rng(seed)
    alpha, noise = {}, {}
    for k in range(2, L + 1):
        for i in range(1, 2 ** (k - 1) + 1):
            alpha[(k, i)] = float(rng.uniform(alpha_lo, alpha_hi))
            noise[(k, i)] = float(rng.uniform(noise_lo, noise_hi))
    return BinaryTreeSource(L, float(rng.uniform(0.5, 2.0)), alpha, noise)


def random_psd(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n + 2))
    K = A @ A.T / (n + 2)
    return 0.5 * (K + K.T)


@pytest.fixture
def small_tree() -> BinaryTreeSource:
    return BinaryTreeSource(
        2, 1.0, {(2, 1): 0.9, (2, 2): 0.7}, {(2, 1): 0.19, (2, 2): 0.51}
    )
