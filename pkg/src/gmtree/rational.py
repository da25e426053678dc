"""Exact matrix arithmetic over the rationals.

Small fixtures (correlation matrices entered as decimal strings) admit exact
precision matrices, which makes graph-structure tests independent of any
floating-point tolerance. Everything here is plain Gauss-Jordan on lists of
Fractions; sizes are tiny so there is no need for pivot-growth cleverness
beyond skipping zero pivots.
"""

from fractions import Fraction

__all__ = ["rat_matrix", "rat_inv", "rat_matmul", "rat_identity"]


def rat_matrix(entries) -> list[list[Fraction]]:
    """Deep-copy a square matrix into Fractions (accepts str/int/Fraction)."""
    M = [[Fraction(e) for e in row] for row in entries]
    n = len(M)
    if any(len(row) != n for row in M):
        raise ValueError("matrix is not square")
    return M


def rat_identity(n: int) -> list[list[Fraction]]:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def rat_matmul(A, B) -> list[list[Fraction]]:
    n, k, m = len(A), len(B), len(B[0])
    if any(len(row) != k for row in A):
        raise ValueError("inner dimensions do not match")
    return [
        [sum((A[i][t] * B[t][j] for t in range(k)), Fraction(0)) for j in range(m)]
        for i in range(n)
    ]


def rat_inv(M) -> list[list[Fraction]]:
    """Exact inverse via Gauss-Jordan; raises ZeroDivisionError when singular."""
    n = len(M)
    aug = [
        [Fraction(M[i][j]) for j in range(n)]
        + [Fraction(int(i == j)) for j in range(n)]
        for i in range(n)
    ]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("matrix is singular over the rationals")
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]
