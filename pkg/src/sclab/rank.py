"""Exact ranks of rational matrices.

Two independent routes:

* :func:`bareiss_rank`: fraction-free elimination over the integers in pure
  Python. Exact, but only practical for small matrices.
* :func:`modular_rank`: elimination over GF(P) for two primes just below
  ``2**26`` (products stay below ``2**52``, so sparse int64 products of
  short rows cannot overflow). ``rank mod P <= rank over Q`` always, with
  equality unless ``P`` divides every maximal nonzero minor; the maximum over
  both primes is returned.

:func:`exact_rank` picks a route by size and falls back to a floating SVD
with a gap check for very large inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm

import numpy as np
import scipy.sparse as sp

__all__ = ["PRIMES", "RankResult", "bareiss_rank", "modular_rank", "float_rank",
           "exact_rank", "rank_mod", "to_modular", "integer_columns"]

PRIMES = (67108859, 67108837)
BAREISS_MAX_NNZ = 20_000
MODULAR_MAX_NNZ = 50_000_000


@dataclass
class RankResult:
    rank: int
    method: str
    exact: bool
    gap: float = float("nan")


def integer_columns(A) -> list:
    """Rows of ``A`` as lists of Python ints after scaling every column by the
    lcm of its denominators (column scaling preserves rank)."""
    A = np.asarray(A.toarray() if sp.issparse(A) else A, dtype=object)
    F = [[Fraction(x) for x in row] for row in A]
    if not F:
        return []
    ncol = len(F[0])
    scale = [lcm(*(F[i][j].denominator for i in range(len(F)))) or 1 for j in range(ncol)]
    return [[int(F[i][j] * scale[j]) for j in range(ncol)] for i in range(len(F))]


def bareiss_rank(A) -> int:
    """Rank by fraction-free Gaussian elimination (exact over Q)."""
    M = integer_columns(A)
    if not M:
        return 0
    rows, cols = len(M), len(M[0])
    rank = 0
    prev = 1
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        pr = M[r]
        for i in range(r + 1, rows):
            row = M[i]
            a = row[c]
            M[i] = [(pr[c] * row[j] - a * pr[j]) // prev for j in range(cols)]
        prev = pr[c]
        r += 1
        rank += 1
        if r == rows:
            break
    return rank


def to_modular(A, prime: int) -> np.ndarray:
    """Dense int64 residues of a matrix with integer, float-integer or
    :class:`~fractions.Fraction` entries."""
    if sp.issparse(A):
        A = A.toarray()
    A = np.asarray(A)
    if A.dtype == object:
        out = np.zeros(A.shape, dtype=np.int64)
        for idx, x in np.ndenumerate(A):
            x = Fraction(x)
            if x:
                out[idx] = (x.numerator % prime) * pow(x.denominator % prime, prime - 2, prime) % prime
        return out
    if np.issubdtype(A.dtype, np.floating):
        if not np.all(A == np.round(A)):
            raise ValueError("non-integer float matrix; pass Fractions for an exact rank")
        A = np.round(A).astype(np.int64)
    return np.mod(A.astype(np.int64), prime)


def rank_mod(M: np.ndarray, prime: int) -> int:
    """Column-by-column elimination over GF(prime); updates only the rows
    that are nonzero in the pivot column, which keeps sparse inputs cheap."""
    M = M.copy()
    rows, cols = M.shape
    used = np.zeros(rows, dtype=bool)
    rank = 0
    for c in range(cols):
        nz = np.flatnonzero((M[:, c] != 0) & ~used)
        if nz.size == 0:
            continue
        r = nz[0]
        used[r] = True
        rank += 1
        others = nz[1:]
        if others.size:
            inv = pow(int(M[r, c]), prime - 2, prime)
            f = (M[others, c] * inv) % prime
            M[others, c:] = (M[others, c:] - (f[:, None] * M[r, c:]) % prime) % prime
    return rank


def modular_rank(A, primes=PRIMES) -> int:
    best = 0
    for p in primes:
        best = max(best, rank_mod(to_modular(A, p), p))
    return best


def float_rank(A, rtol: float = 1e-9):
    """Numerical rank from singular values; returns ``(rank, gap)`` where
    ``gap`` is the ratio across the cut."""
    A = np.asarray(A.toarray() if sp.issparse(A) else A, dtype=float)
    if A.size == 0:
        return 0, float("inf")
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0:
        return 0, float("inf")
    r = int(np.sum(s > rtol * s[0]))
    gap = s[r - 1] / s[r] if 0 < r < s.size and s[r] > 0 else float("inf")
    return r, gap


def exact_rank(A, method: str = "auto") -> RankResult:
    """Rank of a rational matrix.

    ``method`` is ``"auto"``, ``"bareiss"``, ``"modular"`` or ``"float"``.
    """
    nnz = A.nnz if sp.issparse(A) else int(np.count_nonzero(np.asarray(A) != 0))
    if method == "auto":
        if nnz <= BAREISS_MAX_NNZ and min(A.shape) <= 60:
            method = "bareiss"
        elif nnz <= MODULAR_MAX_NNZ:
            method = "modular"
        else:
            method = "float"
    if min(A.shape) == 0:
        return RankResult(0, method, True)
    if method == "bareiss":
        return RankResult(bareiss_rank(A), "bareiss", True)
    if method == "modular":
        return RankResult(modular_rank(A), "modular", True)
    if method == "float":
        r, gap = float_rank(A)
        return RankResult(r, "float", False, gap)
    raise ValueError("unknown rank method %r" % method)
