"""Univariate B-spline spaces on open knot vectors in [0, 1].

Basis functions are indexed from 0. A function ``i`` of degree ``p`` lives on
the local knot vector ``knots[i:i+p+2]`` and its support is the *open*
interval ``(knots[i], knots[i+p+1])``.

The derivative space of ``S_p(knots)`` is ``S_{p-1}(knots[1:-1])``. Its
Curry--Schoenberg (unit-integral) normalization gives the identity::

    B'_i = D_{i-1} - D_i,        D_{-1} = D_{m-1} = 0,

so the 1D exterior derivative is the difference matrix with ``-1`` at
``(j, j)`` and ``+1`` at ``(j, j+1)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

__all__ = [
    "KnotVector",
    "open_knot_vector",
    "uniform_knot_vector",
    "evaluate_basis",
    "derivative_space",
    "greville_sites",
    "curry_schoenberg_scaling",
    "curry_schoenberg_basis",
    "support_interval",
    "refinement_matrix",
]

KNOT_TOL = 1e-12
# knots are rationals with small denominators (uniform base grids, dyadic refinement)
RATIONAL_MAX_DENOMINATOR = 1 << 24


@dataclass(frozen=True)
class KnotVector:
    """A ``p``-open knot vector on [0, 1]."""

    degree: int
    knots: tuple

    def __post_init__(self):
        p = self.degree
        t = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", tuple(float(x) for x in t))
        if p < 0:
            raise ValueError("degree must be non-negative")
        if t.size < 2 * (p + 1):
            raise ValueError("knot vector too short for degree %d" % p)
        if np.any(np.diff(t) < 0):
            raise ValueError("knots must be non-decreasing")
        if abs(t[0]) > KNOT_TOL or abs(t[-1] - 1.0) > KNOT_TOL:
            raise ValueError("knot vector must span [0, 1]")
        if np.any(np.abs(t[: p + 1] - t[0]) > KNOT_TOL) or np.any(
            np.abs(t[-p - 1:] - t[-1]) > KNOT_TOL
        ):
            raise ValueError("end knots must have multiplicity p+1")
        if p > 0 and t.size > 2 * (p + 1):
            if t[p + 1] <= t[0] + KNOT_TOL or t[-p - 2] >= t[-1] - KNOT_TOL:
                raise ValueError("end knots must have multiplicity exactly p+1")
        _, mult = np.unique(t[p + 1: t.size - p - 1], return_counts=True)
        # p+1 is allowed so that derivative spaces of C^0 spaces are valid
        if mult.size and mult.max() > p + 1:
            raise ValueError("interior knot multiplicity exceeds degree + 1")

    # -- basic data ---------------------------------------------------------
    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.knots)

    @property
    def dim(self) -> int:
        """Number of basis functions ``m``."""
        return len(self.knots) - self.degree - 1

    @property
    def breakpoints(self) -> np.ndarray:
        return np.unique(self.array)

    @property
    def num_elements(self) -> int:
        return len(self.breakpoints) - 1

    def element_of_knot(self, i: int) -> int:
        """Index of the breakpoint equal to ``knots[i]``."""
        return int(np.searchsorted(self.breakpoints, self.knots[i] - KNOT_TOL))

    def element_index(self, x) -> np.ndarray:
        """Element containing each point; ``x = 1`` goes to the last element."""
        b = self.breakpoints
        e = np.searchsorted(b, np.asarray(x, dtype=float), side="right") - 1
        return np.clip(e, 0, len(b) - 2)

    # -- constructions ------------------------------------------------------
    def refine(self) -> "KnotVector":
        """Dyadic refinement: insert every element midpoint once."""
        b = self.breakpoints
        mids = 0.5 * (b[:-1] + b[1:])
        return KnotVector(self.degree, tuple(np.sort(np.concatenate([self.array, mids]))))

    def derivative(self) -> "KnotVector":
        return derivative_space(self)

    def greville(self) -> np.ndarray:
        return greville_sites(self)

    def support(self, i: int):
        return support_interval(self, i)

    def evaluate(self, x, nu: int = 0, normalized: bool = False) -> np.ndarray:
        """Values (``nu=0``) or first derivatives (``nu=1``) of all basis
        functions at the points ``x``; shape ``(len(x), dim)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if nu == 0:
            vals = _cox_de_boor(self.array, self.degree, x)
        elif nu == 1:
            vals = _first_derivative(self.array, self.degree, x)
        else:
            raise ValueError("only nu in {0, 1} is supported")
        if normalized:
            vals = vals * curry_schoenberg_scaling(self)
        return vals


def _cox_de_boor(t: np.ndarray, p: int, x: np.ndarray) -> np.ndarray:
    if np.any(x < -KNOT_TOL) or np.any(x > 1.0 + KNOT_TOL):
        raise ValueError("evaluation point outside [0, 1]")
    nk = t.size
    # last non-empty span receives x == 1
    last = int(np.nonzero(t[1:] > t[:-1])[0][-1])
    N = ((t[None, :-1] <= x[:, None]) & (x[:, None] < t[None, 1:])).astype(float)
    at_end = x >= t[-1]
    if np.any(at_end):
        N[at_end] = 0.0
        N[at_end, last] = 1.0
    for q in range(1, p + 1):
        nf = nk - q - 1
        left_den = t[q:q + nf] - t[:nf]
        right_den = t[q + 1:q + 1 + nf] - t[1:1 + nf]
        with np.errstate(divide="ignore", invalid="ignore"):
            left = np.where(left_den > 0, (x[:, None] - t[None, :nf]) / left_den, 0.0)
            right = np.where(right_den > 0, (t[None, q + 1:q + 1 + nf] - x[:, None]) / right_den, 0.0)
        N = left * N[:, :nf] + right * N[:, 1:nf + 1]
    return N


def _first_derivative(t: np.ndarray, p: int, x: np.ndarray) -> np.ndarray:
    m = t.size - p - 1
    if p == 0:
        return np.zeros((x.size, m))
    N = _cox_de_boor(t, p - 1, x)  # m + 1 columns
    left_den = t[p:p + m] - t[:m]
    right_den = t[p + 1:p + 1 + m] - t[1:1 + m]
    a = np.divide(p, left_den, out=np.zeros(m), where=left_den > 0)
    b = np.divide(p, right_den, out=np.zeros(m), where=right_den > 0)
    return a * N[:, :m] - b * N[:, 1:m + 1]


def open_knot_vector(
    p: int,
    breakpoints: Sequence[float],
    continuity: Union[str, int, Sequence[int]] = "maximal",
) -> KnotVector:
    """Build a ``p``-open knot vector from breakpoints and interior continuity.

    ``continuity`` is ``"maximal"`` (``C^{p-1}``), a single integer applied to
    every interior breakpoint, or one integer per interior breakpoint (a list
    over all breakpoints is also accepted; its end values are ignored).
    """
    b = np.asarray(breakpoints, dtype=float)
    if b.size < 2 or np.any(np.diff(b) <= 0):
        raise ValueError("breakpoints must be strictly increasing")
    if abs(b[0]) > KNOT_TOL or abs(b[-1] - 1.0) > KNOT_TOL:
        raise ValueError("breakpoints must start at 0 and end at 1")
    interior = b[1:-1]
    if isinstance(continuity, str):
        if continuity not in ("maximal", "max"):
            raise ValueError("unknown continuity %r" % continuity)
        cont = [p - 1] * interior.size
    elif np.isscalar(continuity):
        cont = [int(continuity)] * interior.size
    else:
        cont = [int(c) for c in continuity]
        if len(cont) == b.size:
            cont = cont[1:-1]
        if len(cont) != interior.size:
            raise ValueError("continuity list does not match breakpoints")
    for c in cont:
        if c < 0 or c > p - 1:
            raise ValueError("continuity %d out of range [0, %d]" % (c, p - 1))
    knots = [0.0] * (p + 1)
    for x, c in zip(interior, cont):
        knots += [float(x)] * (p - c)
    knots += [1.0] * (p + 1)
    return KnotVector(p, tuple(knots))


def uniform_knot_vector(p: int, n_elements: int, continuity="maximal") -> KnotVector:
    return open_knot_vector(p, np.linspace(0.0, 1.0, n_elements + 1), continuity)


def evaluate_basis(kv: KnotVector, zeta) -> np.ndarray:
    """All basis values at ``zeta``; a vector for scalar input."""
    vals = kv.evaluate(zeta)
    return vals[0] if np.ndim(zeta) == 0 else vals


def derivative_space(kv: KnotVector) -> KnotVector:
    if kv.degree == 0:
        raise ValueError("degree-0 space has no derivative space")
    return KnotVector(kv.degree - 1, kv.knots[1:-1])


def greville_sites(kv: KnotVector) -> np.ndarray:
    p = kv.degree
    if p < 1:
        raise ValueError("Greville sites need degree >= 1")
    t = kv.array
    c = np.concatenate([[0.0], np.cumsum(t)])
    i = np.arange(kv.dim)
    return (c[i + p + 1] - c[i + 1]) / p


def curry_schoenberg_scaling(kv: KnotVector) -> np.ndarray:
    """Factors ``(q+1)/(t[j+q+1]-t[j])`` turning ``B_{j,q}`` into unit-integral
    Curry--Schoenberg splines. For ``kv = derivative_space(parent)`` these are
    ``p / (xi_{i+p} - xi_i)`` in terms of the parent knots."""
    q = kv.degree
    t = kv.array
    width = t[q + 1:] - t[: kv.dim]
    if np.any(width <= 0):
        raise ValueError("zero-width Curry-Schoenberg window")
    return (q + 1) / width


def curry_schoenberg_basis(kv_prime: KnotVector):
    """Evaluator ``zeta -> (D_0(zeta), ..., D_{m-2}(zeta))``."""

    def evaluate(zeta):
        vals = kv_prime.evaluate(zeta, normalized=True)
        return vals[0] if np.ndim(zeta) == 0 else vals

    return evaluate


def support_interval(kv: KnotVector, i: int):
    """Open support ``(lo, hi)`` and the half-open range of element indices."""
    if not 0 <= i < kv.dim:
        raise IndexError("basis index %d out of range" % i)
    p = kv.degree
    lo, hi = kv.knots[i], kv.knots[i + p + 1]
    return (lo, hi), range(kv.element_of_knot(i), kv.element_of_knot(i + p + 1))


def element_ranges(kv: KnotVector) -> np.ndarray:
    """``(dim, 2)`` array of half-open element ranges of every support."""
    b = kv.breakpoints
    t = kv.array
    p = kv.degree
    first = np.searchsorted(b, t[: kv.dim] - KNOT_TOL)
    last = np.searchsorted(b, t[p + 1: p + 1 + kv.dim] - KNOT_TOL)
    return np.stack([first, last], axis=1)


def _insert_knot(t: list, p: int, u, T: list) -> tuple:
    """Insert ``u`` once (Boehm). ``T`` maps original coefficients to the
    current ones; rows are current basis functions."""
    s = max(i for i in range(len(t) - 1) if t[i] <= u < t[i + 1])
    m = len(t) - p - 1
    newT = []
    for i in range(m + 1):
        if i <= s - p:
            newT.append(T[i])
        elif i >= s + 1:
            newT.append(T[i - 1])
        else:
            a = (u - t[i]) / (t[i + p] - t[i])
            newT.append([a * x + (1 - a) * y for x, y in zip(T[i], T[i - 1])])
    t2 = sorted(t + [u])
    return t2, newT


def refinement_matrix(coarse: KnotVector, fine: KnotVector, exact: bool = False,
                      normalized: bool = False) -> np.ndarray:
    """Two-scale matrix ``T`` with ``B^coarse_j = sum_k T[k, j] B^fine_k``.

    With ``normalized=True`` both bases are Curry--Schoenberg normalized.
    With ``exact=True`` an object array of :class:`fractions.Fraction` is
    returned; knots are snapped to the nearest rational with denominator at
    most ``2**24`` so that meshes like ``i / 9`` are represented exactly.
    """
    if coarse.degree != fine.degree:
        raise ValueError("degrees differ")
    num = _rational if exact else float
    t = [num(x) for x in coarse.knots]
    new = list(fine.knots)
    for x in coarse.knots:
        for j, y in enumerate(new):
            if abs(y - x) <= KNOT_TOL:
                del new[j]
                break
        else:
            raise ValueError("fine knot vector does not contain the coarse one")
    p = coarse.degree
    m = coarse.dim
    T = [[num(1) if r == c else num(0) for c in range(m)] for r in range(m)]
    for u in new:
        t, T = _insert_knot(t, p, num(u), T)
    if normalized:
        sc = [num(x) for x in _exact_scaling(coarse, num)]
        sf = [num(x) for x in _exact_scaling(fine, num)]
        T = [[T[k][j] * sc[j] / sf[k] for j in range(m)] for k in range(len(T))]
    if exact:
        return np.array(T, dtype=object)
    return np.array(T, dtype=float)


def _rational(x) -> Fraction:
    return Fraction(x).limit_denominator(RATIONAL_MAX_DENOMINATOR)


def _exact_scaling(kv: KnotVector, num):
    q = kv.degree
    t = [num(x) for x in kv.knots]
    return [num(q + 1) / (t[j + q + 1] - t[j]) for j in range(kv.dim)]
