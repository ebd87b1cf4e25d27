"""Tensor-product B-spline complexes of discrete differential forms.

A k-form space has one *component* per ordered multi-index ``alpha`` of
length ``k`` (directions are 0-based here). In the directions of ``alpha`` the
univariate factor is the Curry--Schoenberg normalized derivative space, in
the other directions it is the 0-form space.

Basis ordering is component-major, then tensor-lexicographic with direction 0
running fastest, so a tensor operator ``A_0 x A_1 x ... x A_{n-1}`` is the
sparse matrix ``kron(A_{n-1}, ..., A_1, A_0)``.

The exterior derivative of a component ``alpha`` in direction ``l`` lands in
``beta = sorted(alpha + (l,))`` with sign ``(-1)**beta.index(l)``; in 1D it is
the difference stencil ``-1`` at ``(j, j)``, ``+1`` at ``(j, j+1)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from functools import reduce
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .univariate import KnotVector, derivative_space, element_ranges, greville_sites

__all__ = [
    "multi_indices",
    "Component",
    "FormSpace",
    "TensorComplex",
    "build_complex",
    "apply_boundary_conditions",
    "incidence_matrix",
    "difference_matrix",
    "GrevilleGrid",
    "greville_grid",
    "rotate_complex_2d",
    "dimension_report",
    "kron_all",
    "export_matrix_market",
]


def multi_indices(n: int, k: int) -> List[tuple]:
    """Ordered multi-indices of length ``k`` from ``range(n)``, lexicographic."""
    return list(itertools.combinations(range(n), k))


def kron_all(mats: Sequence) -> sp.csr_matrix:
    """``kron(mats[-1], ..., mats[0])`` so that ``mats[0]`` acts fastest."""
    return reduce(lambda acc, m: sp.kron(m, acc, format="csr"), mats[1:],
                  sp.csr_matrix(mats[0])).tocsr()


def difference_matrix(m: int) -> sp.csr_matrix:
    """1D exterior derivative from a dimension-``m`` space to dimension ``m-1``."""
    if m < 1:
        raise ValueError("empty space")
    rows = np.repeat(np.arange(m - 1), 2)
    cols = (np.arange(m - 1)[:, None] + np.array([0, 1])).ravel()
    vals = np.tile([-1, 1], m - 1)
    return sp.csr_matrix((vals, (rows, cols)), shape=(m - 1, m), dtype=np.int64)


@dataclass(frozen=True)
class Component:
    """One scalar component of a k-form space.

    ``sign`` and ``axis`` describe the vector proxy: the basis function is
    ``sign * B(zeta) e_axis``; they only differ from ``(+1, alpha[0])`` for
    rotated 1-forms.
    """

    alpha: tuple
    factors: tuple  # KnotVector per direction
    normalized: tuple  # True where the factor is Curry--Schoenberg
    keep: np.ndarray = field(compare=False)  # bool, shape == self.shape
    sign: int = 1
    axis: Optional[int] = None

    @property
    def shape(self) -> tuple:
        return tuple(f.dim for f in self.factors)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def keep_flat(self) -> np.ndarray:
        return self.keep.ravel(order="F")

    def degrees(self) -> tuple:
        return tuple(f.degree for f in self.factors)

    def support_ranges(self) -> list:
        """Per direction ``(dim, 2)`` element ranges of univariate supports."""
        return [element_ranges(f) for f in self.factors]

    def evaluate(self, points_1d: Sequence, nu: Sequence[int] = None) -> sp.csr_matrix:
        """Values at the tensor grid of ``points_1d`` (direction 0 fastest);
        ``nu[d]`` selects a derivative in direction ``d``."""
        nu = nu or [0] * len(self.factors)
        mats = [sp.csr_matrix(f.evaluate(x, nu=v, normalized=nz))
                for f, x, v, nz in zip(self.factors, points_1d, nu, self.normalized)]
        return kron_all(mats)


@dataclass(frozen=True)
class FormSpace:
    """Discrete k-form space on the parametric cube."""

    n: int
    k: int
    components: tuple

    @property
    def full_dim(self) -> int:
        return sum(c.size for c in self.components)

    @property
    def dim(self) -> int:
        return int(sum(c.keep.sum() for c in self.components))

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum([c.size for c in self.components])])

    @property
    def keep(self) -> np.ndarray:
        """Boolean mask over the full (pre-BC) numbering."""
        return np.concatenate([c.keep_flat for c in self.components])

    @property
    def dofs(self) -> np.ndarray:
        """Full-numbering indices of the retained basis functions."""
        return np.flatnonzero(self.keep)

    def locate(self, index: int):
        """Map a full index to ``(component number, tensor multi-index)``."""
        off = self.offsets
        c = int(np.searchsorted(off, index, side="right") - 1)
        comp = self.components[c]
        return c, tuple(int(i) for i in np.unravel_index(index - off[c], comp.shape, order="F"))

    def index(self, c: int, multi_index: Sequence[int]) -> int:
        comp = self.components[c]
        return int(self.offsets[c] + np.ravel_multi_index(tuple(multi_index), comp.shape, order="F"))


@dataclass(frozen=True)
class TensorComplex:
    """The spaces ``X^0 .. X^n`` built from one knot vector per direction."""

    knot_vectors: tuple
    spaces: tuple
    boundary_conditions: bool = False
    rotations: int = 0

    @property
    def n(self) -> int:
        return len(self.knot_vectors)

    @property
    def degrees(self) -> tuple:
        return tuple(kv.degree for kv in self.knot_vectors)

    def __getitem__(self, k: int) -> FormSpace:
        return self.spaces[k]

    def dims(self) -> list:
        return [s.dim for s in self.spaces]

    def refine(self) -> "TensorComplex":
        """Same complex on the dyadically refined knot vectors."""
        out = build_complex([kv.refine() for kv in self.knot_vectors])
        if self.boundary_conditions:
            out = apply_boundary_conditions(out)
        for _ in range(self.rotations):
            out = rotate_complex_2d(out)
        return out


def build_complex(knot_vectors: Sequence[KnotVector]) -> TensorComplex:
    """Tensor-product complex without boundary conditions."""
    kvs = tuple(knot_vectors)
    for kv in kvs:
        if kv.degree < 1:
            raise ValueError("degree 0 in some direction: 1-forms are undefined")
    derived = tuple(derivative_space(kv) for kv in kvs)
    n = len(kvs)
    spaces = []
    for k in range(n + 1):
        comps = []
        for alpha in multi_indices(n, k):
            factors = tuple(derived[d] if d in alpha else kvs[d] for d in range(n))
            shape = tuple(f.dim for f in factors)
            comps.append(Component(alpha, factors, tuple(d in alpha for d in range(n)),
                                   np.ones(shape, dtype=bool), 1,
                                   alpha[0] if k == 1 else None))
        spaces.append(FormSpace(n, k, tuple(comps)))
    return TensorComplex(kvs, tuple(spaces))


def _bc_keep(comp: Component, n: int) -> np.ndarray:
    keep = np.ones(comp.shape, dtype=bool)
    for d in range(n):
        if d in comp.alpha:
            continue
        sl = [slice(None)] * n
        sl[d] = 0
        keep[tuple(sl)] = False
        sl[d] = -1
        keep[tuple(sl)] = False
    return keep


def apply_boundary_conditions(cx: TensorComplex) -> TensorComplex:
    """Homogeneous boundary conditions: drop the first and last function in
    every direction not in ``alpha`` (no mask on n-forms). Idempotent."""
    spaces = []
    for s in cx.spaces:
        comps = tuple(replace(c, keep=_bc_keep(c, cx.n)) for c in s.components)
        spaces.append(replace(s, components=comps))
    return replace(cx, spaces=tuple(spaces), boundary_conditions=True)


def _canonical_incidence(cx: TensorComplex, k: int) -> sp.csr_matrix:
    src, dst = cx.spaces[k], cx.spaces[k + 1]
    n = cx.n
    dst_pos = {c.alpha: i for i, c in enumerate(dst.components)}
    blocks = [[None] * len(src.components) for _ in dst.components]
    for j, comp in enumerate(src.components):
        for d in range(n):
            if d in comp.alpha:
                continue
            beta = tuple(sorted(comp.alpha + (d,)))
            i = dst_pos[beta]
            sign = (-1) ** beta.index(d)
            mats = [difference_matrix(f.dim) if dd == d else sp.identity(f.dim, dtype=np.int64, format="csr")
                    for dd, f in enumerate(comp.factors)]
            blk = sign * kron_all(mats)
            blocks[i][j] = blk if blocks[i][j] is None else blocks[i][j] + blk
    for i, c in enumerate(dst.components):
        for j, cs in enumerate(src.components):
            if blocks[i][j] is None:
                blocks[i][j] = sp.csr_matrix((c.size, cs.size), dtype=np.int64)
    return sp.bmat(blocks, format="csr", dtype=np.int64)


def incidence_matrix(cx: TensorComplex, k: int, full: bool = False) -> sp.csr_matrix:
    """Integer matrix of ``d^k`` in the bases of ``X^k`` and ``X^{k+1}``.

    Rows/columns are restricted to the retained functions unless ``full``.
    For a complex rotated ``r`` times the 1-form fields are ``R^r u`` with
    ``u`` the canonical proxy; ``d^0 = R^r grad`` and ``d^1`` is the curl
    (``r`` even) or divergence (``r`` odd) of the rotated field, which is
    the canonical matrix times ``(-1)^(r // 2)``.
    """
    if not 0 <= k < cx.n:
        raise ValueError("k must satisfy 0 <= k < n")
    D = _canonical_incidence(cx, k)
    if cx.rotations // 2 % 2:
        D = -D
    D = sp.csr_matrix(D, dtype=np.int64)
    src, dst = cx.spaces[k], cx.spaces[k + 1]
    if full:
        return D
    return D[dst.dofs][:, src.dofs].tocsr()


def rotate_complex_2d(cx: TensorComplex) -> TensorComplex:
    """Rotate the 1-form proxies by pi/2: ``(u_0, u_1) -> (u_1, -u_0)``.

    ``d^1`` becomes the divergence and tangential boundary conditions become
    normal ones. Rotating twice negates the 1-forms.
    """
    if cx.n != 2:
        raise ValueError("rotation is defined for n = 2 only")
    s1 = cx.spaces[1]
    comps = []
    for c in s1.components:
        if c.axis == 0:
            comps.append(replace(c, axis=1, sign=-c.sign))
        else:
            comps.append(replace(c, axis=0, sign=c.sign))
    comps.sort(key=lambda c: c.axis)
    spaces = list(cx.spaces)
    spaces[1] = replace(s1, components=tuple(comps))
    return replace(cx, spaces=tuple(spaces), rotations=(cx.rotations + 1) % 4)


@dataclass(frozen=True)
class GrevilleGrid:
    """Cartesian grid of Greville points of the 0-form space.

    The basis function of component ``alpha`` with tensor index ``i`` is the
    entity spanning ``[sites[d][i_d], sites[d][i_d + 1]]`` in directions
    ``d in alpha`` and sitting at ``sites[d][i_d]`` otherwise.
    """

    sites: tuple

    @property
    def shape(self) -> tuple:
        return tuple(len(s) for s in self.sites)

    def entity_count(self, alpha: tuple) -> int:
        return int(np.prod([len(s) - 1 if d in alpha else len(s) for d, s in enumerate(self.sites)]))

    def entity_boxes(self, space: FormSpace) -> np.ndarray:
        """``(full_dim, n, 2)`` array of entity extents in basis order."""
        out = []
        for comp in space.components:
            lo, hi = [], []
            for d, s in enumerate(self.sites):
                s = np.asarray(s)
                if d in comp.alpha:
                    lo.append(s[:-1])
                    hi.append(s[1:])
                else:
                    lo.append(s)
                    hi.append(s)
            L = np.stack([g.ravel(order="F") for g in np.meshgrid(*lo, indexing="ij")], axis=1)
            H = np.stack([g.ravel(order="F") for g in np.meshgrid(*hi, indexing="ij")], axis=1)
            out.append(np.stack([L, H], axis=2))
        return np.concatenate(out, axis=0)

    def derivative_sites(self, d: int) -> np.ndarray:
        """Midpoint-like anchors used for the edge direction ``d``."""
        s = np.asarray(self.sites[d])
        return 0.5 * (s[:-1] + s[1:])


def greville_grid(cx: TensorComplex) -> GrevilleGrid:
    return GrevilleGrid(tuple(tuple(greville_sites(kv)) for kv in cx.knot_vectors))


def dimension_report(cx: TensorComplex) -> dict:
    """Per-k dimensions before and after boundary conditions."""
    rep = {"n": cx.n, "degrees": list(cx.degrees), "forms": []}
    for s in cx.spaces:
        rep["forms"].append({
            "k": s.k,
            "components": len(s.components),
            "dim_full": s.full_dim,
            "dim": s.dim,
            "component_shapes": [list(c.shape) for c in s.components],
        })
    return rep


def export_matrix_market(path, matrix, comment: str = "") -> None:
    """Write a sparse matrix in MatrixMarket coordinate format."""
    import scipy.io

    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix), comment=comment)
