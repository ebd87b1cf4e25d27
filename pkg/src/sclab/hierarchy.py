"""Hierarchical B-spline complexes.

Levels are obtained by dyadic refinement of a base complex (with homogeneous
boundary conditions). The refined subdomains ``Omega_1 ⊃ Omega_2 ⊃ ...`` are
stored as boolean arrays over the elements of the *parent* level, which is
the strong condition by construction.

Active functions are selected per k and per component with Kraft's
recursion; supports are open, so ``supp ⊂ Omega`` reduces to "every element
of the support box is refined".
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .rank import PRIMES, exact_rank
from .tensor import (TensorComplex, apply_boundary_conditions, incidence_matrix,
                     kron_all)
from .univariate import refinement_matrix

__all__ = [
    "LevelStack",
    "build_levels",
    "HierarchicalSpace",
    "select_active",
    "basis_subset",
    "hierarchical_bezier_mesh",
    "hierarchical_dims",
    "hierarchical_incidence",
    "cohomology_from_ranks",
]


def _box_sums(prefix: np.ndarray, lo: Sequence[np.ndarray], hi: Sequence[np.ndarray]) -> np.ndarray:
    """Number of True cells in boxes ``[lo, hi)`` from an n-D prefix-sum table
    padded with a leading zero slab in every axis."""
    n = len(lo)
    total = 0
    for corner in itertools.product((0, 1), repeat=n):
        idx = tuple(hi[d] if c else lo[d] for d, c in enumerate(corner))
        sign = (-1) ** (n - sum(corner))
        total = total + sign * prefix[idx]
    return total


def _prefix(mask: np.ndarray) -> np.ndarray:
    P = mask.astype(np.int64)
    for ax in range(P.ndim):
        P = np.cumsum(P, axis=ax)
    return np.pad(P, [(1, 0)] * P.ndim)


@dataclass(frozen=True, eq=False)
class LevelStack:
    """Nested tensor complexes and refined subdomains.

    ``omegas[j - 1]`` is ``Omega_j`` as a boolean array over level ``j - 1``
    elements, for ``j = 1..N``.
    """

    complexes: tuple
    omegas: tuple

    @property
    def N(self) -> int:
        return len(self.omegas)

    @property
    def n(self) -> int:
        return self.complexes[0].n

    @property
    def base(self) -> TensorComplex:
        return self.complexes[0]

    def num_elements(self, level: int) -> tuple:
        return tuple(kv.num_elements for kv in self.complexes[level].knot_vectors)

    def omega(self, j: int, level: int) -> np.ndarray:
        """``Omega_j`` on the element grid of ``level`` (``level >= j - 1``)."""
        shape = self.num_elements(level)
        if j <= 0:
            return np.ones(shape, dtype=bool)
        if j > self.N:
            return np.zeros(shape, dtype=bool)
        if level < j - 1:
            raise ValueError("Omega_%d is not a union of level-%d elements" % (j, level))
        w = self.omegas[j - 1]
        f = 2 ** (level - j + 1)
        for ax in range(w.ndim):
            w = np.repeat(w, f, axis=ax)
        return w

    def support_boxes(self, level: int, k: int, target_level: int):
        """Per component, the support boxes of all level-``level`` k-forms
        expressed on the element grid of ``target_level >= level``."""
        f = 2 ** (target_level - level)
        out = []
        for comp in self.complexes[level].spaces[k].components:
            rngs = comp.support_ranges()
            grids_lo = np.meshgrid(*[r[:, 0] * f for r in rngs], indexing="ij")
            grids_hi = np.meshgrid(*[r[:, 1] * f for r in rngs], indexing="ij")
            out.append(([g.ravel(order="F") for g in grids_lo], [g.ravel(order="F") for g in grids_hi]))
        return out

    def contained(self, level: int, k: int, j: int) -> np.ndarray:
        """Boolean mask over the full level-``level`` k-form numbering:
        open support contained in ``Omega_j``."""
        if j <= 0:
            return np.ones(self.complexes[level].spaces[k].full_dim, dtype=bool)
        if j > self.N:
            return np.zeros(self.complexes[level].spaces[k].full_dim, dtype=bool)
        L = max(level, j - 1)
        P = _prefix(self.omega(j, L))
        res = []
        for lo, hi in self.support_boxes(level, k, L):
            vol = np.prod([h - l for l, h in zip(lo, hi)], axis=0)
            res.append(_box_sums(P, lo, hi) == vol)
        return np.concatenate(res)

    @cached_property
    def _two_scale_cache(self) -> dict:
        return {}

    def two_scale(self, level: int, k: int, prime: Optional[int] = None) -> sp.csr_matrix:
        """Sparse ``T`` with ``beta^level_j = sum_i T[i, j] beta^{level+1}_i``
        over full k-form numberings (float, or residues mod ``prime``)."""
        key = (level, k, prime)
        cache = self._two_scale_cache
        if key not in cache:
            coarse = self.complexes[level].spaces[k]
            fine = self.complexes[level + 1].spaces[k]
            blocks = []
            for cc, cf in zip(coarse.components, fine.components):
                mats = []
                for fc, ff, nz in zip(cc.factors, cf.factors, cc.normalized):
                    if prime is None:
                        mats.append(sp.csr_matrix(refinement_matrix(fc, ff, normalized=nz)))
                    else:
                        from .rank import to_modular
                        mats.append(sp.csr_matrix(to_modular(refinement_matrix(fc, ff, exact=True, normalized=nz), prime)))
                T = kron_all(mats)
                if prime is not None:
                    T = sp.csr_matrix(T, dtype=np.int64)
                    T.data %= prime
                blocks.append(T)
            cache[key] = sp.block_diag(blocks, format="csr")
        return cache[key]


def _as_mask(cells, shape) -> np.ndarray:
    if isinstance(cells, np.ndarray) and cells.dtype == bool:
        if cells.shape != tuple(shape):
            raise ValueError("mask shape %s does not match grid %s" % (cells.shape, shape))
        return cells.copy()
    mask = np.zeros(shape, dtype=bool)
    for c in cells:
        c = tuple(int(i) for i in c)
        if len(c) != len(shape) or any(not 0 <= i < s for i, s in zip(c, shape)):
            raise ValueError("element %s outside grid %s" % (c, shape))
        mask[c] = True
    return mask


def build_levels(base: TensorComplex, refinements: Sequence[Iterable] = ()) -> LevelStack:
    """Stack of ``len(refinements) + 1`` levels.

    ``refinements[j - 1]`` lists the level-``(j-1)`` elements (multi-indices,
    or a boolean mask) whose union is ``Omega_j``. Each must lie inside
    ``Omega_{j-1}``.
    """
    if not base.boundary_conditions:
        base = apply_boundary_conditions(base)
    complexes = [base]
    omegas = []
    for j, cells in enumerate(refinements, start=1):
        shape = tuple(kv.num_elements for kv in complexes[-1].knot_vectors)
        mask = _as_mask(cells, shape)
        if j >= 2:
            parent = omegas[-1]
            for ax in range(parent.ndim):
                parent = np.repeat(parent, 2, axis=ax)
            if np.any(mask & ~parent):
                raise ValueError("Omega_%d is not contained in Omega_%d" % (j, j - 1))
        omegas.append(mask)
        complexes.append(complexes[-1].refine())
    return LevelStack(tuple(complexes), tuple(omegas))


@dataclass(frozen=True, eq=False)
class HierarchicalSpace:
    """Active k-form functions, level by level (full level numbering)."""

    stack: LevelStack
    k: int
    active: tuple

    @property
    def counts(self) -> List[int]:
        return [int(a.size) for a in self.active]

    @property
    def dim(self) -> int:
        return int(sum(self.counts))

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts)]).astype(int)

    def labels(self) -> list:
        """``(level, full index)`` per hierarchical basis function."""
        return [(l, int(i)) for l, a in enumerate(self.active) for i in a]

    def level_coefficients(self, level: int) -> sp.csr_matrix:
        """Active functions of levels ``<= level`` in the full level basis;
        shape ``(full_dim(level), offsets[level + 1])``."""
        C = None
        for l in range(level + 1):
            fd = self.stack.complexes[l].spaces[self.k].full_dim
            E = sp.csr_matrix((np.ones(self.active[l].size), (self.active[l], np.arange(self.active[l].size))),
                              shape=(fd, self.active[l].size))
            C = E if C is None else sp.hstack([self.stack.two_scale(l - 1, self.k) @ C, E], format="csr")
        return C


def select_active(stack: LevelStack, k: int) -> HierarchicalSpace:
    """Kraft's recursion, applied to every component of the k-forms."""
    cx0 = stack.complexes[0]
    act = [cx0.spaces[k].keep.copy()]
    for l in range(stack.N):
        for m in range(l + 1):
            act[m] &= ~stack.contained(m, k, l + 1)
        keep = stack.complexes[l + 1].spaces[k].keep
        act.append(keep & stack.contained(l + 1, k, l + 1))
    return HierarchicalSpace(stack, k, tuple(np.flatnonzero(a) for a in act))


def basis_subset(stack: LevelStack, k: int, level: int, target: int) -> np.ndarray:
    """Full indices of retained level-``level`` k-forms with support in
    ``Omega_target``."""
    if not 0 <= level <= target:
        raise ValueError("need 0 <= level <= target")
    keep = stack.complexes[level].spaces[k].keep
    return np.flatnonzero(keep & stack.contained(level, k, target))


def hierarchical_bezier_mesh(stack: LevelStack) -> List[np.ndarray]:
    """Per level, the mask of active elements: in ``Omega_l`` but not in
    ``Omega_{l+1}``."""
    out = []
    for l in range(stack.N + 1):
        inside = stack.omega(l, l)
        finer = stack.omegas[l] if l < stack.N else np.zeros_like(inside)
        out.append(inside & ~finer)
    return out


def element_areas(stack: LevelStack, level: int) -> np.ndarray:
    sizes = [np.diff(kv.breakpoints) for kv in stack.complexes[level].knot_vectors]
    out = sizes[0]
    for s in sizes[1:]:
        out = np.multiply.outer(out, s)
    return out


def hierarchical_dims(stack: LevelStack) -> List[int]:
    return [select_active(stack, k).dim for k in range(stack.n + 1)]


def hierarchical_incidence(src: HierarchicalSpace, dst: HierarchicalSpace,
                           prime: Optional[int] = None) -> sp.csr_matrix:
    """Matrix of ``d`` from ``W^k`` to ``W^{k+1}`` in the active bases.

    Each level-l image is expanded with the level-l incidence; coefficients
    on level-l functions that were removed (support inside ``Omega_{l+1}``)
    are pushed to level ``l+1`` with the two-scale relation, until every
    coefficient sits on an active function. Raises if any coefficient is
    left on a function that is neither active nor removable, i.e. if the
    image is not in ``W^{k+1}``.
    """
    stack = src.stack
    k = src.k
    if dst.k != k + 1 or dst.stack is not stack:
        raise ValueError("incompatible hierarchical spaces")
    ncols = src.dim
    col_off = src.offsets
    blocks = []
    carry = None
    for l in range(stack.N + 1):
        cx = stack.complexes[l]
        D = incidence_matrix(cx, k, full=True).astype(np.int64 if prime else float)
        cols = src.active[l]
        Y = sp.csr_matrix((D.shape[0], ncols), dtype=D.dtype)
        if cols.size:
            sel = sp.csr_matrix((np.ones(cols.size, dtype=D.dtype),
                                 (cols, col_off[l] + np.arange(cols.size))),
                                shape=(D.shape[1], ncols))
            Y = D @ sel
        if carry is not None:
            Y = Y + carry
        if prime:
            Y = sp.csr_matrix(Y)
            Y.data %= prime
            Y.eliminate_zeros()
        Y = sp.csr_matrix(Y)
        rows_active = dst.active[l]
        blocks.append(Y[rows_active])
        rest = np.ones(Y.shape[0], dtype=bool)
        rest[rows_active] = False
        removable = stack.contained(l, k + 1, l + 1) & cx.spaces[k + 1].keep
        bad = rest & ~removable
        R = Y[np.flatnonzero(bad)]
        if R.nnz and (prime or np.abs(R.data).max() > 1e-10):
            raise RuntimeError("image of d leaves the hierarchical space at level %d" % l)
        if l < stack.N:
            mask = sp.diags((rest & removable).astype(Y.dtype), dtype=Y.dtype)
            carry = stack.two_scale(l, k + 1, prime) @ (mask @ Y)
            if prime:
                carry = sp.csr_matrix(carry)
                carry.data %= prime
        else:
            left = Y[np.flatnonzero(rest)]
            if left.nnz and (prime or np.abs(left.data).max() > 1e-10):
                raise RuntimeError("coefficients left on removed finest-level functions")
    out = sp.vstack(blocks, format="csr")
    if prime:
        out.data %= prime
        out.eliminate_zeros()
    return out


def cohomology_from_ranks(dims: Sequence[int], ranks: Sequence[int]) -> List[int]:
    """``dim H^k = dim W^k - rank d^k - rank d^{k-1}`` with ``ranks[k] = rank d^k``."""
    n = len(dims) - 1
    out = []
    for k in range(n + 1):
        r_out = ranks[k] if k < n else 0
        r_in = ranks[k - 1] if k > 0 else 0
        out.append(int(dims[k] - r_out - r_in))
    return out
