"""Geometry maps, quadrature and Galerkin assembly on hierarchical meshes.

Matrices are assembled element-level by element-level: on the active
elements of level ``L`` all active functions of levels ``<= L`` are written
in the level-``L`` tensor basis (:meth:`HierarchicalSpace.level_coefficients`)
and the tensor basis is evaluated at Gauss points with sparse Kronecker
products.

Pullbacks in 2D (``G = DF^T DF``, ``J = det DF``):

* 0-forms: ``int phi psi J``
* 1-forms (curl conforming): ``int u^T G^{-1} v J``
* 1-forms (rotated, div conforming): ``int u^T G v / J``
* 2-forms: ``int phi psi / J``
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .hierarchy import (HierarchicalSpace, LevelStack, hierarchical_bezier_mesh,
                        hierarchical_incidence)
from .univariate import KnotVector

__all__ = [
    "gauss_rule",
    "Geometry",
    "identity_geometry",
    "box_geometry",
    "spline_geometry",
    "assemble_mass",
    "assemble_curl_curl",
    "assemble_mixed_grad",
    "assemble_mixed_curl",
    "assemble_stokes",
    "StokesMatrices",
    "STOKES_NORMS",
    "evaluate_hierarchical",
    "constant_coefficients",
]


def gauss_rule(npts: int):
    """Gauss--Legendre points and weights on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class Geometry:
    """Map ``F`` from the parametric square; ``kind`` is ``"identity"``,
    ``"box"`` or ``"spline"``."""

    kind: str
    lower: tuple = (0.0, 0.0)
    upper: tuple = (1.0, 1.0)
    knot_vectors: Optional[tuple] = None
    control: Optional[np.ndarray] = None

    @property
    def affine_diagonal(self) -> bool:
        return self.kind in ("identity", "box")

    def evaluate(self, pts_1d: Sequence[np.ndarray]):
        """``F`` with shape ``(npts, 2)`` and ``DF`` with shape
        ``(npts, 2, 2)`` at the tensor grid of ``pts_1d`` (direction 0
        fastest)."""
        x0, x1 = (np.asarray(p, dtype=float) for p in pts_1d)
        X0 = np.tile(x0, x1.size)
        X1 = np.repeat(x1, x0.size)
        npts = X0.size
        if self.affine_diagonal:
            lo = np.asarray(self.lower, dtype=float)
            L = np.asarray(self.upper, dtype=float) - lo
            F = np.stack([lo[0] + L[0] * X0, lo[1] + L[1] * X1], axis=1)
            DF = np.zeros((npts, 2, 2))
            DF[:, 0, 0] = L[0]
            DF[:, 1, 1] = L[1]
            return F, DF
        kv0, kv1 = self.knot_vectors
        B0, B1 = kv0.evaluate(x0), kv1.evaluate(x1)
        dB0, dB1 = kv0.evaluate(x0, nu=1), kv1.evaluate(x1, nu=1)
        P = self.control
        F = np.zeros((npts, 2))
        DF = np.zeros((npts, 2, 2))
        for c in range(2):
            F[:, c] = (B0 @ P[:, :, c] @ B1.T).ravel(order="F")
            DF[:, c, 0] = (dB0 @ P[:, :, c] @ B1.T).ravel(order="F")
            DF[:, c, 1] = (B0 @ P[:, :, c] @ dB1.T).ravel(order="F")
        return F, DF


def identity_geometry() -> Geometry:
    return Geometry("identity")


def box_geometry(lower=(0.0, 0.0), upper=(1.0, 1.0)) -> Geometry:
    if any(u <= l for l, u in zip(lower, upper)):
        raise ValueError("box must have positive side lengths")
    return Geometry("box", tuple(map(float, lower)), tuple(map(float, upper)))


def spline_geometry(knot_vectors: Sequence[KnotVector], control) -> Geometry:
    """Tensor B-spline map with control net of shape ``(m0, m1, 2)``."""
    control = np.asarray(control, dtype=float)
    shape = tuple(kv.dim for kv in knot_vectors) + (2,)
    if control.shape != shape:
        raise ValueError("control net shape %s, expected %s" % (control.shape, shape))
    return Geometry("spline", knot_vectors=tuple(knot_vectors), control=control)


# ---------------------------------------------------------------------------
# quadrature on the hierarchical Bezier mesh


@dataclass
class _LevelQuad:
    level: int
    pts: List[np.ndarray]  # per direction, all elements
    rows: np.ndarray  # tensor point indices inside active elements
    weights: np.ndarray  # parametric weights at rows


def _level_quadrature(stack: LevelStack, level: int, active: np.ndarray, npts: Sequence[int]) -> _LevelQuad:
    pts, wts, elems = [], [], []
    for kv, q in zip(stack.complexes[level].knot_vectors, npts):
        b = kv.breakpoints
        x, w = gauss_rule(q)
        h = np.diff(b)
        pts.append((b[:-1, None] + h[:, None] * x[None, :]).ravel())
        wts.append((h[:, None] * w[None, :]).ravel())
        elems.append(np.repeat(np.arange(h.size), q))
    E0, E1 = np.meshgrid(elems[0], elems[1], indexing="ij")
    W = np.multiply.outer(wts[0], wts[1])
    inside = active[E0, E1].ravel(order="F")
    rows = np.flatnonzero(inside)
    return _LevelQuad(level, pts, rows, W.ravel(order="F")[rows])


def _quad_orders(stack: LevelStack, extra: int = 0) -> tuple:
    return tuple(p + 1 + extra for p in stack.base.degrees)


def _tensor_values(space, pts, rows, nu=(0, 0), axis: Optional[int] = None) -> sp.csr_matrix:
    """Level tensor basis of a form space at ``rows`` of the point grid.

    For vector proxies, ``axis`` selects the Cartesian component; other
    components contribute zero columns.
    """
    blocks = []
    for c in space.components:
        if axis is not None and c.axis != axis:
            blocks.append(sp.csr_matrix((rows.size, c.size)))
            continue
        V = c.evaluate(pts, list(nu))[rows]
        blocks.append(c.sign * V if axis is not None else V)
    return sp.hstack(blocks, format="csr")


def _hier_values(hs: HierarchicalSpace, lq: _LevelQuad, nu=(0, 0), axis=None) -> sp.csr_matrix:
    space = hs.stack.complexes[lq.level].spaces[hs.k]
    C = hs.level_coefficients(lq.level)
    V = _tensor_values(space, lq.pts, lq.rows, nu, axis) @ C
    return sp.hstack([V, sp.csr_matrix((V.shape[0], hs.dim - V.shape[1]))], format="csr")


def _levels(hs: HierarchicalSpace, extra: int = 0):
    stack = hs.stack
    mesh = hierarchical_bezier_mesh(stack)
    q = _quad_orders(stack, extra)
    for L in range(stack.N + 1):
        if mesh[L].any():
            yield _level_quadrature(stack, L, mesh[L], q)


def evaluate_hierarchical(hs: HierarchicalSpace, level: int, pts_1d, nu=(0, 0), axis=None) -> sp.csr_matrix:
    """Active functions of levels ``<= level`` at a tensor point grid,
    columns padded to ``hs.dim``."""
    npts = int(np.prod([len(p) for p in pts_1d]))
    lq = _LevelQuad(level, [np.asarray(p, dtype=float) for p in pts_1d], np.arange(npts), np.ones(npts))
    return _hier_values(hs, lq, nu, axis)


def _metric(geom: Geometry, lq: _LevelQuad):
    _, DF = geom.evaluate(lq.pts)
    DF = DF[lq.rows]
    J = np.linalg.det(DF)
    if np.any(J <= 0):
        raise ValueError("geometry map has non-positive Jacobian at a quadrature point")
    return DF, J


def _weighted(A: sp.csr_matrix, w: np.ndarray, B: sp.csr_matrix) -> sp.csr_matrix:
    return (A.T @ sp.diags(w) @ B).tocsr()


def assemble_mass(hs: HierarchicalSpace, geom: Optional[Geometry] = None, extra_quad: int = 0) -> sp.csr_matrix:
    """L2 mass matrix of the active basis of ``hs`` with the k-form pullback."""
    geom = geom or identity_geometry()
    k = hs.k
    M = sp.csr_matrix((hs.dim, hs.dim))
    rotated = hs.stack.base.rotations % 2 == 1
    for lq in _levels(hs, extra_quad):
        DF, J = _metric(geom, lq)
        if k == 0:
            V = _hier_values(hs, lq)
            M = M + _weighted(V, lq.weights * J, V)
        elif k == 2:
            V = _hier_values(hs, lq)
            M = M + _weighted(V, lq.weights / J, V)
        elif k == 1:
            G = np.einsum("pki,pkj->pij", DF, DF)
            Wm = G / J[:, None, None] if rotated else np.linalg.inv(G) * J[:, None, None]
            Vs = [_hier_values(hs, lq, axis=a) for a in range(2)]
            for a in range(2):
                for b in range(2):
                    w = lq.weights * Wm[:, a, b]
                    if np.any(w):
                        M = M + _weighted(Vs[a], w, Vs[b])
        else:
            raise ValueError("k must be 0, 1 or 2")
    M = 0.5 * (M + M.T)
    return M.tocsr()


def assemble_curl_curl(hs1: HierarchicalSpace, hs2: HierarchicalSpace, geom: Optional[Geometry] = None,
                       M2: Optional[sp.csr_matrix] = None) -> sp.csr_matrix:
    """``K = D^T M_2 D`` with ``D`` the hierarchical curl incidence."""
    D = hierarchical_incidence(hs1, hs2)
    if M2 is None:
        M2 = assemble_mass(hs2, geom)
    K = (D.T @ M2 @ D).tocsr()
    return (0.5 * (K + K.T)).tocsr()


def assemble_mixed_grad(hs0: HierarchicalSpace, hs1: HierarchicalSpace, geom: Optional[Geometry] = None,
                        M1: Optional[sp.csr_matrix] = None) -> sp.csr_matrix:
    """``B[i, j] = (grad q_j, v_i)``, i.e. ``M_1 D^0`` with shape
    ``(dim W^1, dim W^0)``."""
    D = hierarchical_incidence(hs0, hs1)
    if M1 is None:
        M1 = assemble_mass(hs1, geom)
    return (M1 @ D).tocsr()


def assemble_mixed_curl(hs1: HierarchicalSpace, hs2: HierarchicalSpace, geom: Optional[Geometry] = None,
                        M2: Optional[sp.csr_matrix] = None) -> sp.csr_matrix:
    """``C[i, j] = (curl v_j, psi_i)``, i.e. ``M_2 D^1``."""
    D = hierarchical_incidence(hs1, hs2)
    if M2 is None:
        M2 = assemble_mass(hs2, geom)
    return (M2 @ D).tocsr()


def constant_coefficients(hs: HierarchicalSpace, M: Optional[sp.csr_matrix] = None,
                          geom: Optional[Geometry] = None) -> np.ndarray:
    """Coefficients of the constant function 1 in a 2-form space (L2
    projection of 1, exact because constants belong to the space)."""
    import scipy.sparse.linalg as spla
    if hs.k != hs.stack.n:
        raise ValueError("constants are only represented in the top-degree space")
    geom = geom or identity_geometry()
    b = np.zeros(hs.dim)
    for lq in _levels(hs):
        V = _hier_values(hs, lq)
        b += V.T @ lq.weights
    if M is None:
        M = assemble_mass(hs, geom)
    # the 2-form pullback of the constant 1 is J, and (J, psi/J) = int psi
    return spla.spsolve(M.tocsc(), b)


# ---------------------------------------------------------------------------
# Stokes with divergence-conforming velocities


@dataclass
class StokesMatrices:
    A: sp.csr_matrix  # viscous operator with Nitsche terms
    B: sp.csr_matrix  # (q, div v), shape (dim Q, dim V)
    V: sp.csr_matrix  # velocity norm
    Mp: sp.csr_matrix  # pressure mass
    Cpen: float
    nu: float
    norm: str
    div_incidence: sp.csr_matrix  # div in the active bases


STOKES_NORMS = ("grad_penalty", "strain_nitsche")


def _velocity_derivatives(hs: HierarchicalSpace, lq: _LevelQuad, L, vscale) -> dict:
    """Physical ``d v_a / d x_j`` keyed by ``(a, j)`` for a box map with side
    lengths ``L`` (``v_a = vscale[a] * v_hat_a``)."""
    return {(a, j): _hier_values(hs, lq, nu=(int(j == 0), int(j == 1)), axis=a) * (vscale[a] / L[j])
            for a in range(2) for j in range(2)}


def _boundary_levels(stack: LevelStack, npts):
    """Per level and side, quadrature on boundary edges of active elements.

    Yields ``(level, normal, lq, h_par)`` with ``h_par`` the parametric
    element length normal to the side at every quadrature row.
    """
    mesh = hierarchical_bezier_mesh(stack)
    for L in range(stack.N + 1):
        active = mesh[L]
        if not active.any():
            continue
        kvs = stack.complexes[L].knot_vectors
        for axis in range(2):
            other = 1 - axis
            b = kvs[other].breakpoints
            h = np.diff(b)
            x, w = gauss_rule(npts[other])
            t = (b[:-1, None] + h[:, None] * x[None, :]).ravel()
            wt = (h[:, None] * w[None, :]).ravel()
            el = np.repeat(np.arange(h.size), npts[other])
            hn = np.diff(kvs[axis].breakpoints)
            for end, sgn in ((0, -1.0), (1, 1.0)):
                idx = 0 if end == 0 else active.shape[axis] - 1
                line = active[idx, :] if axis == 0 else active[:, idx]
                rows = np.flatnonzero(line[el])
                if rows.size == 0:
                    continue
                pts = [None, None]
                pts[axis] = np.array([float(end)])
                pts[other] = t
                normal = np.zeros(2)
                normal[axis] = sgn
                yield L, normal, _LevelQuad(L, pts, rows, wt[rows]), np.full(rows.size, hn[idx])


def assemble_stokes(vel: HierarchicalSpace, pres: HierarchicalSpace, geom: Optional[Geometry] = None,
                    nu: float = 1.0, Cpen: Optional[float] = None, norm: str = "grad_penalty") -> StokesMatrices:
    """Stokes matrices for rotated 1-form velocities and 2-form pressures.

    Normal velocity is constrained strongly by the boundary mask of the
    rotated space; tangential velocity is imposed weakly (Nitsche), and
    ``A = 2 nu [(e(u), e(v)) - <e(u) n, v> - <e(v) n, u> + <Cpen/h u, v>]``.

    The velocity norm is

    * ``"grad_penalty"``: ``|grad v|^2 + |(Cpen/h)^(1/2) v|^2_G`` (default);
    * ``"strain_nitsche"``: ``|e(v)|^2 + |h^(1/2) e(v) n|^2_G + |(Cpen/h)^(1/2) v|^2_G``.

    Only axis-aligned box geometries are supported, where the velocity
    Piola map is a diagonal scaling.
    """
    geom = geom or identity_geometry()
    if not geom.affine_diagonal:
        raise NotImplementedError("Stokes assembly supports box geometries only")
    if vel.k != 1 or pres.k != 2 or vel.stack is not pres.stack:
        raise ValueError("velocity must be 1-forms and pressure 2-forms of one stack")
    if vel.stack.base.rotations % 2 != 1:
        raise ValueError("velocity space must come from a rotated complex")
    if norm not in STOKES_NORMS:
        raise ValueError("norm must be one of %s" % (STOKES_NORMS,))
    if Cpen is None:
        Cpen = 5.0 * max(vel.stack.base.degrees)
    if Cpen <= 0:
        raise ValueError("penalty constant must be positive")
    L = np.asarray(geom.upper) - np.asarray(geom.lower)
    J = L[0] * L[1]
    vscale = L / J
    n = vel.dim
    Strain = sp.csr_matrix((n, n))
    Grad = sp.csr_matrix((n, n))
    Bm = sp.csr_matrix((pres.dim, n))
    Mp = sp.csr_matrix((pres.dim, pres.dim))
    q = _quad_orders(vel.stack)
    for lq in _levels(vel):
        w = lq.weights * J
        d = _velocity_derivatives(vel, lq, L, vscale)
        e01 = 0.5 * (d[0, 1] + d[1, 0])
        Strain = Strain + _weighted(d[0, 0], w, d[0, 0]) + _weighted(d[1, 1], w, d[1, 1]) + 2.0 * _weighted(e01, w, e01)
        for key in d:
            Grad = Grad + _weighted(d[key], w, d[key])
        P = _hier_values(pres, lq) / J
        Bm = Bm + _weighted(P, w, d[0, 0] + d[1, 1])
        Mp = Mp + _weighted(P, w, P)
    Nit = sp.csr_matrix((n, n))
    Pen = sp.csr_matrix((n, n))
    Flux = sp.csr_matrix((n, n))
    for _, normal, lq, hpar in _boundary_levels(vel.stack, q):
        axis = int(np.flatnonzero(normal)[0])
        w = lq.weights * L[1 - axis]
        hF = hpar * L[axis]
        if np.any(hF <= 0):
            raise ValueError("non-positive element size on the boundary")
        vals = [_hier_values(vel, lq, axis=a) * vscale[a] for a in range(2)]
        d = _velocity_derivatives(vel, lq, L, vscale)
        off = 0.5 * (d[0, 1] + d[1, 0])
        eps = [[d[0, 0], off], [off, d[1, 1]]]
        en = [eps[a][0] * normal[0] + eps[a][1] * normal[1] for a in range(2)]
        for a in range(2):
            Nit = Nit + _weighted(en[a], w * hF, en[a])
            Pen = Pen + _weighted(vals[a], w * Cpen / hF, vals[a])
            Flux = Flux + _weighted(vals[a], w, en[a])
    Vn = Grad + Pen if norm == "grad_penalty" else Strain + Nit + Pen
    A = 2.0 * nu * (Strain - Flux - Flux.T + Pen)
    D = hierarchical_incidence(vel, pres)
    sym = lambda X: (0.5 * (X + X.T)).tocsr()
    return StokesMatrices(sym(A), Bm.tocsr(), sym(Vn), sym(Mp), float(Cpen), float(nu), norm, D)
