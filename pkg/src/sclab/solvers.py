"""Dense eigensolvers for the Maxwell formulations and the inf-sup test.

All problems are symmetric generalized eigenproblems solved with LAPACK
(``scipy.linalg.eigh``); constraint and quotient spaces are handled by
explicit orthonormal bases, so every reported spectrum is finite.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sl
import scipy.sparse as sp

from .assembly import (Geometry, assemble_curl_curl, assemble_mass, assemble_mixed_curl,
                       assemble_mixed_grad, assemble_stokes, box_geometry, constant_coefficients)
from .hierarchy import LevelStack, select_active

__all__ = [
    "EigResult",
    "count_zeros",
    "default_tolerance",
    "maxwell_primal",
    "maxwell_mixed_1",
    "maxwell_mixed_2",
    "infsup_constant",
    "stokes_infsup",
    "analytic_square_spectrum",
    "match_spectrum",
    "generalized_eigh",
    "InfSupResult",
]

ZERO_RTOL = 1e-8


@dataclass
class EigResult:
    eigenvalues: np.ndarray
    zero_count: int
    tol: float
    vectors: Optional[np.ndarray] = field(default=None, repr=False)
    residual: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def nonzero(self) -> np.ndarray:
        return self.eigenvalues[np.abs(self.eigenvalues) > self.tol]

    def summary(self) -> dict:
        out = {"zero_count": int(self.zero_count), "tol": float(self.tol), "residual": float(self.residual),
               "n_eigenvalues": int(self.eigenvalues.size)}
        out.update(self.meta)
        return out


def default_tolerance(eigs: np.ndarray, rtol: float = ZERO_RTOL) -> float:
    eigs = np.asarray(eigs)
    return rtol * float(np.abs(eigs).max()) if eigs.size else 0.0


def count_zeros(eigs, tol: Optional[float] = None) -> int:
    """Number of eigenvalues with ``|lambda| <= tol`` (default ``1e-8 *
    max |lambda|``)."""
    eigs = np.asarray(eigs, dtype=float)
    if tol is None:
        tol = default_tolerance(eigs)
    return int(np.sum(np.abs(eigs) <= tol))


def generalized_eigh(K: np.ndarray, M: np.ndarray, vectors: bool = True):
    """``K x = lambda M x`` for symmetric ``K`` and SPD ``M``; raises
    ``ValueError`` if ``M`` is not positive definite."""
    try:
        sl.cholesky(M, lower=True)
    except sl.LinAlgError as exc:
        raise ValueError("mass matrix is not positive definite") from exc
    if vectors:
        return sl.eigh(K, M)
    return sl.eigh(K, M, eigvals_only=True), None


def _residual(K, M, w, X, nev) -> float:
    if X is None or w.size == 0:
        return 0.0
    m = min(nev, w.size)
    R = K @ X[:, :m] - (M @ X[:, :m]) * w[:m]
    scale = max(1.0, float(np.abs(w[:m]).max()))
    return float(np.max(np.linalg.norm(R, axis=0) / np.linalg.norm(X[:, :m], axis=0)) / scale)


def _finish(K, M, rtol, tol, nev, keep_vectors, meta) -> EigResult:
    w, X = generalized_eigh(K, M)
    if tol is None:
        tol = default_tolerance(w, rtol)
    z = count_zeros(w, tol)
    res = _residual(K, M, w, X, nev if nev else w.size)
    return EigResult(w, z, tol, X if keep_vectors else None, res, meta)


def _default_geometry(geom):
    return geom if geom is not None else box_geometry((0.0, 0.0), (np.pi, np.pi))


def maxwell_primal(stack: LevelStack, geom: Optional[Geometry] = None, nev: int = 50,
                   rtol: float = ZERO_RTOL, tol: Optional[float] = None, keep_vectors: bool = False,
                   matrices: Optional[dict] = None) -> EigResult:
    """``(curl u, curl v) = lambda (u, v)`` on the hierarchical 1-forms.

    Zero eigenvalues (gradients and harmonic fields) are counted and kept in
    ``eigenvalues``; :attr:`EigResult.nonzero` gives the physical spectrum.
    """
    geom = _default_geometry(geom)
    h1, h2 = select_active(stack, 1), select_active(stack, 2)
    M = assemble_mass(h1, geom)
    K = assemble_curl_curl(h1, h2, geom)
    if matrices is not None:
        matrices.update({"mass_1": M, "curl_curl": K})
    return _finish(K.toarray(), M.toarray(), rtol, tol, nev, keep_vectors, {"problem": "maxwell", "dim": h1.dim})


def _null_space(A: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    if A.shape[0] == 0:
        return np.eye(A.shape[1])
    return sl.null_space(A, rcond=rtol)


def maxwell_mixed_1(stack: LevelStack, geom: Optional[Geometry] = None, nev: int = 50,
                    rtol: float = ZERO_RTOL, tol: Optional[float] = None,
                    matrices: Optional[dict] = None) -> EigResult:
    """Mixed form with a 0-form multiplier.

    The finite spectrum of ``[[K, B], [B^T, 0]]`` against ``diag(M, 0)`` is
    that of ``K`` on ``ker B^T`` (discretely divergence-free fields); its
    zeros are the harmonic 1-forms.
    """
    geom = _default_geometry(geom)
    h0, h1, h2 = (select_active(stack, k) for k in range(3))
    M = assemble_mass(h1, geom)
    K = assemble_curl_curl(h1, h2, geom)
    B = assemble_mixed_grad(h0, h1, geom, M1=M)
    if matrices is not None:
        matrices.update({"mass_1": M, "curl_curl": K, "grad_coupling": B,
                         "saddle": sp.bmat([[K, B], [B.T, None]], format="csr")})
    Bd = B.toarray()
    Z = _null_space(Bd.T)
    sv = sl.svdvals(Bd) if Bd.size else np.zeros(0)
    rankB = int(np.sum(sv > 1e-10 * sv.max())) if sv.size else 0
    Md, Kd = M.toarray(), K.toarray()
    return _finish(Z.T @ Kd @ Z, Z.T @ Md @ Z, rtol, tol, nev, False,
                   {"problem": "maxwell-mixed1", "dim": h1.dim + h0.dim, "constrained_dim": int(Z.shape[1]),
                    "singular_multiplier": rankB < h0.dim})


def maxwell_mixed_2(stack: LevelStack, geom: Optional[Geometry] = None, nev: int = 50,
                    rtol: float = ZERO_RTOL, tol: Optional[float] = None,
                    matrices: Optional[dict] = None) -> EigResult:
    """Mixed form on ``W^1 x W^2/R``.

    Eliminating ``u`` gives ``C M_1^{-1} C^T phi = lambda M_2 phi`` with
    ``C = M_2 D^1``, solved on the ``M_2``-orthogonal complement of the
    constants; zeros mark 2-forms that are not curls.
    """
    geom = _default_geometry(geom)
    h1, h2 = select_active(stack, 1), select_active(stack, 2)
    M1 = assemble_mass(h1, geom)
    M2 = assemble_mass(h2, geom)
    C = assemble_mixed_curl(h1, h2, geom, M2=M2)
    if matrices is not None:
        matrices.update({"mass_1": M1, "mass_2": M2, "curl_coupling": C})
    M1d, M2d, Cd = M1.toarray(), M2.toarray(), C.toarray()
    S = Cd @ sl.cho_solve(sl.cho_factor(M1d), Cd.T)
    Z = _deflation_basis(M2d, constant_coefficients(h2, M2, geom))
    return _finish(Z.T @ S @ Z, Z.T @ M2d @ Z, rtol, tol, nev, False,
                   {"problem": "maxwell-mixed2", "dim": h1.dim + h2.dim - 1})


def _deflation_basis(M: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the ``M``-orthogonal complement of ``c``."""
    r = M @ c
    r = r / np.linalg.norm(r)
    return sl.null_space(r[None, :])


@dataclass
class InfSupResult:
    beta: float
    eigenvalues: np.ndarray
    zero_count: int
    tol: float
    meta: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = {"beta": float(self.beta), "zero_count": int(self.zero_count), "tol": float(self.tol)}
        out.update(self.meta)
        return out


def infsup_constant(B, V, Mp, constant: np.ndarray, rtol: float = ZERO_RTOL,
                    tol: Optional[float] = None) -> InfSupResult:
    """Discrete inf-sup constant.

    ``beta^2`` is the smallest eigenvalue above ``tol`` of
    ``B V^{-1} B^T q = lambda M_p q`` over pressures ``M_p``-orthogonal to
    ``constant``.
    """
    Bd = B.toarray() if hasattr(B, "toarray") else np.asarray(B)
    Vd = V.toarray() if hasattr(V, "toarray") else np.asarray(V)
    Md = Mp.toarray() if hasattr(Mp, "toarray") else np.asarray(Mp)
    try:
        cf = sl.cho_factor(Vd)
    except sl.LinAlgError as exc:
        raise ValueError("velocity norm matrix is singular") from exc
    S = Bd @ sl.cho_solve(cf, Bd.T)
    Z = _deflation_basis(Md, constant)
    w, _ = generalized_eigh(Z.T @ S @ Z, Z.T @ Md @ Z, vectors=False)
    if tol is None:
        tol = default_tolerance(w, rtol)
    pos = w[w > tol]
    beta = float(np.sqrt(pos[0])) if pos.size else 0.0
    return InfSupResult(beta, w, count_zeros(w, tol), tol)


def stokes_infsup(stack: LevelStack, geom: Optional[Geometry] = None, norm: str = "grad_penalty",
                  Cpen: Optional[float] = None, matrices: Optional[dict] = None) -> InfSupResult:
    """Inf-sup constant of rotated 1-form velocities and 2-form pressures
    on a rotated hierarchical stack."""
    vel, pres = select_active(stack, 1), select_active(stack, 2)
    S = assemble_stokes(vel, pres, geom, Cpen=Cpen, norm=norm)
    if matrices is not None:
        matrices.update({"viscous": S.A, "divergence": S.B, "velocity_norm": S.V, "pressure_mass": S.Mp})
    c = constant_coefficients(pres, S.Mp, geom)
    res = infsup_constant(S.B, S.V, S.Mp, c)
    res.meta.update({"velocity_dim": vel.dim, "pressure_dim": pres.dim, "norm": norm, "Cpen": S.Cpen})
    return res


def analytic_square_spectrum(count: int, side: float = np.pi) -> np.ndarray:
    """Nonzero Maxwell eigenvalues of ``(0, side)^2`` with perfectly
    conducting walls: ``(pi/side)^2 (m^2 + n^2)``, ``m, n >= 0`` not both
    zero, with multiplicity."""
    r = int(np.ceil(np.sqrt(count))) + 2
    vals = sorted(m * m + n * n for m in range(r + 1) for n in range(r + 1) if m or n)
    return (np.pi / side) ** 2 * np.asarray(vals[:count], dtype=float)


def match_spectrum(computed, exact, rtol: float = 0.01) -> dict:
    """Greedy matching of computed eigenvalues to analytic ones.

    Each computed value (ascending) takes the nearest unmatched analytic
    value within ``rtol``; computed values left without a partner are
    spurious (reported with 1-based positions).
    """
    computed = np.asarray(computed, dtype=float)
    exact = np.asarray(exact, dtype=float)
    used = np.zeros(exact.size, dtype=bool)
    spurious = []
    for i, lam in enumerate(computed):
        rel = np.abs(exact - lam) / np.abs(exact)
        rel[used] = np.inf
        j = int(np.argmin(rel)) if rel.size else -1
        if j >= 0 and rel[j] <= rtol:
            used[j] = True
        else:
            spurious.append(i + 1)
    return {"spurious_positions": spurious, "spurious_free": not spurious,
            "matched": int(used.sum())}
