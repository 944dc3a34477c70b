"""Biorthogonal weight-pair machinery.

A biorthogonal pair is a pair of n x r matrices (phi, psi) with
psi^T phi = I_r; these pairs parametrize one autoencoder layer so that
decoding followed by encoding is the identity.  Training works on free
representatives (phi_t, psi_t) living in the open set where
det(psi_t^T phi_t) > 0 and maps them onto the constraint set with the
idempotent projection ``project_pair``.  The remaining functions provide
the regularizer that keeps representatives away from the boundary of that
set, the tangent-space projector of the constraint manifold, the
orthogonality-promoting Frobenius penalty, and a basis-invariant row
sparsity penalty for encoder weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import matkit

__all__ = [
    "BiorthogonalPair",
    "PairRep",
    "DomainError",
    "project_pair",
    "pair_regularizer",
    "pair_regularizer_with_grad",
    "tangent_project",
    "frob_orthogonality_penalty",
    "grassmann_row_sparsity",
    "grassmann_row_sparsity_with_grad",
    "init_pair",
]


class DomainError(matkit.KernelError):
    """Representative pair lies outside the admissible det > 0 domain."""


@dataclass(frozen=True)
class BiorthogonalPair:
    """Weight-matrix pair (phi, psi) with psi^T phi = I."""

    phi: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        if self.phi.shape != self.psi.shape or self.phi.ndim != 2:
            raise ValueError("phi and psi must be 2-d arrays of equal shape")

    @property
    def shape(self) -> tuple[int, int]:
        return self.phi.shape

    def residual(self) -> float:
        """Frobenius norm of psi^T phi - I; small for a valid pair."""
        r = self.phi.shape[1]
        return float(np.linalg.norm(self.psi.T @ self.phi - np.eye(r)))


@dataclass(frozen=True)
class PairRep:
    """Free representatives (phi_t, psi_t) of a biorthogonal pair."""

    phi_t: np.ndarray
    psi_t: np.ndarray

    def __post_init__(self):
        if self.phi_t.shape != self.psi_t.shape or self.phi_t.ndim != 2:
            raise ValueError("phi_t and psi_t must be 2-d arrays of equal shape")

    @property
    def shape(self) -> tuple[int, int]:
        return self.phi_t.shape


# Smallest admissible LU pivot of psi_t^T phi_t, relative to its norm.
_PIVOT_RTOL = 1e-14


def _gram_lu(rep: PairRep):
    """LU-factor psi_t^T phi_t and verify membership in the det > 0 domain."""
    m = rep.psi_t.T @ rep.phi_t
    lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    diag = np.diag(lu)
    swaps = int(np.count_nonzero(piv != np.arange(len(piv))))
    det_sign = (-1.0) ** swaps * np.prod(np.sign(diag))
    norm = np.linalg.norm(m)
    if det_sign <= 0.0 or np.abs(diag).min(initial=np.inf) <= _PIVOT_RTOL * norm:
        raise DomainError(
            "representative pair has det(psi_t^T phi_t) <= 0 or is numerically singular"
        )
    return m, (lu, piv)


def project_pair(rep: PairRep) -> BiorthogonalPair:
    """Map representatives onto the biorthogonal set: (phi_t G^-1, psi_t).

    G = psi_t^T phi_t must have positive determinant.  The map is idempotent:
    an already-biorthogonal pair is returned unchanged up to roundoff.
    """
    _, lu = _gram_lu(rep)
    # phi_t G^-1 computed as (G^-T phi_t^T)^T via the transposed LU solve.
    phi = scipy.linalg.lu_solve(lu, rep.phi_t.T, trans=1, check_finite=False).T
    return BiorthogonalPair(phi=phi, psi=rep.psi_t.copy())


def _regularizer_terms(rep: PairRep):
    # hot path during training: plain det/inv on the small Gram matrix;
    # a nearly singular Gram produces a huge (but finite) penalty, which is
    # exactly the barrier behavior wanted
    m = rep.psi_t.T @ rep.phi_t
    r = m.shape[0]
    if not np.linalg.det(m) > 0:
        raise DomainError("representative pair has det(psi_t^T phi_t) <= 0")
    try:
        minv = np.linalg.inv(m)
    except np.linalg.LinAlgError as exc:
        raise DomainError("psi_t^T phi_t is singular") from exc
    dev = m - np.eye(r)
    n1 = float(np.sum(dev * dev))
    n2 = float(np.sum(minv * minv))
    return m, minv, dev, n1, n2


def pair_regularizer(rep: PairRep) -> float:
    """Domain-keeping penalty ||G - I||_F^2 * ||G^-1||_F^2, G = psi_t^T phi_t.

    Zero exactly on the biorthogonal set; blows up as G approaches
    singularity, which keeps optimizer iterates inside the domain.
    """
    _, _, _, n1, n2 = _regularizer_terms(rep)
    return n1 * n2


def pair_regularizer_with_grad(rep: PairRep):
    """Penalty value and its gradient with respect to (phi_t, psi_t)."""
    _, minv, dev, n1, n2 = _regularizer_terms(rep)
    # d||G^-1||^2/dG = -2 G^-T G^-1 G^-T
    g_m = 2.0 * n2 * dev - 2.0 * n1 * (minv.T @ minv @ minv.T)
    grad_phi = rep.psi_t @ g_m
    grad_psi = rep.phi_t @ g_m.T
    return n1 * n2, (grad_phi, grad_psi)


def tangent_project(pair: BiorthogonalPair, x, y) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonally project (x, y) onto the tangent space at ``pair``.

    The tangent space is {(X, Y) : Y^T phi + psi^T X = 0}; the normal
    component has the form (psi A, phi A^T) where A solves the SPD Sylvester
    equation A (phi^T phi) + (psi^T psi) A = y^T phi + psi^T x.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != pair.shape or y.shape != pair.shape:
        raise ValueError("x and y must match the pair's shape")
    rhs = y.T @ pair.phi + pair.psi.T @ x
    a = matkit.solve_sylvester(pair.phi.T @ pair.phi, pair.psi.T @ pair.psi, rhs)
    return x - pair.psi @ a, y - pair.phi @ a.T


def frob_orthogonality_penalty(pair: BiorthogonalPair) -> float:
    """||phi||_F^2 + ||psi||_F^2: minimized (= 2r) iff phi = psi orthonormal."""
    return float(np.sum(pair.phi * pair.phi) + np.sum(pair.psi * pair.psi))


def _qf_with_factor(psi: np.ndarray):
    q, rr = matkit.qr_thin(psi)
    signs = np.sign(np.diag(rr))
    signs[signs == 0] = 1.0
    return q * signs, rr * signs[:, None]


def grassmann_row_sparsity(psi) -> float:
    """Basis-invariant row-sparsity penalty of the column space of psi.

    Equal to sum_i ||row_i(U)||_2 - r for any orthonormal basis U of
    Range(psi); invariant under psi -> psi A for invertible A, nonnegative,
    and zero exactly when psi has r nonzero rows.
    """
    psi = np.asarray(psi, dtype=np.float64)
    u, _ = _qf_with_factor(psi)
    return float(np.sum(np.sqrt(np.sum(u * u, axis=1))) - psi.shape[1])


def grassmann_row_sparsity_with_grad(psi, zero_row_tol: float = 1e-12):
    """Penalty value and subgradient with respect to psi.

    Rows of the orthonormal factor with norm below ``zero_row_tol`` get a
    zero subgradient, so rows that have already collapsed stay at zero
    under descent.  The remainder is the exact gradient, obtained by
    pulling the row-norm cotangent back through the QR factorization.
    """
    psi = np.asarray(psi, dtype=np.float64)
    u, rr = _qf_with_factor(psi)
    row_norms = np.sqrt(np.sum(u * u, axis=1))
    value = float(np.sum(row_norms) - psi.shape[1])

    ubar = np.zeros_like(u)
    nz = row_norms > zero_row_tol
    ubar[nz] = u[nz] / row_norms[nz, None]
    # QR pullback with a zero R cotangent: grad = (Ubar + U copyltu(M)) R^-T,
    # M = -Ubar^T U, copyltu(M) = tril(M) + tril(M, -1)^T.
    m = -ubar.T @ u
    copyltu = np.tril(m) + np.tril(m, -1).T
    grad = scipy.linalg.solve_triangular(
        rr, (ubar + u @ copyltu).T, trans=1, lower=False, check_finite=False
    ).T
    return value, grad


def init_pair(n: int, r: int, seed) -> PairRep:
    """Random initial representatives with phi_t = psi_t = Haar orthonormal.

    The pair is exactly biorthogonal (phi^T phi = I) and has unit operator
    norm, which keeps initial forward passes from amplifying inputs.
    """
    q = matkit.random_orthonormal(n, r, seed)
    return PairRep(phi_t=q, psi_t=q.copy())
