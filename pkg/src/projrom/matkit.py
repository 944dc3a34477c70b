"""Dense float64 linear-algebra kernel used by the rest of the package.

Everything here operates on plain ``numpy.ndarray`` objects (row-major,
float64).  A matrix is a 2-d array, a vector a 1-d array; no wrapper types.
Factorizations are backed by LAPACK through numpy/scipy, while the Sylvester
and Lyapunov solvers use an explicit Kronecker-product linear system, which
is exact and perfectly adequate for the small (r <= 64) matrices this
package ever produces.

All functions are pure and thread-safe.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = [
    "KernelError",
    "RankDeficientError",
    "SingularMatrixError",
    "NotSpdError",
    "NotHurwitzError",
    "SvdConvergenceError",
    "qr_thin",
    "svd",
    "solve",
    "solve_sylvester",
    "solve_lyapunov",
    "random_orthonormal",
]


class KernelError(Exception):
    """Base class for numerical failures raised by this module."""


class RankDeficientError(KernelError):
    """Input matrix is numerically rank deficient.

    Attributes:
        rank: the detected numerical rank.
        needed: the rank required by the operation.
    """

    def __init__(self, rank: int, needed: int):
        self.rank = rank
        self.needed = needed
        super().__init__(f"matrix is rank deficient: detected rank {rank}, needed {needed}")


class SingularMatrixError(KernelError):
    """Square system is singular within the pivot tolerance."""


class NotSpdError(KernelError):
    """Matrix expected to be symmetric positive definite is not."""


class NotHurwitzError(KernelError):
    """Matrix expected to be Hurwitz has an eigenvalue with Re >= 0."""

    def __init__(self, max_real_part: float):
        self.max_real_part = max_real_part
        super().__init__(f"matrix is not Hurwitz: max Re(eig) = {max_real_part:.3e}")


class SvdConvergenceError(KernelError):
    """SVD iteration failed to converge."""


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {a.shape}")
    return a


def qr_thin(m) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization of an n x r matrix with n >= r.

    Returns (Q, R) with Q of shape (n, r), Q^T Q = I_r, R upper triangular
    and Q @ R = m.  Raises :class:`RankDeficientError` when the numerical
    rank (from the diagonal of R) is below r.
    """
    a = _as_matrix(m)
    n, r = a.shape
    if n < r:
        raise ValueError(f"qr_thin needs n >= r, got shape {a.shape}")
    q, rr = np.linalg.qr(a, mode="reduced")
    diag = np.abs(np.diag(rr))
    scale = diag.max() if diag.size else 0.0
    tol = max(n, r) * np.finfo(np.float64).eps * scale
    rank = int(np.count_nonzero(diag > tol))
    if rank < r:
        raise RankDeficientError(rank=rank, needed=r)
    return q, rr


def qf(m) -> np.ndarray:
    """Sign-corrected orthonormal factor of a thin QR factorization.

    Columns of Q are flipped so that the diagonal of R is positive, which
    removes the column-sign ambiguity of QR and makes the map deterministic.
    """
    q, rr = qr_thin(m)
    signs = np.sign(np.diag(rr))
    signs[signs == 0] = 1.0
    return q * signs


def svd(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin singular value decomposition m = U diag(s) V^T.

    Singular values are returned nonincreasing and nonnegative.
    """
    a = _as_matrix(m)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure is rare
        raise SvdConvergenceError(str(exc)) from exc
    return u, s, vt.T


# Relative pivot tolerance below which a square system counts as singular.
_PIVOT_RTOL = 1e-14


def solve(a, b) -> np.ndarray:
    """Solve the square linear system a @ x = b for a vector or matrix b.

    Uses LU with partial pivoting; raises :class:`SingularMatrixError` when
    the smallest pivot falls below 1e-14 * ||a||_F.
    """
    amat = _as_matrix(a)
    n, n2 = amat.shape
    if n != n2:
        raise ValueError(f"solve needs a square matrix, got shape {amat.shape}")
    lu, piv = scipy.linalg.lu_factor(amat, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min(initial=np.inf) <= _PIVOT_RTOL * np.linalg.norm(amat):
        raise SingularMatrixError("matrix is singular within pivot tolerance")
    return scipy.linalg.lu_solve((lu, piv), np.asarray(b, dtype=np.float64), check_finite=False)


def _check_spd(m: np.ndarray, name: str) -> None:
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-10 * max(1.0, np.abs(m).max())):
        raise NotSpdError(f"{name} is not symmetric")
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotSpdError(f"{name} is not positive definite") from exc


def _sylvester_kron(p: np.ndarray, q: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve A p + q A = rhs by vectorizing to (p^T ox I + I ox q) vec(A)."""
    r = p.shape[0]
    eye = np.eye(r)
    k = np.kron(p.T, eye) + np.kron(eye, q)
    vec = solve(k, rhs.reshape(-1, order="F"))
    return vec.reshape((r, r), order="F")


def solve_sylvester(p, q, rhs) -> np.ndarray:
    """Solve A @ p + q @ A = rhs for symmetric positive definite p and q.

    SPD inputs guarantee a unique solution.  Solved through the Kronecker
    linear system; O(r^6) but exact at the sizes used here.
    """
    pm, qm, rm = _as_matrix(p), _as_matrix(q), _as_matrix(rhs)
    if pm.shape != qm.shape or pm.shape != rm.shape or pm.shape[0] != pm.shape[1]:
        raise ValueError("p, q, rhs must be square matrices of equal size")
    _check_spd(pm, "p")
    _check_spd(qm, "q")
    return _sylvester_kron(pm, qm, rm)


def solve_lyapunov(a, q) -> np.ndarray:
    """Solve a @ W + W @ a^T + q = 0 for Hurwitz a and symmetric PSD q.

    Internally a Sylvester instance (W a^T + a W = -q) through the same
    Kronecker kernel; the result is symmetrized before returning.
    """
    am, qm = _as_matrix(a), _as_matrix(q)
    eigs = np.linalg.eigvals(am)
    max_re = float(eigs.real.max())
    if max_re >= 0.0:
        raise NotHurwitzError(max_re)
    w = _sylvester_kron(am.T, am, -qm)
    return 0.5 * (w + w.T)


def random_orthonormal(n: int, r: int, seed) -> np.ndarray:
    """First r columns of a Haar-distributed n x n orthogonal matrix.

    Computed as the sign-corrected QR factor of a standard Gaussian matrix
    (each Q column is multiplied by the sign of the matching R diagonal,
    which fixes the distribution).  Deterministic for a fixed seed.
    """
    if n < r:
        raise ValueError(f"random_orthonormal needs n >= r, got ({n}, {r})")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, n))
    q, rr = np.linalg.qr(z)
    signs = np.sign(np.diag(rr))
    signs[signs == 0] = 1.0
    return np.ascontiguousarray((q * signs)[:, :r])
