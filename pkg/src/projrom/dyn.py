"""Full-order models, integrators, adjoint gradient sampling, baselines.

Systems implement a common protocol: vector field ``f(x, u)``, output map
``g(x)``, and the Jacobian-vector / transposed-Jacobian-vector products the
dynamics-aware losses need.  All of these accept a single state (n,) or a
batch of column states (n, N) and act columnwise, which is what makes the
training loop and ROM simulations fast in numpy.

Also here: the classical RK4 integrator with blow-up detection, adjoint
sampling of output-sensitivity gradients along stored trajectories, the
two slow-fast example systems with their invariant-manifold series, the
nonnormal linear example, POD, and balanced truncation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import matkit
from .biortho import BiorthogonalPair

__all__ = [
    "FomSystem",
    "Trajectory",
    "GradientSample",
    "BlowUpError",
    "rk4",
    "sample_gradients",
    "PitchforkSystem",
    "pitchfork_system",
    "pitchfork_slow_manifold",
    "pitchfork_manifold_coefficients",
    "NoackSystem",
    "noack_system",
    "noack_slow_manifold",
    "noack_manifold_coefficients",
    "LtiSystem",
    "nonnormal_lti",
    "tridiagonal_system",
    "pod_projection",
    "balanced_truncation",
    "impulse_response",
    "frequency_response",
    "fit_decay_rate",
]

# States whose norm exceeds this count as blown up (reported as infinite
# prediction error rather than a crash).
BLOWUP_NORM = 1e6


class BlowUpError(RuntimeError):
    """Trajectory left the admissible region; carries the time stamp."""

    def __init__(self, time: float):
        self.time = float(time)
        super().__init__(f"state blew up at t = {time:.6g}")


class FomSystem:
    """Base class for full-order models.

    Subclasses define ``n``, ``m``, ``f``, ``g``, ``jvp_f``, ``vjp_f``,
    ``vjp_g`` (all columnwise-batched) and a coupling stencil used by the
    sparse-encoder machinery.  ``f_restricted`` has a generic fallback that
    is valid whenever each state derivative really depends only on its
    declared neighbors.
    """

    n: int
    m: int

    def f(self, x, u=None):
        raise NotImplementedError

    def g(self, x):
        raise NotImplementedError

    def jvp_f(self, x, u, v):
        raise NotImplementedError

    def vjp_f(self, x, u, w):
        raise NotImplementedError

    def vjp_g(self, x, w):
        raise NotImplementedError

    def coupling(self) -> list[list[int]]:
        """coupling()[i] lists the state indices that d x_i / dt depends on."""
        return [list(range(self.n)) for _ in range(self.n)]

    def f_restricted(self, idx, nbr, x_nbr, u=None):
        """Rows ``idx`` of f evaluated from the neighbor states ``x_nbr``.

        Generic fallback: scatter the neighbor values into a zero state and
        evaluate the full f; exact because rows idx only read neighbors.
        """
        x_nbr = np.asarray(x_nbr, dtype=np.float64)
        shape = (self.n,) if x_nbr.ndim == 1 else (self.n, x_nbr.shape[1])
        full = np.zeros(shape)
        full[np.asarray(nbr)] = x_nbr
        return self.f(full, u)[np.asarray(idx)]


@dataclass
class Trajectory:
    """Uniformly sampled trajectory; rows of ``states`` are time samples."""

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray | None = None
    derivs: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.times.ndim != 1 or self.states.shape[0] != self.times.shape[0]:
            raise ValueError("times and states have inconsistent shapes")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def __len__(self) -> int:
        return self.times.shape[0]


@dataclass(frozen=True)
class GradientSample:
    """State paired with an adjoint gradient of randomly projected outputs."""

    base: np.ndarray
    grad: np.ndarray


def _input_at(u_fn, t):
    return None if u_fn is None else u_fn(t)


def rk4(sys: FomSystem, x0, u_fn, t_span, dt, store_derivs: bool = True) -> Trajectory:
    """Classical 4th-order Runge-Kutta integration on a fixed grid.

    ``u_fn`` maps time to the input (or is None for autonomous runs).
    States are stored at every step; when ``store_derivs`` the f evaluations
    at grid points are stored too (these are free: they are the k1 stages).
    Raises :class:`BlowUpError` when the state leaves ||x|| <= 1e6 or turns
    non-finite.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if dt <= 0:
        raise ValueError("dt must be positive")
    steps = int(round((t1 - t0) / dt))
    times = t0 + dt * np.arange(steps + 1)
    x = np.asarray(x0, dtype=np.float64).copy()
    states = np.empty((steps + 1, sys.n))
    derivs = np.empty((steps + 1, sys.n)) if store_derivs else None
    inputs = None
    if u_fn is not None:
        u0 = np.atleast_1d(np.asarray(u_fn(t0), dtype=np.float64))
        inputs = np.empty((steps + 1, u0.shape[0]))
    states[0] = x
    for k in range(steps + 1):
        t = times[k]
        u = _input_at(u_fn, t)
        k1 = sys.f(x, u)
        if store_derivs:
            derivs[k] = k1
        if inputs is not None:
            inputs[k] = u
        if k == steps:
            break
        k2 = sys.f(x + 0.5 * dt * k1, _input_at(u_fn, t + 0.5 * dt))
        k3 = sys.f(x + 0.5 * dt * k2, _input_at(u_fn, t + 0.5 * dt))
        k4 = sys.f(x + dt * k3, _input_at(u_fn, t + dt))
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > BLOWUP_NORM:
            raise BlowUpError(times[k + 1])
        states[k + 1] = x
    return Trajectory(times=times, states=states, inputs=inputs, derivs=derivs)


def rk4_batch(sys: FomSystem, x0_cols, t_span, dt):
    """Integrate many autonomous initial conditions at once.

    ``x0_cols`` is (n, N).  Returns (times, states) with states of shape
    (T, n, N); columns that blow up turn NaN from the first bad step on and
    never crash the batch.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    steps = int(round((t1 - t0) / dt))
    times = t0 + dt * np.arange(steps + 1)
    x = np.asarray(x0_cols, dtype=np.float64).copy()
    states = np.empty((steps + 1,) + x.shape)
    states[0] = x
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(steps):
            k1 = sys.f(x, None)
            k2 = sys.f(x + 0.5 * dt * k1, None)
            k3 = sys.f(x + 0.5 * dt * k2, None)
            k4 = sys.f(x + dt * k3, None)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            bad = ~np.all(np.isfinite(x), axis=0) | (np.sum(x * x, axis=0) > BLOWUP_NORM**2)
            if bad.any():
                x[:, bad] = np.nan
            states[k + 1] = x
    return times, states


def _hermite_midpoint(x0, f0, x1, f1, dt):
    """Cubic-Hermite value at the interval midpoint (4th-order accurate)."""
    return 0.5 * (x0 + x1) + 0.125 * dt * (f0 - f1)


def sample_gradients(sys: FomSystem, traj: Trajectory, sg: int, horizon_steps: int, seed):
    """Adjoint-based gradient samples along a stored trajectory.

    Base points sit at every ``sg``-th grid index that still admits a full
    ``horizon_steps`` window (a horizon longer than the whole trajectory is
    truncated to it).  At each base point, ``sg`` independent standard
    normal vectors xi weight the stacked outputs at the horizon's grid
    times; the adjoint lambda' = -(df/dx)^T lambda is integrated backward
    with jumps (dg/dx)^T xi_j at each sample time, and lambda at the base
    time is the gradient of x -> xi^T (outputs over the window).

    Requires stored derivatives (used for 4th-order state interpolation at
    the backward half-steps).
    """
    if sg < 1 or horizon_steps < 1:
        raise ValueError("sg and horizon_steps must be >= 1")
    if traj.derivs is None:
        raise ValueError("trajectory must carry stored derivatives")
    rng = np.random.default_rng(seed)
    t_count = len(traj)
    horizon = min(horizon_steps, t_count - 1)
    dt = traj.dt
    xs = traj.states
    fs = traj.derivs
    out: list[GradientSample] = []
    for k in range(0, t_count - horizon, sg):
        xi = rng.standard_normal((horizon + 1, sys.m, sg))
        lam = np.zeros((sys.n, sg))
        for j in range(k + horizon, k, -1):
            lam = lam + sys.vjp_g(xs[j], xi[j - k])
            # one RK4 step backward from t_j to t_{j-1} along lambda' = -J^T lam
            xm = _hermite_midpoint(xs[j - 1], fs[j - 1], xs[j], fs[j], dt)
            k1 = -sys.vjp_f(xs[j], None, lam)
            k2 = -sys.vjp_f(xm, None, lam - 0.5 * dt * k1)
            k3 = -sys.vjp_f(xm, None, lam - 0.5 * dt * k2)
            k4 = -sys.vjp_f(xs[j - 1], None, lam - dt * k3)
            lam = lam - (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        lam = lam + sys.vjp_g(xs[k], xi[0])
        for c in range(sg):
            out.append(GradientSample(base=xs[k].copy(), grad=lam[:, c].copy()))
    return out


# -- example systems --------------------------------------------------------


class PitchforkSystem(FomSystem):
    """Two-state slow-fast system with a pitchfork-type slow variable.

    dx1/dt = lam x1 (1 - x1^2);  eps dx2/dt = x1^2 - x2.  Full-state output.
    """

    def __init__(self, lam: float = 0.1, eps: float = 0.1):
        self.lam = float(lam)
        self.eps = float(eps)
        self.n = 2
        self.m = 2

    def f(self, x, u=None):
        x1, x2 = x[0], x[1]
        return np.stack([self.lam * x1 * (1.0 - x1 * x1), (x1 * x1 - x2) / self.eps])

    def g(self, x):
        return np.asarray(x)

    def _jac_entries(self, x):
        x1 = x[0]
        return self.lam * (1.0 - 3.0 * x1 * x1), 2.0 * x1 / self.eps, -1.0 / self.eps

    def jvp_f(self, x, u, v):
        j11, j21, j22 = self._jac_entries(x)
        return np.stack([j11 * v[0], j21 * v[0] + j22 * v[1]])

    def vjp_f(self, x, u, w):
        j11, j21, j22 = self._jac_entries(x)
        return np.stack([j11 * w[0] + j21 * w[1], j22 * w[1]])

    def vjp_g(self, x, w):
        return np.asarray(w)


def pitchfork_system(lam: float = 0.1, eps: float = 0.1) -> PitchforkSystem:
    return PitchforkSystem(lam=lam, eps=eps)


def pitchfork_manifold_coefficients(order: int) -> list[np.ndarray]:
    """Integer polynomial coefficients p_k with h = sum_k eps^k lam^k p_k(x1).

    The invariance recurrence is p_{k+1} = -p_k' * x (1 - x^2) with
    p_0 = x^2, carried out exactly in integer arithmetic.  Coefficient
    arrays are in increasing powers of x1.
    """
    coeffs = [np.array([0, 0, 1], dtype=object)]  # x^2
    for _ in range(order):
        p = coeffs[-1]
        dp = np.array([i * p[i] for i in range(1, len(p))], dtype=object)
        # multiply dp by -(x - x^3): shift by 1 minus shift by 3
        term1 = np.concatenate(([0], dp))
        term3 = np.concatenate(([0, 0, 0], dp))
        size = max(len(term1), len(term3))
        nxt = np.zeros(size, dtype=object)
        nxt[: len(term1)] -= term1
        nxt[: len(term3)] += term3
        coeffs.append(nxt)
    return coeffs


def pitchfork_slow_manifold(x1, eps: float, order: int = 2, lam: float = 0.1):
    """Graph x2 = h(x1) of the slow manifold, expanded through eps^order."""
    if order < 0:
        raise ValueError("order must be >= 0")
    x1 = np.asarray(x1, dtype=np.float64)
    coeffs = pitchfork_manifold_coefficients(order)
    total = np.zeros_like(x1)
    for k, p in enumerate(coeffs):
        pk = np.polynomial.polynomial.polyval(x1, p.astype(np.float64))
        total = total + (eps**k) * (lam**k) * pk
    return total if total.ndim else float(total)


class NoackSystem(FomSystem):
    """Three-state vortex-shedding model with a two-dimensional slow manifold.

    dx1 = mu x1 - omega x2 + A x1 x3;  dx2 = omega x1 + mu x2 + A x2 x3;
    eps dx3 = -(x3 - x1^2 - x2^2).  Full-state output.  With the default
    parameters the system has an unstable origin and a globally attracting
    limit cycle of radius 1 in the plane x3 = 1.
    """

    def __init__(self, mu: float = 0.1, omega: float = 1.0, amp: float = -0.1, eps: float = 0.1):
        self.mu = float(mu)
        self.omega = float(omega)
        self.amp = float(amp)
        self.eps = float(eps)
        self.n = 3
        self.m = 3

    def f(self, x, u=None):
        x1, x2, x3 = x[0], x[1], x[2]
        return np.stack(
            [
                self.mu * x1 - self.omega * x2 + self.amp * x1 * x3,
                self.omega * x1 + self.mu * x2 + self.amp * x2 * x3,
                -(x3 - x1 * x1 - x2 * x2) / self.eps,
            ]
        )

    def g(self, x):
        return np.asarray(x)

    def jvp_f(self, x, u, v):
        x1, x2, x3 = x[0], x[1], x[2]
        return np.stack(
            [
                (self.mu + self.amp * x3) * v[0] - self.omega * v[1] + self.amp * x1 * v[2],
                self.omega * v[0] + (self.mu + self.amp * x3) * v[1] + self.amp * x2 * v[2],
                (2.0 * x1 * v[0] + 2.0 * x2 * v[1] - v[2]) / self.eps,
            ]
        )

    def vjp_f(self, x, u, w):
        x1, x2, x3 = x[0], x[1], x[2]
        return np.stack(
            [
                (self.mu + self.amp * x3) * w[0] + self.omega * w[1] + 2.0 * x1 * w[2] / self.eps,
                -self.omega * w[0] + (self.mu + self.amp * x3) * w[1] + 2.0 * x2 * w[2] / self.eps,
                self.amp * x1 * w[0] + self.amp * x2 * w[1] - w[2] / self.eps,
            ]
        )

    def vjp_g(self, x, w):
        return np.asarray(w)

    def quadratic_form(self):
        """Symmetric bilinear h2 with h2(x, x) = the quadratic part of f."""

        def h2(a, b):
            a = np.asarray(a, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            return np.stack(
                [
                    0.5 * self.amp * (a[0] * b[2] + a[2] * b[0]),
                    0.5 * self.amp * (a[1] * b[2] + a[2] * b[1]),
                    (a[0] * b[0] + a[1] * b[1]) / self.eps,
                ]
            )

        return h2


def noack_system(mu: float = 0.1, omega: float = 1.0, amp: float = -0.1, eps: float = 0.1):
    return NoackSystem(mu=mu, omega=omega, amp=amp, eps=eps)


def noack_manifold_coefficients(order: int, mu=Fraction(1, 10), amp=Fraction(-1, 10)):
    """Rational coefficients of h_k(rho) with x3 = sum_k eps^k h_k(rho).

    Recurrence from invariance of the graph x3 = h(x1^2 + x2^2):
    h_s = -2 rho [ mu h_{s-1}' + amp * sum_{k+j=s-1} h_k' h_j ],  h_0 = rho.
    Exact rational arithmetic; arrays are coefficients in increasing powers
    of rho.
    """
    mu = Fraction(mu)
    amp = Fraction(amp)
    hs = [[Fraction(0), Fraction(1)]]  # h_0 = rho

    def deriv(p):
        return [i * p[i] for i in range(1, len(p))]

    def times_rho(p):
        return [Fraction(0)] + list(p)

    def add(p, q):
        size = max(len(p), len(q))
        return [
            (p[i] if i < len(p) else Fraction(0)) + (q[i] if i < len(q) else Fraction(0))
            for i in range(size)
        ]

    def mul(p, q):
        out = [Fraction(0)] * (len(p) + len(q) - 1)
        for i, pi in enumerate(p):
            for j, qj in enumerate(q):
                out[i + j] += pi * qj
        return out

    for s in range(1, order + 1):
        cross = [Fraction(0)]
        for k in range(s):
            j = s - 1 - k
            cross = add(cross, mul(deriv(hs[k]), hs[j]))
        inner = add([mu * c for c in deriv(hs[s - 1])], [amp * c for c in cross])
        hs.append(times_rho([-2 * c for c in inner]))
    return hs


def noack_slow_manifold(x1, x2, eps: float = 0.1, order: int = 4, mu: float = 0.1, amp: float = -0.1):
    """Graph x3 = h(x1, x2) of the slow manifold through eps^order.

    Rotationally symmetric: a polynomial in rho = x1^2 + x2^2 whose
    coefficients come from the exact rational recurrence.
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    rho = x1 * x1 + x2 * x2
    hs = noack_manifold_coefficients(order, mu=Fraction(str(mu)), amp=Fraction(str(amp)))
    total = np.zeros_like(rho)
    for k, p in enumerate(hs):
        pk = np.polynomial.polynomial.polyval(rho, np.array([float(c) for c in p]))
        total = total + (eps**k) * pk
    return total if total.ndim else float(total)


class LtiSystem(FomSystem):
    """Linear time-invariant system dx = A x + B u, y = C x."""

    def __init__(self, A, B, C):
        self.A = np.asarray(A, dtype=np.float64)
        self.B = np.asarray(B, dtype=np.float64).reshape(self.A.shape[0], -1)
        self.C = np.asarray(C, dtype=np.float64).reshape(-1, self.A.shape[0])
        self.n = self.A.shape[0]
        self.m = self.C.shape[0]

    def f(self, x, u=None):
        out = self.A @ np.asarray(x, dtype=np.float64)
        if u is not None:
            uarr = np.atleast_1d(np.asarray(u, dtype=np.float64))
            bu = self.B @ uarr
            out = out + (bu[:, None] if out.ndim == 2 and bu.ndim == 1 else bu)
        return out

    def g(self, x):
        return self.C @ np.asarray(x, dtype=np.float64)

    def jvp_f(self, x, u, v):
        return self.A @ np.asarray(v, dtype=np.float64)

    def vjp_f(self, x, u, w):
        return self.A.T @ np.asarray(w, dtype=np.float64)

    def vjp_g(self, x, w):
        return self.C.T @ np.asarray(w, dtype=np.float64)

    def coupling(self) -> list[list[int]]:
        return [list(np.nonzero(self.A[i])[0]) for i in range(self.n)]

    def f_restricted(self, idx, nbr, x_nbr, u=None):
        idx = np.asarray(idx)
        nbr = np.asarray(nbr)
        out = self.A[np.ix_(idx, nbr)] @ np.asarray(x_nbr, dtype=np.float64)
        if u is not None:
            uarr = np.atleast_1d(np.asarray(u, dtype=np.float64))
            bu = self.B[idx] @ uarr
            out = out + (bu[:, None] if out.ndim == 2 and bu.ndim == 1 else bu)
        return out


def nonnormal_lti() -> LtiSystem:
    """The three-state nonnormal example: triangular A with a strong
    off-diagonal feed from the fast state into the slow ones."""
    a = np.array([[-1.0, 0.0, 100.0], [0.0, -2.0, 100.0], [0.0, 0.0, -5.0]])
    b = np.array([1.0, 1.0, 1.0])
    c = np.array([1.0, 1.0, 1.0])
    return LtiSystem(a, b, c)


def tridiagonal_system(n: int = 10, seed=0, coupling_strength: float = 0.4) -> LtiSystem:
    """Stable tridiagonal system used to exercise the sparse-encoder path."""
    rng = np.random.default_rng(seed)
    diag = -1.0 - rng.uniform(0.0, 1.0, n)
    off = coupling_strength * rng.uniform(-1.0, 1.0, n - 1)
    a = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    # make strictly diagonally dominant, hence Hurwitz
    a -= np.eye(n) * (np.abs(off).max() * 2.0)
    b = rng.standard_normal((n, 1))
    c = rng.standard_normal((1, n))
    return LtiSystem(a, b, c)


def pod_projection(snapshots, r: int) -> BiorthogonalPair:
    """Orthogonal POD projector: leading left singular vectors of the
    (n, N) snapshot matrix, as a pair with phi = psi."""
    snaps = np.asarray(snapshots, dtype=np.float64)
    u, _, _ = matkit.svd(snaps)
    basis = u[:, :r].copy()
    return BiorthogonalPair(phi=basis, psi=basis.copy())


def balanced_truncation(A, B, C, r: int):
    """Balanced-truncation projection and reduced (A, B, C).

    Gramians from the Lyapunov solver, balancing through Cholesky factors
    and an SVD; returns the oblique pair (phi, psi) with psi^T phi = I and
    the reduced matrices (psi^T A phi, psi^T B, C phi).
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64).reshape(A.shape[0], -1)
    C = np.asarray(C, dtype=np.float64).reshape(-1, A.shape[0])
    wc = matkit.solve_lyapunov(A, B @ B.T)
    wo = matkit.solve_lyapunov(A.T, C.T @ C)
    lc = np.linalg.cholesky(wc)
    lo = np.linalg.cholesky(wo)
    u, s, v = matkit.svd(lo.T @ lc)
    sqrt_s = np.sqrt(s[:r])
    phi = lc @ v[:, :r] / sqrt_s
    psi = lo @ u[:, :r] / sqrt_s
    pair = BiorthogonalPair(phi=phi, psi=psi)
    reduced = (psi.T @ A @ phi, psi.T @ B, C @ phi)
    return pair, reduced


def hankel_singular_values(A, B, C) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64).reshape(A.shape[0], -1)
    C = np.asarray(C, dtype=np.float64).reshape(-1, A.shape[0])
    wc = matkit.solve_lyapunov(A, B @ B.T)
    wo = matkit.solve_lyapunov(A.T, C.T @ C)
    lc = np.linalg.cholesky(wc)
    lo = np.linalg.cholesky(wo)
    _, s, _ = matkit.svd(lo.T @ lc)
    return s


def impulse_response(A, B, C, t_span, dt) -> tuple[np.ndarray, np.ndarray]:
    """Output y(t) = C exp(A t) B for a unit impulse in each input channel.

    Returns (times, y) with y of shape (T, m, d_u).
    """
    sys = LtiSystem(A, B, C)
    d_u = sys.B.shape[1]
    times = None
    cols = []
    for j in range(d_u):
        traj = rk4(sys, sys.B[:, j], None, t_span, dt, store_derivs=False)
        times = traj.times
        cols.append(traj.states @ sys.C.T)
    return times, np.stack(cols, axis=-1)


def frequency_response(A, B, C, omegas) -> np.ndarray:
    """Transfer-function magnitudes |C (i w I - A)^{-1} B| on a frequency grid."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64).reshape(A.shape[0], -1)
    C = np.asarray(C, dtype=np.float64).reshape(-1, A.shape[0])
    eye = np.eye(A.shape[0])
    mags = []
    for w in np.asarray(omegas, dtype=np.float64):
        gw = C @ np.linalg.solve(1j * w * eye - A, B)
        mags.append(np.abs(gw))
    return np.asarray(mags)


def fit_decay_rate(times, errors, window=None) -> float:
    """Least-squares slope of log(error) vs time; returns the decay rate
    (positive for decaying error).  ``window`` restricts the fit to
    t in [window[0], window[1]]."""
    times = np.asarray(times, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    mask = errors > 0
    if window is not None:
        mask &= (times >= window[0]) & (times <= window[1])
    t, e = times[mask], np.log(errors[mask])
    if t.size < 2:
        raise ValueError("not enough points in the fit window")
    slope = np.polyfit(t, e, 1)[0]
    return float(-slope)
