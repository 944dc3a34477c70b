"""Reduced-order models built from a trained autoencoder, plus efficiency paths.

Two reduced vector fields are available: the encoder ROM pushes the
full-order vector field through the encoder's tangent map (which realizes
the learned, generally oblique, projection fibers), while the decoder ROM
projects orthogonally onto the decoder manifold's tangent space via normal
equations.  Simulation wraps both in the classical RK4 integrator with
blow-up handling that reports infinite prediction error instead of
crashing.

Efficiency machinery for larger systems: radial-basis surrogates of the
latent dynamics, pre-assembled tensors for quadratic nonlinearities pushed
through the outer decoder layer, and a sparsified encoder whose input
weight matrix has a few nonzero rows so the reduced dynamics only need a
few components of the full vector field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace as dc_replace

import numpy as np
from scipy.interpolate import RBFInterpolator

from . import net as _net
from .dyn import BLOWUP_NORM, FomSystem, Trajectory
from .loss import LossSpec
from .train import DataSplit, TrainConfig, train_session

__all__ = [
    "RomKind",
    "RomSimResult",
    "IllConditionedTangentError",
    "SparsificationFailedError",
    "enc_rom_rhs",
    "dec_rom_rhs",
    "simulate_rom",
    "manifold_recon_error",
    "rom_pred_error",
    "rom_pred_error_per_traj",
    "LatentSurrogate",
    "SurrogateSampleSpec",
    "fit_latent_surrogate",
    "simulate_surrogate_rom",
    "BilinearTensors",
    "assemble_bilinear_tensors",
    "tensor_rom_f2",
    "save_tensors",
    "load_tensors",
    "SparseEncoderPlan",
    "sparse_train_phase",
    "build_sparse_plan",
    "sparse_rom_rhs",
    "format_metrics_table",
]

RomKind = str  # "enc" | "dec"

_GRAM_COND_LIMIT = 1e12


class IllConditionedTangentError(RuntimeError):
    """Decoder tangent Gram matrix unusable even after ridge regularization."""


class SparsificationFailedError(RuntimeError):
    """Encoder sparsification left fewer nonzero rows than the layer width."""


def _check_kind(kind: str) -> str:
    if kind not in ("enc", "dec"):
        raise ValueError(f"rom kind must be 'enc' or 'dec', got {kind!r}")
    return kind


def _enc_rhs_ops(ops, sys: FomSystem, z, u):
    x_hat = ops.decode(z)
    fx = sys.f(x_hat, u)
    _, dz = ops.jvp_encode(x_hat, fx)
    return dz


def _decoder_jacobian(ops, r: int, z):
    """Stack D decode(z) columns: returns (r, n, N) for batched z (r, N)."""
    cols = []
    n_cols = z.shape[1]
    for j in range(r):
        tan = np.zeros((r, n_cols))
        tan[j] = 1.0
        _, dj = ops.jvp_decode(z, tan)
        cols.append(dj)
    return np.stack(cols, axis=0)


def _dec_rhs_ops(ops, sys: FomSystem, r: int, z, u, batch_mode: bool):
    x_hat = ops.decode(z)
    fx = sys.f(x_hat, u)
    jac = _decoder_jacobian(ops, r, z)  # (r, n, N)
    gram = np.einsum("inc,jnc->cij", jac, jac)
    rhs = np.einsum("inc,nc->ci", jac, fx)
    n_cols = gram.shape[0]
    out = np.full((n_cols, r), np.nan)
    usable = np.isfinite(gram).all(axis=(1, 2)) & np.isfinite(rhs).all(axis=1)
    if not usable.any():
        return out.T
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        gram_u = gram[usable]
        rhs_u = rhs[usable]
        cond = np.linalg.cond(gram_u)
        bad = ~np.isfinite(cond) | (cond > _GRAM_COND_LIMIT)
        if bad.any():
            trace = np.einsum("cii->c", gram_u)
            ridge = 1e-12 * np.where(bad, np.maximum(trace, 1e-300), 0.0)
            gram_u = gram_u + ridge[:, None, None] * np.eye(r)
            cond = np.linalg.cond(gram_u)
            if (~np.isfinite(cond) | (cond > _GRAM_COND_LIMIT)).any() and not batch_mode:
                raise IllConditionedTangentError(
                    "decoder tangent Gram matrix is numerically singular"
                )
        out[usable] = np.linalg.solve(gram_u, rhs_u[:, :, None])[:, :, 0]
    return out.T


def enc_rom_rhs(model, sys: FomSystem, z, u=None):
    """Latent dynamics via the encoder tangent map:
    dz/dt = D encode(decode(z)) f(decode(z), u)."""
    zb, single = _net._as_batch(z, model.latent_dim, "z")
    ops = _net.forward_ops(model, model.parameter_arrays())
    out = _enc_rhs_ops(ops, sys, zb, u)
    return _net._debatch(out, single)


def dec_rom_rhs(model, sys: FomSystem, z, u=None):
    """Latent dynamics from orthogonal projection onto the decoder tangent
    space: solves the normal equations of min || D decode(z) dz - f ||."""
    zb, single = _net._as_batch(z, model.latent_dim, "z")
    ops = _net.forward_ops(model, model.parameter_arrays())
    out = _dec_rhs_ops(ops, sys, model.latent_dim, zb, u, batch_mode=False)
    return _net._debatch(out, single)


@dataclass
class RomSimResult:
    """Latent and lifted trajectories of one ROM simulation; ``diverged``
    flags a blow-up (infinite-error marker, not an exception)."""

    latent: Trajectory
    lifted: Trajectory
    diverged: bool
    blowup_time: float | None = None


def _rhs_factory(model, sys, kind, ops):
    r = model.latent_dim
    if kind == "enc":
        return lambda z, u: _enc_rhs_ops(ops, sys, z, u)
    return lambda z, u: _dec_rhs_ops(ops, sys, r, z, u, batch_mode=True)


def _integrate_latent(rhs, z0_cols, t_span, dt):
    """RK4 in the latent space; diverged columns turn NaN and stay NaN."""
    t0, t1 = float(t_span[0]), float(t_span[1])
    steps = int(round((t1 - t0) / dt))
    times = t0 + dt * np.arange(steps + 1)
    z = np.asarray(z0_cols, dtype=np.float64).copy()
    out = np.empty((steps + 1,) + z.shape)
    out[0] = z
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(steps):
            k1 = rhs(z, None)
            k2 = rhs(z + 0.5 * dt * k1, None)
            k3 = rhs(z + 0.5 * dt * k2, None)
            k4 = rhs(z + dt * k3, None)
            z = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            bad = ~np.all(np.isfinite(z), axis=0) | (np.sum(z * z, axis=0) > BLOWUP_NORM**2)
            if bad.any():
                z[:, bad] = np.nan
            out[k + 1] = z
    return times, out


def simulate_rom(model, sys: FomSystem, kind: RomKind, x0, t_span, dt) -> RomSimResult:
    """Encode the initial state, integrate the chosen latent dynamics with
    RK4, and lift the latent trajectory through the decoder."""
    _check_kind(kind)
    x0 = np.asarray(x0, dtype=np.float64)
    ops = _net.forward_ops(model, model.parameter_arrays())
    z0 = ops.encode(x0[:, None])
    rhs = _rhs_factory(model, sys, kind, ops)
    times, zs = _integrate_latent(rhs, z0, t_span, dt)
    z_path = zs[:, :, 0]
    finite = np.all(np.isfinite(z_path), axis=1)
    diverged = not finite.all()
    blow_time = None if not diverged else float(times[np.argmin(finite)])
    lifted = np.full((len(times), model.state_dim), np.nan)
    if finite.any():
        lifted[finite] = ops.decode(z_path[finite].T).T
    return RomSimResult(
        latent=Trajectory(times=times, states=z_path),
        lifted=Trajectory(times=times, states=lifted),
        diverged=diverged,
        blowup_time=blow_time,
    )


def manifold_recon_error(model, eps: float = 0.1, grid_n: int = 20, mu: float = 0.1,
                         amp: float = -0.1) -> float:
    """Mean squared reconstruction error over the slow-manifold grid:
    (x1, x2) on a grid_n x grid_n lattice in [-1, 1]^2 lifted by the
    fourth-order invariant-manifold graph."""
    from .dyn import noack_slow_manifold

    lin = np.linspace(-1.0, 1.0, grid_n)
    x1, x2 = np.meshgrid(lin, lin, indexing="ij")
    x1 = x1.ravel()
    x2 = x2.ravel()
    x3 = noack_slow_manifold(x1, x2, eps, 4, mu=mu, amp=amp)
    pts = np.stack([x1, x2, x3])
    ops = _net.forward_ops(model, model.parameter_arrays())
    diff = pts - ops.project(pts)
    return float(np.mean(np.sum(diff * diff, axis=0)))


def _lifted_batch(model, sys, kind, x0_cols, t_span, dt):
    ops = _net.forward_ops(model, model.parameter_arrays())
    z0 = ops.encode(x0_cols)
    rhs = _rhs_factory(model, sys, kind, ops)
    times, zs = _integrate_latent(rhs, z0, t_span, dt)
    t_count, r, n_cols = zs.shape
    flat = zs.transpose(1, 0, 2).reshape(r, t_count * n_cols)
    finite_cols = np.all(np.isfinite(flat), axis=0)
    lifted_flat = np.full((model.state_dim, t_count * n_cols), np.nan)
    if finite_cols.any():
        lifted_flat[:, finite_cols] = ops.decode(flat[:, finite_cols])
    lifted = lifted_flat.reshape(model.state_dim, t_count, n_cols).transpose(1, 0, 2)
    return times, lifted


def rom_pred_error_per_traj(model, sys: FomSystem, kind: RomKind, test_trajs) -> np.ndarray:
    """Per-trajectory mean squared state error of ROM forecasts started at
    each test trajectory's initial state; infinite where the ROM blew up."""
    _check_kind(kind)
    trajs = list(test_trajs)
    if not trajs:
        raise ValueError("need at least one test trajectory")
    t_len = len(trajs[0])
    dt = trajs[0].dt
    if any(len(tr) != t_len or abs(tr.dt - dt) > 1e-12 for tr in trajs):
        raise ValueError("test trajectories must share one time grid")
    x0 = np.stack([tr.states[0] for tr in trajs], axis=1)
    t_span = (trajs[0].times[0], trajs[0].times[-1])
    _, lifted = _lifted_batch(model, sys, kind, x0, t_span, dt)
    errs = np.empty(len(trajs))
    for i, tr in enumerate(trajs):
        pred = lifted[:, :, i]
        if not np.all(np.isfinite(pred)):
            errs[i] = np.inf
        else:
            diff = pred - tr.states
            errs[i] = float(np.mean(np.sum(diff * diff, axis=1)))
    return errs


def rom_pred_error(model, sys: FomSystem, kind: RomKind, test_trajs) -> float:
    """Mean squared state error over all states of all test trajectories
    (infinite if any forecast blew up)."""
    per = rom_pred_error_per_traj(model, sys, kind, test_trajs)
    return float(np.mean(per))


# -- latent surrogate -------------------------------------------------------


@dataclass(frozen=True)
class SurrogateSampleSpec:
    """Where to sample the latent space for surrogate fitting.

    Grid sampling (per-dimension counts) suits latent dimensions <= 3;
    random sampling draws jittered resamples from encoded data (a cheap
    density estimate).  ``holdout`` points measure out-of-sample error.
    """

    grid_counts: tuple | None = None
    bounds: tuple | None = None  # ((lo, hi), ...) per latent dimension
    n_random: int = 0
    data_states: np.ndarray | None = None  # row states to encode for density
    jitter: float = 0.05
    holdout: int = 64
    seed: int = 0


@dataclass
class LatentSurrogate:
    """Radial-basis interpolants of the latent dynamics and output map.

    Polyharmonic cubic kernel with an appended linear polynomial tail
    (parameter-free, exact at the centers).
    """

    centers: np.ndarray
    f_values: np.ndarray
    g_values: np.ndarray
    f_interp: RBFInterpolator
    g_interp: RBFInterpolator
    center_residual: float
    holdout_max_error: float

    def f(self, z):
        z = np.asarray(z, dtype=np.float64)
        single = z.ndim == 1
        pts = z[None, :] if single else z.T
        out = self.f_interp(pts)
        return out[0] if single else out.T

    def g(self, z):
        z = np.asarray(z, dtype=np.float64)
        single = z.ndim == 1
        pts = z[None, :] if single else z.T
        out = self.g_interp(pts)
        return out[0] if single else out.T


def _surrogate_points(model, spec: SurrogateSampleSpec, r: int) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    if spec.grid_counts is not None:
        if spec.bounds is None:
            raise ValueError("grid sampling needs explicit bounds")
        axes = [np.linspace(lo, hi, c) for (lo, hi), c in zip(spec.bounds, spec.grid_counts)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)
    if spec.data_states is None:
        raise ValueError("random sampling needs data_states to estimate the latent density")
    ops = _net.forward_ops(model, model.parameter_arrays())
    encoded = ops.encode(np.asarray(spec.data_states, dtype=np.float64).T).T
    pick = rng.integers(0, encoded.shape[0], size=spec.n_random)
    scale = np.std(encoded, axis=0, keepdims=True) + 1e-12
    return encoded[pick] + spec.jitter * scale * rng.standard_normal((spec.n_random, r))


def fit_latent_surrogate(model, sys: FomSystem, spec: SurrogateSampleSpec) -> LatentSurrogate:
    """Evaluate the encoder ROM's exact latent dynamics and output map at
    sample points and fit interpolating radial-basis surrogates."""
    r = model.latent_dim
    pts = _surrogate_points(model, spec, r)
    rng = np.random.default_rng(spec.seed + 1)
    if spec.holdout > 0:
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        shrink = 0.8  # keep holdout points interior
        mid = 0.5 * (lo + hi)
        held = mid + shrink * (rng.uniform(lo, hi, size=(spec.holdout, r)) - mid)
    else:
        held = np.zeros((0, r))

    ops = _net.forward_ops(model, model.parameter_arrays())

    def exact_f(z_rows):
        return _enc_rhs_ops(ops, sys, z_rows.T, None).T

    def exact_g(z_rows):
        return np.atleast_2d(sys.g(ops.decode(z_rows.T))).T.reshape(z_rows.shape[0], -1)

    f_vals = exact_f(pts)
    g_vals = exact_g(pts)
    f_interp = RBFInterpolator(pts, f_vals, kernel="cubic", degree=1)
    g_interp = RBFInterpolator(pts, g_vals, kernel="cubic", degree=1)

    center_res = float(np.abs(f_interp(pts) - f_vals).max())
    if held.shape[0]:
        holdout_err = float(
            max(
                np.abs(f_interp(held) - exact_f(held)).max(),
                np.abs(g_interp(held) - exact_g(held)).max(),
            )
        )
    else:
        holdout_err = np.nan
    return LatentSurrogate(
        centers=pts,
        f_values=f_vals,
        g_values=g_vals,
        f_interp=f_interp,
        g_interp=g_interp,
        center_residual=center_res,
        holdout_max_error=holdout_err,
    )


def simulate_surrogate_rom(model, surr: LatentSurrogate, x0, t_span, dt) -> RomSimResult:
    """Like :func:`simulate_rom` with kind='enc', but integrating the
    surrogate latent dynamics instead of querying the full-order model."""
    x0 = np.asarray(x0, dtype=np.float64)
    ops = _net.forward_ops(model, model.parameter_arrays())
    z0 = ops.encode(x0[:, None])
    times, zs = _integrate_latent(lambda z, u: surr.f(z), z0, t_span, dt)
    z_path = zs[:, :, 0]
    finite = np.all(np.isfinite(z_path), axis=1)
    diverged = not finite.all()
    lifted = np.full((len(times), model.state_dim), np.nan)
    if finite.any():
        lifted[finite] = ops.decode(z_path[finite].T).T
    return RomSimResult(
        latent=Trajectory(times=times, states=z_path),
        lifted=Trajectory(times=times, states=lifted),
        diverged=diverged,
        blowup_time=None if not diverged else float(times[np.argmin(finite)]),
    )


# -- pre-assembled tensors for quadratic terms ------------------------------


@dataclass
class BilinearTensors:
    """Projection of a symmetric bilinear term through the outer layer.

    For f2(x) = h2(x, x), the contribution of f2 to Psi_L^T f(...) at inner
    state w is a + 2 B w + c[w, w], with c symmetric in its trailing pair.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        width = self.a.shape[0]
        if self.b.shape != (width, width) or self.c.shape != (width, width, width):
            raise ValueError("inconsistent tensor shapes")
        if np.abs(self.c - self.c.transpose(0, 2, 1)).max() > 1e-12 * max(
            1.0, np.abs(self.c).max()
        ):
            raise ValueError("c must be symmetric in its last two indices")

    @property
    def width(self) -> int:
        return self.a.shape[0]


def assemble_bilinear_tensors(model, h2, b_last=None) -> BilinearTensors:
    """Precompute the outer-layer projection of a quadratic term.

    ``h2`` is the symmetric bilinear form with h2(x, x) equal to the
    quadratic part of the full-order vector field, evaluated columnwise.
    """
    phi_last, b_net = _net.outer_affine(model)
    b_vec = b_net if b_last is None else np.asarray(b_last, dtype=np.float64)
    psi_last = model.projected_pairs()[-1].psi_t
    width = phi_last.shape[1]

    a = psi_last.T @ h2(b_vec, b_vec)
    bmat = psi_last.T @ h2(b_vec[:, None], phi_last)
    c = np.empty((width, width, width))
    for j1 in range(width):
        c[:, j1, :] = psi_last.T @ h2(phi_last[:, j1][:, None], phi_last)
    c = 0.5 * (c + c.transpose(0, 2, 1))
    return BilinearTensors(a=a, b=bmat, c=c)


def tensor_rom_f2(tensors: BilinearTensors, inner_state):
    """Contribution of the quadratic term to Psi_L^T f at inner-decoder
    output ``inner_state`` (shape (w,) or (w, N))."""
    w = np.asarray(inner_state, dtype=np.float64)
    if w.ndim == 1:
        return tensors.a + 2.0 * tensors.b @ w + np.einsum("ijk,j,k->i", tensors.c, w, w)
    return (
        tensors.a[:, None]
        + 2.0 * tensors.b @ w
        + np.einsum("ijk,jn,kn->in", tensors.c, w, w)
    )


def save_tensors(tensors: BilinearTensors, path) -> None:
    doc = {
        "format": "projrom-tensors-1",
        "a": tensors.a.tolist(),
        "b": tensors.b.tolist(),
        "c": tensors.c.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_tensors(path) -> BilinearTensors:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "projrom-tensors-1":
        raise ValueError(f"unrecognized tensor file {path}")
    return BilinearTensors(
        a=np.asarray(doc["a"]), b=np.asarray(doc["b"]), c=np.asarray(doc["c"])
    )


# -- sparse encoder ---------------------------------------------------------

# Row norms below this count as zero when extracting the sparse support.
SPARSE_ROW_TOL = 1e-6


@dataclass
class SparseEncoderPlan:
    """Support of a sparsified encoder input layer.

    ``indices`` are the surviving rows of the last-layer encoder weights,
    ``neighbors`` the state indices their time derivatives depend on,
    ``psi_rows`` the restricted weight rows, and ``system`` supplies the
    restricted evaluator of the full-order vector field.
    """

    indices: np.ndarray
    neighbors: np.ndarray
    psi_rows: np.ndarray
    system: FomSystem

    def evaluate_f(self, x_neighbors, u=None):
        return self.system.f_restricted(self.indices, self.neighbors, x_neighbors, u)


def sparse_train_phase(
    model,
    spec: LossSpec,
    data: DataSplit,
    gamma_sparsity: float,
    cfg: TrainConfig,
    snap_tol: float = 1e-3,
    polish_epochs: int = 30,
):
    """Second-stage training that sparsifies the encoder's input rows.

    Adds the basis-invariant row-sparsity penalty (constant factor
    ``gamma_sparsity``) to the cost and continues training; rows whose norm
    has collapsed below ``snap_tol`` are then set to exactly zero and held
    there by a row mask during a short polishing run.  Raises
    :class:`SparsificationFailedError` when fewer rows survive than the
    layer width requires.
    """
    session = train_session(model, spec.with_sparsity(gamma_sparsity), data, cfg)
    trained = session.model

    last = trained.num_layers
    key = f"layer{last}.psi_t"
    params = trained.copy_parameters()
    row_norms = np.linalg.norm(params[key], axis=1)
    mask = row_norms >= snap_tol
    if int(mask.sum()) < trained.widths[-2]:
        raise SparsificationFailedError(
            f"only {int(mask.sum())} encoder rows survive; need >= {trained.widths[-2]}"
        )
    params[key] = params[key] * mask[:, None]
    snapped = trained.replace_parameters(params).with_psi_row_mask(mask)

    if polish_epochs > 0:
        polish_cfg = dc_replace(cfg, epochs=polish_epochs)
        session = train_session(snapped, spec.with_sparsity(gamma_sparsity), data, polish_cfg)
        snapped = session.model
    return snapped


def build_sparse_plan(model, sys: FomSystem) -> SparseEncoderPlan:
    """Extract the sparse support of the trained encoder's input layer and
    the coupling neighborhood the restricted dynamics need."""
    psi_last = model.projected_pairs()[-1].psi_t
    row_norms = np.linalg.norm(psi_last, axis=1)
    idx = np.nonzero(row_norms >= SPARSE_ROW_TOL)[0]
    if idx.size < model.widths[-2]:
        raise SparsificationFailedError(
            f"encoder has {idx.size} rows above tolerance; need >= {model.widths[-2]}"
        )
    coupling = sys.coupling()
    nbr = sorted(set().union(*(set(coupling[i]) for i in idx)))
    return SparseEncoderPlan(
        indices=np.asarray(idx, dtype=np.intp),
        neighbors=np.asarray(nbr, dtype=np.intp),
        psi_rows=psi_last[idx].copy(),
        system=sys,
    )


def sparse_rom_rhs(plan: SparseEncoderPlan, model, z, u=None):
    """Encoder-ROM right-hand side using only the sparse support:
    reconstruct the neighbor states, evaluate the restricted vector field,
    and push it through the restricted encoder rows."""
    zb, single = _net._as_batch(z, model.latent_dim, "z")
    inner = _net.inner_decode(model, zb)
    phi_last, b_last = _net.outer_affine(model)
    x_nbr = b_last[plan.neighbors][:, None] + phi_last[plan.neighbors, :] @ inner
    f_sel = plan.evaluate_f(x_nbr, u)
    tangent = plan.psi_rows.T @ f_sel
    _, dz = _net.inner_encode_jvp(model, inner, tangent)
    return _net._debatch(dz, single)


# -- metrics report ---------------------------------------------------------

_LOSS_LABELS = ("Rec.", "GAP", "RVP")


def format_metrics_table(entries: dict) -> str:
    """Render a metrics table mirroring the case-study layout.

    ``entries`` maps (row_label, loss_label) to (manifold_error,
    prediction_error); loss labels are "Rec."/"GAP"/"RVP".  Infinite
    entries render as the infinity symbol.
    """

    def cell(v):
        if v is None:
            return "-"
        if not np.isfinite(v):
            return "∞"
        return f"{v:.5f}"

    rows = sorted({rk for rk, _ in entries})
    header1 = f"{'':24s}" + "".join(f"{lab:>22s}" for lab in _LOSS_LABELS)
    header2 = f"{'':24s}" + "".join(f"{'Manif.':>11s}{'Pred.':>11s}" for _ in _LOSS_LABELS)
    lines = [header1, header2]
    for rk in rows:
        cells = []
        for lab in _LOSS_LABELS:
            manif, pred = entries.get((rk, lab), (None, None))
            cells.append(f"{cell(manif):>11s}{cell(pred):>11s}")
        lines.append(f"{rk:24s}" + "".join(cells))
    return "\n".join(lines)
