"""Training objectives: reconstruction, velocity-projection, gradient-aligned.

Three objectives are provided, all written generically over a weights
mapping so the same code produces plain values and taped values for
reverse-mode gradients:

* ``rec_loss``: mean squared reconstruction error of states.
* ``rvp_loss``: output reconstruction along trajectories plus a weighted
  velocity-projection error that penalizes the mismatch between the
  projected trajectory's time derivative and the reduced dynamics at the
  projected point.  The weight function comes from a Gronwall-type bound,
  so minimizing the weighted velocity error controls the integrated
  trajectory error.
* ``gap_loss``: squared alignments of reconstruction errors with adjoint
  gradient samples of future outputs.

``total_cost`` assembles objective + beta-weighted domain regularizer (and
the optional row-sparsity penalty used by the encoder sparsification
phase).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Literal

import numpy as np

from . import _tape as tp
from . import net as _net
from .biortho import (
    PairRep,
    grassmann_row_sparsity_with_grad,
    pair_regularizer_with_grad,
)
from .dyn import FomSystem, GradientSample, Trajectory

__all__ = [
    "RvpConfig",
    "GapBatch",
    "LossSpec",
    "weight_fn",
    "rec_loss",
    "rvp_loss",
    "gap_loss",
    "total_cost",
]


@dataclass(frozen=True)
class RvpConfig:
    """Velocity-projection settings: horizon t_f, weight strength gamma,
    Lipschitz parameter (None selects the 1/t_f default), trapezoid
    quadrature on the stored grid, optional relative normalization."""

    t_f: float
    gamma: float = 1.0
    lipschitz: float | None = None
    quadrature: str = "trapezoid"
    normalize: bool = False

    def __post_init__(self):
        if self.t_f <= 0:
            raise ValueError("t_f must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.lipschitz is not None and self.lipschitz < 0:
            raise ValueError("lipschitz must be nonnegative")
        if self.quadrature != "trapezoid":
            raise ValueError("only trapezoid quadrature is supported")

    @property
    def lipschitz_value(self) -> float:
        return 1.0 / self.t_f if self.lipschitz is None else self.lipschitz


# Below this value of L * t_f the weight function switches to its series
# form; the exact expression divides a cancellation-prone difference by L^2.
_WEIGHT_SERIES_SWITCH = 1e-4


def weight_fn(t, lipschitz: float, t_f: float):
    """Trajectory-error weight w(t) = [(e^{2Lt_f} - 2Lt_f) - (e^{2Lt} - 2Lt)] / 4L^2.

    Decreasing in t with w(t_f) = 0.  For L*t_f below 1e-4 the limit series
    (t_f^2 - t^2)/2 + L (t_f^3 - t^3)/3 + L^2 (t_f^4 - t^4)/6 is used, which
    is continuous with the exact form to machine precision at the switch.
    """
    if lipschitz < 0:
        raise ValueError("lipschitz must be nonnegative")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0) or np.any(t > t_f * (1 + 1e-12)):
        raise ValueError("t must lie in [0, t_f]")
    L = lipschitz
    if L * t_f < _WEIGHT_SERIES_SWITCH:
        out = (t_f**2 - t**2) / 2.0 + L * (t_f**3 - t**3) / 3.0 + L**2 * (t_f**4 - t**4) / 6.0
    else:
        top = (np.exp(2.0 * L * t_f) - 2.0 * L * t_f) - (np.exp(2.0 * L * t) - 2.0 * L * t)
        out = top / (4.0 * L * L)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GapBatch:
    """Gradient-aligned-projection batch: states and matching gradients,
    one row per sample."""

    xs: np.ndarray
    gs: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        gs = np.asarray(self.gs, dtype=np.float64)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "gs", gs)
        if xs.shape != gs.shape or xs.ndim != 2 or xs.shape[0] == 0:
            raise ValueError("xs and gs must be nonempty arrays of identical (s, n) shape")

    @classmethod
    def from_samples(cls, samples: list[GradientSample]) -> "GapBatch":
        return cls(
            xs=np.stack([s.base for s in samples]),
            gs=np.stack([s.grad for s in samples]),
        )

    def __len__(self) -> int:
        return self.xs.shape[0]

    def subset(self, idx) -> "GapBatch":
        return GapBatch(xs=self.xs[idx], gs=self.gs[idx])


@dataclass(frozen=True)
class LossSpec:
    """Which objective to train, with its context.

    ``kind``: "rec" | "rvp" | "gap".  RVP needs the full-order system and an
    :class:`RvpConfig`.  ``sparsity_gamma`` > 0 adds the Grassmannian
    row-sparsity penalty on the last-layer encoder weights (second-stage
    sparsification).
    """

    kind: Literal["rec", "rvp", "gap"]
    system: FomSystem | None = None
    rvp: RvpConfig | None = None
    sparsity_gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("rec", "rvp", "gap"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "rvp" and (self.system is None or self.rvp is None):
            raise ValueError("rvp loss needs a system and an RvpConfig")

    def with_sparsity(self, gamma: float) -> "LossSpec":
        return replace(self, sparsity_gamma=gamma)


def _rec_objective(model, weights, states):
    x = np.asarray(states, dtype=np.float64).T
    if x.shape[1] == 0:
        raise ValueError("empty batch")
    p = _net.forward_ops(model, weights).project(x)
    d = x - p
    return tp.vsum(d * d) * (1.0 / x.shape[1])


def _gap_objective(model, weights, batch: GapBatch):
    x = batch.xs.T
    g = batch.gs.T
    p = _net.forward_ops(model, weights).project(x)
    d = x - p
    s = tp.vsum(g * d, axis=0)
    return tp.vsum(s * s) * (1.0 / len(batch))


def _rvp_objective(model, weights, sys: FomSystem, trajs, cfg: RvpConfig):
    trajs = list(trajs)
    if not trajs:
        raise ValueError("empty trajectory batch")
    ops = _net.forward_ops(model, weights)
    # trajectories with identical grids share one vectorized sweep
    groups: dict[tuple, list[Trajectory]] = {}
    for traj in trajs:
        if traj.derivs is None:
            raise ValueError("rvp loss needs trajectories with stored derivatives")
        key = (len(traj), round(traj.dt, 12), traj.inputs is not None)
        groups.setdefault(key, []).append(traj)

    total = None
    for (tlen, dt, has_u), group in groups.items():
        last = int(round(cfg.t_f / dt))
        if last > tlen - 1 or last < 1:
            raise ValueError("t_f must address at least two stored samples of the trajectory")
        count = len(group)
        elapsed = dt * np.arange(last + 1)
        x = np.concatenate([tr.states[: last + 1].T for tr in group], axis=1)
        v = np.concatenate([tr.derivs[: last + 1].T for tr in group], axis=1)
        u = (
            np.concatenate([tr.inputs[: last + 1].T for tr in group], axis=1)
            if has_u
            else None
        )
        y = sys.g(x)

        trap = np.full(last + 1, dt)
        trap[0] = trap[-1] = 0.5 * dt
        wvec = weight_fn(elapsed, cfg.lipschitz_value, cfg.t_f)

        x_p, dx_p = ops.jvp_project(x, v)
        f_at_p = tp.fom_f(sys, x_p, u)
        _, rom_rhs = ops.jvp_project(x_p, f_at_p)
        g_at_p = tp.fom_g(sys, x_p)

        out_diff = y - g_at_p
        out_col = tp.vsum(out_diff * out_diff, axis=0)
        vel_diff = dx_p - rom_rhs
        vel_col = tp.vsum(vel_diff * vel_diff, axis=0)

        if cfg.normalize:
            out_scale = 1.0 / np.maximum(np.sum(y * y, axis=0), 1e-12)
            vel_scale = np.tile(wvec, count) / np.maximum(np.sum(v * v, axis=0), 1e-12)
        else:
            out_scale = 1.0
            vel_scale = np.tile(wvec, count)

        integrand = out_col * out_scale + (cfg.gamma * vel_scale) * vel_col
        contrib = tp.vsum(np.tile(trap / cfg.t_f, count) * integrand)
        total = contrib if total is None else total + contrib
    return total * (1.0 / len(trajs))


def evaluate_objective(spec: LossSpec, model, batch, weights=None):
    """Bare objective J (no regularizers); generic over the weights mapping."""
    w = model.parameter_arrays() if weights is None else weights
    if spec.kind == "rec":
        return _rec_objective(model, w, batch)
    if spec.kind == "gap":
        return _gap_objective(model, w, batch)
    return _rvp_objective(model, w, spec.system, batch, spec.rvp)


def penalties(spec: LossSpec, model, beta: float):
    """Regularizer value and analytic gradients on the raw parameters.

    beta-weighted domain regularizer on each layer's effective
    representatives, plus the optional row-sparsity penalty on the
    last-layer encoder weights.  Baseline networks have neither.
    """
    grads: dict[str, np.ndarray] = {}
    if not isinstance(model, _net.AutoencoderParams):
        return 0.0, grads
    if beta == 0.0 and spec.sparsity_gamma == 0.0:
        return 0.0, grads

    w = model.parameter_arrays()
    arrays = _net._layer_arrays(model, w)
    value = 0.0
    last = model.num_layers
    for layer, (phi_t, psi_t, _) in enumerate(arrays, start=1):
        key = f"layer{layer}"
        if beta != 0.0:
            r_val, (g_phi, g_psi) = pair_regularizer_with_grad(
                PairRep(phi_t=np.asarray(phi_t), psi_t=np.asarray(psi_t))
            )
            value += beta * r_val
            g_phi = beta * g_phi
            g_psi = beta * g_psi
        else:
            g_phi = g_psi = None
        if layer == last and spec.sparsity_gamma > 0.0:
            s_val, s_grad = grassmann_row_sparsity_with_grad(np.asarray(psi_t))
            value += spec.sparsity_gamma * s_val
            s_grad = spec.sparsity_gamma * s_grad
            g_psi = s_grad if g_psi is None else g_psi + s_grad
        if g_phi is not None:
            if layer == last and model.constraint is not None:
                _accum(grads, key + ".phi_coef", model.null_basis.T @ g_phi)
            else:
                _accum(grads, key + ".phi_t", g_phi)
        if g_psi is not None:
            if layer == last and model.psi_row_mask is not None:
                g_psi = model.psi_row_mask[:, None] * g_psi
            _accum(grads, key + ".psi_t", g_psi)
    return value, grads


def _accum(grads: dict, name: str, value: np.ndarray) -> None:
    grads[name] = value if name not in grads else grads[name] + value


def rec_loss(model, states, weights=None) -> float:
    """Mean squared reconstruction error over a batch of row states."""
    return evaluate_objective(LossSpec("rec"), model, states, weights)


def rvp_loss(model, sys: FomSystem, trajs, cfg: RvpConfig, weights=None) -> float:
    """Output-reconstruction plus weighted velocity-projection error,
    trapezoid-integrated over [0, t_f] and averaged over trajectories."""
    return evaluate_objective(LossSpec("rvp", system=sys, rvp=cfg), model, trajs, weights)


def gap_loss(model, batch: GapBatch, weights=None) -> float:
    """Mean squared alignment of reconstruction errors with gradient samples."""
    return evaluate_objective(LossSpec("gap"), model, batch, weights)


def total_cost(spec: LossSpec, model, batch, beta: float, weights=None) -> float:
    """Objective plus beta-weighted layer regularizers (and the optional
    sparsity penalty): the quantity actually minimized during training."""
    j = evaluate_objective(spec, model, batch, weights)
    pen, _ = penalties(spec, model, beta)
    jval = j.value if isinstance(j, tp.Var) else j
    return jval + pen
