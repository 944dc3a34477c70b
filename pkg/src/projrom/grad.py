"""Reverse-mode parameter gradients for every objective, with FD checks.

``vjp_loss`` wraps each parameter array in a tape variable, replays the
same forward code the loss module evaluates, and runs one reverse pass.
The objective value it returns is bitwise-identical to
``loss.total_cost`` because both paths execute the same numpy operations
in the same order.  Velocity-projection objectives contain forward
tangent sweeps, so their reverse pass pulls in second derivatives of the
activations; full-order-model Jacobian products are supplied by the
system object and are not differentiated further.

``fd_check`` probes random parameter coordinates with central differences
and reports the worst relative error per parameter block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _tape as tp
from . import loss as _loss
from .net import EvaluationError

__all__ = ["ParamGrad", "Tape", "vjp_loss", "fd_check", "FdReport"]

# A ParamGrad maps parameter-block names to cotangent arrays whose shapes
# mirror the parameters.
ParamGrad = dict

Tape = tp.Tape


def vjp_loss(spec: _loss.LossSpec, model, batch, beta: float = 0.0):
    """Total cost and its gradient with respect to every parameter block.

    Returns ``(value, grads)`` where ``grads`` has one entry per parameter
    (zero where the objective does not touch a block).  Raises
    :class:`EvaluationError` on non-finite intermediates.
    """
    tape = tp.Tape()
    wvars = {k: tp.Var(v, tape) for k, v in model.parameter_arrays().items()}
    j = _loss.evaluate_objective(spec, model, batch, weights=wvars)
    if not isinstance(j, tp.Var):  # pragma: no cover - objective never constant
        raise EvaluationError("objective did not touch any parameter")
    if not np.isfinite(j.value):
        raise EvaluationError(f"{spec.kind} objective evaluated to a non-finite value")
    tp.backward(j)
    grads: ParamGrad = {}
    for name, var in wvars.items():
        grads[name] = np.zeros_like(var.value) if var.grad is None else var.grad
    pen_value, pen_grads = _loss.penalties(spec, model, beta)
    for name, g in pen_grads.items():
        grads[name] = grads[name] + g
    value = j.value + pen_value
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise EvaluationError(f"non-finite gradient in parameter block {name}")
    return value, grads


@dataclass(frozen=True)
class FdBlockRow:
    name: str
    max_rel_err: float
    probes: int


@dataclass(frozen=True)
class FdReport:
    """Per-block worst relative errors of analytic vs central-difference
    gradients."""

    rows: tuple[FdBlockRow, ...]
    step: float

    @property
    def max_rel_err(self) -> float:
        return max((r.max_rel_err for r in self.rows), default=0.0)

    def to_text(self) -> str:
        lines = ["block  max-rel-err  probes"]
        for r in self.rows:
            lines.append(f"{r.name}  {r.max_rel_err:.6e}  {r.probes}")
        return "\n".join(lines)


def fd_check(
    spec: _loss.LossSpec,
    model,
    batch,
    beta: float = 0.0,
    probes: int = 32,
    h: float = 1e-5,
    seed=0,
) -> FdReport:
    """Compare analytic gradients against central finite differences.

    ``probes`` random parameter coordinates are perturbed by +-h scaled by
    the coordinate's magnitude.  Relative errors are
    |fd - an| / max(|fd|, |an|, floor) with floor = 1e-3 * (overall
    gradient infinity-norm): coordinates whose true gradient is far below
    the gradient's scale (square layers' phi_t blocks are exactly zero by
    the gauge structure of the biorthogonal projection) cannot be certified
    by finite differences against roundoff, so they are measured against
    the scale floor instead of their own magnitude.  Deterministic for a
    fixed seed.
    """
    _, grads = vjp_loss(spec, model, batch, beta)
    g_inf = max((np.abs(g).max(initial=0.0) for g in grads.values()), default=0.0)
    floor = max(1e-8, 1e-3 * g_inf)
    names = sorted(model.parameter_arrays().keys())
    sizes = np.array([model.parameter_arrays()[n].size for n in names])
    total = int(sizes.sum())
    rng = np.random.default_rng(seed)
    chosen = rng.choice(total, size=min(probes, total), replace=False)

    base = model.copy_parameters()
    per_block: dict[str, tuple[float, int]] = {n: (0.0, 0) for n in names}
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    for flat in sorted(int(c) for c in chosen):
        block = int(np.searchsorted(offsets, flat, side="right") - 1)
        name = names[block]
        local = flat - offsets[block]
        idx = np.unravel_index(local, base[name].shape)
        step = h * max(1.0, abs(base[name][idx]))

        w_plus = {k: (v.copy() if k == name else v) for k, v in base.items()}
        w_plus[name][idx] += step
        w_minus = {k: (v.copy() if k == name else v) for k, v in base.items()}
        w_minus[name][idx] -= step
        f_plus = _loss.total_cost(spec, model.replace_parameters(w_plus), batch, beta)
        f_minus = _loss.total_cost(spec, model.replace_parameters(w_minus), batch, beta)
        fd = (f_plus - f_minus) / (2.0 * step)
        an = float(grads[name][idx])
        rel = abs(fd - an) / max(abs(fd), abs(an), floor)
        worst, count = per_block[name]
        per_block[name] = (max(worst, rel), count + 1)

    rows = tuple(FdBlockRow(name=n, max_rel_err=per_block[n][0], probes=per_block[n][1]) for n in names)
    return FdReport(rows=rows, step=h)
