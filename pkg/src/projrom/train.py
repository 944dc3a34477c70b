"""Minibatch training: Adam, plateau learning-rate schedule, multi-seed runs.

One session trains a single network on one objective: shuffled minibatches,
the biorthogonal projection applied inside every forward pass, gradients
from the tape, a standard Adam update, per-epoch validation, a
reduce-on-plateau learning-rate schedule driven by the validation loss, and
best-on-validation checkpointing.  A non-finite training loss or a domain
escape of the representatives marks the session diverged instead of
raising.

``multi_seed`` trains several independently initialized networks (in
parallel processes when available) and selects the best by a caller-chosen
metric, typically the true ROM prediction error on validation trajectories.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from . import grad as _grad
from . import loss as _loss
from .biortho import DomainError
from .net import AutoencoderParams, EvaluationError, save_checkpoint

__all__ = [
    "AdamConfig",
    "AdamState",
    "PlateauConfig",
    "PlateauScheduler",
    "TrainConfig",
    "DataSplit",
    "EpochRecord",
    "SessionResult",
    "adam_step",
    "train_session",
    "multi_seed",
    "MultiSeedResult",
]


@dataclass(frozen=True)
class AdamConfig:
    b1: float = 0.9
    b2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    """First/second moment accumulators and the step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: dict) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(state: AdamState, params: dict, grads: dict, lr: float, cfg: AdamConfig = AdamConfig()):
    """One bias-corrected Adam update, in place on ``params`` and ``state``.

    Parameter blocks are visited in sorted-name order for determinism.
    """
    state.t += 1
    b1, b2, eps = cfg.b1, cfg.b2, cfg.eps
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for name in sorted(params.keys()):
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


@dataclass(frozen=True)
class PlateauConfig:
    patience: int = 50
    factor: float = 0.1
    min_lr: float = 1e-8
    threshold: float = 0.0  # strict improvement required

    def __post_init__(self):
        if not 0.0 < self.factor < 1.0:
            raise ValueError("factor must lie in (0, 1)")


class PlateauScheduler:
    """Reduce the learning rate when the monitored value stops improving.

    The rate drops by ``factor`` exactly when the monitored value has failed
    to improve for ``patience`` consecutive observations; it never increases.
    """

    def __init__(self, cfg: PlateauConfig, lr0: float):
        self.cfg = cfg
        self.lr = float(lr0)
        self.best = np.inf
        self.stale = 0

    def observe(self, value: float) -> float:
        if value < self.best - self.cfg.threshold:
            self.best = value
            self.stale = 0
        else:
            self.stale += 1
            if self.stale > self.cfg.patience:
                self.lr = max(self.lr * self.cfg.factor, self.cfg.min_lr)
                self.stale = 0
        return self.lr


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; defaults follow the case-study protocol."""

    epochs: int = 900
    lr0: float = 1e-3
    plateau: PlateauConfig = field(default_factory=PlateauConfig)
    batch_size: int = 400  # rec/gap sample batches
    traj_batch: int = 2  # rvp trajectory batches
    beta: float = 1e-5
    seed: int = 0
    adam: AdamConfig = field(default_factory=AdamConfig)
    validate_with_regularizer: bool = False

    def __post_init__(self):
        if self.epochs <= 0:
            raise ValueError("epochs must be positive")


@dataclass(frozen=True)
class DataSplit:
    """Training and validation payloads of the objective's batch type."""

    train: Any
    valid: Any


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train: float
    valid: float
    lr: float


@dataclass
class SessionResult:
    """Outcome of one training session.

    ``model`` carries the best-on-validation parameters; ``diverged`` marks
    sessions aborted on a non-finite loss or a domain escape (they keep the
    best checkpoint reached before the abort).
    """

    model: Any
    best_valid: float
    best_epoch: int
    curves: list[EpochRecord]
    diverged: bool = False
    diverged_epoch: int | None = None
    min_gram_det: float = np.inf
    checkpoint_path: str | None = None

    def curves_csv(self) -> str:
        lines = ["epoch,train,valid,lr"]
        for r in self.curves:
            lines.append(f"{r.epoch},{r.train!r},{r.valid!r},{r.lr!r}")
        return "\n".join(lines) + "\n"


def _minibatches(spec: _loss.LossSpec, data, batch_size: int, traj_batch: int, rng):
    if spec.kind == "rec":
        states = np.asarray(data)
        order = rng.permutation(states.shape[0])
        size = batch_size
        for lo in range(0, len(order), size):
            yield states[order[lo : lo + size]]
    elif spec.kind == "gap":
        order = rng.permutation(len(data))
        for lo in range(0, len(order), batch_size):
            yield data.subset(order[lo : lo + batch_size])
    else:
        order = rng.permutation(len(data))
        for lo in range(0, len(order), traj_batch):
            yield [data[i] for i in order[lo : lo + traj_batch]]


def _validation_loss(spec: _loss.LossSpec, model, valid, cfg: TrainConfig) -> float:
    beta = cfg.beta if cfg.validate_with_regularizer else 0.0
    return _loss.total_cost(spec, model, valid, beta)


def train_session(
    model0,
    spec: _loss.LossSpec,
    data: DataSplit,
    cfg: TrainConfig,
    checkpoint_path: str | None = None,
) -> SessionResult:
    """Run one full training session; see the module docstring.

    Deterministic for a fixed config and initial model: reruns on one
    platform produce bit-identical loss curves.
    """
    rng = np.random.default_rng(cfg.seed)
    params = model0.copy_parameters()
    model = model0.replace_parameters(params)
    adam = AdamState.zeros_like(params)
    sched = PlateauScheduler(cfg.plateau, cfg.lr0)
    lr = sched.lr

    best_valid = np.inf
    best_epoch = -1
    best_params = model0.copy_parameters()
    curves: list[EpochRecord] = []
    diverged = False
    diverged_epoch = None
    min_det = np.inf

    for epoch in range(cfg.epochs):
        epoch_costs = []
        try:
            for batch in _minibatches(spec, data.train, cfg.batch_size, cfg.traj_batch, rng):
                value, grads = _grad.vjp_loss(spec, model, batch, cfg.beta)
                if not np.isfinite(value):
                    raise EvaluationError("non-finite training loss")
                epoch_costs.append(value)
                adam_step(adam, params, grads, lr, cfg.adam)
            valid_loss = _validation_loss(spec, model, data.valid, cfg)
            if not np.isfinite(valid_loss):
                raise EvaluationError("non-finite validation loss")
        except (EvaluationError, DomainError):
            diverged = True
            diverged_epoch = epoch
            break

        train_loss = float(np.mean(epoch_costs))
        if isinstance(model, AutoencoderParams):
            min_det = min(min_det, model.min_gram_det())
        if valid_loss < best_valid:
            best_valid = valid_loss
            best_epoch = epoch
            best_params = {k: p.copy() for k, p in params.items()}
        curves.append(EpochRecord(epoch=epoch, train=train_loss, valid=valid_loss, lr=lr))
        lr = sched.observe(valid_loss)

    best_model = model0.replace_parameters(best_params)
    result = SessionResult(
        model=best_model,
        best_valid=float(best_valid),
        best_epoch=best_epoch,
        curves=curves,
        diverged=diverged,
        diverged_epoch=diverged_epoch,
        min_gram_det=float(min_det),
    )
    if checkpoint_path is not None:
        save_checkpoint(best_model, checkpoint_path)
        result.checkpoint_path = checkpoint_path
    return result


@dataclass
class MultiSeedResult:
    best_model: Any
    best_seed: int
    best_metric: float
    sessions: list[SessionResult]
    metrics: list[float]


def _run_one_seed(args):
    builder, spec, data, cfg, seed = args
    model0 = builder(seed)
    return train_session(model0, spec, data, replace(cfg, seed=seed))


def multi_seed(
    seeds,
    model_builder: Callable[[int], Any],
    spec: _loss.LossSpec,
    data: DataSplit,
    cfg: TrainConfig,
    select_metric: Callable[[Any], float],
    n_jobs: int | None = None,
) -> MultiSeedResult:
    """Train one session per seed and keep the best by ``select_metric``
    (lower is better; typically the ROM prediction error on validation
    trajectories rather than the training loss).  Diverged sessions score
    infinity.  Seeds run in parallel processes when ``n_jobs`` allows.
    """
    seeds = list(seeds)
    jobs = [(model_builder, spec, data, cfg, s) for s in seeds]
    if n_jobs is None:
        n_jobs = min(len(seeds), os.cpu_count() or 1)
    if n_jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            sessions = list(pool.map(_run_one_seed, jobs))
    else:
        sessions = [_run_one_seed(j) for j in jobs]

    metrics = []
    for sess in sessions:
        if sess.diverged and sess.best_epoch < 0:
            metrics.append(np.inf)
        else:
            metrics.append(float(select_metric(sess.model)))
    best_idx = int(np.argmin(metrics))
    return MultiSeedResult(
        best_model=sessions[best_idx].model,
        best_seed=seeds[best_idx],
        best_metric=metrics[best_idx],
        sessions=sessions,
        metrics=metrics,
    )
