"""Gradient-based recovery of (beta, gamma) from an input/output waveform pair.

Full-batch iterations of loss + reverse-mode gradient + one optimizer step.
Four update rules are provided: heavy-ball gradient descent, Adam, Adadelta
and RMSprop.  Updates are applied in rescaled coordinates
(beta/beta_scale, gamma/gamma_scale) so one learning rate serves both axes
of the anisotropic landscape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import ModelParams, loss_and_grad
from .propagator import BlowUpError, SimGrid
from .signal import ComplexSignal

__all__ = [
    "ALGORITHMS",
    "OptimizerConfig",
    "OptimizerState",
    "IterationRecord",
    "TrainHistory",
    "default_config",
    "init_state",
    "optimizer_step",
    "fit",
    "write_history_csv",
]

ALGORITHMS = ("gd_momentum", "adam", "adadelta", "rmsprop")


@dataclass(frozen=True)
class OptimizerConfig:
    """Algorithm choice plus the fields that algorithm consults.

    learning_rate applies to gd_momentum, adam and rmsprop (adadelta is
    scale-free); momentum to gd_momentum; beta1/beta2 to adam; decay_rho to
    adadelta and rmsprop; epsilon_guard sits inside the square roots.
    """

    algorithm: str = "adam"
    learning_rate: float = 0.05
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    decay_rho: float = 0.9
    epsilon_guard: float = 1e-8
    max_iters: int = 5000
    loss_tol: float = 1e-10
    grad_tol: float = 1e-8
    beta_scale: float = 10.0
    gamma_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        for name in ("momentum", "beta1", "beta2", "decay_rho"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if not self.epsilon_guard > 0:
            raise ValueError("epsilon_guard must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.loss_tol < 0 or self.grad_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if not (self.beta_scale > 0 and self.gamma_scale > 0):
            raise ValueError("coordinate scales must be positive")


def default_config(algorithm: str = "adam", **overrides) -> OptimizerConfig:
    """Per-algorithm defaults tuned on the desk-scale problem."""
    base = {
        "gd_momentum": dict(algorithm="gd_momentum", learning_rate=0.002, momentum=0.9),
        "adam": dict(algorithm="adam", learning_rate=0.05, beta1=0.9, beta2=0.999),
        "adadelta": dict(algorithm="adadelta", decay_rho=0.5, epsilon_guard=1e-8),
        "rmsprop": dict(algorithm="rmsprop", learning_rate=0.01, decay_rho=0.9),
    }[algorithm]
    base.update(overrides)
    return OptimizerConfig(**base)


@dataclass
class OptimizerState:
    """Accumulators for the 2-vector update; all zero at initialization."""

    t: int = 0
    m: np.ndarray = field(default_factory=lambda: np.zeros(2))
    v: np.ndarray = field(default_factory=lambda: np.zeros(2))
    u: np.ndarray = field(default_factory=lambda: np.zeros(2))


def init_state(config: OptimizerConfig) -> OptimizerState:
    return OptimizerState()


def optimizer_step(
    state: OptimizerState, grads, config: OptimizerConfig
) -> tuple[float, float, OptimizerState]:
    """One canonical update of the configured algorithm.

    Takes the gradient 2-vector, returns (delta_0, delta_1, state).  Deltas
    are in whatever coordinates the gradient was supplied in.
    """
    g = np.asarray(grads, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise ValueError("non-finite gradient passed to optimizer_step")
    eps = config.epsilon_guard
    state.t += 1

    if config.algorithm == "gd_momentum":
        state.m = config.momentum * state.m + g
        delta = -config.learning_rate * state.m
    elif config.algorithm == "adam":
        state.m = config.beta1 * state.m + (1.0 - config.beta1) * g
        state.v = config.beta2 * state.v + (1.0 - config.beta2) * g * g
        m_hat = state.m / (1.0 - config.beta1 ** state.t)
        v_hat = state.v / (1.0 - config.beta2 ** state.t)
        delta = -config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
    elif config.algorithm == "rmsprop":
        state.v = config.decay_rho * state.v + (1.0 - config.decay_rho) * g * g
        delta = -config.learning_rate * g / np.sqrt(state.v + eps)
    else:  # adadelta
        state.v = config.decay_rho * state.v + (1.0 - config.decay_rho) * g * g
        delta = -np.sqrt(state.u + eps) / np.sqrt(state.v + eps) * g
        state.u = config.decay_rho * state.u + (1.0 - config.decay_rho) * delta * delta

    return float(delta[0]), float(delta[1]), state


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    loss: float
    beta: float
    gamma: float
    e_beta: float | None = None
    e_gamma: float | None = None


@dataclass
class TrainHistory:
    records: list
    converged: bool = False
    stop_reason: str = "max_iters"

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]


def fit(
    signal: ComplexSignal,
    target: ComplexSignal,
    start: tuple[float, float],
    grid: SimGrid,
    config: OptimizerConfig,
    truth: tuple[float, float] | None = None,
) -> tuple[tuple[float, float], TrainHistory]:
    """Minimize the normalized loss from ``start``; returns the best iterate seen.

    Stops on loss_tol, on grad_tol (gradient norm in scaled coordinates), on
    max_iters, or on numerical blow-up; blow-up still returns the best
    iterate recorded so far.
    """
    scales = np.array([config.beta_scale, config.gamma_scale])
    x = np.array([start[0], start[1]], dtype=np.float64) / scales
    state = init_state(config)
    records: list[IterationRecord] = []
    best: tuple[float, float, float] | None = None  # (loss, beta, gamma)
    converged = False
    reason = "max_iters"

    for it in range(config.max_iters + 1):
        beta, gamma = float(x[0] * scales[0]), float(x[1] * scales[1])
        params = ModelParams(beta=beta, gamma=gamma, grid=grid)
        try:
            lv, (g_beta, g_gamma) = loss_and_grad(params, signal, target)
        except BlowUpError:
            reason = "blow_up"
            break
        rec = IterationRecord(
            iteration=it,
            loss=lv.value,
            beta=beta,
            gamma=gamma,
            e_beta=abs(beta - truth[0]) if truth is not None else None,
            e_gamma=abs(gamma - truth[1]) if truth is not None else None,
        )
        records.append(rec)
        if best is None or lv.value < best[0]:
            best = (lv.value, beta, gamma)
        if lv.value < config.loss_tol:
            converged = True
            reason = "loss_tol"
            break
        g_scaled = np.array([g_beta * scales[0], g_gamma * scales[1]])
        if float(np.linalg.norm(g_scaled)) < config.grad_tol:
            converged = True
            reason = "grad_tol"
            break
        if it == config.max_iters:
            reason = "max_iters"
            break
        d0, d1, state = optimizer_step(state, g_scaled, config)
        x = x + np.array([d0, d1])

    if best is None:
        raise BlowUpError(layer=0)
    history = TrainHistory(records=records, converged=converged, stop_reason=reason)
    return (best[1], best[2]), history


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_history_csv(history: TrainHistory, path) -> None:
    """CSV with header iter,loss,beta,gamma,e_beta,e_gamma (e-columns empty without truth)."""
    with open(path, "w") as fh:
        fh.write("iter,loss,beta,gamma,e_beta,e_gamma\n")
        for r in history.records:
            eb = _fmt(r.e_beta) if r.e_beta is not None else ""
            eg = _fmt(r.e_gamma) if r.e_gamma is not None else ""
            fh.write(f"{r.iteration},{_fmt(r.loss)},{_fmt(r.beta)},{_fmt(r.gamma)},{eb},{eg}\n")
