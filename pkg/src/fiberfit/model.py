"""Differentiable view of the split-step stack.

The propagator re-read as a complex-valued layered network whose only
trainable parameters are the two scalars (beta, gamma): taped forward pass,
target-normalized squared-L2 loss, and exact reverse-mode gradients.

Complex differentiation is done by explicit Wirtinger bookkeeping.  The
adjoint carried backward is mu = dJ/d(conj(u)); for a real-valued J and a
real parameter p, dJ/dp = 2 Re sum(conj(mu) * du/dp).  The two layer rules:

* unitary spectral multiplier E: input adjoint = ifft(conj(E) * fft(mu)),
  and dJ/dbeta picks up (2/N) Re <fft(mu), (i d w^2/2) * spectrum_out>;
* Kerr map z = y exp(i phi |y|^2) (phi = gamma zeta) is non-holomorphic:
  dz/dy = e^{i phi |y|^2} (1 + i phi |y|^2),  dz/dybar = i phi y^2 e^{i phi |y|^2},
  input adjoint = mu conj(dz/dy) + conj(mu) dz/dybar, and dJ/dgamma picks up
  2 zeta Re <mu, i |y|^2 z>.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import fft, ifft

from .propagator import BlowUpError, SimGrid, _fused_core
from .signal import ComplexSignal

__all__ = [
    "ModelParams",
    "ForwardTape",
    "LossValue",
    "forward",
    "reparameterized_forward",
    "loss",
    "backward",
    "loss_and_grad",
    "grad_check",
]

GRAD_GUARD = 1e-30


@dataclass(frozen=True)
class ModelParams:
    """Trainable scalars (beta, gamma) on a frozen discretization grid."""

    beta: float
    gamma: float
    grid: SimGrid

    def __post_init__(self) -> None:
        if not (math.isfinite(self.beta) and math.isfinite(self.gamma)):
            raise ValueError("beta and gamma must be finite")


@dataclass
class ForwardTape:
    """Reverse-mode storage: inputs to each Kerr step plus each post-multiplier spectrum."""

    layer_inputs: list
    spectra: list
    distances: list
    beta: float
    gamma: float
    grid: SimGrid


@dataclass
class LossValue:
    value: float
    residual: np.ndarray


def forward(params: ModelParams, signal: ComplexSignal) -> tuple[ComplexSignal, ForwardTape]:
    """Run the fused split-step stack, recording what backward needs."""
    grid = params.grid
    if len(signal) != grid.num_samples:
        raise ValueError("signal length does not match grid.num_samples")
    out, pre_kerr, spectra, distances = _fused_core(
        signal.samples, params.beta, params.gamma, grid, collect=True
    )
    tape = ForwardTape(
        layer_inputs=pre_kerr,
        spectra=spectra,
        distances=distances,
        beta=params.beta,
        gamma=params.gamma,
        grid=grid,
    )
    return ComplexSignal(samples=out, tau=signal.tau), tape


def reparameterized_forward(params: ModelParams, signal: ComplexSignal) -> ComplexSignal:
    """Literal scaled-kernel stack: sqrt(gamma zeta)-scaled ends, fixed activation.

    First kernel scaled by c = sqrt(gamma zeta), last by 1/c, activation
    sigma(w) = w exp(i |w|^2) in between.  For gamma*zeta > 0 this equals
    :func:`forward` exactly; for gamma*zeta < 0 the principal complex root
    gives |c w|^2 = |gamma zeta| |w|^2, which conjugates the Kerr phase, so
    the two paths deliberately disagree there (see tests).
    """
    grid = params.grid
    if len(signal) != grid.num_samples:
        raise ValueError("signal length does not match grid.num_samples")
    zeta = grid.step_zeta
    if params.gamma * zeta == 0:
        raise ValueError("scaled-kernel form is singular at gamma * zeta = 0")
    c = cmath.sqrt(params.gamma * zeta)
    w = grid.omega()
    half = np.exp(0.5j * params.beta * (0.5 * zeta) * w * w)
    full = np.exp(0.5j * params.beta * zeta * w * w)

    a = c * ifft(half * fft(signal.samples))
    for m in range(1, grid.num_layers + 1):
        a = a * np.exp(1j * (a.real * a.real + a.imag * a.imag))
        mult = full if m < grid.num_layers else half
        a = ifft(mult * fft(a))
    a = a / c
    if not np.all(np.isfinite(a.view(np.float64))):
        raise BlowUpError(layer=grid.num_layers)
    return ComplexSignal(samples=a, tau=signal.tau)


def loss(params: ModelParams, signal: ComplexSignal, target: ComplexSignal) -> LossValue:
    """J = sum |out - target|^2 / sum |target|^2."""
    out, _ = forward(params, signal)
    return _loss_from_output(out.samples, target.samples)


def _loss_from_output(out: np.ndarray, target: np.ndarray) -> LossValue:
    norm_sq = float(np.sum(target.real * target.real + target.imag * target.imag))
    if norm_sq == 0.0:
        raise ValueError("target has zero norm; normalized loss undefined")
    residual = out - target
    value = float(np.sum(residual.real * residual.real + residual.imag * residual.imag)) / norm_sq
    return LossValue(value=value, residual=residual)


def backward(
    tape: ForwardTape,
    params: ModelParams,
    residual: np.ndarray,
    target_norm_sq: float,
) -> tuple[float, float]:
    """Exact dJ/dbeta, dJ/dgamma for J = ||residual||^2 / target_norm_sq."""
    grid = params.grid
    if tape.grid != grid or tape.beta != params.beta or tape.gamma != params.gamma:
        raise ValueError("tape was not produced by a forward pass with these params")
    if len(tape.layer_inputs) != grid.num_layers or len(tape.spectra) != grid.num_layers + 1:
        raise ValueError("tape is incomplete for this grid")
    if residual.size != grid.num_samples:
        raise ValueError("residual length does not match grid.num_samples")

    n = grid.num_samples
    zeta = grid.step_zeta
    w = grid.omega()
    w_sq = w * w
    half = np.exp(0.5j * params.beta * (0.5 * zeta) * w_sq)
    full = np.exp(0.5j * params.beta * zeta * w_sq)
    phi = params.gamma * zeta

    mu = residual / target_norm_sq
    beta_terms = np.empty(grid.num_layers + 1)
    gamma_terms = np.empty(grid.num_layers)

    for s in range(grid.num_layers, -1, -1):
        d = tape.distances[s]
        mult = half if s in (0, grid.num_layers) else full
        mu_hat = fft(mu)
        beta_terms[s] = (2.0 / n) * np.vdot(mu_hat, (0.5j * d) * w_sq * tape.spectra[s]).real
        mu = ifft(np.conj(mult) * mu_hat)
        if s >= 1:
            y = tape.layer_inputs[s - 1]
            y_sq = y.real * y.real + y.imag * y.imag
            phase = np.exp(1j * phi * y_sq)
            z = y * phase
            gamma_terms[s - 1] = 2.0 * zeta * np.vdot(mu, 1j * y_sq * z).real
            dz_dy = phase * (1.0 + 1j * phi * y_sq)
            dz_dybar = 1j * phi * y * y * phase
            mu = mu * np.conj(dz_dy) + np.conj(mu) * dz_dybar

    # Pairwise summation over layers: M near-cancelling contributions.
    return float(np.sum(beta_terms)), float(np.sum(gamma_terms))


def loss_and_grad(
    params: ModelParams, signal: ComplexSignal, target: ComplexSignal
) -> tuple[LossValue, tuple[float, float]]:
    out, tape = forward(params, signal)
    lv = _loss_from_output(out.samples, target.samples)
    norm_sq = float(np.sum(target.samples.real ** 2 + target.samples.imag ** 2))
    grads = backward(tape, params, lv.residual, norm_sq)
    return lv, grads


def grad_check(
    params: ModelParams,
    signal: ComplexSignal,
    target: ComplexSignal,
    rel_step: float = 1e-4,
) -> tuple[float, float]:
    """Relative gap between reverse-mode and central-difference gradients.

    Returns |analytic - fd| / max(|analytic|, |fd|, guard) per parameter;
    near a stationary point both gradients vanish and the guard keeps the
    report at ~0 instead of 0/0.
    """
    if not rel_step > 0:
        raise ValueError("rel_step must be positive")
    _, (g_beta, g_gamma) = loss_and_grad(params, signal, target)

    def j_at(beta: float, gamma: float) -> float:
        return loss(ModelParams(beta=beta, gamma=gamma, grid=params.grid), signal, target).value

    h_beta = rel_step * max(abs(params.beta), 1e-6)
    h_gamma = rel_step * max(abs(params.gamma), 1e-6)
    fd_beta = (j_at(params.beta + h_beta, params.gamma) - j_at(params.beta - h_beta, params.gamma)) / (2 * h_beta)
    fd_gamma = (j_at(params.beta, params.gamma + h_gamma) - j_at(params.beta, params.gamma - h_gamma)) / (2 * h_gamma)

    err_beta = abs(g_beta - fd_beta) / max(abs(g_beta), abs(fd_beta), GRAD_GUARD)
    err_gamma = abs(g_gamma - fd_gamma) / max(abs(g_gamma), abs(fd_gamma), GRAD_GUARD)
    return err_beta, err_gamma
