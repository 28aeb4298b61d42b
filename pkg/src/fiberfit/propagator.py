"""Split-step Fourier solver for the fiber evolution equation.

The field A(t, z) evolves in distance z under chromatic dispersion (beta,
ps^2/km) and the Kerr effect (gamma, 1/(W km)).  One Strang step over zeta
is half a dispersion step, a full Kerr step, half a dispersion step; the
dispersion step is exact on the periodic grid via a spectral phase
multiplier exp(i beta d w^2 / 2).  A time-domain Fresnel-kernel backend is
provided for fidelity experiments.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import fft, fftfreq, ifft
from scipy.signal import fftconvolve

from .signal import ComplexSignal, PulseSpec, SymbolSequence, modulate

__all__ = [
    "FiberParams",
    "SimGrid",
    "LinearStep",
    "BlowUpError",
    "dispersion_multiplier",
    "build_fresnel_kernel",
    "fresnel_convolve",
    "nonlinear_step",
    "linear_step",
    "propagate",
    "generate_ground_truth",
]


class BlowUpError(RuntimeError):
    """Non-finite samples appeared while propagating (layer index attached)."""

    def __init__(self, layer: int):
        super().__init__(f"propagation blew up (non-finite samples) at layer {layer}")
        self.layer = layer


@dataclass(frozen=True)
class FiberParams:
    """Physical coefficients: beta (ps^2/km), gamma (1/(W km)), length (km)."""

    beta: float = -21.6
    gamma: float = 1.6
    length_z: float = 80.0

    def __post_init__(self) -> None:
        if not self.length_z > 0:
            raise ValueError("length_z must be positive")
        if not (math.isfinite(self.beta) and math.isfinite(self.gamma)):
            raise ValueError("beta and gamma must be finite")


@dataclass(frozen=True)
class SimGrid:
    """Discretization: M layers of depth step_zeta (km), N samples of period tau (ps)."""

    num_layers: int
    num_samples: int
    step_zeta: float
    tau: float

    def __post_init__(self) -> None:
        if self.num_layers < 1 or self.num_samples < 1:
            raise ValueError("num_layers and num_samples must be >= 1")
        if not (self.step_zeta > 0 and self.tau > 0):
            raise ValueError("step_zeta and tau must be positive")

    @classmethod
    def from_length(cls, length_z: float, num_layers: int, num_samples: int, tau: float) -> "SimGrid":
        return cls(num_layers=num_layers, num_samples=num_samples,
                   step_zeta=length_z / num_layers, tau=tau)

    @property
    def length_z(self) -> float:
        return self.step_zeta * self.num_layers

    def omega(self) -> np.ndarray:
        """Angular frequencies (rad/ps) of the N-point periodic grid."""
        return 2.0 * math.pi * fftfreq(self.num_samples, d=self.tau)


@dataclass(frozen=True)
class LinearStep:
    """Unit-modulus spectral multiplier representing dispersion over ``distance`` km."""

    multiplier: np.ndarray
    distance: float


def dispersion_multiplier(beta: float, distance: float, grid: SimGrid) -> LinearStep:
    """Spectral phase of dispersion: multiplier[k] = exp(i beta d w_k^2 / 2)."""
    w = grid.omega()
    return LinearStep(multiplier=np.exp(0.5j * beta * distance * w * w), distance=distance)


def build_fresnel_kernel(eta: float, grid: SimGrid) -> np.ndarray:
    """Sampled Fresnel kernel sqrt(i/(2 pi eta)) exp(-i (k tau)^2 / (2 eta)).

    Indices run k = -ceil(N/2) .. ceil(N/2); the tau factor is the
    quadrature weight that turns discrete convolution into an approximation
    of the continuous one.  eta = 0 is singular; callers use the identity
    for zero distance.
    """
    if eta == 0:
        raise ValueError("eta must be nonzero (zero-distance dispersion is the identity)")
    half = math.ceil(grid.num_samples / 2)
    k = np.arange(-half, half + 1)
    t = k * grid.tau
    front = cmath.sqrt(1j / (2.0 * math.pi * eta))
    return grid.tau * front * np.exp(-1j * t * t / (2.0 * eta))


def fresnel_convolve(signal: ComplexSignal, eta: float, grid: SimGrid) -> ComplexSignal:
    """Dispersion via time-domain convolution with the sampled Fresnel kernel.

    Zero-padded (non-circular) convolution truncated to the input length, as
    an alternative to the exactly-unitary spectral multiplier.  The chirp
    kernel is windowed to its alias-free core |t| <= pi |eta| / tau (beyond
    that the sampled chirp is undersampled and its full-range tail sprays
    ghost energy of order T tau / (2 pi |eta|) across the window).
    """
    if eta == 0:
        return signal.copy()
    kernel = build_fresnel_kernel(eta, grid)
    half = math.ceil(grid.num_samples / 2)
    k = np.arange(-half, half + 1)
    # radius relative to the alias limit; cosine-taper the outer half so the
    # cut does not ring across the band
    r = np.abs(k) * grid.tau / (math.pi * abs(eta) / grid.tau)
    window = np.where(r <= 0.5, 1.0,
                      np.where(r >= 1.0, 0.0, 0.5 * (1 + np.cos(math.pi * (r - 0.5) / 0.5))))
    out = fftconvolve(signal.samples, kernel * window, mode="same")
    return ComplexSignal(samples=out, tau=signal.tau)


def nonlinear_step(signal: ComplexSignal, gamma: float, distance: float) -> ComplexSignal:
    """Kerr phase rotation: out[n] = A[n] exp(i gamma d |A[n]|^2)."""
    return ComplexSignal(samples=_kerr(signal.samples, gamma * distance), tau=signal.tau)


def linear_step(signal: ComplexSignal, step: LinearStep) -> ComplexSignal:
    """Apply a spectral multiplier: out = ifft(multiplier * fft(A))."""
    if step.multiplier.size != len(signal):
        raise ValueError("multiplier length does not match signal length")
    out = ifft(step.multiplier * fft(signal.samples))
    return ComplexSignal(samples=out, tau=signal.tau)


def _kerr(a: np.ndarray, phase_per_power: float) -> np.ndarray:
    # NaN from an overflowing |A|^2 is caught by the blow-up check, not here
    with np.errstate(invalid="ignore", over="ignore"):
        return a * np.exp(1j * phase_per_power * (a.real * a.real + a.imag * a.imag))


def _fused_core(samples: np.ndarray, beta: float, gamma: float, grid: SimGrid, collect: bool):
    """Strang stack with interior half-steps fused into full dispersion steps.

    Returns (out, pre_kerr, post_spectra, distances); the three lists are
    empty unless ``collect``.  pre_kerr[m] is the field entering Kerr step
    m+1, post_spectra[s] the spectrum after multiplier s, distances[s] its
    depth (zeta/2 at both ends, zeta inside).
    """
    m_layers = grid.num_layers
    zeta = grid.step_zeta
    w_sq = grid.omega() ** 2
    half = np.exp((0.5j * beta * (0.5 * zeta)) * w_sq)
    full = np.exp((0.5j * beta * zeta) * w_sq)

    pre_kerr: list[np.ndarray] = []
    post_spectra: list[np.ndarray] = []
    distances: list[float] = []

    spec = half * fft(samples)
    if collect:
        post_spectra.append(spec)
        distances.append(0.5 * zeta)
    a = ifft(spec)
    for m in range(1, m_layers + 1):
        if collect:
            pre_kerr.append(a)
        a = _kerr(a, gamma * zeta)
        mult = full if m < m_layers else half
        spec = mult * fft(a)
        if collect:
            post_spectra.append(spec)
            distances.append(zeta if m < m_layers else 0.5 * zeta)
        a = ifft(spec)
        if not np.all(np.isfinite(a.view(np.float64))):
            raise BlowUpError(layer=m)
    return a, pre_kerr, post_spectra, distances


def propagate(
    signal: ComplexSignal,
    params: FiberParams,
    grid: SimGrid,
    fused: bool = True,
    linear_backend: str = "spectral",
) -> ComplexSignal:
    """Propagate a signal over params.length_z in grid.num_layers Strang steps.

    ``fused=False`` keeps every half dispersion step explicit (test path);
    ``linear_backend="kernel"`` swaps the spectral multiplier for the
    time-domain Fresnel convolution (not unitary, fidelity experiments only).
    """
    if len(signal) != grid.num_samples:
        raise ValueError("signal length does not match grid.num_samples")
    if abs(grid.length_z - params.length_z) > 1e-9 * max(1.0, abs(params.length_z)):
        raise ValueError("grid depth does not cover params.length_z")

    if linear_backend == "kernel":
        return _propagate_kernel_backend(signal, params, grid)
    if linear_backend != "spectral":
        raise ValueError(f"unknown linear_backend {linear_backend!r}")

    if fused:
        out, _, _, _ = _fused_core(signal.samples, params.beta, params.gamma, grid, collect=False)
        return ComplexSignal(samples=out, tau=signal.tau)

    zeta = grid.step_zeta
    w = grid.omega()
    half = np.exp(0.5j * params.beta * (0.5 * zeta) * w * w)
    a = signal.samples
    for m in range(1, grid.num_layers + 1):
        a = ifft(half * fft(a))
        a = _kerr(a, params.gamma * zeta)
        a = ifft(half * fft(a))
        if not np.all(np.isfinite(a.view(np.float64))):
            raise BlowUpError(layer=m)
    return ComplexSignal(samples=a, tau=signal.tau)


def _propagate_kernel_backend(signal: ComplexSignal, params: FiberParams, grid: SimGrid) -> ComplexSignal:
    zeta = grid.step_zeta
    eta_half = params.beta * zeta * 0.5
    sig = signal
    for m in range(1, grid.num_layers + 1):
        sig = fresnel_convolve(sig, eta_half, grid) if eta_half != 0 else sig
        sig = nonlinear_step(sig, params.gamma, zeta)
        sig = fresnel_convolve(sig, eta_half, grid) if eta_half != 0 else sig
        if not np.all(np.isfinite(sig.samples.view(np.float64))):
            raise BlowUpError(layer=m)
    return sig


def generate_ground_truth(
    symbols: SymbolSequence,
    pulse: PulseSpec,
    params: FiberParams,
    num_layers: int,
    oversample: int = 1,
    layer_multiple: int = 1,
) -> tuple[ComplexSignal, ComplexSignal]:
    """Produce an (input, output) pair on the experiment grid.

    The output is propagated on a grid refined by ``oversample`` in time and
    ``layer_multiple`` in depth, then sampled back down.  With both factors
    at 1 the data comes from the exact model being fit (inverse crime).
    """
    if oversample < 1 or layer_multiple < 1:
        raise ValueError("oversample and layer_multiple must be >= 1")
    fine_pulse = PulseSpec(
        symbol_period_ts=pulse.symbol_period_ts,
        rolloff_rho=pulse.rolloff_rho,
        samples_per_symbol=pulse.samples_per_symbol * oversample,
    )
    a_in_fine = modulate(symbols, fine_pulse)
    fine_grid = SimGrid.from_length(
        params.length_z,
        num_layers=num_layers * layer_multiple,
        num_samples=len(a_in_fine),
        tau=fine_pulse.tau,
    )
    a_out_fine = propagate(a_in_fine, params, fine_grid)
    a_in = ComplexSignal(samples=a_in_fine.samples[::oversample].copy(), tau=pulse.tau)
    a_out = ComplexSignal(samples=a_out_fine.samples[::oversample].copy(), tau=pulse.tau)
    return a_in, a_out
