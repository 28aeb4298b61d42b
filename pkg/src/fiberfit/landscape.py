"""Loss-surface experiments.

Grid scans of the normalized loss over (beta, gamma), grid-seeded local
refinement of the global minimum, hyper-parameter sweeps of the attainable
minimum, bias/variance statistics of the minimizer over random symbol draws,
and an output-sensitivity probe under parameter perturbations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.fft import fft, ifft

from .estimator import OptimizerConfig, default_config, fit
from .model import ModelParams, loss
from .propagator import BlowUpError, FiberParams, SimGrid, generate_ground_truth, propagate
from .signal import ComplexSignal, Constellation, PulseSpec, generate_symbols

__all__ = [
    "GridSpec",
    "LandscapeGrid",
    "MinimizerStats",
    "ExperimentBase",
    "SweepRow",
    "scan_grid",
    "find_global_min",
    "hyperparameter_sweep",
    "bias_variance_experiment",
    "stability_probe",
    "write_landscape_csv",
    "write_stats_json",
]


@dataclass(frozen=True)
class GridSpec:
    """Rectangular (beta, gamma) scan window with point counts per axis."""

    beta_range: tuple[float, float]
    gamma_range: tuple[float, float]
    beta_points: int = 101
    gamma_points: int = 101

    def __post_init__(self) -> None:
        for (lo, hi), pts in ((self.beta_range, self.beta_points), (self.gamma_range, self.gamma_points)):
            if pts < 1:
                raise ValueError("point counts must be >= 1")
            if pts > 1 and not lo < hi:
                raise ValueError("range lo must be < hi")

    @property
    def beta_values(self) -> np.ndarray:
        return np.linspace(self.beta_range[0], self.beta_range[1], self.beta_points)

    @property
    def gamma_values(self) -> np.ndarray:
        return np.linspace(self.gamma_range[0], self.gamma_range[1], self.gamma_points)


@dataclass
class LandscapeGrid:
    """Loss values on a GridSpec; blown-up cells carry +inf."""

    spec: GridSpec
    losses: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.losses, dtype=np.float64)
        if arr.shape != (self.spec.beta_points, self.spec.gamma_points):
            raise ValueError("losses shape must be (beta_points, gamma_points)")
        if np.any(np.isnan(arr)) or np.any(arr < 0):
            raise ValueError("losses must be nonnegative (inf allowed as blow-up sentinel)")
        self.losses = arr

    def argmin_cell(self) -> tuple[int, int]:
        if not np.any(np.isfinite(self.losses)):
            raise ValueError("all cells blew up; no finite minimum")
        flat = np.where(np.isfinite(self.losses), self.losses, np.inf)
        i, j = np.unravel_index(int(np.argmin(flat)), flat.shape)
        return int(i), int(j)


@dataclass
class MinimizerStats:
    """Empirical mean/covariance/bias of fitted minimizers for one data length."""

    group_size: int
    num_symbols: int
    mean: tuple[float, float]
    covariance: np.ndarray
    bias: tuple[float, float]
    n_ok: int
    n_excluded: int

    def __post_init__(self) -> None:
        cov = np.asarray(self.covariance, dtype=np.float64)
        if cov.shape != (2, 2) or abs(cov[0, 1] - cov[1, 0]) > 1e-15 * max(1.0, abs(cov[0, 1])):
            raise ValueError("covariance must be 2x2 symmetric")
        if np.linalg.eigvalsh(cov).min() < -1e-18:
            raise ValueError("covariance must be PSD within 1e-18")
        self.covariance = cov


def _batched_losses(
    betas: np.ndarray,
    gammas: np.ndarray,
    signal: np.ndarray,
    target: np.ndarray,
    grid: SimGrid,
    workers: int = 1,
) -> np.ndarray:
    """Loss at many (beta, gamma) pairs at once; inf where propagation blows up.

    Mirrors the scalar fused path operation by operation so each row equals
    the single-pair loss; rows are independent, so the result does not
    depend on chunking or on the FFT worker count.
    """
    m_layers, zeta = grid.num_layers, grid.step_zeta
    w_sq = grid.omega() ** 2
    half = np.exp(np.outer(0.5j * betas * (0.5 * zeta), w_sq))
    full = np.exp(np.outer(0.5j * betas * zeta, w_sq))
    kerr_coef = (1j * (gammas * zeta))[:, None]

    a = np.broadcast_to(signal, (betas.size, signal.size)).copy()
    alive = np.ones(betas.size, dtype=bool)

    a = ifft(half * fft(a, axis=-1, workers=workers), axis=-1, workers=workers)
    for m in range(1, m_layers + 1):
        with np.errstate(invalid="ignore", over="ignore"):
            a = a * np.exp(kerr_coef * (a.real * a.real + a.imag * a.imag))
        mult = full if m < m_layers else half
        a = ifft(mult * fft(a, axis=-1, workers=workers), axis=-1, workers=workers)
        ok = np.isfinite(a.view(np.float64)).all(axis=-1)
        newly_dead = alive & ~ok
        if np.any(newly_dead):
            a[newly_dead] = 0.0
            alive &= ok

    norm_sq = float(np.sum(target.real ** 2 + target.imag ** 2))
    res = a - target
    out = np.sum(res.real ** 2 + res.imag ** 2, axis=-1) / norm_sq
    out[~alive] = np.inf
    return out


def scan_grid(
    signal: ComplexSignal,
    target: ComplexSignal,
    grid: SimGrid,
    spec: GridSpec,
    workers: int = 1,
    chunk_cells: int = 256,
) -> LandscapeGrid:
    """Evaluate the loss on every (beta_i, gamma_j) cell of the scan window."""
    bb, gg = np.meshgrid(spec.beta_values, spec.gamma_values, indexing="ij")
    betas, gammas = bb.ravel(), gg.ravel()
    losses = np.empty(betas.size)
    for lo in range(0, betas.size, chunk_cells):
        hi = min(lo + chunk_cells, betas.size)
        losses[lo:hi] = _batched_losses(
            betas[lo:hi], gammas[lo:hi], signal.samples, target.samples, grid, workers
        )
    return LandscapeGrid(spec=spec, losses=losses.reshape(spec.beta_points, spec.gamma_points))


def find_global_min(
    landscape: LandscapeGrid,
    signal: ComplexSignal,
    target: ComplexSignal,
    grid: SimGrid,
    config: OptimizerConfig | None = None,
    truth: tuple[float, float] | None = None,
) -> tuple[float, float, float]:
    """Local descent from the best scan cell; returns (beta*, gamma*, J*)."""
    if config is None:
        config = default_config("gd_momentum")
    i, j = landscape.argmin_cell()
    start = (float(landscape.spec.beta_values[i]), float(landscape.spec.gamma_values[j]))
    (beta_star, gamma_star), history = fit(signal, target, start, grid, config, truth=truth)
    best_loss = min(r.loss for r in history.records)
    return beta_star, gamma_star, best_loss


@dataclass(frozen=True)
class ExperimentBase:
    """Shared data/model protocol for sweeps and bias-variance runs.

    The oracle that generates targets is pinned at (oracle_layers,
    oracle_oversample) while the fitted model uses model_layers at the
    pulse's own sampling rate, so model error is visible as a loss floor.
    """

    pulse: PulseSpec
    truth: FiberParams
    num_symbols: int = 50
    zero_pad_per_side: int = 20
    power: float = 0.4
    seed: int = 1
    seed_stride: int = 1  # 0 makes every draw identical (degenerate groups)
    model_layers: int = 20
    oracle_layers: int = 80
    oracle_oversample: int = 1
    optimizer: OptimizerConfig | None = None
    start: tuple[float, float] | None = None

    def resolved_optimizer(self) -> OptimizerConfig:
        return self.optimizer if self.optimizer is not None else default_config("adam", loss_tol=1e-14)

    def resolved_start(self) -> tuple[float, float]:
        return self.start if self.start is not None else (self.truth.beta, self.truth.gamma)


@dataclass(frozen=True)
class SweepRow:
    value: float
    j_star: float
    e_beta: float
    e_gamma: float


def _fit_min(signal, target, grid, base: ExperimentBase, start=None):
    cfg = base.resolved_optimizer()
    (b, g), hist = fit(
        signal, target, start or base.resolved_start(), grid, cfg,
        truth=(base.truth.beta, base.truth.gamma),
    )
    return b, g, min(r.loss for r in hist.records)


def hyperparameter_sweep(axis: str, values, base: ExperimentBase) -> list[SweepRow]:
    """Minimal loss and optimal estimation errors along one model/data axis.

    axis "num_layers" varies model depth against fixed-oracle data;
    "sampling_rate" varies samples per symbol (data regenerated at a fixed
    fine oracle rate and decimated); "num_symbols" varies data length.
    """
    if axis not in ("num_layers", "sampling_rate", "num_symbols"):
        raise ValueError(f"unknown sweep axis {axis!r}")
    if len(values) == 0:
        raise ValueError("values must be non-empty")
    rows = []
    constellation = Constellation.qam16()

    if axis == "num_layers":
        symbols = generate_symbols(base.num_symbols, constellation, base.seed,
                                   base.power, base.zero_pad_per_side)
        a_in, a_out = generate_ground_truth(symbols, base.pulse, base.truth,
                                            base.oracle_layers, base.oracle_oversample, 1)
        for m in values:
            grid = SimGrid.from_length(base.truth.length_z, int(m), len(a_in), base.pulse.tau)
            b, g, j = _fit_min(a_in, a_out, grid, base)
            rows.append(SweepRow(float(m), j, abs(b - base.truth.beta), abs(g - base.truth.gamma)))
        return rows

    if axis == "sampling_rate":
        oracle_sps = base.pulse.samples_per_symbol * base.oracle_oversample
        symbols = generate_symbols(base.num_symbols, constellation, base.seed,
                                   base.power, base.zero_pad_per_side)
        for sps in values:
            sps = int(sps)
            if oracle_sps % sps != 0:
                raise ValueError(f"sampling rate {sps} must divide the oracle rate {oracle_sps}")
            pulse = replace(base.pulse, samples_per_symbol=sps)
            a_in, a_out = generate_ground_truth(symbols, pulse, base.truth,
                                                base.oracle_layers, oracle_sps // sps, 1)
            grid = SimGrid.from_length(base.truth.length_z, base.model_layers, len(a_in), pulse.tau)
            b, g, j = _fit_min(a_in, a_out, grid, base)
            rows.append(SweepRow(float(sps), j, abs(b - base.truth.beta), abs(g - base.truth.gamma)))
        return rows

    for ns in values:  # num_symbols
        symbols = generate_symbols(int(ns), constellation, base.seed,
                                   base.power, base.zero_pad_per_side)
        a_in, a_out = generate_ground_truth(symbols, base.pulse, base.truth,
                                            base.oracle_layers, base.oracle_oversample, 1)
        grid = SimGrid.from_length(base.truth.length_z, base.model_layers, len(a_in), base.pulse.tau)
        b, g, j = _fit_min(a_in, a_out, grid, base)
        rows.append(SweepRow(float(ns), j, abs(b - base.truth.beta), abs(g - base.truth.gamma)))
    return rows


def bias_variance_experiment(
    seeds_per_group: int,
    ns_values,
    base: ExperimentBase,
) -> list[MinimizerStats]:
    """Fit independent random-symbol datasets and aggregate minimizer statistics.

    Groups share their per-draw seeds (and symbol-draw prefixes), which
    correlates sampling noise across data lengths; fits after the first in a
    group warm-start from the previous minimizer.
    """
    if seeds_per_group < 2:
        raise ValueError("seeds_per_group must be >= 2")
    constellation = Constellation.qam16()
    truth = (base.truth.beta, base.truth.gamma)
    out = []
    for ns in ns_values:
        estimates = []
        n_excluded = 0
        warm: tuple[float, float] | None = None
        for k in range(seeds_per_group):
            symbols = generate_symbols(int(ns), constellation,
                                       base.seed + k * base.seed_stride,
                                       base.power, base.zero_pad_per_side)
            a_in, a_out = generate_ground_truth(symbols, base.pulse, base.truth,
                                                base.oracle_layers, base.oracle_oversample, 1)
            grid = SimGrid.from_length(base.truth.length_z, base.model_layers,
                                       len(a_in), base.pulse.tau)
            try:
                b, g, _ = _fit_min(a_in, a_out, grid, base, start=warm)
            except BlowUpError:
                n_excluded += 1
                continue
            estimates.append((b, g))
            warm = (b, g)
        pts = np.asarray(estimates)
        mean = pts.mean(axis=0)
        cov = np.cov(pts.T, ddof=1)
        out.append(MinimizerStats(
            group_size=seeds_per_group,
            num_symbols=int(ns),
            mean=(float(mean[0]), float(mean[1])),
            covariance=cov,
            bias=(abs(float(mean[0]) - truth[0]), abs(float(mean[1]) - truth[1])),
            n_ok=len(estimates),
            n_excluded=n_excluded,
        ))
    return out


def stability_probe(
    signal: ComplexSignal,
    base: FiberParams,
    deltas,
    grid: SimGrid,
) -> list[tuple[float, float, float]]:
    """Output L2 distance under (d_beta, d_gamma) parameter perturbations."""
    ref = propagate(signal, base, grid)
    rows = []
    for d_beta, d_gamma in deltas:
        if not (math.isfinite(d_beta) and math.isfinite(d_gamma)):
            raise ValueError("deltas must be finite")
        shifted = FiberParams(base.beta + d_beta, base.gamma + d_gamma, base.length_z)
        out = propagate(signal, shifted, grid)
        diff = out.samples - ref.samples
        rows.append((float(d_beta), float(d_gamma),
                     math.sqrt(grid.tau * float(np.sum(np.abs(diff) ** 2)))))
    return rows


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return format(float(x), ".17g")


def write_landscape_csv(landscape: LandscapeGrid, path) -> None:
    """CSV beta,gamma,loss in row-major order; 'inf' marks blow-up cells."""
    bv, gv = landscape.spec.beta_values, landscape.spec.gamma_values
    with open(path, "w") as fh:
        fh.write("beta,gamma,loss\n")
        for i in range(landscape.spec.beta_points):
            for j in range(landscape.spec.gamma_points):
                fh.write(f"{_fmt(bv[i])},{_fmt(gv[j])},{_fmt(landscape.losses[i, j])}\n")


def write_stats_json(stats: list, path) -> None:
    """JSON array of per-group objects: ns, mean, cov, bias, n_ok, n_excluded."""
    parts = []
    for s in stats:
        cov = s.covariance
        parts.append(
            '{"ns":%d,"mean":[%s,%s],"cov":[[%s,%s],[%s,%s]],"bias":[%s,%s],"n_ok":%d,"n_excluded":%d}'
            % (
                s.num_symbols, _fmt(s.mean[0]), _fmt(s.mean[1]),
                _fmt(cov[0, 0]), _fmt(cov[0, 1]), _fmt(cov[1, 0]), _fmt(cov[1, 1]),
                _fmt(s.bias[0]), _fmt(s.bias[1]), s.n_ok, s.n_excluded,
            )
        )
    with open(path, "w") as fh:
        fh.write("[" + ",".join(parts) + "]\n")
