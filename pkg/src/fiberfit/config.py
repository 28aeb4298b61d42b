"""Experiment configuration: one JSON document drives every scenario.

Defaults reproduce the reference full-scale setup (100 GBaud, Z = 80 km,
M = 100, Ns = 200, 70 pad symbols/side, 64 samples/symbol, truth
(-21.6, 1.6), rolloff 0.1, P = 1, fit start (-23, 10), noisy level 200).
The "desk" preset shrinks everything to CI scale.  Validation rejects
unknown keys and out-of-range values with a JSON-pointer-style field path.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

SCENARIOS = (
    "generate",
    "propagate",
    "scan",
    "fit",
    "sweep",
    "bias_variance",
    "estimate_alpha",
    "grad_check",
    "stability_probe",
)

PAPER_NOISY_SNR = 200.0

__all__ = [
    "SCENARIOS",
    "PAPER_NOISY_SNR",
    "ConfigError",
    "ExperimentConfig",
    "validate_config",
    "apply_preset",
    "apply_overrides",
    "config_to_dict",
    "PRESETS",
]


class ConfigError(ValueError):
    """Invalid configuration; message carries the offending field path."""


@dataclass(frozen=True)
class PulseSection:
    symbol_period_ts: float = 10.0
    rolloff_rho: float = 0.1
    samples_per_symbol: int = 64


@dataclass(frozen=True)
class FiberSection:
    beta: float = -21.6
    gamma: float = 1.6
    length_z: float = 80.0


@dataclass(frozen=True)
class GridSection:
    num_layers: int = 100
    oversample: int = 1
    layer_multiple: int = 1


@dataclass(frozen=True)
class DataSection:
    num_symbols: int = 200
    zero_pad_per_side: int = 70
    power: float = 1.0
    seed: int = 1


@dataclass(frozen=True)
class NoiseSection:
    enabled: bool = False
    snr: float = PAPER_NOISY_SNR
    seed: int = 7


@dataclass(frozen=True)
class OptimizerSection:
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


@dataclass(frozen=True)
class FitSection:
    start_beta: float = -23.0
    start_gamma: float = 10.0
    denoise: bool = False
    denoise_span_symbols: int = 24


@dataclass(frozen=True)
class ScanSection:
    # null bounds bracket the configured truth: beta by ±20%, gamma by ±300%
    beta_lo: float | None = None
    beta_hi: float | None = None
    gamma_lo: float | None = None
    gamma_hi: float | None = None
    beta_points: int = 101
    gamma_points: int = 101
    refine: bool = False


@dataclass(frozen=True)
class SweepSection:
    axis: str = "num_layers"
    values: tuple = (20, 40, 60, 80, 100)
    oracle_layers: int | None = None  # null: data at the configured grid depth
    oracle_oversample: int | None = None


@dataclass(frozen=True)
class BiasVarianceSection:
    seeds_per_group: int = 30
    ns_values: tuple = (50, 100, 150, 200)
    model_layers: int = 20
    oracle_layers: int | None = None
    oracle_oversample: int | None = None


@dataclass(frozen=True)
class StabilitySection:
    deltas: tuple = ((0.0, 0.0), (0.1, 0.0), (0.2, 0.0), (0.4, 0.0), (0.0, 0.1), (0.0, -0.1))


@dataclass(frozen=True)
class GradCheckSection:
    rel_step: float = 1e-4


@dataclass(frozen=True)
class IoSection:
    input_path: str | None = None
    output_path: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "fit"
    pulse: PulseSection = field(default_factory=PulseSection)
    fiber: FiberSection = field(default_factory=FiberSection)
    grid: GridSection = field(default_factory=GridSection)
    data: DataSection = field(default_factory=DataSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    fit: FitSection = field(default_factory=FitSection)
    scan: ScanSection = field(default_factory=ScanSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    bias_variance: BiasVarianceSection = field(default_factory=BiasVarianceSection)
    stability: StabilitySection = field(default_factory=StabilitySection)
    grad_check: GradCheckSection = field(default_factory=GradCheckSection)
    io: IoSection = field(default_factory=IoSection)
    output_dir: str = "out"
    threads: int = 1


PRESETS = {
    "paper": {},
    "desk": {
        "pulse": {"samples_per_symbol": 16},
        "fiber": {"length_z": 8.0},
        "grid": {"num_layers": 20},
        "data": {"num_symbols": 50, "zero_pad_per_side": 20, "power": 0.15},
        "optimizer": {"loss_tol": 1e-12, "grad_tol": 1e-13, "max_iters": 4000},
        "sweep": {"values": (20, 40, 80), "oracle_layers": 80},
        "bias_variance": {"model_layers": 20, "oracle_layers": 80},
    },
}


def _expect(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _as_float(value, path: str, allow_inf: bool = False) -> float:
    if isinstance(value, str) and allow_inf and value.lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    v = float(value)
    if not allow_inf and not math.isfinite(v):
        raise ConfigError(f"{path}: must be finite")
    return v


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def _as_bool(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{path}: expected true/false, got {value!r}")
    return value


def _as_str(value, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    return value


def _check_known_keys(raw: dict, known, path: str) -> None:
    for key in raw:
        if key not in known:
            raise ConfigError(f"{path}/{key}: unknown key")


def _merge_section(cls, raw, path: str, coerce) -> object:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object")
    names = [f.name for f in fields(cls)]
    _check_known_keys(raw, names, path)
    kwargs = {}
    for name in names:
        if name in raw:
            kwargs[name] = coerce.get(name, lambda v, p: v)(raw[name], f"{path}/{name}")
    return cls(**kwargs)


def validate_config(raw: dict) -> ExperimentConfig:
    """Apply defaults, check invariants, reject unknown keys."""
    if not isinstance(raw, dict):
        raise ConfigError("/: config must be a JSON object")
    top_keys = [f.name for f in fields(ExperimentConfig)]
    _check_known_keys(raw, top_keys, "")

    scenario = _as_str(raw.get("scenario", "fit"), "/scenario")
    _expect(scenario in SCENARIOS, "/scenario", f"must be one of {SCENARIOS}")

    pulse = _merge_section(PulseSection, raw.get("pulse"), "/pulse", {
        "symbol_period_ts": _as_float, "rolloff_rho": _as_float, "samples_per_symbol": _as_int,
    })
    _expect(pulse.symbol_period_ts > 0, "/pulse/symbol_period_ts", "must be positive")
    _expect(0 < pulse.rolloff_rho <= 1, "/pulse/rolloff_rho", "must lie in (0, 1]")
    _expect(pulse.samples_per_symbol >= 2, "/pulse/samples_per_symbol", "must be >= 2")

    fiber = _merge_section(FiberSection, raw.get("fiber"), "/fiber", {
        "beta": _as_float, "gamma": _as_float, "length_z": _as_float,
    })
    _expect(fiber.length_z > 0, "/fiber/length_z", "must be positive")

    grid = _merge_section(GridSection, raw.get("grid"), "/grid", {
        "num_layers": _as_int, "oversample": _as_int, "layer_multiple": _as_int,
    })
    _expect(grid.num_layers >= 1, "/grid/num_layers", "must be >= 1")
    _expect(grid.oversample >= 1, "/grid/oversample", "must be >= 1")
    _expect(grid.layer_multiple >= 1, "/grid/layer_multiple", "must be >= 1")

    data = _merge_section(DataSection, raw.get("data"), "/data", {
        "num_symbols": _as_int, "zero_pad_per_side": _as_int, "power": _as_float, "seed": _as_int,
    })
    _expect(data.num_symbols >= 1, "/data/num_symbols", "must be >= 1")
    _expect(data.zero_pad_per_side >= 0, "/data/zero_pad_per_side", "must be >= 0")
    _expect(data.power >= 0, "/data/power", "must be >= 0")

    noise = _merge_section(NoiseSection, raw.get("noise"), "/noise", {
        "enabled": _as_bool, "seed": _as_int,
        "snr": lambda v, p: _as_float(v, p, allow_inf=True),
    })
    _expect(noise.snr > 0, "/noise/snr", "must be positive (inf = noiseless)")

    optimizer = _merge_section(OptimizerSection, raw.get("optimizer"), "/optimizer", {
        "algorithm": _as_str, "learning_rate": _as_float, "momentum": _as_float,
        "beta1": _as_float, "beta2": _as_float, "decay_rho": _as_float,
        "epsilon_guard": _as_float, "max_iters": _as_int, "loss_tol": _as_float,
        "grad_tol": _as_float, "beta_scale": _as_float, "gamma_scale": _as_float,
    })
    _expect(optimizer.algorithm in ("gd_momentum", "adam", "adadelta", "rmsprop"),
            "/optimizer/algorithm", "must be one of gd_momentum/adam/adadelta/rmsprop")
    _expect(optimizer.learning_rate > 0, "/optimizer/learning_rate", "must be positive")
    for name in ("momentum", "beta1", "beta2", "decay_rho"):
        _expect(0 <= getattr(optimizer, name) < 1, f"/optimizer/{name}", "must lie in [0, 1)")
    _expect(optimizer.epsilon_guard > 0, "/optimizer/epsilon_guard", "must be positive")
    _expect(optimizer.max_iters >= 1, "/optimizer/max_iters", "must be >= 1")
    _expect(optimizer.loss_tol >= 0, "/optimizer/loss_tol", "must be >= 0")
    _expect(optimizer.grad_tol >= 0, "/optimizer/grad_tol", "must be >= 0")
    _expect(optimizer.beta_scale > 0, "/optimizer/beta_scale", "must be positive")
    _expect(optimizer.gamma_scale > 0, "/optimizer/gamma_scale", "must be positive")

    fit_sec = _merge_section(FitSection, raw.get("fit"), "/fit", {
        "start_beta": _as_float, "start_gamma": _as_float,
        "denoise": _as_bool, "denoise_span_symbols": _as_int,
    })
    _expect(fit_sec.denoise_span_symbols >= 1, "/fit/denoise_span_symbols", "must be >= 1")

    def _opt_float(v, p):
        return None if v is None else _as_float(v, p)

    scan = _merge_section(ScanSection, raw.get("scan"), "/scan", {
        "beta_lo": _opt_float, "beta_hi": _opt_float,
        "gamma_lo": _opt_float, "gamma_hi": _opt_float,
        "beta_points": _as_int, "gamma_points": _as_int, "refine": _as_bool,
    })
    _expect(scan.beta_points >= 1, "/scan/beta_points", "must be >= 1")
    _expect(scan.gamma_points >= 1, "/scan/gamma_points", "must be >= 1")

    def _as_number_list(v, p):
        if not isinstance(v, (list, tuple)) or len(v) == 0:
            raise ConfigError(f"{p}: expected a non-empty array")
        return tuple(_as_float(x, f"{p}/{i}") for i, x in enumerate(v))

    def _opt_int(v, p):
        return None if v is None else _as_int(v, p)

    sweep = _merge_section(SweepSection, raw.get("sweep"), "/sweep", {
        "axis": _as_str, "values": _as_number_list,
        "oracle_layers": _opt_int, "oracle_oversample": _opt_int,
    })
    _expect(sweep.axis in ("num_layers", "sampling_rate", "num_symbols"),
            "/sweep/axis", "must be num_layers, sampling_rate or num_symbols")

    bias = _merge_section(BiasVarianceSection, raw.get("bias_variance"), "/bias_variance", {
        "seeds_per_group": _as_int,
        "ns_values": lambda v, p: tuple(int(x) for x in _as_number_list(v, p)),
        "model_layers": _as_int, "oracle_layers": _opt_int, "oracle_oversample": _opt_int,
    })
    _expect(bias.seeds_per_group >= 2, "/bias_variance/seeds_per_group", "must be >= 2")
    _expect(bias.model_layers >= 1, "/bias_variance/model_layers", "must be >= 1")

    def _as_delta_list(v, p):
        if not isinstance(v, (list, tuple)) or len(v) == 0:
            raise ConfigError(f"{p}: expected a non-empty array of [d_beta, d_gamma] pairs")
        out = []
        for i, pair in enumerate(v):
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise ConfigError(f"{p}/{i}: expected a [d_beta, d_gamma] pair")
            out.append((_as_float(pair[0], f"{p}/{i}/0"), _as_float(pair[1], f"{p}/{i}/1")))
        return tuple(out)

    stability = _merge_section(StabilitySection, raw.get("stability"), "/stability", {
        "deltas": _as_delta_list,
    })

    grad_check_sec = _merge_section(GradCheckSection, raw.get("grad_check"), "/grad_check", {
        "rel_step": _as_float,
    })
    _expect(grad_check_sec.rel_step > 0, "/grad_check/rel_step", "must be positive")

    def _opt_str(v, p):
        return None if v is None else _as_str(v, p)

    io = _merge_section(IoSection, raw.get("io"), "/io", {
        "input_path": _opt_str, "output_path": _opt_str,
    })

    output_dir = _as_str(raw.get("output_dir", "out"), "/output_dir")
    threads = _as_int(raw.get("threads", 1), "/threads")
    _expect(threads >= 1, "/threads", "must be >= 1")

    return ExperimentConfig(
        scenario=scenario, pulse=pulse, fiber=fiber, grid=grid, data=data,
        noise=noise, optimizer=optimizer, fit=fit_sec, scan=scan, sweep=sweep,
        bias_variance=bias, stability=stability, grad_check=grad_check_sec,
        io=io, output_dir=output_dir, threads=threads,
    )


def apply_preset(raw: dict, preset: str) -> dict:
    """Layer a named preset under user-provided settings."""
    if preset not in PRESETS:
        raise ConfigError(f"/preset: unknown preset {preset!r} (choose from {sorted(PRESETS)})")
    merged = _deep_merge(json.loads(json.dumps(PRESETS[preset], default=list)), raw)
    return merged


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def _parse_literal(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        if text.lower() in ("inf", "infinity"):
            return "inf"
        return text


def apply_overrides(raw: dict, assignments) -> dict:
    """Apply repeatable --set path=value overrides (dot-separated paths)."""
    out = json.loads(json.dumps(raw))
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected path=value")
        path, text = item.split("=", 1)
        keys = path.strip().split(".")
        node = out
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {item!r}: {k} is not an object")
        node[keys[-1]] = _parse_literal(text)
    return out


def config_to_dict(config: ExperimentConfig) -> dict:
    doc = asdict(config)
    if math.isinf(doc["noise"]["snr"]):
        doc["noise"]["snr"] = "inf"
    return doc
