"""Command-line front end: config-driven, reproducible experiment runs.

Every subcommand maps to one scenario; a single JSON config (plus
--set path=value overrides) fully determines the emitted CSV/JSON files.
Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .attenuation import estimate_alpha
from .config import (
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    apply_preset,
    config_to_dict,
    validate_config,
)
from .estimator import OptimizerConfig, fit, write_history_csv
from .landscape import (
    ExperimentBase,
    GridSpec,
    bias_variance_experiment,
    find_global_min,
    hyperparameter_sweep,
    scan_grid,
    stability_probe,
    write_landscape_csv,
    write_stats_json,
)
from .model import ModelParams, grad_check
from .propagator import BlowUpError, FiberParams, SimGrid, generate_ground_truth, propagate
from .signal import (
    Constellation,
    NoiseSpec,
    PulseSpec,
    add_awgn,
    generate_symbols,
    matched_filter_denoise,
    modulate,
    read_signal_json,
    write_signal_json,
)


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return format(float(x), ".17g")


def _pulse(config: ExperimentConfig) -> PulseSpec:
    p = config.pulse
    return PulseSpec(p.symbol_period_ts, p.rolloff_rho, p.samples_per_symbol)


def _fiber(config: ExperimentConfig) -> FiberParams:
    f = config.fiber
    return FiberParams(f.beta, f.gamma, f.length_z)


def _symbols(config: ExperimentConfig):
    d = config.data
    return generate_symbols(d.num_symbols, Constellation.qam16(), d.seed,
                            d.power, d.zero_pad_per_side)


def _optimizer(config: ExperimentConfig) -> OptimizerConfig:
    o = config.optimizer
    return OptimizerConfig(
        algorithm=o.algorithm, learning_rate=o.learning_rate, momentum=o.momentum,
        beta1=o.beta1, beta2=o.beta2, decay_rho=o.decay_rho,
        epsilon_guard=o.epsilon_guard, max_iters=o.max_iters,
        loss_tol=o.loss_tol, grad_tol=o.grad_tol,
        beta_scale=o.beta_scale, gamma_scale=o.gamma_scale,
    )


def _dataset(config: ExperimentConfig, denoise: bool = False):
    """Input/target pair per the config's data, oracle and noise settings."""
    pulse = _pulse(config)
    truth = _fiber(config)
    a_in, a_out = generate_ground_truth(
        _symbols(config), pulse, truth,
        config.grid.num_layers, config.grid.oversample, config.grid.layer_multiple,
    )
    if config.noise.enabled and not math.isinf(config.noise.snr):
        a_in = add_awgn(a_in, NoiseSpec(config.noise.snr, config.noise.seed))
        a_out = add_awgn(a_out, NoiseSpec(config.noise.snr, config.noise.seed + 1))
    if denoise:
        a_in = matched_filter_denoise(a_in, pulse, config.fit.denoise_span_symbols)
        a_out = matched_filter_denoise(a_out, pulse, config.fit.denoise_span_symbols)
    grid = SimGrid.from_length(truth.length_z, config.grid.num_layers, len(a_in), pulse.tau)
    return a_in, a_out, grid, truth


def _scan_spec(config: ExperimentConfig) -> GridSpec:
    s = config.scan
    beta, gamma = config.fiber.beta, config.fiber.gamma
    beta_lo = s.beta_lo if s.beta_lo is not None else beta - 0.2 * abs(beta)
    beta_hi = s.beta_hi if s.beta_hi is not None else beta + 0.2 * abs(beta)
    gamma_lo = s.gamma_lo if s.gamma_lo is not None else gamma - 3.0 * abs(gamma)
    gamma_hi = s.gamma_hi if s.gamma_hi is not None else gamma + 3.0 * abs(gamma)
    return GridSpec((beta_lo, beta_hi), (gamma_lo, gamma_hi), s.beta_points, s.gamma_points)


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run(config: ExperimentConfig) -> list:
    """Execute the configured scenario; returns the list of files written."""
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    written: list[str] = []

    def emit(name: str) -> Path:
        written.append(name)
        return out_dir / name

    scenario = config.scenario
    if scenario == "generate":
        pulse = _pulse(config)
        a_in = modulate(_symbols(config), pulse)
        if config.noise.enabled and not math.isinf(config.noise.snr):
            a_in = add_awgn(a_in, NoiseSpec(config.noise.snr, config.noise.seed))
        write_signal_json(a_in, emit("input.json"))

    elif scenario == "propagate":
        pulse = _pulse(config)
        if config.io.input_path is not None:
            a_in = read_signal_json(config.io.input_path)
        else:
            a_in = modulate(_symbols(config), pulse)
        grid = SimGrid.from_length(config.fiber.length_z, config.grid.num_layers,
                                   len(a_in), a_in.tau)
        a_out = propagate(a_in, _fiber(config), grid)
        write_signal_json(a_out, emit("output.json"))

    elif scenario == "scan":
        a_in, a_out, grid, truth = _dataset(config)
        spec = _scan_spec(config)
        landscape = scan_grid(a_in, a_out, grid, spec, workers=config.threads)
        write_landscape_csv(landscape, emit("landscape.csv"))
        i, j = landscape.argmin_cell()
        doc = {
            "argmin_beta": float(spec.beta_values[i]),
            "argmin_gamma": float(spec.gamma_values[j]),
            "argmin_loss": float(landscape.losses[i, j]),
        }
        if config.scan.refine:
            b, g, j_star = find_global_min(landscape, a_in, a_out, grid,
                                           _optimizer(config), truth=(truth.beta, truth.gamma))
            doc.update({"refined_beta": b, "refined_gamma": g, "refined_loss": j_star})
        _write_json(emit("min.json"), doc)

    elif scenario == "fit":
        a_in, a_out, grid, truth = _dataset(config, denoise=config.fit.denoise)
        start = (config.fit.start_beta, config.fit.start_gamma)
        (beta, gamma), history = fit(a_in, a_out, start, grid, _optimizer(config),
                                     truth=(truth.beta, truth.gamma))
        write_history_csv(history, emit("history.csv"))
        best = min(r.loss for r in history.records)
        _write_json(emit("result.json"), {
            "beta": beta, "gamma": gamma, "loss": best,
            "e_beta": abs(beta - truth.beta), "e_gamma": abs(gamma - truth.gamma),
            "iterations": history.final.iteration,
            "converged": history.converged, "stop_reason": history.stop_reason,
        })

    elif scenario == "sweep":
        base = _experiment_base(config)
        rows = hyperparameter_sweep(config.sweep.axis, list(config.sweep.values), base)
        with open(emit("sweep.csv"), "w") as fh:
            fh.write("value,j_star,e_beta,e_gamma\n")
            for r in rows:
                fh.write(f"{_fmt(r.value)},{_fmt(r.j_star)},{_fmt(r.e_beta)},{_fmt(r.e_gamma)}\n")

    elif scenario == "bias_variance":
        base = _experiment_base(config, model_layers=config.bias_variance.model_layers,
                                oracle_layers=config.bias_variance.oracle_layers,
                                oracle_oversample=config.bias_variance.oracle_oversample)
        stats = bias_variance_experiment(config.bias_variance.seeds_per_group,
                                         list(config.bias_variance.ns_values), base)
        write_stats_json(stats, emit("stats.json"))

    elif scenario == "estimate_alpha":
        if config.io.input_path is None or config.io.output_path is None:
            raise ConfigError("/io: estimate_alpha needs input_path and output_path")
        a_in = read_signal_json(config.io.input_path)
        a_out = read_signal_json(config.io.output_path)
        est = estimate_alpha(a_in, a_out, config.fiber.length_z)
        _write_json(emit("alpha.json"), {
            "alpha_per_km": est.alpha, "norm_in": est.norm_in, "norm_out": est.norm_out,
        })

    elif scenario == "grad_check":
        a_in, a_out, grid, _ = _dataset(config)
        params = ModelParams(config.fit.start_beta, config.fit.start_gamma, grid)
        err_beta, err_gamma = grad_check(params, a_in, a_out, config.grad_check.rel_step)
        _write_json(emit("gradcheck.json"), {
            "beta": params.beta, "gamma": params.gamma,
            "rel_step": config.grad_check.rel_step,
            "rel_err_beta": err_beta, "rel_err_gamma": err_gamma,
        })

    elif scenario == "stability_probe":
        pulse = _pulse(config)
        a_in = modulate(_symbols(config), pulse)
        grid = SimGrid.from_length(config.fiber.length_z, config.grid.num_layers,
                                   len(a_in), pulse.tau)
        rows = stability_probe(a_in, _fiber(config), list(config.stability.deltas), grid)
        with open(emit("stability.csv"), "w") as fh:
            fh.write("d_beta,d_gamma,distance\n")
            for db, dg, dist in rows:
                fh.write(f"{_fmt(db)},{_fmt(dg)},{_fmt(dist)}\n")

    else:  # pragma: no cover - validate_config guards this
        raise ConfigError(f"/scenario: unhandled scenario {scenario!r}")

    manifest = {
        "build": f"fiberfit {__version__}",
        "scenario": scenario,
        "config": config_to_dict(config),
        "outputs": written,
        "wall_clock_s": time.time() - started,
    }
    _write_json(out_dir / "manifest.json", manifest)
    return written


def _experiment_base(config: ExperimentConfig, model_layers=None,
                     oracle_layers=None, oracle_oversample=None) -> ExperimentBase:
    o = _optimizer(config)
    return ExperimentBase(
        pulse=_pulse(config),
        truth=_fiber(config),
        num_symbols=config.data.num_symbols,
        zero_pad_per_side=config.data.zero_pad_per_side,
        power=config.data.power,
        seed=config.data.seed,
        model_layers=model_layers if model_layers is not None else config.grid.num_layers,
        oracle_layers=(oracle_layers if oracle_layers is not None
                       else (config.sweep.oracle_layers
                             if config.sweep.oracle_layers is not None
                             else config.grid.num_layers)),
        oracle_oversample=(oracle_oversample if oracle_oversample is not None
                           else (config.sweep.oracle_oversample
                                 if config.sweep.oracle_oversample is not None
                                 else config.grid.oversample)),
        optimizer=o,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fiberfit",
        description="Split-step fiber simulation and (beta, gamma) recovery experiments",
    )
    parser.add_argument("--version", action="version", version=f"fiberfit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    help_by_command = {
        "generate": "emit a modulated (optionally noisy) input waveform",
        "propagate": "run the split-step solver over a waveform",
        "scan": "evaluate the loss over a (beta, gamma) grid",
        "fit": "recover (beta, gamma) by gradient descent",
        "sweep": "sweep one model/data axis and record the attainable minimum",
        "bias-variance": "minimizer statistics over random symbol draws",
        "estimate-alpha": "closed-form attenuation estimate from two waveforms",
        "grad-check": "compare reverse-mode gradients with finite differences",
        "stability-probe": "output distance under parameter perturbations",
    }
    for command, text in help_by_command.items():
        p = sub.add_parser(command, help=text)
        p.add_argument("--config", help="path to a JSON config file")
        p.add_argument("--set", action="append", default=[], metavar="PATH=VALUE",
                       help="override a config leaf, e.g. --set pulse.rolloff_rho=0.2")
        p.add_argument("--preset", default="paper", choices=["paper", "desk"],
                       help="base parameter preset (default: paper)")
        p.add_argument("--out", help="output directory (default: config output_dir)")
        p.add_argument("--threads", type=int, help="parallelism cap for grid scans")
        p.add_argument("--seed", type=int, help="override the data seed")
    return parser


def load_config(args) -> ExperimentConfig:
    raw = {}
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
    raw = apply_preset(raw, args.preset)
    raw = apply_overrides(raw, args.set)
    raw["scenario"] = args.command.replace("-", "_")
    if args.out is not None:
        raw["output_dir"] = args.out
    if args.threads is not None:
        raw["threads"] = args.threads
    if args.seed is not None:
        raw.setdefault("data", {})["seed"] = args.seed
    return validate_config(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        written = run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BlowUpError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    for name in written:
        print(f"wrote {Path(config.output_dir) / name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
