"""Split-step fiber propagation and gradient-based recovery of the
dispersion and nonlinearity coefficients from transmit/receive waveforms."""

__version__ = "0.1.0"

from .attenuation import AttenuationEstimate, estimate_alpha
from .estimator import (
    ALGORITHMS,
    OptimizerConfig,
    TrainHistory,
    default_config,
    fit,
    write_history_csv,
)
from .landscape import (
    ExperimentBase,
    GridSpec,
    LandscapeGrid,
    MinimizerStats,
    bias_variance_experiment,
    find_global_min,
    hyperparameter_sweep,
    scan_grid,
    stability_probe,
)
from .model import (
    ForwardTape,
    LossValue,
    ModelParams,
    backward,
    forward,
    grad_check,
    loss,
    loss_and_grad,
)
from .propagator import (
    BlowUpError,
    FiberParams,
    LinearStep,
    SimGrid,
    build_fresnel_kernel,
    dispersion_multiplier,
    fresnel_convolve,
    generate_ground_truth,
    linear_step,
    nonlinear_step,
    propagate,
)
from .signal import (
    ComplexSignal,
    Constellation,
    NoiseSpec,
    PulseSpec,
    SymbolSequence,
    add_awgn,
    generate_symbols,
    matched_filter_denoise,
    modulate,
    read_signal_json,
    rrc_frequency_response,
    rrc_impulse_response,
    write_signal_json,
)
