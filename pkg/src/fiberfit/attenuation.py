"""Closed-form fiber attenuation estimate.

Dispersion and the Kerr rotation both preserve the L2 norm, so a uniform
loss coefficient alpha is exposed directly by the input/output norm ratio:
||A_out||^2 = ||A_in||^2 exp(-alpha Z), i.e.
alpha = (2/Z) ln(||A_in|| / ||A_out||).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .signal import ComplexSignal

__all__ = ["AttenuationEstimate", "estimate_alpha"]


@dataclass(frozen=True)
class AttenuationEstimate:
    alpha: float
    norm_in: float
    norm_out: float
    length_z: float


def estimate_alpha(signal_in: ComplexSignal, signal_out: ComplexSignal, length_z: float) -> AttenuationEstimate:
    """Recover alpha (1/km) from tau-weighted discrete L2 norms."""
    if not length_z > 0:
        raise ValueError("length_z must be positive")
    norm_in = signal_in.l2_norm()
    norm_out = signal_out.l2_norm()
    if norm_in == 0.0 or norm_out == 0.0:
        raise ValueError("both signals must have nonzero norm")
    alpha = (2.0 / length_z) * math.log(norm_in / norm_out)
    return AttenuationEstimate(alpha=alpha, norm_in=norm_in, norm_out=norm_out, length_z=length_z)
