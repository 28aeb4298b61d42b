"""Taped forward pass, normalized loss, reverse-mode gradients."""

import math

import numpy as np
import pytest

from fiberfit.model import (
    ForwardTape,
    ModelParams,
    backward,
    forward,
    grad_check,
    loss,
    loss_and_grad,
    reparameterized_forward,
)
from fiberfit.propagator import BlowUpError, FiberParams, SimGrid, linear_step, dispersion_multiplier, nonlinear_step, propagate
from fiberfit.signal import ComplexSignal

from conftest import TRUTH_BETA, TRUTH_GAMMA


class TestForward:
    def test_equals_propagate_bit_for_bit(self, desk_input, desk_truth, desk_grid):
        params = ModelParams(desk_truth.beta, desk_truth.gamma, desk_grid)
        out, tape = forward(params, desk_input)
        ref = propagate(desk_input, desk_truth, desk_grid)
        np.testing.assert_array_equal(out.samples, ref.samples)
        assert len(tape.layer_inputs) == desk_grid.num_layers
        assert len(tape.spectra) == desk_grid.num_layers + 1

    def test_single_layer_is_half_kerr_half(self, desk_input):
        grid = SimGrid.from_length(8.0, 1, len(desk_input), desk_input.tau)
        params = ModelParams(-21.6, 1.6, grid)
        out, _ = forward(params, desk_input)
        half = dispersion_multiplier(-21.6, 4.0, grid)
        ref = linear_step(nonlinear_step(linear_step(desk_input, half), 1.6, 8.0), half)
        rel = np.linalg.norm(out.samples - ref.samples) / np.linalg.norm(ref.samples)
        assert rel < 1e-12

    def test_negative_gamma_handled_like_positive(self, desk_input, desk_grid):
        params = ModelParams(-21.6, -1.6, desk_grid)
        out, _ = forward(params, desk_input)
        ref = propagate(desk_input, FiberParams(-21.6, -1.6, 8.0), desk_grid)
        np.testing.assert_array_equal(out.samples, ref.samples)

    def test_scaled_kernel_form_matches_for_positive_gamma(self, desk_input, desk_grid):
        params = ModelParams(-21.6, 1.6, desk_grid)
        fused, _ = forward(params, desk_input)
        literal = reparameterized_forward(params, desk_input)
        rel = (np.linalg.norm(fused.samples - literal.samples)
               / np.linalg.norm(fused.samples))
        assert rel < 1e-12

    def test_scaled_kernel_form_conjugates_kerr_for_negative_gamma(self, desk_input, desk_grid):
        # With the principal complex root, |sqrt(gamma zeta) w|^2 equals
        # |gamma zeta| |w|^2, so the literal scaled stack at gamma < 0
        # reproduces the |gamma| propagation, not the gamma one.
        neg = ModelParams(-21.6, -1.6, desk_grid)
        literal = reparameterized_forward(neg, desk_input)
        fused_abs, _ = forward(ModelParams(-21.6, 1.6, desk_grid), desk_input)
        fused_neg, _ = forward(neg, desk_input)
        rel_abs = (np.linalg.norm(literal.samples - fused_abs.samples)
                   / np.linalg.norm(fused_abs.samples))
        rel_neg = (np.linalg.norm(literal.samples - fused_neg.samples)
                   / np.linalg.norm(fused_neg.samples))
        assert rel_abs < 1e-12
        assert rel_neg > 1e-3

    def test_scaled_kernel_form_rejects_zero_gamma(self, desk_input, desk_grid):
        with pytest.raises(ValueError):
            reparameterized_forward(ModelParams(-21.6, 0.0, desk_grid), desk_input)

    def test_length_mismatch_rejected(self, desk_input):
        grid = SimGrid.from_length(8.0, 4, len(desk_input) + 2, desk_input.tau)
        with pytest.raises(ValueError):
            forward(ModelParams(-21.6, 1.6, grid), desk_input)


class TestLoss:
    def test_zero_at_own_output(self, desk_input, desk_grid):
        params = ModelParams(-22.3, 1.9, desk_grid)
        out, _ = forward(params, desk_input)
        assert loss(params, desk_input, out).value == 0.0

    def test_zero_input_gives_unit_loss(self, desk_target, desk_grid):
        zero = ComplexSignal(np.zeros(desk_grid.num_samples, dtype=complex),
                             desk_target.tau)
        params = ModelParams(-21.6, 1.6, desk_grid)
        assert loss(params, zero, desk_target).value == pytest.approx(1.0, rel=1e-14)

    def test_inverse_crime_truth_is_zero(self, desk_input, desk_target, desk_grid):
        params = ModelParams(TRUTH_BETA, TRUTH_GAMMA, desk_grid)
        assert loss(params, desk_input, desk_target).value < 1e-12

    def test_zero_norm_target_rejected(self, desk_input, desk_grid):
        zero = ComplexSignal(np.zeros(desk_grid.num_samples, dtype=complex),
                             desk_input.tau)
        with pytest.raises(ValueError):
            loss(ModelParams(-21.6, 1.6, desk_grid), desk_input, zero)

    def test_nonnegative(self, desk_input, desk_target, desk_grid):
        for beta, gamma in [(-25.0, 0.6), (-18.0, 3.0), (-21.6, -2.0)]:
            assert loss(ModelParams(beta, gamma, desk_grid),
                        desk_input, desk_target).value >= 0.0

    def test_gamma_zero_loss_invariant_under_common_scaling(self, desk_input, desk_grid):
        params = ModelParams(-21.6, 0.0, desk_grid)
        target, _ = forward(ModelParams(-23.0, 0.0, desk_grid), desk_input)
        j1 = loss(params, desk_input, target).value
        scaled_in = ComplexSignal(3.7 * desk_input.samples, desk_input.tau)
        scaled_t = ComplexSignal(3.7 * target.samples, target.tau)
        j2 = loss(params, scaled_in, scaled_t).value
        assert j2 == pytest.approx(j1, rel=1e-12)


class TestBackward:
    def test_zero_gradients_at_exact_minimum(self, desk_input, desk_grid):
        params = ModelParams(-22.0, 2.0, desk_grid)
        out, _ = forward(params, desk_input)
        _, (g_beta, g_gamma) = loss_and_grad(params, desk_input, out)
        assert abs(g_beta) < 1e-10 and abs(g_gamma) < 1e-10

    def test_single_layer_constant_input_closed_form(self):
        # Constant field c: dispersion acts as identity (DC only), the Kerr
        # step rotates uniformly, so J(gamma) = 2 - 2 cos((gamma - g0) Z |c|^2)
        # and dJ/dgamma = 2 Z |c|^2 sin((gamma - g0) Z |c|^2); dJ/dbeta = 0.
        n, z, c, g0 = 64, 8.0, 1.3, 1.6
        grid = SimGrid.from_length(z, 1, n, 0.5)
        sig = ComplexSignal(np.full(n, c, dtype=complex), 0.5)
        target, _ = forward(ModelParams(-21.6, g0, grid), sig)
        for gamma in [0.9, 1.4, 2.1]:
            lv, (g_beta, g_gamma) = loss_and_grad(ModelParams(-21.6, gamma, grid),
                                                  sig, target)
            theta = (gamma - g0) * z * c * c
            assert lv.value == pytest.approx(2 - 2 * math.cos(theta), rel=1e-12)
            assert g_gamma == pytest.approx(2 * z * c * c * math.sin(theta), rel=1e-10)
            assert abs(g_beta) < 1e-12

    def test_matches_finite_differences(self, desk_input, desk_target, desk_grid):
        for beta, gamma in [(-22.0, 2.0), (-25.0, 0.7), (-14.0, 4.2)]:
            err_beta, err_gamma = grad_check(
                ModelParams(beta, gamma, desk_grid), desk_input, desk_target, 1e-4)
            assert err_beta < 1e-5 and err_gamma < 1e-5

    def test_tape_mismatch_rejected(self, desk_input, desk_target, desk_grid):
        params = ModelParams(-22.0, 2.0, desk_grid)
        out, tape = forward(params, desk_input)
        other = ModelParams(-22.0, 2.1, desk_grid)
        norm_sq = float(np.sum(np.abs(desk_target.samples) ** 2))
        with pytest.raises(ValueError):
            backward(tape, other, out.samples - desk_target.samples, norm_sq)

    def test_blow_up_carries_layer_index(self, desk_grid):
        sig = ComplexSignal(np.full(desk_grid.num_samples, 1e200 + 0j), 0.625)
        with pytest.raises(BlowUpError) as err:
            forward(ModelParams(-21.6, 1.6, desk_grid), sig)
        assert err.value.layer == 1


class TestGradCheck:
    def test_truncation_grows_with_step(self, desk_input, desk_target, desk_grid):
        params = ModelParams(-22.4, 2.3, desk_grid)
        small = grad_check(params, desk_input, desk_target, 1e-3)
        large = grad_check(params, desk_input, desk_target, 1e-2)
        # central differences: error ~ step^2, so 10x the step is ~100x the
        # error; allow a wide band around that
        ratio = max(large) / max(max(small), 1e-18)
        assert 20 < ratio < 500

    def test_zero_over_zero_guard_at_minimum(self, desk_input, desk_grid):
        params = ModelParams(-22.0, 2.0, desk_grid)
        out, _ = forward(params, desk_input)
        err_beta, err_gamma = grad_check(params, desk_input, out, 1e-4)
        assert math.isfinite(err_beta) and math.isfinite(err_gamma)

    def test_rejects_nonpositive_step(self, desk_input, desk_target, desk_grid):
        with pytest.raises(ValueError):
            grad_check(ModelParams(-22.0, 2.0, desk_grid), desk_input, desk_target, 0.0)
