"""Grid scans, minimum refinement, sweeps, bias-variance, stability probe."""

import math

import numpy as np
import pytest

from fiberfit.estimator import default_config
from fiberfit.landscape import (
    ExperimentBase,
    GridSpec,
    LandscapeGrid,
    MinimizerStats,
    bias_variance_experiment,
    find_global_min,
    hyperparameter_sweep,
    scan_grid,
    stability_probe,
    write_landscape_csv,
    write_stats_json,
)
from fiberfit.model import ModelParams, loss
from fiberfit.propagator import FiberParams, SimGrid, generate_ground_truth, propagate
from fiberfit.signal import ComplexSignal, Constellation, generate_symbols

from conftest import DESK_Z, TRUTH_BETA, TRUTH_GAMMA


def small_spec(bp=9, gp=9):
    return GridSpec((-23.8, -19.4), (0.6, 2.6), bp, gp)


class TestGridSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            GridSpec((-20.0, -25.0), (0.0, 2.0), 5, 5)
        with pytest.raises(ValueError):
            GridSpec((-25.0, -20.0), (0.0, 2.0), 0, 5)

    def test_single_point_grid_allowed(self):
        spec = GridSpec((TRUTH_BETA, TRUTH_BETA), (TRUTH_GAMMA, TRUTH_GAMMA), 1, 1)
        assert spec.beta_values.tolist() == [TRUTH_BETA]


class TestScanGrid:
    def test_single_cell_at_truth_is_zero(self, desk_input, desk_target, desk_grid):
        spec = GridSpec((TRUTH_BETA, TRUTH_BETA), (TRUTH_GAMMA, TRUTH_GAMMA), 1, 1)
        ls = scan_grid(desk_input, desk_target, desk_grid, spec)
        assert ls.losses[0, 0] < 1e-12

    def test_matches_pointwise_loss(self, desk_input, desk_target, desk_grid):
        spec = small_spec(4, 5)
        ls = scan_grid(desk_input, desk_target, desk_grid, spec)
        for i, b in enumerate(spec.beta_values):
            for j, g in enumerate(spec.gamma_values):
                ref = loss(ModelParams(float(b), float(g), desk_grid),
                           desk_input, desk_target).value
                assert ls.losses[i, j] == pytest.approx(ref, rel=1e-12, abs=1e-25)

    def test_worker_count_invariant(self, desk_input, desk_target, desk_grid):
        spec = small_spec(5, 5)
        a = scan_grid(desk_input, desk_target, desk_grid, spec, workers=1)
        b = scan_grid(desk_input, desk_target, desk_grid, spec, workers=4)
        np.testing.assert_array_equal(a.losses, b.losses)

    def test_unique_minimum_bracketing_truth(self, desk_input, desk_target, desk_grid):
        spec = small_spec()
        ls = scan_grid(desk_input, desk_target, desk_grid, spec)
        i, j = ls.argmin_cell()
        nearest_b = int(np.argmin(np.abs(spec.beta_values - TRUTH_BETA)))
        nearest_g = int(np.argmin(np.abs(spec.gamma_values - TRUTH_GAMMA)))
        assert (i, j) == (nearest_b, nearest_g)
        # single connected near-minimal component: with the minimum at 0 the
        # 2x-threshold set collapses to the argmin cell itself
        near = ls.losses <= 2 * max(ls.losses[i, j], 1e-300)
        assert near.sum() == 1

    def test_refining_grid_does_not_increase_minimum(self, desk_input, desk_target,
                                                     desk_grid):
        coarse = scan_grid(desk_input, desk_target, desk_grid, small_spec(5, 5))
        fine = scan_grid(desk_input, desk_target, desk_grid, small_spec(9, 9))
        ci, cj = coarse.argmin_cell()
        fi, fj = fine.argmin_cell()
        assert fine.losses[fi, fj] <= coarse.losses[ci, cj] + 1e-14

    def test_blow_up_cells_become_inf(self, desk_grid):
        huge = ComplexSignal(np.full(desk_grid.num_samples, 1e160 + 0j), 0.625)
        spec = GridSpec((-21.6, -21.6), (1.6, 1.6), 1, 1)
        ls = scan_grid(huge, huge, desk_grid, spec)
        assert math.isinf(ls.losses[0, 0])
        with pytest.raises(ValueError):
            ls.argmin_cell()

    def test_losses_shape_validated(self):
        with pytest.raises(ValueError):
            LandscapeGrid(spec=small_spec(3, 3), losses=np.zeros((2, 3)))


class TestFindGlobalMin:
    def test_inverse_crime_recovers_truth(self, desk_input, desk_target, desk_grid):
        ls = scan_grid(desk_input, desk_target, desk_grid, small_spec())
        cfg = default_config("adam", loss_tol=1e-12, max_iters=800)
        b, g, j = find_global_min(ls, desk_input, desk_target, desk_grid, cfg)
        assert abs(b - TRUTH_BETA) / abs(TRUTH_BETA) < 1e-4
        assert abs(g - TRUTH_GAMMA) / abs(TRUTH_GAMMA) < 1e-4
        assert j < 1e-10

    def test_start_at_stationary_point_stays(self, desk_input, desk_target, desk_grid):
        spec = GridSpec((TRUTH_BETA, TRUTH_BETA), (TRUTH_GAMMA, TRUTH_GAMMA), 1, 1)
        ls = scan_grid(desk_input, desk_target, desk_grid, spec)
        cfg = default_config("gd_momentum", loss_tol=1e-10)
        b, g, j = find_global_min(ls, desk_input, desk_target, desk_grid, cfg)
        assert (b, g) == (TRUTH_BETA, TRUTH_GAMMA)
        assert j < 1e-12

    def test_model_data_mismatch_leaves_bias(self, pulse16, desk_truth):
        symbols = generate_symbols(50, Constellation.qam16(), seed=1, power=0.4,
                                   zero_pad_per_side=20)
        a_in, a_out = generate_ground_truth(symbols, pulse16, desk_truth, 20,
                                            layer_multiple=4)
        grid = SimGrid.from_length(DESK_Z, 20, len(a_in), pulse16.tau)
        ls = scan_grid(a_in, a_out, grid, small_spec())
        cfg = default_config("adam", loss_tol=1e-14, max_iters=800)
        b, g, j = find_global_min(ls, a_in, a_out, grid, cfg,
                                  truth=(TRUTH_BETA, TRUTH_GAMMA))
        assert j > 1e-7
        assert (b, g) != (TRUTH_BETA, TRUTH_GAMMA)


class TestSweep:
    def base(self, pulse16, desk_truth, power=0.4):
        return ExperimentBase(pulse=pulse16, truth=desk_truth, power=power,
                              oracle_layers=80)

    def test_layers_axis_monotone(self, pulse16, desk_truth):
        rows = hyperparameter_sweep("num_layers", [20, 40, 80],
                                    self.base(pulse16, desk_truth))
        j = [r.j_star for r in rows]
        assert j[0] > j[1] > j[2]
        assert rows[0].e_gamma > 0

    def test_sampling_axis_monotone(self, pulse16, desk_truth):
        base = ExperimentBase(pulse=pulse16, truth=desk_truth, power=0.4,
                              oracle_layers=80, oracle_oversample=4)
        rows = hyperparameter_sweep("sampling_rate", [8, 16], base)
        assert rows[0].j_star >= rows[1].j_star

    def test_symbols_axis_runs(self, pulse16, desk_truth):
        rows = hyperparameter_sweep("num_symbols", [25, 50],
                                    self.base(pulse16, desk_truth))
        assert all(math.isfinite(r.j_star) and r.j_star > 0 for r in rows)

    def test_bad_axis_rejected(self, pulse16, desk_truth):
        with pytest.raises(ValueError):
            hyperparameter_sweep("depth", [1], self.base(pulse16, desk_truth))
        with pytest.raises(ValueError):
            hyperparameter_sweep("num_layers", [], self.base(pulse16, desk_truth))


class TestBiasVariance:
    def test_identical_seeds_zero_covariance(self, pulse16, desk_truth):
        base = ExperimentBase(pulse=pulse16, truth=desk_truth, power=0.4,
                              oracle_layers=80, seed_stride=0,
                              optimizer=default_config("adam", loss_tol=1e-13,
                                                       grad_tol=3e-9, max_iters=400))
        stats = bias_variance_experiment(3, [30], base)
        np.testing.assert_array_equal(stats[0].covariance, np.zeros((2, 2)))
        assert stats[0].n_ok == 3 and stats[0].n_excluded == 0

    def test_covariances_are_psd_and_bias_nonzero(self, pulse16, desk_truth):
        base = ExperimentBase(pulse=pulse16, truth=desk_truth, power=0.4,
                              oracle_layers=80, seed=50,
                              optimizer=default_config("adam", loss_tol=1e-13,
                                                       grad_tol=3e-9, max_iters=400))
        stats = bias_variance_experiment(4, [30, 60], base)
        for s in stats:
            eigs = np.linalg.eigvalsh(s.covariance)
            assert eigs.min() >= -1e-18
            assert s.bias[0] > 0 and s.bias[1] > 0

    def test_requires_two_seeds(self, pulse16, desk_truth):
        with pytest.raises(ValueError):
            bias_variance_experiment(1, [30], ExperimentBase(pulse=pulse16,
                                                             truth=desk_truth))


class TestStabilityProbe:
    def test_zero_delta_zero_distance(self, desk_input, desk_truth, desk_grid):
        rows = stability_probe(desk_input, desk_truth, [(0.0, 0.0)], desk_grid)
        assert rows[0] == (0.0, 0.0, 0.0)

    def test_even_in_gamma_for_constant_modulus_input(self, desk_grid):
        const = ComplexSignal(np.full(desk_grid.num_samples, 0.5 + 0.5j), 0.625)
        base = FiberParams(TRUTH_BETA, TRUTH_GAMMA, DESK_Z)
        rows = stability_probe(const, base, [(0.0, 0.3), (0.0, -0.3)], desk_grid)
        assert rows[0][2] == pytest.approx(rows[1][2], rel=1e-12)

    def test_monotone_in_beta_offset(self, desk_input, desk_truth, desk_grid):
        rows = stability_probe(desk_input, desk_truth,
                               [(0.1, 0.0), (0.2, 0.0), (0.4, 0.0)], desk_grid)
        d = [r[2] for r in rows]
        assert 0 < d[0] < d[1] < d[2]

    def test_nonfinite_delta_rejected(self, desk_input, desk_truth, desk_grid):
        with pytest.raises(ValueError):
            stability_probe(desk_input, desk_truth, [(math.inf, 0.0)], desk_grid)


class TestWriters:
    def test_landscape_csv_format(self, desk_input, desk_target, desk_grid, tmp_path):
        spec = small_spec(2, 3)
        ls = scan_grid(desk_input, desk_target, desk_grid, spec)
        ls.losses[1, 2] = math.inf
        path = tmp_path / "scan.csv"
        write_landscape_csv(ls, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "beta,gamma,loss"
        assert len(lines) == 1 + 6
        assert lines[-1].endswith(",inf")
        b, g, v = lines[1].split(",")
        assert float(b) == spec.beta_values[0] and float(g) == spec.gamma_values[0]

    def test_stats_json_schema(self, tmp_path):
        import json
        stats = [MinimizerStats(group_size=3, num_symbols=50, mean=(-21.59, 1.605),
                                covariance=np.array([[1e-6, 0.0], [0.0, 2e-6]]),
                                bias=(0.01, 0.005), n_ok=3, n_excluded=0)]
        path = tmp_path / "stats.json"
        write_stats_json(stats, path)
        doc = json.loads(path.read_text())
        assert doc[0]["ns"] == 50
        assert set(doc[0]) == {"ns", "mean", "cov", "bias", "n_ok", "n_excluded"}
        assert doc[0]["cov"][0][0] == pytest.approx(1e-6)

    def test_covariance_must_be_symmetric_psd(self):
        with pytest.raises(ValueError):
            MinimizerStats(group_size=2, num_symbols=10, mean=(0, 0),
                           covariance=np.array([[1.0, 0.5], [0.4, 1.0]]),
                           bias=(0, 0), n_ok=2, n_excluded=0)
        with pytest.raises(ValueError):
            MinimizerStats(group_size=2, num_symbols=10, mean=(0, 0),
                           covariance=np.array([[1.0, 2.0], [2.0, 1.0]]),
                           bias=(0, 0), n_ok=2, n_excluded=0)
