import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import rank_r_system
from modal_sentinel.beam import BeamSpec, simulate
from modal_sentinel.dmd import (
    avg_distance_origin, continuous_spectrum, dominant_area, enclosed_area, evolve, fit,
    fit_snapshots, load_model, model_from_dict, model_to_dict, reconstruct, rmse, save_model,
    select_dominant, with_amplitudes, write_spectrum_csv,
)
from modal_sentinel.errors import NumericalError, ValidationError
from modal_sentinel.snapshots import SnapshotMatrix

PENTAGON_AREA = 2.3776413  # (5/2) sin(2 pi / 5) for unit circumradius


def _sorted(z):
    z = np.asarray(z)
    return z[np.lexsort((z.imag, z.real))]


class TestExactDmd:
    def test_recovers_eigenvalues(self):
        _, x, eig = rank_r_system()
        model = fit(x[:, :-1], x[:, 1:], 3)
        np.testing.assert_allclose(_sorted(model.eigenvalues), _sorted(eig), atol=1e-8)

    def test_held_out_reconstruction(self):
        _, x, _ = rank_r_system()
        model = fit(x[:, :29], x[:, 1:30], 3)
        pred = evolve(model, np.arange(1, 51))
        assert np.max(np.abs(pred[:, 30:] - x[:, 30:])) < 1e-8

    def test_rank_floor_truncates(self):
        _, x, _ = rank_r_system()
        model = fit(x[:, :-1], x[:, 1:], 6)
        assert model.rank == 3 and model.requested_rank == 6

    def test_rank_above_matrix_size_rejected(self):
        _, x, _ = rank_r_system()
        with pytest.raises(ValidationError):
            fit(x[:, :-1], x[:, 1:], 11)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            fit(np.ones((3, 4)), np.ones((3, 5)), 1)

    def test_zero_data_is_numerical_failure(self):
        with pytest.raises(NumericalError):
            fit(np.zeros((3, 5)), np.zeros((3, 5)), 2)

    def test_first_step_reproduces_first_snapshot(self):
        _, x, _ = rank_r_system()
        model = fit(x[:, :-1], x[:, 1:], 3)
        np.testing.assert_allclose(evolve(model, [1])[:, 0], x[:, 0], atol=1e-10)

    def test_amplitudes_refit(self):
        _, x, _ = rank_r_system()
        model = with_amplitudes(fit(x[:, :-1], x[:, 1:], 3), x[:, 5])
        np.testing.assert_allclose(evolve(model, [1])[:, 0], x[:, 5], atol=1e-10)

    def test_steps_must_be_one_based(self):
        _, x, _ = rank_r_system()
        model = fit(x[:, :-1], x[:, 1:], 3)
        with pytest.raises(ValidationError):
            evolve(model, [0, 1])

    def test_continuous_spectrum(self):
        _, x, _ = rank_r_system()
        dt = 0.01
        model = fit(x[:, :-1], x[:, 1:], 3, dt=dt)
        points = sorted(continuous_spectrum(model), key=lambda p: p.frequency_hz)
        assert points[-1].frequency_hz == pytest.approx(0.3 / (2 * math.pi * dt), rel=1e-8)
        assert points[-1].growth_rate == pytest.approx(math.log(0.95) / dt, rel=1e-8)
        assert points[1].growth_rate == pytest.approx(math.log(0.8) / dt, rel=1e-8)

    def test_zero_eigenvalue_growth_is_minus_inf(self):
        x = np.zeros((2, 4))
        x[:, 0] = [1.0, 0.0]
        model = fit(x[:, :-1], x[:, 1:], 1)
        assert continuous_spectrum(model)[0].growth_rate == -math.inf

    def test_rmse(self):
        assert rmse([[0.0, 0.0]], [[3.0, 4.0]]) == pytest.approx(math.sqrt(12.5))
        with pytest.raises(ValidationError):
            rmse([1.0], [1.0, 2.0])


class TestDominance:
    def test_one_per_conjugate_pair(self):
        _, x, _ = rank_r_system()
        model = fit(x[:, :-1], x[:, 1:], 3)
        idx = select_dominant(model, 2)
        assert len({round(abs(model.eigenvalues[i].imag), 10) for i in idx}) == 2
        assert all(model.eigenvalues[i].imag >= 0 for i in idx)
        with pytest.raises(ValidationError):
            select_dominant(model, 3)

    def test_beam_dominant_mode_is_fundamental(self, healthy):
        snap, basis = healthy
        model = fit_snapshots(snap, 12, 2)
        first = select_dominant(model, 1)[0]
        f1 = basis.damped_frequencies[0] / (2 * math.pi)
        assert abs(model.frequencies_hz[first]) == pytest.approx(f1, rel=1e-6)


class TestGeometry:
    def test_regular_pentagon(self):
        z = np.exp(2j * np.pi * np.arange(5) / 5)
        assert abs(enclosed_area(z) - PENTAGON_AREA) < 1e-6
        assert enclosed_area(z) == pytest.approx(2.5 * math.sin(2 * math.pi / 5), abs=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(st.permutations(range(5)))
    def test_area_independent_of_order(self, perm):
        z = np.exp(2j * np.pi * np.arange(5) / 5)[list(perm)]
        assert abs(enclosed_area(z) - PENTAGON_AREA) < 1e-6

    def test_collinear_is_zero(self):
        assert enclosed_area([0, 1 + 1j, 2 + 2j, 3 + 3j]) == 0.0

    def test_needs_three_points(self):
        with pytest.raises(ValidationError):
            enclosed_area([0, 1])

    def test_avg_distance_excludes_zeros(self):
        assert avg_distance_origin([0.0, 0.5, 1j]) == pytest.approx(0.75)
        with pytest.raises(ValidationError):
            avg_distance_origin([0.0])

    def test_more_damping_moves_eigenvalues_inward(self, spec):
        doubled = BeamSpec(spec.length, spec.cross_section_area, spec.second_moment,
                           spec.youngs_modulus, spec.density, 2 * spec.damping_coefficient)
        d1 = avg_distance_origin(fit_snapshots(simulate(spec)[0], 12, 2).eigenvalues)
        d2 = avg_distance_origin(fit_snapshots(simulate(doubled)[0], 12, 2).eigenvalues)
        assert d2 < d1

    def test_dominant_area_needs_three_pairs(self):
        _, x, _ = rank_r_system()
        assert dominant_area(fit(x[:, :-1], x[:, 1:], 3)) is None


class TestBeamRecovery:
    def test_delay_embedding_layout(self, healthy):
        snap, _ = healthy
        model = fit_snapshots(snap, 12, 2)
        assert model.modes.shape == (82, 12)
        assert model.spatial_modes.shape == (41, 12)
        assert model.n_channels == 41

    def test_reconstruction_matches_data(self, healthy):
        snap, _ = healthy
        model = fit_snapshots(snap, 12, 2)
        rec = reconstruct(model, snap.n_samples)
        assert rmse(snap.data, rec) < 1e-6 * np.max(np.abs(snap.data))


class TestExport:
    def test_dict_round_trip(self):
        _, x, _ = rank_r_system()
        model = fit(x[:, :-1], x[:, 1:], 3, dt=0.5)
        back = model_from_dict(model_to_dict(model))
        for name in ("modes", "eigenvalues", "amplitudes", "singular_values"):
            assert np.array_equal(getattr(back, name), getattr(model, name))
        assert back.dt == 0.5 and back.rank == 3

    def test_file_round_trip(self, tmp_path, healthy):
        model = fit_snapshots(healthy[0], 12, 2)
        save_model(model, tmp_path / "m.json", {"note": 1})
        back = load_model(tmp_path / "m.json")
        assert np.array_equal(back.modes, model.modes)
        assert np.array_equal(back.grid, model.grid)
        assert back.embedding_dimension == 2

    def test_malformed(self, tmp_path):
        from modal_sentinel.errors import SnapshotFormatError
        (tmp_path / "m.json").write_text("{")
        with pytest.raises(SnapshotFormatError):
            load_model(tmp_path / "m.json")
        with pytest.raises(SnapshotFormatError):
            model_from_dict({"rank": 1})

    def test_spectrum_csv(self, tmp_path):
        _, x, _ = rank_r_system()
        model = fit(x[:, :-1], x[:, 1:], 3)
        write_spectrum_csv(continuous_spectrum(model), tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0].split(",")[:3] == ["index", "eigenvalue_re", "eigenvalue_im"]
        assert len(lines) == 4


def test_snapshot_fit_requires_enough_samples():
    snap = SnapshotMatrix(np.ones((2, 3)), 1.0)
    with pytest.raises(ValidationError):
        fit_snapshots(snap, 1, 3)


def test_frequencies_robust_to_small_noise():
    import dataclasses
    from modal_sentinel.config import PipelineConfig, SimulationConfig
    from modal_sentinel.pipeline import fit_model, simulate_snapshots
    cfg = dataclasses.replace(PipelineConfig(), simulation=SimulationConfig(noise_level=1e-4))
    snap, basis, _ = simulate_snapshots(cfg)
    freqs = fit_model(cfg, snap).model.frequencies_hz
    for k in range(4):
        f_true = basis.damped_frequencies[k] / (2 * math.pi)
        assert np.min(np.abs(freqs - f_true)) < 5e-3 * f_true
