"""Unit tests for model construction, measurement validation and presets."""

import numpy as np
import pytest

from mimofb import (
    Measurement,
    SystemModel,
    current_observables,
    heterodyne_model,
    homodyne_model,
    measured_channel_ops,
    measurement_efficiencies,
    noise_covariance,
    psd_sqrt,
)
from mimofb.errors import (
    DimensionMismatchError,
    EfficiencyError,
    NotDiagonalError,
    NotHermitianError,
)
from mimofb.model import as_vop

from modelzoo import SM, SX, SY, random_measurement, random_model


class TestAsVop:
    def test_stacks(self):
        v = as_vop([SX, SY], dim=2)
        assert v.shape == (2, 2, 2)
        assert np.array_equal(v[0], SX)

    def test_empty_needs_dim(self):
        assert as_vop([], dim=3).shape == (0, 3, 3)
        with pytest.raises(DimensionMismatchError):
            as_vop([])

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            as_vop([SX, np.eye(3)])
        with pytest.raises(DimensionMismatchError):
            as_vop([SX], dim=3)

    def test_hermitian_flag(self):
        as_vop([SX], hermitian=True)
        with pytest.raises(NotHermitianError):
            as_vop([SM], hermitian=True)


class TestMeasurementValidation:
    def test_homodyne_efficiency(self):
        eta = measurement_efficiencies(Measurement(np.array([[np.sqrt(0.8)]]), 1.0))
        assert np.allclose(eta, [0.8], atol=1e-12)

    def test_hbar_scaling(self):
        # same eta at hbar = 0.5 needs a smaller matrix entry
        meas = Measurement(np.array([[np.sqrt(0.5 * 0.8)]]), 0.5)
        assert np.allclose(measurement_efficiencies(meas), [0.8], atol=1e-12)

    def test_off_diagonal_rejected(self):
        # parallel rows: channel cross-covariance cannot be diagonal
        m = np.array([[0.5, 0.0], [0.5, 0.0]], dtype=complex)
        with pytest.raises(NotDiagonalError):
            measurement_efficiencies(Measurement(m, 1.0))

    def test_efficiency_above_one_rejected(self):
        with pytest.raises(EfficiencyError):
            measurement_efficiencies(Measurement(np.array([[1.2]]), 1.0))

    def test_borderline_clamped(self):
        eta = measurement_efficiencies(Measurement(np.array([[np.sqrt(1.0 + 1e-12)]]), 1.0))
        assert eta[0] == 1.0

    def test_random_measurements_valid(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n_l = int(rng.integers(1, 4))
            n_r = int(rng.integers(1, 2 * n_l + 1))
            hbar = float(rng.choice([1.0, 0.5, 2.0]))
            meas = random_measurement(rng, n_l, n_r, hbar)
            eta = measurement_efficiencies(meas)
            assert eta.shape == (n_l,)
            assert np.all((eta >= 0.0) & (eta <= 1.0))
            # Z must be PSD: its PSD square root exists
            psd_sqrt(noise_covariance(meas))


class TestNoiseCovariance:
    def test_homodyne(self):
        for hbar, eta in [(1.0, 0.8), (0.5, 0.3)]:
            meas = Measurement(np.array([[np.sqrt(hbar * eta)]]), hbar)
            z = noise_covariance(meas)
            assert np.allclose(z, [[hbar * (1.0 - eta)]], atol=1e-12)

    def test_heterodyne(self):
        hbar, eta = 1.0, 0.6
        meas = Measurement(np.sqrt(hbar * eta / 2) * np.array([[1.0, 1.0j]]), hbar)
        z = noise_covariance(meas)
        expect = hbar * np.array([[1.0 - eta / 2, -0.5j * eta],
                                  [0.5j * eta, 1.0 - eta / 2]])
        assert np.allclose(z, expect, atol=1e-12)

    def test_zero_currents(self):
        z = noise_covariance(Measurement(np.zeros((2, 0)), 1.0))
        assert z.shape == (0, 0)


class TestSystemModel:
    def test_basic_construction(self):
        rng = np.random.default_rng(11)
        model = random_model(rng, 3, 2, 3, hbar=0.5)
        assert model.dim == 3
        assert model.n_channels == 2
        assert model.n_currents == 3
        assert model.coupling.shape == (2, 3, 3)

    def test_too_many_currents_rejected(self):
        rng = np.random.default_rng(13)
        with pytest.raises(DimensionMismatchError):
            SystemModel(
                dim=2, hbar=1.0,
                hamiltonian=np.zeros((2, 2)),
                coupling=[SM],
                feedback=[SX, SY, SX.copy()],
                measurement=Measurement(np.zeros((1, 3)), 1.0),
            )
        del rng

    def test_non_hermitian_hamiltonian_rejected(self):
        with pytest.raises(NotHermitianError, match="hamiltonian"):
            SystemModel(dim=2, hbar=1.0, hamiltonian=SM, coupling=[SM],
                        feedback=[SX], measurement=Measurement(np.array([[1.0]]), 1.0))

    def test_non_hermitian_feedback_rejected(self):
        with pytest.raises(NotHermitianError, match="feedback"):
            SystemModel(dim=2, hbar=1.0, hamiltonian=np.zeros((2, 2)), coupling=[SM],
                        feedback=[SM], measurement=Measurement(np.array([[1.0]]), 1.0))

    def test_measurement_shape_checked(self):
        with pytest.raises(DimensionMismatchError):
            SystemModel(dim=2, hbar=1.0, hamiltonian=np.zeros((2, 2)), coupling=[SM],
                        feedback=[SX], measurement=Measurement(np.zeros((2, 1)), 1.0))

    def test_arrays_frozen(self):
        model = homodyne_model(SM, SX, eta=1.0)
        with pytest.raises(ValueError):
            model.hamiltonian[0, 0] = 5.0

    def test_empty_model_allowed(self):
        model = SystemModel(dim=2, hbar=1.0, hamiltonian=SX, coupling=[],
                            feedback=[], measurement=Measurement(np.zeros((0, 0)), 1.0))
        assert model.n_channels == 0
        assert model.n_currents == 0


class TestPresets:
    def test_homodyne_matrix(self):
        model = homodyne_model(SM, SX, eta=0.8, hbar=0.5)
        assert model.measurement.matrix.shape == (1, 1)
        assert np.allclose(model.measurement.matrix, [[np.sqrt(0.5 * 0.8)]], atol=1e-15)
        assert np.allclose(measurement_efficiencies(model.measurement), [0.8], atol=1e-12)

    def test_heterodyne_matrix(self):
        model = heterodyne_model(SM, SX, SY, eta=0.6, hbar=2.0)
        expect = np.sqrt(2.0 * 0.6 / 2) * np.array([[1.0, 1.0j]])
        assert np.allclose(model.measurement.matrix, expect, atol=1e-15)
        assert np.allclose(measurement_efficiencies(model.measurement), [0.6], atol=1e-12)

    def test_eta_range_checked(self):
        with pytest.raises(EfficiencyError):
            homodyne_model(SM, SX, eta=1.5)
        with pytest.raises(EfficiencyError):
            heterodyne_model(SM, SX, SY, eta=-0.1)


class TestChannelOps:
    def test_homodyne_measured_op(self):
        model = homodyne_model(SM, SX, eta=0.8, hbar=0.5)
        g = measured_channel_ops(model)
        assert np.allclose(g[0], np.sqrt(0.5 * 0.8) * SM, atol=1e-15)
        x = current_observables(model)
        assert np.allclose(x[0], np.sqrt(0.5 * 0.8) * (SM + SM.conj().T), atol=1e-15)

    def test_heterodyne_measured_ops(self):
        model = heterodyne_model(SM, SX, SY, eta=0.6)
        g = measured_channel_ops(model)
        scale = np.sqrt(0.6 / 2)
        assert np.allclose(g[0], scale * SM, atol=1e-15)
        assert np.allclose(g[1], -1j * scale * SM, atol=1e-15)
        x = current_observables(model)
        assert np.allclose(x[1], scale * (-1j) * (SM - SM.conj().T), atol=1e-15)

    def test_zero_measurement(self):
        model = SystemModel(dim=2, hbar=1.0, hamiltonian=np.zeros((2, 2)),
                            coupling=[SM], feedback=[SX],
                            measurement=Measurement(np.zeros((1, 1)), 1.0))
        assert np.allclose(measured_channel_ops(model), 0.0)
        assert np.allclose(current_observables(model), 0.0)
