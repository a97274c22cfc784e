"""Domain types: validation, drive evaluation, spectral densities, JSON round-trip."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import quad

from photonet import (
    KB_OVER_HBAR,
    ConfigError,
    DiscreteModes,
    FrequencyMatrix,
    MonochromaticDrive,
    SemicircleDensity,
    TabulatedDensity,
    TabulatedDrive,
    evaluate_drive,
    evaluate_spectral_density,
    network_spec_from_dict,
    network_spec_to_dict,
    thermal_occupation,
    validate,
)
from helpers import two_crow_spec


def test_conversion_constant_matches_codata():
    kb = 1.380649e-23          # J/K, exact SI definition
    hbar = 1.054571817e-34     # J s, CODATA 2018
    assert KB_OVER_HBAR == pytest.approx(kb / hbar * 1e-9, rel=1e-12)


def test_thermal_occupation_reference_points():
    # ħω/k_B T ≈ 15.3 at 5 mK and ≈ 0.0153 at 5 K for ω = 10 rad/ns
    assert thermal_occupation(10.0, 0.005) == pytest.approx(2.32e-7, rel=1e-2)
    assert thermal_occupation(10.0, 5.0) == pytest.approx(64.961, rel=1e-4)
    assert thermal_occupation(10.0, 0.0) == 0.0


class TestValidate:
    def test_symmetric_two_waveguide_spec_passes(self):
        report = validate(two_crow_spec(n_steps=4000))
        assert report.ok, report.violations

    def test_non_hermitian_frequency_matrix_fails(self):
        spec = two_crow_spec(n_steps=100)
        bad = FrequencyMatrix(np.array([[10.0, 0.3], [0.2, 11.0]], dtype=complex))
        report = validate(
            type(spec)(frequencies=bad, drives=(), waveguides=(),
                       initial_field=np.zeros(2, complex),
                       initial_occupation=np.zeros((2, 2), complex), grid=spec.grid))
        assert not report.ok
        assert any("Hermitian" in v for v in report.violations)

    def test_negative_temperature_fails(self):
        spec = two_crow_spec(temperature=-1.0, n_steps=100)
        report = validate(spec)
        assert not report.ok
        assert any("temperature" in v for v in report.violations)

    def test_unphysical_initial_state_fails(self):
        # field amplitude 2 but occupation 1 < |a|^2
        spec = two_crow_spec(n_steps=100, initial_field=2.0, initial_occupation=1.0)
        report = validate(spec)
        assert any("Gaussian" in v for v in report.violations)

    def test_underresolved_carrier_warns(self):
        spec = two_crow_spec(n_steps=100, t_end=40.0)  # h*omega = 4
        report = validate(spec)
        assert report.ok
        assert any("0.15" in w for w in report.warnings)


class TestDrives:
    def test_monochromatic_at_reference_time(self):
        d = MonochromaticDrive(target=0, amplitude=10.0, frequency=10.0)
        assert evaluate_drive(d, 0.0) == pytest.approx(10.0 + 0.0j)

    def test_monochromatic_half_period(self):
        d = MonochromaticDrive(target=0, amplitude=10.0, frequency=10.0)
        assert evaluate_drive(d, np.pi / 10.0) == pytest.approx(-10.0 + 0.0j, abs=1e-12)

    def test_zero_amplitude(self):
        d = MonochromaticDrive(target=0, amplitude=0.0, frequency=3.0)
        assert evaluate_drive(d, 17.3) == 0.0

    def test_evaluation_is_pure(self):
        d = MonochromaticDrive(target=0, amplitude=2.0, frequency=7.0, phase=0.3)
        ts = np.linspace(0, 5, 11)
        first = evaluate_drive(d, ts)
        second = evaluate_drive(d, ts)
        assert np.array_equal(first, second)

    def test_tabulated_interpolates_and_rejects_out_of_window(self):
        d = TabulatedDrive(target=0, times=[0.0, 1.0, 2.0], values=[0.0, 1.0 + 1.0j, 2.0])
        assert evaluate_drive(d, 0.5) == pytest.approx(0.5 + 0.5j)
        with pytest.raises(ValueError, match="window"):
            evaluate_drive(d, 2.5)


class TestSpectralDensity:
    def test_semicircle_peak_value(self):
        s = SemicircleDensity(center=10.0, hopping=0.3, coupling_ratio=0.5)
        assert evaluate_spectral_density(s, 10.0) == pytest.approx(0.25 * 0.6)

    def test_semicircle_zero_outside_band(self):
        s = SemicircleDensity(center=10.0, hopping=0.3, coupling_ratio=0.5)
        # 10.6 as a double sits a few ulp inside the band edge, hence abs tol
        assert evaluate_spectral_density(s, 10.6) == pytest.approx(0.0, abs=1e-7)
        assert evaluate_spectral_density(s, np.nextafter(10.6, 11.0)) == 0.0
        assert evaluate_spectral_density(s, 8.0) == 0.0
        assert evaluate_spectral_density(s, 11.0) == 0.0

    def test_discrete_modes_have_no_pointwise_density(self):
        s = DiscreteModes(couplings=[1.0], frequencies=[2.0])
        with pytest.raises(TypeError):
            evaluate_spectral_density(s, 2.0)

    def test_tabulated_zero_outside_grid(self):
        s = TabulatedDensity(frequencies=[1.0, 2.0], values=[1.0, 1.0])
        assert evaluate_spectral_density(s, 0.5) == 0.0

    @pytest.mark.parametrize("eta,xi", [(0.5, 0.3), (1.0, 0.3), (2.0, 0.7)])
    def test_semicircle_band_integral(self, eta, xi):
        # (1/2π) ∫ J dω = η²ξ² (semicircle area over 2π)
        s = SemicircleDensity(center=10.0, hopping=xi, coupling_ratio=eta)
        val = quad(lambda w: evaluate_spectral_density(s, w),
                   10.0 - 2 * xi, 10.0 + 2 * xi, epsabs=1e-12, limit=200)[0] / (2 * np.pi)
        assert val == pytest.approx(eta**2 * xi**2, rel=1e-8)


class TestJsonIngestion:
    def test_round_trip(self):
        spec = two_crow_spec(n_steps=200)
        doc = network_spec_to_dict(spec)
        back = network_spec_from_dict(doc)
        assert np.array_equal(back.frequencies.matrix, spec.frequencies.matrix)
        assert back.grid == spec.grid
        assert back.waveguides[1].density == spec.waveguides[1].density
        assert back.drives[0] == spec.drives[0]

    def test_unknown_keys_rejected(self):
        doc = network_spec_to_dict(two_crow_spec(n_steps=200))
        doc["frequencyes"] = doc["frequencies"]
        with pytest.raises(ConfigError, match="unknown keys"):
            network_spec_from_dict(doc)

    def test_invalid_spec_rejected_not_repaired(self):
        doc = network_spec_to_dict(two_crow_spec(n_steps=200))
        doc["waveguides"][0]["temperature"] = -4.0
        with pytest.raises(ConfigError, match="temperature"):
            network_spec_from_dict(doc)

    def test_monochromatic_reference_defaults_to_grid_start(self):
        doc = network_spec_to_dict(two_crow_spec(n_steps=200))
        doc["grid"]["t0"] = 3.0
        doc["grid"]["t_end"] = 5.0
        del doc["drives"][0]["t_ref"]
        spec = network_spec_from_dict(doc)
        assert spec.drives[0].t_ref == 3.0
        assert evaluate_drive(spec.drives[0], 3.0) == pytest.approx(10.0 + 0.0j)
