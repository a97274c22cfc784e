"""Volterra solver: exact limits, identities between independent paths, convergence."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.signal import fftconvolve

from photonet import (
    FrequencyMatrix,
    SolverAbortError,
    build_kernel_set,
    dyson_defect,
    integrate_ubar_column,
    isolated_cavity_field,
    solve_propagators,
    solve_u,
    solve_v_column,
    solve_y,
    ubar_column,
    v_column_double_integral,
)
from helpers import chain_diagonalization_u, kappa_markov, two_crow_spec


def decoupled_spec(**kw):
    return two_crow_spec(eta=0.0, **kw)


class TestSolveU:
    def test_decoupled_cavity_pure_phase(self):
        spec = decoupled_spec(t_end=40.0, n_steps=4000)
        u = solve_u(build_kernel_set(spec), spec.frequencies)
        t = spec.grid.times
        assert np.max(np.abs(u[:, 0, 0] * np.exp(1j * 10.0 * t) - 1.0)) < 1e-10

    def test_initial_condition_is_exact_identity(self):
        spec = two_crow_spec(eta=1.0, n_steps=100)
        u = solve_u(build_kernel_set(spec), spec.frequencies)
        assert np.array_equal(u[0], np.eye(1))

    def test_weak_coupling_decays_at_markov_rate(self):
        spec = two_crow_spec(eta=0.5, t_end=20.0, n_steps=4000)
        u = solve_u(build_kernel_set(spec), spec.frequencies)
        t = spec.grid.times
        kappa = kappa_markov(0.5)
        window = t < 5.0 / kappa
        dev = np.abs(np.abs(u[window, 0, 0]) - np.exp(-kappa * t[window]))
        assert np.max(dev) < 0.08  # weak-coupling approximation, not solver error

    def test_strong_coupling_does_not_decay(self):
        spec = two_crow_spec(eta=2.0, t_end=40.0, n_steps=8000)
        u = solve_u(build_kernel_set(spec), spec.frequencies)
        t = spec.grid.times
        second_half = np.abs(u[t > 20.0, 0, 0])
        # beats between the two bound modes pass through near-zero, so the
        # envelope (rolling peak over one beat period) is the decay witness
        assert second_half.max() > 0.25
        assert np.abs(u[t > 20.0, 0, 0]).mean() > 0.15

    def test_matches_chain_diagonalization(self):
        spec = two_crow_spec(eta=1.0, t_end=8.0, n_steps=1600, output_every=80)
        u = solve_u(build_kernel_set(spec), spec.frequencies)
        oracle = chain_diagonalization_u(1.0, spec.grid.output_times, sites=400)
        dev = np.max(np.abs(u[spec.grid.output_indices, 0, 0] - oracle))
        assert dev < 1e-5

    def test_norm_contraction(self):
        spec = two_crow_spec(eta=1.0, t_end=20.0, n_steps=4000)
        u = solve_u(build_kernel_set(spec), spec.frequencies)
        norms = np.array([np.linalg.norm(u[k], 2) for k in range(0, 4001, 40)])
        bound = 1.0 + 10.0 * spec.grid.h**2 * np.arange(0, 4001, 40)
        assert np.all(norms <= bound)

    def test_solver_abort_reports_step(self):
        spec = two_crow_spec(eta=0.5, n_steps=64)
        kset = build_kernel_set(spec)
        f = spec.drive_vector(spec.grid.times)
        f[33] = np.nan
        with pytest.raises(SolverAbortError) as err:
            solve_y(kset, spec.frequencies, f)
        assert err.value.step in (33, 34)

    def test_dimension_mismatch_rejected(self):
        spec = two_crow_spec(eta=0.5, n_steps=32)
        kset = build_kernel_set(spec)
        with pytest.raises(ValueError, match="dimension"):
            solve_u(kset, FrequencyMatrix(np.diag([10.0, 11.0]).astype(complex)))


class TestSolveY:
    def test_zero_drive_stays_zero(self):
        spec = two_crow_spec(eta=1.0, amplitude=0.0, n_steps=500)
        kset = build_kernel_set(spec)
        y = solve_y(kset, spec.frequencies, spec.drive_vector(spec.grid.times))
        assert not np.any(y)

    def test_decoupled_resonant_drive_grows_linearly(self):
        spec = decoupled_spec(omega_d=10.0, t_end=10.0, n_steps=2000)
        y = solve_y(build_kernel_set(spec), spec.frequencies,
                    spec.drive_vector(spec.grid.times))
        t = spec.grid.times
        assert np.max(np.abs(np.abs(y[1:, 0]) - 10.0 * t[1:]) / (10.0 * t[1:])) < 1e-12

    def test_decoupled_off_resonant_rabi_oscillation(self):
        # solver error here is the trapezoid defect on the detuning envelope,
        # O((detuning·h)²) relative — the carrier itself is integrated exactly
        spec = decoupled_spec(omega_d=10.5, t_end=40.0, n_steps=8000)
        y = solve_y(build_kernel_set(spec), spec.frequencies,
                    spec.drive_vector(spec.grid.times))
        t = spec.grid.times
        detuning = 0.5
        expected = (2.0 * 10.0 / detuning) ** 2 * np.sin(detuning * t / 2.0) ** 2
        assert np.max(np.abs(np.abs(y[:, 0]) ** 2 - expected)) < 5e-6 * expected.max()

    def test_matches_isolated_cavity_closed_form(self):
        spec = decoupled_spec(omega_d=10.5, t_end=10.0, n_steps=2000)
        y = solve_y(build_kernel_set(spec), spec.frequencies,
                    spec.drive_vector(spec.grid.times))
        closed = isolated_cavity_field(10.0, 10.0, 10.5, spec.grid.times, 0.0)
        assert np.max(np.abs(y[:, 0] - closed)) < 2e-6 * np.max(np.abs(closed))

    def test_convolution_identity_against_duhamel_quadrature(self):
        # y(τ) = -i ∫ u(τ,τ') f(τ') dτ' evaluated by an independent trapezoid
        spec = two_crow_spec(eta=1.0, omega_d=9.5, t_end=10.0, n_steps=8000)
        kset = build_kernel_set(spec)
        u = solve_u(kset, spec.frequencies)[:, 0, 0]
        f = spec.drive_vector(spec.grid.times)[:, 0]
        y = solve_y(kset, spec.frequencies, spec.drive_vector(spec.grid.times))[:, 0]
        h = spec.grid.h
        conv = fftconvolve(u, f)[:len(u)]
        y_quad = -1j * h * (conv - 0.5 * u * f[0] - 0.5 * u[0] * f)
        y_quad[0] = 0.0
        assert np.max(np.abs(y - y_quad)) < 1e-7 * np.max(np.abs(y))


class TestUbar:
    def test_equal_time_is_identity(self):
        spec = two_crow_spec(eta=1.0, n_steps=200)
        u = solve_u(build_kernel_set(spec), spec.frequencies)
        col = ubar_column(u, 200)
        assert np.array_equal(col[-1], np.eye(1))

    def test_decoupled_is_conjugate_phase(self):
        spec = decoupled_spec(t_end=5.0, n_steps=1000)
        u = solve_u(build_kernel_set(spec), spec.frequencies)
        col = ubar_column(u, 1000)
        tau = spec.grid.times
        expected = np.exp(1j * 10.0 * (tau[-1] - tau))
        assert np.max(np.abs(col[:, 0, 0] - expected)) < 1e-10

    def test_backward_integration_matches_translation(self):
        # the two paths are algebraically conjugate recursions for one mode,
        # so they must agree to rounding, far inside the 1e-8 requirement
        spec = two_crow_spec(eta=1.0, t_end=10.0, n_steps=2000)
        kset = build_kernel_set(spec)
        u = solve_u(kset, spec.frequencies)
        for k in (500, 1500, 2000):
            dev = np.max(np.abs(integrate_ubar_column(kset, spec.frequencies, k)
                                - ubar_column(u, k)))
            assert dev < 1e-8

    def test_backward_integration_multimode(self):
        # non-commuting N = 2: the paths differ at O(h²) but must converge
        omega = FrequencyMatrix(np.array([[10.0, 0.2], [0.2, 10.6]], dtype=complex))
        devs = []
        for n_steps in (400, 800):
            spec = two_crow_spec(eta=0.8, t_end=4.0, n_steps=n_steps)
            spec = type(spec)(
                frequencies=omega, drives=(),
                waveguides=tuple(
                    type(w)(w.label, w.density, np.array([1.0, 0.5]), w.temperature)
                    for w in spec.waveguides),
                initial_field=np.zeros(2, complex),
                initial_occupation=np.zeros((2, 2), complex), grid=spec.grid)
            kset = build_kernel_set(spec)
            u = solve_u(kset, spec.frequencies)
            k = n_steps
            devs.append(np.max(np.abs(integrate_ubar_column(kset, spec.frequencies, k)
                                      - ubar_column(u, k))))
        assert devs[0] < 1e-4
        assert devs[0] / devs[1] > 3.0  # ~2nd order


class TestVColumn:
    def test_zero_temperature_vanishes(self):
        spec = two_crow_spec(eta=1.0, temperature=0.0, t_end=5.0, n_steps=1000)
        kset = build_kernel_set(spec)
        col = solve_v_column(kset, spec.frequencies, 1000)
        assert not np.any(col)

    def test_ode_vs_double_integral(self):
        spec = two_crow_spec(eta=1.0, omega_d=9.5, temperature=5.0,
                             t_end=6.0, n_steps=2400)
        kset = build_kernel_set(spec)
        u = solve_u(kset, spec.frequencies)
        k = 2400
        v_ode = solve_v_column(kset, spec.frequencies, k, ubar_column(u, k))
        v_dbl = v_column_double_integral(kset, u, k)
        dev = np.max(np.abs(v_ode - v_dbl)) / np.max(np.abs(v_ode))
        assert dev < 1e-6

    def test_equal_time_hermitian_psd(self):
        spec = two_crow_spec(eta=1.0, temperature=5.0, t_end=6.0, n_steps=1200,
                             output_every=300)
        props = solve_propagators(spec)
        for v_tt in props.v_diag:
            assert np.max(np.abs(v_tt - v_tt.conj().T)) < 1e-10
            assert np.min(np.linalg.eigvalsh(0.5 * (v_tt + v_tt.conj().T))) > -1e-8

    def test_saturates_to_thermal_occupation(self):
        # BM: v(t,t) -> n̄(ω'_c, T)(1 - e^{-2κt}); symmetric spec has ω'_c = ω_c.
        # The early transient carries a genuine non-Markovian deviation (~8%
        # at t = 10), so the approach is asserted from t = 20 on.
        spec = two_crow_spec(eta=0.5, temperature=5.0, t_end=40.0, n_steps=8000,
                             output_every=2000)
        props = solve_propagators(spec)
        kappa = kappa_markov(0.5)
        t = spec.grid.output_times
        bm = 64.9614 * (1.0 - np.exp(-2.0 * kappa * t))
        late = t >= 20.0
        dev = np.abs(props.v_diag[late, 0, 0].real - bm[late]) / bm[late]
        assert np.max(dev) < 0.03


class TestPropagatorSet:
    def test_columns_cached_and_consistent(self):
        spec = two_crow_spec(eta=0.5, temperature=5.0, t_end=2.0, n_steps=400,
                             output_every=100)
        props = solve_propagators(spec)
        col = props.v_column(400)
        assert props.v_column(400) is col
        assert np.array_equal(props.v_diag[-1], 0.5 * (col[400] + col[400].conj().T))

    def test_dyson_defect_small(self):
        spec = two_crow_spec(eta=1.0, t_end=5.0, n_steps=1000)
        kset = build_kernel_set(spec)
        u = solve_u(kset, spec.frequencies)
        defect = dyson_defect(u, kset, spec.frequencies)
        assert defect.max() < 10.0 * spec.grid.h**2


class TestGridConvergence:
    def test_second_order_on_field(self):
        # halving h shrinks the deviation from a quadruple-resolution
        # reference by at least 3.5x
        def field_at(n_steps):
            spec = two_crow_spec(eta=1.0, omega_d=9.5, t_end=4.0, n_steps=n_steps)
            kset = build_kernel_set(spec)
            u = solve_u(kset, spec.frequencies)
            y = solve_y(kset, spec.frequencies, spec.drive_vector(spec.grid.times))
            return u[:, 0, 0], y[:, 0]

        u1, y1 = field_at(400)
        u2, y2 = field_at(800)
        u4, y4 = field_at(1600)
        e1 = np.max(np.abs(u1 - u4[::4])) + np.max(np.abs(y1 - y4[::4]))
        e2 = np.max(np.abs(u2 - u4[::2])) + np.max(np.abs(y2 - y4[::2]))
        assert e1 / e2 >= 3.5
