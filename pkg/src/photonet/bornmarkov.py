"""Closed-form weak-coupling (Born–Markov) solutions for a single driven mode.

Serves two roles: an analytic oracle for the exact Volterra pipeline in the
weak-coupling regime, and a fast preview mode.  Scope is exactly the regime
where the closed forms are derived: one resonator mode (N = 1), any number of
waveguides, one monochromatic drive (or none), empty initial cavity.

With Δ = t - t0 and per-channel shifts/rates

    δω_α  = P∫ dω/2π J_α(ω)/(ω_c - ω)       κ_α  = J_α(ω_c)/2
    δω̃_α  = P∫ dω/2π J_α(ω)/(ω_d - ω)       κ̃_α  = J_α(ω_d)/2

(ω'_c = ω_c + Σδω_α, ω̃_c = ω_c + Σδω̃_α, κ = Σκ_α, κ̃ = Σκ̃_α) the closed forms
are

    u(t,t0)  ≈ e^{-(iω'_c + κ)Δ}
    v(t,t)   ≈ n̄(ω'_c,T) [1 - e^{-2κΔ}]          n̄ = Σ_α J_α(ω'_c) n_α(ω'_c) / 2κ
    ⟨a(t)⟩   ≈ E0' e^{-iφ} [e^{-iω_d Δ} - e^{-(iω'_c+κ)Δ}]
    n(t)     ≈ v(t,t) + E0'² [1 + e^{-2κΔ} - 2 e^{-κΔ} cos((ω_d-ω'_c)Δ)]

with the amplified amplitude E0' = E0/√((ω_d-ω̃_c)² + κ̃²) and phase
φ = atan2(κ̃, ω_d-ω̃_c).  The photocurrent and source closed forms below
satisfy dn/dt = S - ΣI_α identically; the sign of the cos term in S is fixed
by S(t0) = 0 (the cavity starts empty, so the drive cannot do work at t0).

Principal-value integrals use symmetric excision with an ε → 0 Richardson
step; when the pole lies outside the band the integral is regular and plain
adaptive quadrature is used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .model import (
    DiscreteModes,
    MonochromaticDrive,
    NetworkSpec,
    SpectralDensity,
    evaluate_spectral_density,
    thermal_occupation,
)
from .transport import TransportTrace


class UnsupportedConfigurationError(ValueError):
    """The closed forms only cover N = 1, monochromatic drive, empty cavity."""


def principal_value_shift(density: SpectralDensity, pole: float) -> float:
    """P∫ dω/2π J(ω)/(pole - ω) over the band of a continuum density."""
    if isinstance(density, DiscreteModes):
        raise UnsupportedConfigurationError("discrete-mode densities have no principal value")
    a, b = density.band

    def f(w):
        return evaluate_spectral_density(density, w) / (pole - w)

    if not a < pole < b:
        val = quad(f, a, b, epsabs=1e-12, epsrel=1e-11, limit=400)[0]
        return val / (2.0 * np.pi)

    def excised(eps):
        left = quad(f, a, pole - eps, epsabs=1e-12, epsrel=1e-11, limit=400)[0]
        right = quad(f, pole + eps, b, epsabs=1e-12, epsrel=1e-11, limit=400)[0]
        return left + right

    eps = 1e-3 * (b - a)
    # symmetric excision errs linearly in eps; one Richardson step removes it
    val = 2.0 * excised(eps) - excised(2.0 * eps)
    return val / (2.0 * np.pi)


@dataclass(frozen=True)
class BMParameters:
    """All constants entering the Born–Markov closed forms."""

    omega_c: float
    omega_d: float
    amplitude: float
    phase: float
    t0: float
    channel_labels: tuple[str, ...]
    delta_omega: tuple[float, ...]        # per-channel shift at ω_c
    kappa_channels: tuple[float, ...]     # per-channel J_α(ω_c)/2
    delta_omega_drive: tuple[float, ...]  # per-channel shift at ω_d
    kappa_drive_channels: tuple[float, ...]
    nbar: float
    kappa: float
    omega_c_shifted: float        # ω'_c
    kappa_drive: float            # κ̃
    omega_c_drive_shifted: float  # ω̃_c
    phi: float
    amplitude_gain: float         # E0'


def bm_parameters(spec: NetworkSpec) -> BMParameters:
    """Evaluate all Born–Markov constants for an N = 1 spec."""
    if spec.dim != 1:
        raise UnsupportedConfigurationError(
            f"Born–Markov closed forms are single-mode; spec has N = {spec.dim}")
    if np.any(spec.initial_field != 0) or np.any(spec.initial_occupation != 0):
        raise UnsupportedConfigurationError(
            "Born–Markov closed forms assume an initially empty cavity")
    omega_c = float(spec.frequencies.matrix[0, 0].real)
    if len(spec.drives) == 0:
        amplitude, omega_d, phase = 0.0, omega_c, 0.0
    elif len(spec.drives) == 1 and isinstance(spec.drives[0], MonochromaticDrive):
        d = spec.drives[0]
        amplitude, omega_d, phase = d.amplitude, d.frequency, d.phase
    else:
        raise UnsupportedConfigurationError(
            "Born–Markov closed forms need a single monochromatic drive (or none)")

    labels, d_om, kap, d_om_d, kap_d = [], [], [], [], []
    nbar_num = 0.0
    for wg in spec.waveguides:
        weight = float(abs(wg.coupling[0]) ** 2)
        labels.append(wg.label)
        d_om.append(weight * principal_value_shift(wg.density, omega_c))
        kap.append(weight * float(evaluate_spectral_density(wg.density, omega_c)) / 2.0)
        d_om_d.append(weight * principal_value_shift(wg.density, omega_d))
        kap_d.append(weight * float(evaluate_spectral_density(wg.density, omega_d)) / 2.0)
    kappa = float(sum(kap))
    omega_c_shifted = omega_c + float(sum(d_om))
    for wg in spec.waveguides:
        weight = float(abs(wg.coupling[0]) ** 2)
        j_at = weight * float(evaluate_spectral_density(wg.density, omega_c_shifted))
        nbar_num += j_at * float(thermal_occupation(omega_c_shifted, wg.temperature))
    nbar = nbar_num / (2.0 * kappa) if kappa > 0 else 0.0
    kappa_drive = float(sum(kap_d))
    omega_tilde = omega_c + float(sum(d_om_d))
    detuning = omega_d - omega_tilde
    denom = np.hypot(detuning, kappa_drive)
    return BMParameters(
        omega_c=omega_c, omega_d=omega_d, amplitude=amplitude, phase=phase,
        t0=spec.grid.t0, channel_labels=tuple(labels),
        delta_omega=tuple(d_om), kappa_channels=tuple(kap),
        delta_omega_drive=tuple(d_om_d), kappa_drive_channels=tuple(kap_d),
        nbar=nbar, kappa=kappa, omega_c_shifted=omega_c_shifted,
        kappa_drive=kappa_drive, omega_c_drive_shifted=omega_tilde,
        phi=float(np.arctan2(kappa_drive, detuning)),
        amplitude_gain=float(amplitude / denom) if denom > 0 else np.inf,
    )


def bm_propagator(p: BMParameters, t):
    """u(t, t0) ≈ e^{-(iω'_c + κ)(t-t0)}."""
    dt = np.asarray(t, dtype=float) - p.t0
    return np.exp(-(1j * p.omega_c_shifted + p.kappa) * dt)


def bm_observables(p: BMParameters, t):
    """(⟨a(t)⟩, n(t), v(t,t)) in the Born–Markov limit."""
    dt = np.asarray(t, dtype=float) - p.t0
    decay = np.exp(-p.kappa * dt)
    v_tt = p.nbar * (1.0 - decay**2)
    beats = (p.omega_d - p.omega_c_shifted) * dt
    field = (p.amplitude_gain * np.exp(1j * (p.phase - p.phi))
             * (np.exp(-1j * p.omega_d * dt)
                - np.exp(-(1j * p.omega_c_shifted + p.kappa) * dt)))
    n = v_tt + p.amplitude_gain**2 * (1.0 + decay**2 - 2.0 * decay * np.cos(beats))
    return field, n, v_tt


def bm_photocurrent(p: BMParameters, t) -> np.ndarray:
    """I_α(t) per channel in the Born–Markov limit; shape (M,) + t.shape."""
    dt = np.asarray(t, dtype=float) - p.t0
    decay = np.exp(-p.kappa * dt)
    beats = (p.omega_d - p.omega_c_shifted) * dt
    cos_b, sin_b = np.cos(beats), np.sin(beats)
    gain2 = 0.0 if p.amplitude == 0.0 else p.amplitude_gain**2
    out = []
    for ka, kd, do, dod in zip(p.kappa_channels, p.kappa_drive_channels,
                               p.delta_omega, p.delta_omega_drive):
        thermal = -2.0 * ka * p.nbar * decay**2
        driven = 2.0 * gain2 * (kd + ka * decay**2
                                - (ka + kd) * decay * cos_b
                                + (do - dod) * decay * sin_b)
        out.append(thermal + driven)
    return np.array(out)


def bm_source(p: BMParameters, t):
    """Drive source S(t) in the Born–Markov limit (S(t0) = 0 exactly)."""
    dt = np.asarray(t, dtype=float) - p.t0
    decay = np.exp(-p.kappa * dt)
    beats = (p.omega_d - p.omega_c_shifted) * dt
    gain2 = 0.0 if p.amplitude == 0.0 else p.amplitude_gain**2
    return 2.0 * gain2 * (p.kappa_drive * (1.0 - decay * np.cos(beats))
                          + (p.omega_d - p.omega_c_drive_shifted) * decay * np.sin(beats))


def bm_dn_dt(p: BMParameters, t):
    """Exact time derivative of the Born–Markov photon number."""
    dt = np.asarray(t, dtype=float) - p.t0
    decay = np.exp(-p.kappa * dt)
    beats = (p.omega_d - p.omega_c_shifted) * dt
    gain2 = 0.0 if p.amplitude == 0.0 else p.amplitude_gain**2
    return (2.0 * p.kappa * p.nbar * decay**2
            + 2.0 * gain2 * (-p.kappa * decay**2 + p.kappa * decay * np.cos(beats)
                             + (p.omega_d - p.omega_c_shifted) * decay * np.sin(beats)))


def isolated_cavity_field(omega_c: float, amplitude: float, omega_d: float, t, t0: float):
    """Driving-induced field of a fully decoupled cavity (exact, not BM).

    Off resonance the drive beats against the cavity mode at the detuning;
    on resonance the amplitude grows linearly without oscillation.
    """
    dt = np.asarray(t, dtype=float) - t0
    if omega_d == omega_c:
        return amplitude * dt * np.exp(-1j * (omega_c * dt + np.pi / 2.0))
    return (amplitude / (omega_d - omega_c)
            * (np.exp(-1j * omega_d * dt) - np.exp(-1j * omega_c * dt)))


def bm_trace(spec: NetworkSpec, params: BMParameters | None = None) -> TransportTrace:
    """Born–Markov observables on the spec's output grid, trace-compatible.

    The residual column uses the exact closed-form derivative, so it is zero
    to rounding — a self-contained consistency check of the closed forms.
    """
    p = bm_parameters(spec) if params is None else params
    times = spec.grid.output_times
    field, n, v_tt = bm_observables(p, times)
    currents = bm_photocurrent(p, times).T
    src = bm_source(p, times)
    dn = bm_dn_dt(p, times)
    residual = np.abs(dn - src + currents.sum(axis=1))
    n_out = len(times)
    return TransportTrace(
        times=times, channel_labels=p.channel_labels,
        field=field[:, None], occupation=n[:, None, None].astype(complex),
        photon_numbers=n[:, None], thermal_occupancy=v_tt[:, None],
        currents=currents,
        current_matrices=currents[:, :, None, None].astype(complex),
        source=src, total_photons=n, dn_dt=dn, residual=residual,
        derivative_flagged=np.zeros(n_out, dtype=bool),
    )
