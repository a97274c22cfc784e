"""Shared builders and oracles for the test suite."""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad

from photonet import (
    FrequencyMatrix,
    MonochromaticDrive,
    NetworkSpec,
    SemicircleDensity,
    TimeGrid,
    WaveguideSpec,
)

OMEGA_C = 10.0
OMEGA_1 = 9.5
OMEGA_2 = 10.5
HOPPING = 0.3
AMPLITUDE = 10.0


def two_crow_spec(eta=0.5, omega_d=OMEGA_C, temperature=5.0, amplitude=AMPLITUDE,
                  t_end=40.0, n_steps=8000, output_every=80,
                  initial_field=0.0, initial_occupation=0.0) -> NetworkSpec:
    """Driven single cavity between two semicircular bands (the workhorse setup)."""
    drives = ()
    if amplitude:
        drives = (MonochromaticDrive(target=0, amplitude=amplitude, frequency=omega_d),)
    return NetworkSpec(
        frequencies=FrequencyMatrix.single_mode(OMEGA_C),
        drives=drives,
        waveguides=(
            WaveguideSpec("crow1", SemicircleDensity(OMEGA_1, HOPPING, eta), [1.0], temperature),
            WaveguideSpec("crow2", SemicircleDensity(OMEGA_2, HOPPING, eta), [1.0], temperature),
        ),
        initial_field=np.array([initial_field], dtype=complex),
        initial_occupation=np.array([[initial_occupation]], dtype=complex),
        grid=TimeGrid(t0=0.0, t_end=t_end, n_steps=n_steps, output_every=output_every),
    )


def kernel_quadrature_oracle(density, dt: float) -> complex:
    """(1/2π)∫ J(ω) e^{-iωΔt} dω by adaptive quadrature, independent of the package."""
    from photonet import evaluate_spectral_density
    a, b = density.band
    panels = max(8, int(np.ceil((b - a) * abs(dt) / 2.0)) + 1)
    edges = np.linspace(a, b, panels + 1)
    total = 0.0 + 0.0j
    for lo, hi in zip(edges[:-1], edges[1:]):
        re = quad(lambda w: evaluate_spectral_density(density, w) * np.cos(w * dt),
                  lo, hi, epsabs=1e-12, limit=300)[0]
        im = quad(lambda w: evaluate_spectral_density(density, w) * np.sin(w * dt),
                  lo, hi, epsabs=1e-12, limit=300)[0]
        total += re - 1j * im
    return total / (2.0 * np.pi)


def semicircle_pv_closed_form(density: SemicircleDensity, pole: float) -> float:
    """Hilbert transform of the semicircle: P∫dω/2π J/(pole-ω) in closed form."""
    x = pole - density.center
    a = 2.0 * density.hopping
    r2 = density.coupling_ratio ** 2
    if abs(x) <= a:
        return r2 * x / 2.0
    return r2 * (x - np.sign(x) * np.sqrt(x * x - a * a)) / 2.0


def kappa_markov(eta: float) -> float:
    """Weak-coupling damping rate of the symmetric two-band setup at ω_c = 10."""
    j_at_wc = eta * eta * np.sqrt(4 * HOPPING**2 - (OMEGA_C - OMEGA_1) ** 2)
    return j_at_wc  # two identical channels, each J(ω_c)/2


def chain_diagonalization_u(eta: float, times, sites: int = 400) -> np.ndarray:
    """Exact |single-mode u(t)| oracle: diagonalize cavity + two finite chains.

    The semicircular density is the infinite-chain limit of a nearest-
    neighbour tight-binding chain end-coupled to the cavity, so a long
    finite chain reproduces u(t) until the recurrence time ~ sites/hopping.
    """
    dim = 1 + 2 * sites
    h_mat = np.zeros((dim, dim))
    h_mat[0, 0] = OMEGA_C
    for block, center in enumerate((OMEGA_1, OMEGA_2)):
        off = 1 + block * sites
        for m in range(sites):
            h_mat[off + m, off + m] = center
            if m + 1 < sites:
                h_mat[off + m, off + m + 1] = h_mat[off + m + 1, off + m] = -HOPPING
        h_mat[0, off] = h_mat[off, 0] = eta * HOPPING
    evals, evecs = np.linalg.eigh(h_mat)
    weights = np.abs(evecs[0, :]) ** 2
    return np.array([np.sum(weights * np.exp(-1j * evals * t)) for t in np.asarray(times)])
