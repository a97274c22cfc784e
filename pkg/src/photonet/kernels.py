"""Waveguide memory kernels on the simulation grid.

Two kernels per channel, both stationary (time-independent couplings):

* dissipation kernel  g(Δt)  = (1/2π) ∫ J(ω) e^{-iωΔt} dω
* noise kernel        g̃(Δt) = (1/2π) ∫ J(ω) n(ω,T) e^{-iωΔt} dω

For the semicircular band the dissipation kernel has the closed form
g(Δt) = ratio² ξ e^{-i ω₀ Δt} J₁(2ξΔt)/Δt  (J₁ = Bessel function of the
first kind), with g(0) = ratio² ξ².  The noise kernel has no closed form and
is integrated numerically over the compact band.  Negative lags follow from
Hermitian symmetry, g(-Δt) = g(Δt)†, and are never stored.

Kernels are precomputed once per run on every grid lag: the Volterra solver
touches every lag at every step, so recomputation would dominate runtime.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import quad
from scipy.special import j1

from .model import (
    DiscreteModes,
    NetworkSpec,
    SemicircleDensity,
    SpectralDensity,
    TabulatedDensity,
    evaluate_spectral_density,
    thermal_occupation,
)

QUAD_ABS_TOL = 1e-10
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _band(density: SpectralDensity) -> tuple[float, float]:
    if isinstance(density, (SemicircleDensity, TabulatedDensity)):
        return density.band
    raise TypeError("discrete-mode densities have no band")


def _n_panels(halfwidth: float, max_lag: float) -> int:
    # one panel per ~2 rad of phase across the band keeps 16-node Gauss exact
    return max(8, int(np.ceil(halfwidth * max_lag)) + 1)


def _bessel_envelope(x: NDArray) -> NDArray:
    """2·J₁(x)/x with the series branch below 1e-4 (value 1 at x = 0)."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x * x / 8.0, 2.0 * j1(safe) / safe)


def _adaptive_quadrature(density: SpectralDensity, dt: float, weight=None) -> complex:
    """Adaptive Gauss–Kronrod over the band, split into oscillation panels.

    Semicircle bands are integrated in the variable ω = center + 2ξ sin θ,
    which absorbs the square-root band edges and leaves an analytic
    integrand.
    """
    a, b = _band(density)
    panels = _n_panels(0.5 * (b - a), abs(dt))
    if isinstance(density, SemicircleDensity):
        xi = density.hopping

        def f(th, part):
            w = density.center + 2.0 * xi * np.sin(th)
            j = density.coupling_ratio**2 * (2.0 * xi * np.cos(th)) ** 2
            if weight is not None:
                j = j * weight(w)
            return j * part(-dt * w)

        edges = np.linspace(-np.pi / 2.0, np.pi / 2.0, panels + 1)
    else:

        def f(w, part):
            j = evaluate_spectral_density(density, w)
            if weight is not None:
                j = j * weight(w)
            return j * part(-dt * w)

        edges = np.linspace(a, b, panels + 1)

    total = 0.0 + 0.0j
    for lo, hi in zip(edges[:-1], edges[1:]):
        re = quad(f, lo, hi, args=(np.cos,), epsabs=QUAD_ABS_TOL, limit=200)[0]
        im = quad(f, lo, hi, args=(np.sin,), epsabs=QUAD_ABS_TOL, limit=200)[0]
        total += re + 1j * im
    return total / (2.0 * np.pi)


def _composite_gauss(lo: float, hi: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(lo, hi, panels + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mids[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return nodes, weights


def _band_rule(density: SpectralDensity, max_lag: float) -> tuple[np.ndarray, np.ndarray]:
    """Frequency nodes and weights carrying J(ω)dω over the band."""
    a, b = _band(density)
    panels = _n_panels(0.5 * (b - a), max_lag)
    if isinstance(density, SemicircleDensity):
        # ω = center + 2ξ sin θ turns the √ band edges into an analytic cos²
        th, w_th = _composite_gauss(-np.pi / 2.0, np.pi / 2.0, panels)
        xi = density.hopping
        nodes = density.center + 2.0 * xi * np.sin(th)
        weights = density.coupling_ratio**2 * (2.0 * xi * np.cos(th)) ** 2 * w_th
        return nodes, weights
    nodes, w = _composite_gauss(a, b, panels)
    return nodes, evaluate_spectral_density(density, nodes) * w


def _tabulate_band_integral(density: SpectralDensity, lags: np.ndarray, weight=None) -> np.ndarray:
    """(1/2π) ∫ J(ω) [weight(ω)] e^{-iωΔt} dω for every lag, composite Gauss."""
    nodes, jw = _band_rule(density, float(np.max(np.abs(lags))) if len(lags) else 0.0)
    if weight is not None:
        jw = jw * weight(nodes)
    out = np.empty(len(lags), dtype=complex)
    block = max(1, int(4e6 // max(len(nodes), 1)))  # bound the phase-matrix size
    for s in range(0, len(lags), block):
        phase = np.exp(-1j * np.outer(lags[s:s + block], nodes))
        out[s:s + block] = phase @ jw
    return out / (2.0 * np.pi)


def _check_nonneg_lag(dt: float):
    if dt < 0:
        raise ValueError("kernel lag must be >= 0; negative lags follow from g(-dt) = g(dt)^dag")


def _bose_weight(density: SpectralDensity, temperature: float):
    a, _ = _band(density)
    if a <= 0.0:
        raise ValueError(
            "noise kernel needs a band of strictly positive frequencies "
            f"(band starts at {a})"
        )
    return lambda w: thermal_occupation(w, temperature)


def tabulate_dissipation(density: SpectralDensity, lags) -> np.ndarray:
    """Scalar dissipation kernel g(Δt) on an array of lags Δt ≥ 0."""
    lags = np.asarray(lags, dtype=float)
    if len(lags) and float(np.min(lags)) < 0:
        raise ValueError("kernel lags must be >= 0")
    if isinstance(density, SemicircleDensity):
        xi, r = density.hopping, density.coupling_ratio
        return (r * r * xi * xi) * np.exp(-1j * density.center * lags) \
            * _bessel_envelope(2.0 * xi * lags)
    if isinstance(density, DiscreteModes):
        w2 = np.abs(density.couplings) ** 2
        return np.exp(-1j * np.outer(lags, density.frequencies)) @ w2
    return _tabulate_band_integral(density, lags)


def tabulate_noise(density: SpectralDensity, temperature: float, lags) -> np.ndarray:
    """Scalar noise kernel g̃(Δt) on an array of lags Δt ≥ 0; exactly 0 at T = 0."""
    lags = np.asarray(lags, dtype=float)
    if len(lags) and float(np.min(lags)) < 0:
        raise ValueError("kernel lags must be >= 0")
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    if temperature == 0.0:
        return np.zeros(len(lags), dtype=complex)
    if isinstance(density, DiscreteModes):
        w2 = np.abs(density.couplings) ** 2 * thermal_occupation(density.frequencies, temperature)
        return np.exp(-1j * np.outer(lags, density.frequencies)) @ w2
    return _tabulate_band_integral(density, lags, weight=_bose_weight(density, temperature))


def _lift(scalar: np.ndarray, coupling) -> np.ndarray:
    """Rank-1 lift of a scalar kernel to N×N: c_i conj(c_j) · g(Δt)."""
    c = np.asarray(coupling, dtype=complex)
    return scalar[:, None, None] * np.outer(c, c.conj())[None, :, :]


def dissipation_kernel(density: SpectralDensity, dt: float, coupling=None):
    """g(Δt) at a single lag; N×N when a coupling vector is given, else scalar.

    Semicircle densities use the Bessel closed form and discrete modes the
    finite sum; tabulated densities go through the composite band rule
    (their accuracy is limited by the tabulation itself).
    """
    _check_nonneg_lag(dt)
    val = complex(tabulate_dissipation(density, np.array([dt]))[0])
    if coupling is None:
        return val
    c = np.asarray(coupling, dtype=complex)
    return val * np.outer(c, c.conj())


def noise_kernel(density: SpectralDensity, temperature: float, dt: float, coupling=None):
    """g̃(Δt) at a single lag (thermally weighted); exactly 0 at T = 0.

    Continuum densities are integrated by adaptive Gauss–Kronrod panels over
    the band (the semicircle case after the θ substitution), except
    tabulated ones, which reuse the composite band rule.
    """
    _check_nonneg_lag(dt)
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    if temperature == 0.0:
        val = 0.0 + 0.0j
    elif isinstance(density, (DiscreteModes, TabulatedDensity)):
        val = complex(tabulate_noise(density, temperature, np.array([dt]))[0])
    else:
        val = _adaptive_quadrature(density, dt, weight=_bose_weight(density, temperature))
    if coupling is None:
        return val
    c = np.asarray(coupling, dtype=complex)
    return val * np.outer(c, c.conj())


@dataclass(frozen=True)
class ChannelKernels:
    """Tabulated kernels of one waveguide channel on the grid lags."""

    label: str
    dissipation: NDArray[np.complex128]  # (n_lags, N, N)
    noise: NDArray[np.complex128]        # (n_lags, N, N)


@dataclass(frozen=True)
class KernelSet:
    """Per-channel and total memory kernels tabulated on every grid lag.

    ``lags[k] = k*h``; negative lags are obtained by conj-transposing the
    stored positive-lag values.
    """

    lags: NDArray[np.float64]
    channels: tuple[ChannelKernels, ...]
    total_dissipation: NDArray[np.complex128]
    total_noise: NDArray[np.complex128]

    @property
    def dim(self) -> int:
        return self.total_dissipation.shape[1]


def build_kernel_set(spec: NetworkSpec) -> KernelSet:
    """Tabulate all channel kernels for a validated spec on its grid lags."""
    grid = spec.grid
    lags = grid.h * np.arange(grid.n_steps + 1)
    n = spec.dim
    channels = []
    total_g = np.zeros((len(lags), n, n), dtype=complex)
    total_gn = np.zeros((len(lags), n, n), dtype=complex)
    for wg in spec.waveguides:
        try:
            g = _lift(tabulate_dissipation(wg.density, lags), wg.coupling)
            gn = _lift(tabulate_noise(wg.density, wg.temperature, lags), wg.coupling)
        except ValueError as e:
            raise ValueError(f"kernel tabulation failed for channel {wg.label!r}: {e}") from e
        channels.append(ChannelKernels(label=wg.label, dissipation=g, noise=gn))
        total_g += g
        total_gn += gn
    return KernelSet(lags=lags, channels=tuple(channels),
                     total_dissipation=total_g, total_noise=total_gn)


def dump_kernels_csv(kset: KernelSet, path) -> None:
    """Debug dump: one row per (lag, channel, i, j) with both kernels."""
    n = kset.dim
    with open(path, "w", newline="\n") as fh:
        fh.write("dt,channel,i,j,re_g,im_g,re_gn,im_gn\n")
        for ch in kset.channels:
            for k, dt in enumerate(kset.lags):
                for i in range(n):
                    for j in range(n):
                        g = ch.dissipation[k, i, j]
                        gn = ch.noise[k, i, j]
                        fh.write(f"{dt:.17g},{ch.label},{i},{j},"
                                 f"{g.real:.17g},{g.imag:.17g},{gn.real:.17g},{gn.imag:.17g}\n")
