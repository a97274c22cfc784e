"""Time-dependent master-equation coefficients extracted from the propagators.

Per channel α at time t (all integrals from t0 to t, trapezoidal on the
solver grid):

    κ_α(t) = [∫ g_α(t-τ) u(τ,t0) dτ] u(t,t0)^{-1}
    λ_α(t) = ∫ [g̃_α(t-τ) ū(τ,t) - g_α(t-τ) v(τ,t)] dτ + κ_α(t) v(t,t)
    f_α(t) = i κ_α(t) y(t) - i ∫ g_α(t-τ) y(τ) dτ

and the totals

    ω'(t) = ω - (i/2) Σ_α [κ_α - κ_α†]        (Hermitian by construction)
    γ(t)  = (1/2) Σ_α [κ_α + κ_α†]            (dissipation)
    γ̃(t)  = Σ_α [λ_α + λ_α†]                  (noise)
    f'(t) = f(t) + Σ_α f_α(t)                 (feed-back-shifted drive)

u^{-1} is applied through an LU-factored linear solve with condition
monitoring: whenever cond(u) exceeds ``COND_LIMIT`` (strong-coupling
oscillations can drive |u| through zero) the time point is flagged and its
coefficients are reported as NaN rather than extrapolated.  No downstream
observable needs the coefficients — observables come from u, v, y directly —
so flagged points only affect this diagnostic trace.

Coefficients are evaluated only at output-subsampled times: each evaluation
costs one O(n) memory integral per channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .dynamics import PropagatorSet
from .kernels import KernelSet
from .model import NetworkSpec

COND_LIMIT = 1e8


class SingularPropagatorError(RuntimeError):
    def __init__(self, t: float, cond: float):
        super().__init__(
            f"u(t,t0) is numerically singular at t = {t} (condition number {cond:.3g})"
        )
        self.t = t


def lag_weighted_integral(lag_mats: np.ndarray, series: np.ndarray, k: int, h: float) -> np.ndarray:
    """h Σ''_j lag_mats[k-j] @ series[j] over j = 0..k (trapezoid half end weights)."""
    if k == 0:
        shape = (lag_mats.shape[1], series.shape[2])
        return np.zeros(shape, dtype=complex)
    w = np.ones(k + 1)
    w[0] = w[-1] = 0.5
    return h * np.tensordot(lag_mats[k::-1] * w[:, None, None], series[:k + 1],
                            axes=([0, 2], [0, 1]))


def _u_inverse_apply(a: np.ndarray, u_k: np.ndarray, t: float) -> np.ndarray:
    """A u_k^{-1} via a linear solve; raises when u_k is near-singular.

    Both a large condition number and a tiny smallest singular value are
    rejected: u starts at the identity and ‖u‖ ≤ 1, so σ_min → 0 is the
    signature of u passing through a zero (where the coefficients genuinely
    diverge), even though a 1×1 u always has condition number 1.
    """
    sv = np.linalg.svd(u_k, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if not np.isfinite(cond) or cond > COND_LIMIT or sv[-1] < 1.0 / COND_LIMIT:
        raise SingularPropagatorError(t, cond)
    return np.linalg.solve(u_k.T, a.T).T


def compute_kappa(kernels: KernelSet, props: PropagatorSet, k: int) -> np.ndarray:
    """κ_α(t_k) for every channel, shape (M, N, N)."""
    h = props.grid.h
    t = props.grid.t0 + k * h
    u_k = props.u[k]
    out = np.empty((len(kernels.channels), props.dim, props.dim), dtype=complex)
    for a, ch in enumerate(kernels.channels):
        integral = lag_weighted_integral(ch.dissipation, props.u, k, h)
        out[a] = _u_inverse_apply(integral, u_k, t)
    return out


def compute_lambda(kernels: KernelSet, props: PropagatorSet, k: int,
                   kappa: np.ndarray | None = None) -> np.ndarray:
    """λ_α(t_k) for every channel, shape (M, N, N).

    The sign convention is fixed by the noise-sector identity of the
    undriven master equation, d v(t,t)/dt = -i[ω, v] - κ v - v κ† + γ̃ with
    γ̃ = Σ_α (λ_α + λ_α†): the integral term must enter as ∫ g̃ ū - ∫ g v
    (thermal influx minus dissipative outflux) so that γ̃ settles on the
    detailed-balance plateau 2κ n̄ > 0.
    """
    h = props.grid.h
    if kappa is None:
        kappa = compute_kappa(kernels, props, k)
    v_col = props.v_column(k)
    ubar = props.ubar_column(k)
    v_tt = props.v_at(k)
    out = np.empty_like(kappa)
    for a, ch in enumerate(kernels.channels):
        term = lag_weighted_integral(ch.noise, ubar, k, h) \
            - lag_weighted_integral(ch.dissipation, v_col, k, h)
        out[a] = term + kappa[a] @ v_tt
    return out


def compute_drive_shift(kernels: KernelSet, props: PropagatorSet, k: int,
                        drive_at_k: np.ndarray,
                        kappa: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel feed-back fields f_α(t_k) and the total f'(t_k)."""
    h = props.grid.h
    if kappa is None:
        kappa = compute_kappa(kernels, props, k)
    y_series = props.y[:, :, None]
    y_k = props.y[k]
    f_ch = np.empty((len(kernels.channels), props.dim), dtype=complex)
    for a, ch in enumerate(kernels.channels):
        integral = lag_weighted_integral(ch.dissipation, y_series, k, h)[:, 0]
        f_ch[a] = 1j * (kappa[a] @ y_k) - 1j * integral
    return f_ch, np.asarray(drive_at_k, dtype=complex) + f_ch.sum(axis=0)


@dataclass(frozen=True)
class CoefficientTrace:
    """Master-equation coefficients at the output times.

    ``singular`` marks times where u(t,t0) was too ill-conditioned to invert;
    their rows are NaN.  γ, γ̃ and ω' are Hermitian by construction; entries
    of γ may go transiently negative in non-Markovian regimes, which is
    reported, not asserted against.
    """

    times: NDArray[np.float64]
    channel_labels: tuple[str, ...]
    kappa: NDArray[np.complex128]          # (n_out, M, N, N)
    lam: NDArray[np.complex128]            # (n_out, M, N, N)
    f_channel: NDArray[np.complex128]      # (n_out, M, N)
    omega_shifted: NDArray[np.complex128]  # (n_out, N, N)
    gamma: NDArray[np.complex128]          # (n_out, N, N)
    gamma_noise: NDArray[np.complex128]    # (n_out, N, N)
    f_shifted: NDArray[np.complex128]      # (n_out, N)
    singular: NDArray[np.bool_]


def coefficient_trace(spec: NetworkSpec, kernels: KernelSet,
                      props: PropagatorSet) -> CoefficientTrace:
    """Evaluate all coefficients at every output time of the grid."""
    grid = spec.grid
    idx = props.output_indices
    n, m = spec.dim, len(kernels.channels)
    times = grid.t0 + grid.h * idx
    f_grid = spec.drive_vector(times)
    omega = spec.frequencies.matrix

    kappa = np.full((len(idx), m, n, n), np.nan, dtype=complex)
    lam = np.full((len(idx), m, n, n), np.nan, dtype=complex)
    f_ch = np.full((len(idx), m, n), np.nan, dtype=complex)
    om_s = np.full((len(idx), n, n), np.nan, dtype=complex)
    gam = np.full((len(idx), n, n), np.nan, dtype=complex)
    gam_n = np.full((len(idx), n, n), np.nan, dtype=complex)
    f_s = np.full((len(idx), n), np.nan, dtype=complex)
    singular = np.zeros(len(idx), dtype=bool)

    for i, k in enumerate(idx):
        k = int(k)
        try:
            kap = compute_kappa(kernels, props, k)
        except SingularPropagatorError:
            singular[i] = True
            continue
        kappa[i] = kap
        lam[i] = compute_lambda(kernels, props, k, kappa=kap)
        f_ch[i], f_s[i] = compute_drive_shift(kernels, props, k, f_grid[i], kappa=kap)
        kap_h = kap.conj().transpose(0, 2, 1)
        lam_h = lam[i].conj().transpose(0, 2, 1)
        om_s[i] = omega - 0.5j * (kap - kap_h).sum(axis=0)
        gam[i] = 0.5 * (kap + kap_h).sum(axis=0)
        gam_n[i] = (lam[i] + lam_h).sum(axis=0)

    return CoefficientTrace(
        times=times, channel_labels=tuple(ch.label for ch in kernels.channels),
        kappa=kappa, lam=lam, f_channel=f_ch,
        omega_shifted=om_s, gamma=gam, gamma_noise=gam_n, f_shifted=f_s,
        singular=singular,
    )


def dump_coefficients_csv(trace: CoefficientTrace, path) -> None:
    """One row per (time, channel) plus a 'total' row per time.

    Channel rows fill the kappa/lambda/f groups; the total row fills the
    gamma/gamma_noise/omega_shifted/f_shifted groups; the other cells stay
    blank.
    """
    n = trace.gamma.shape[1]
    ij = [(i, j) for i in range(n) for j in range(n)]

    def mat_cols(name):
        return [f"{w}_{name}_{i}{j}" for w in ("re", "im") for i, j in ij]

    def vec_cols(name):
        return [f"{w}_{name}_{i}" for w in ("re", "im") for i in range(n)]

    def mat_cells(mat):
        return [f"{w(mat[i, j]):.17g}" for w in (np.real, np.imag) for i, j in ij]

    def vec_cells(vec):
        return [f"{w(vec[i]):.17g}" for w in (np.real, np.imag) for i in range(n)]

    blank_mat = [""] * (2 * len(ij))
    blank_vec = [""] * (2 * n)
    with open(path, "w", newline="\n") as fh:
        head = (["t", "channel", "singular"]
                + mat_cols("kappa") + mat_cols("lambda") + vec_cols("f")
                + mat_cols("gamma") + mat_cols("gamma_noise") + mat_cols("omega_shifted")
                + vec_cols("f_shifted"))
        fh.write(",".join(head) + "\n")
        for s, t in enumerate(trace.times):
            prefix = [f"{t:.17g}"]
            flag = str(int(trace.singular[s]))
            for a, lbl in enumerate(trace.channel_labels):
                cells = (prefix + [lbl, flag]
                         + mat_cells(trace.kappa[s, a]) + mat_cells(trace.lam[s, a])
                         + vec_cells(trace.f_channel[s, a])
                         + blank_mat + blank_mat + blank_mat + blank_vec)
                fh.write(",".join(cells) + "\n")
            cells = (prefix + ["total", flag]
                     + blank_mat + blank_mat + blank_vec
                     + mat_cells(trace.gamma[s]) + mat_cells(trace.gamma_noise[s])
                     + mat_cells(trace.omega_shifted[s]) + vec_cells(trace.f_shifted[s]))
            fh.write(",".join(cells) + "\n")
