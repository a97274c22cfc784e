"""Physical observables and transport quantities of the driven network.

Everything is assembled from the solved propagators:

    ⟨a(t)⟩        = u(t,t0) ⟨a(t0)⟩ + y(t)
    ρ(t)          = u ρ0 u† + v(t,t) + ⟨a⟩y† + y⟨a†⟩ - y y†
    ρ(τ,t)        = u(τ)ρ0 u(t)† + v(τ,t) + y(τ)y(t)† + u(τ)⟨a0⟩y(t)† + y(τ)⟨a0†⟩u(t)†
    𝓘_α(t)        = ∫ [g_α(t-τ) ρ(τ,t) - g̃_α(t-τ) ū(τ,t)] dτ + h.c.
    I_α(t)        = Re Tr 𝓘_α(t)
    S(t)          = 2 Im Tr[f(t) ⟨a†(t)⟩]

Sign convention: positive I_α is photon flow from the resonators into
waveguide α, so photon-number bookkeeping closes as dN/dt = S - Σ_α I_α.
The continuity residual of that balance (dN/dt by centered differences on
the output grid) is the strongest end-to-end consistency check in the
package and is carried in every trace.

The equal-time reduction ρ(t,t) = ρ(t) holds algebraically: the cross terms
of the two expressions differ by y y† exactly.  ρ(τ,t) doubles as the lesser
Green function and u, ū as retarded/advanced ones; see the *_green views.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .coefficients import lag_weighted_integral
from .dynamics import PropagatorSet
from .kernels import KernelSet
from .model import NetworkSpec


def cavity_field(props: PropagatorSet, spec: NetworkSpec, k: int) -> np.ndarray:
    """⟨a(t_k)⟩, shape (N,)."""
    return props.u[k] @ spec.initial_field + props.y[k]


def occupation(props: PropagatorSet, spec: NetworkSpec, k: int,
               v_tt: np.ndarray | None = None) -> np.ndarray:
    """Single-particle density matrix ρ(t_k), shape (N, N)."""
    if v_tt is None:
        v_tt = props.v_at(k)
    u_k = props.u[k]
    y_k = props.y[k]
    a_t = u_k @ spec.initial_field + y_k
    return (u_k @ spec.initial_occupation @ u_k.conj().T + v_tt
            + np.outer(a_t, y_k.conj()) + np.outer(y_k, a_t.conj())
            - np.outer(y_k, y_k.conj()))


def _correlation_column(props: PropagatorSet, spec: NetworkSpec, k: int,
                        v_col: np.ndarray) -> np.ndarray:
    """ρ(τ_j, t_k) for j = 0..k, shape (k+1, N, N)."""
    u_k = props.u[k]
    y_k = props.y[k]
    u_slice = props.u[:k + 1]
    y_slice = props.y[:k + 1]
    a0 = spec.initial_field
    field_slice = u_slice @ a0 + y_slice
    rho0_ut = spec.initial_occupation @ u_k.conj().T
    ua0_k = (u_k @ a0).conj()
    return (u_slice @ rho0_ut + v_col
            + field_slice[:, :, None] * y_k.conj()[None, None, :]
            + y_slice[:, :, None] * ua0_k[None, None, :])


def generalized_correlation(props: PropagatorSet, spec: NetworkSpec,
                            tau_idx: int, t_idx: int) -> np.ndarray:
    """Two-time correlation ρ(τ, t) for grid indices tau_idx ≤ t_idx."""
    if tau_idx > t_idx:
        raise ValueError(f"need tau <= t, got indices {tau_idx} > {t_idx}")
    v_col = props.v_column(t_idx)
    return _correlation_column(props, spec, t_idx, v_col)[tau_idx]


def photocurrent(kernels: KernelSet, props: PropagatorSet, spec: NetworkSpec,
                 k: int) -> tuple[np.ndarray, np.ndarray]:
    """(I_α(t_k), 𝓘_α(t_k)) for every channel: shapes (M,), (M, N, N)."""
    h = props.grid.h
    v_col = props.v_column(k)
    ubar = props.ubar_column(k)
    rho_col = _correlation_column(props, spec, k, v_col)
    m = len(kernels.channels)
    mats = np.empty((m, props.dim, props.dim), dtype=complex)
    for a, ch in enumerate(kernels.channels):
        x = lag_weighted_integral(ch.dissipation, rho_col, k, h) \
            - lag_weighted_integral(ch.noise, ubar, k, h)
        mats[a] = x + x.conj().T
    currents = np.real(np.trace(mats, axis1=1, axis2=2))
    return currents, mats


def drive_source(spec: NetworkSpec, field_t: np.ndarray, t: float) -> float:
    """S(t) = 2 Im Tr[f(t) ⟨a†(t)⟩], the photon injection rate of the drives."""
    f_t = spec.drive_vector(t)
    return 2.0 * float(np.imag(np.sum(f_t * field_t.conj())))


def output_grid_derivative(values: np.ndarray, h_out: float) -> tuple[np.ndarray, np.ndarray]:
    """Centered differences on the output grid; one-sided at the ends, flagged.

    Interior points use the 5-point 4th-order stencil where available so the
    differentiation error stays well below the solver error; the first and
    last points fall back to 2nd-order one-sided stencils and are flagged.
    """
    n = len(values)
    d = np.empty(n, dtype=float)
    flagged = np.zeros(n, dtype=bool)
    if n < 2:
        flagged[:] = True
        d[:] = 0.0
        return d, flagged
    v = values
    if n >= 5:
        d[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h_out)
    if n >= 3:
        d[1] = (v[2] - v[0]) / (2 * h_out)
        d[-2] = (v[-1] - v[-3]) / (2 * h_out)
        d[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h_out)
        d[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h_out)
    else:
        d[0] = d[1] = (v[1] - v[0]) / h_out
    flagged[0] = flagged[-1] = True
    if n >= 4:
        flagged[1] = flagged[-2] = True  # 2nd-order stencil, lower accuracy
    return d, flagged


@dataclass(frozen=True)
class TransportTrace:
    """All observables at the output times, plus the continuity balance."""

    times: NDArray[np.float64]
    channel_labels: tuple[str, ...]
    field: NDArray[np.complex128]             # (n_out, N)
    occupation: NDArray[np.complex128]        # (n_out, N, N)
    photon_numbers: NDArray[np.float64]       # (n_out, N)
    thermal_occupancy: NDArray[np.float64]    # (n_out, N), Re diag v(t,t)
    currents: NDArray[np.float64]             # (n_out, M)
    current_matrices: NDArray[np.complex128]  # (n_out, M, N, N)
    source: NDArray[np.float64]               # (n_out,)
    total_photons: NDArray[np.float64]        # (n_out,)
    dn_dt: NDArray[np.float64]                # (n_out,)
    residual: NDArray[np.float64]             # (n_out,)
    derivative_flagged: NDArray[np.bool_]     # (n_out,) low-order stencil marker


def transport_trace(spec: NetworkSpec, kernels: KernelSet,
                    props: PropagatorSet) -> TransportTrace:
    """Evaluate fields, occupations, currents, source and continuity residual."""
    grid = spec.grid
    idx = props.output_indices
    times = grid.t0 + grid.h * idx
    n, m = spec.dim, len(kernels.channels)
    n_out = len(idx)

    field = np.empty((n_out, n), dtype=complex)
    occ = np.empty((n_out, n, n), dtype=complex)
    cur = np.empty((n_out, m))
    cur_m = np.empty((n_out, m, n, n), dtype=complex)
    src = np.empty(n_out)

    for i, k in enumerate(idx):
        k = int(k)
        field[i] = cavity_field(props, spec, k)
        occ[i] = occupation(props, spec, k, v_tt=props.v_diag[i])
        cur[i], cur_m[i] = photocurrent(kernels, props, spec, k)
        src[i] = drive_source(spec, field[i], times[i])

    photon_numbers = np.real(np.diagonal(occ, axis1=1, axis2=2)).copy()
    thermal = np.real(np.diagonal(props.v_diag, axis1=1, axis2=2)).copy()
    total = photon_numbers.sum(axis=1)
    h_out = grid.h * grid.output_every
    dn_dt, flagged = output_grid_derivative(total, h_out)
    residual = np.abs(dn_dt - src + cur.sum(axis=1))

    return TransportTrace(
        times=times, channel_labels=tuple(ch.label for ch in kernels.channels),
        field=field, occupation=occ, photon_numbers=photon_numbers,
        thermal_occupancy=thermal,
        currents=cur, current_matrices=cur_m, source=src, total_photons=total,
        dn_dt=dn_dt, residual=residual, derivative_flagged=flagged,
    )


# --- nonequilibrium Green function views ---------------------------------------
#
# The propagators are the Green functions up to factors of i: these views are
# exact aliases (multiplication by ±i only), not recomputations.

def retarded_green(props: PropagatorSet) -> np.ndarray:
    """G^r(t_k, t0) = -i u(t_k, t0)."""
    return -1j * props.u


def advanced_green(props: PropagatorSet, k: int) -> np.ndarray:
    """G^a(τ_j, t_k) = i ū(τ_j, t_k) for j = 0..k."""
    return 1j * props.ubar_column(k)


def lesser_green(props: PropagatorSet, spec: NetworkSpec, tau_idx: int, t_idx: int) -> np.ndarray:
    """G^<(τ, t) = i ρ(τ, t)."""
    return 1j * generalized_correlation(props, spec, tau_idx, t_idx)


TRACE_SCHEMA_VERSION = "photonet-trace v1"


def trace_column_names(n_modes: int, channel_labels: tuple[str, ...]) -> list[str]:
    cols = ["t"]
    cols += [f"{w}_a_{i}" for i in range(n_modes) for w in ("re", "im")]
    cols += [f"n_{i}" for i in range(n_modes)]
    cols += [f"v_{i}" for i in range(n_modes)]
    cols += [f"I_{lbl}" for lbl in channel_labels]
    cols += ["S", "total_n", "residual", "deriv_flag", "method"]
    return cols


def dump_transport_csv(trace: TransportTrace, path, method: str = "exact") -> None:
    """Write the primary output CSV (17 significant digits, LF endings)."""
    n = trace.field.shape[1]
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# {TRACE_SCHEMA_VERSION}\n")
        fh.write(",".join(trace_column_names(n, trace.channel_labels)) + "\n")
        for s in range(len(trace.times)):
            cells = [f"{trace.times[s]:.17g}"]
            for i in range(n):
                cells += [f"{trace.field[s, i].real:.17g}", f"{trace.field[s, i].imag:.17g}"]
            cells += [f"{trace.photon_numbers[s, i]:.17g}" for i in range(n)]
            cells += [f"{trace.thermal_occupancy[s, i]:.17g}" for i in range(n)]
            cells += [f"{c:.17g}" for c in trace.currents[s]]
            cells += [f"{trace.source[s]:.17g}", f"{trace.total_photons[s]:.17g}",
                      f"{trace.residual[s]:.17g}", str(int(trace.derivative_flagged[s])),
                      method]
            fh.write(",".join(cells) + "\n")
