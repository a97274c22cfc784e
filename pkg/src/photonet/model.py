"""Domain types for a photonic network: resonators, drives, waveguides, time grid.

All frequencies and rates are angular frequencies in rad/ns; times are in ns;
temperatures are in kelvin; ħ = 1 throughout.  Thermal occupations use
n(ω) = 1/(exp(ħω/k_B T) - 1) with the conversion constant ``KB_OVER_HBAR``
below.

Types are immutable after construction (arrays are stored read-only), so they
can be shared freely across threads.  Construction only coerces shapes and
dtypes; physical invariants are checked separately by :func:`validate`, which
is report-valued.  JSON ingestion (:func:`network_spec_from_dict`) rejects
specs that fail validation rather than repairing them — silent symmetrization
would hide user unit errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import NDArray

# k_B/ħ in rad/ns per kelvin, from k_B = 1.380649e-23 J/K (exact) and
# ħ = 1.054571817e-34 J s (CODATA 2018).
KB_OVER_HBAR = 130.92033920720644
KB_OVER_HBAR_PER_MK = KB_OVER_HBAR * 1e-3


class ConfigError(ValueError):
    """Raised when a configuration document cannot be turned into a valid spec."""


def thermal_occupation(omega: NDArray | float, temperature: float) -> NDArray | float:
    """Bose occupation n(ω, T) = 1/(e^{ħω/k_B T} - 1) for ω in rad/ns, T in K.

    T = 0 gives exactly zero.  ω must be positive.
    """
    if temperature == 0.0:
        return np.zeros_like(np.asarray(omega, dtype=float)) if np.ndim(omega) else 0.0
    return 1.0 / np.expm1(np.asarray(omega, dtype=float) / (KB_OVER_HBAR * temperature))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _as_complex_matrix(m, name: str) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    return _readonly(a)


# --- resonators ---------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyMatrix:
    """Hermitian matrix of resonator frequencies and inter-resonator couplings.

    Diagonal entries are the mode frequencies (rad/ns) and must be strictly
    positive; off-diagonals are coherent couplings between modes.
    """

    matrix: NDArray[np.complex128]

    def __post_init__(self):
        object.__setattr__(self, "matrix", _as_complex_matrix(self.matrix, "frequency matrix"))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def single_mode(cls, omega_c: float) -> "FrequencyMatrix":
        return cls(np.array([[omega_c]], dtype=complex))


# --- driving signals ----------------------------------------------------------

@dataclass(frozen=True)
class MonochromaticDrive:
    """f(t) = amplitude * exp(i*phase) * exp(-i*frequency*(t - t_ref)).

    ``t_ref`` is the phase reference time, normally the start of the
    simulation window.
    """

    target: int
    amplitude: float
    frequency: float
    phase: float = 0.0
    t_ref: float = 0.0


@dataclass(frozen=True)
class TabulatedDrive:
    """Complex drive samples on a strictly increasing time grid.

    Evaluation interpolates linearly; querying outside the tabulated window
    is a range error.
    """

    target: int
    times: NDArray[np.float64]
    values: NDArray[np.complex128]

    def __post_init__(self):
        object.__setattr__(self, "times", _readonly(np.asarray(self.times, dtype=float)))
        object.__setattr__(self, "values", _readonly(np.asarray(self.values, dtype=complex)))
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise ValueError("tabulated drive needs matching 1-D times and values")


DrivingSignal = Union[MonochromaticDrive, TabulatedDrive]


def evaluate_drive(drive: DrivingSignal, t: NDArray | float):
    """Evaluate a driving signal at time(s) t."""
    if isinstance(drive, MonochromaticDrive):
        dt = np.asarray(t, dtype=float) - drive.t_ref
        return drive.amplitude * np.exp(1j * drive.phase) * np.exp(-1j * drive.frequency * dt)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < drive.times[0]) or np.any(t_arr > drive.times[-1]):
        raise ValueError(
            f"drive query at t={t} outside tabulated window "
            f"[{drive.times[0]}, {drive.times[-1]}]"
        )
    re = np.interp(t_arr, drive.times, drive.values.real)
    im = np.interp(t_arr, drive.times, drive.values.imag)
    return re + 1j * im


# --- spectral densities -------------------------------------------------------

@dataclass(frozen=True)
class SemicircleDensity:
    """Semicircular band J(ω) = ratio² √(4 hopping² - (ω-center)²) on its band.

    This is the spectral density of a tight-binding chain of identical
    resonators with nearest-neighbour hopping, attached at its end site;
    ``coupling_ratio`` is the end-coupling divided by the hopping.  J vanishes
    identically outside |ω - center| ≤ 2 hopping.
    """

    center: float
    hopping: float
    coupling_ratio: float

    @property
    def band(self) -> tuple[float, float]:
        return (self.center - 2.0 * self.hopping, self.center + 2.0 * self.hopping)


@dataclass(frozen=True)
class DiscreteModes:
    """Finite comb of modes (V_k, ω_k); kernels are closed finite sums.

    A delta comb has no pointwise density, so this variant cannot be
    evaluated at a single frequency.
    """

    couplings: NDArray[np.complex128]
    frequencies: NDArray[np.float64]

    def __post_init__(self):
        object.__setattr__(self, "couplings", _readonly(np.asarray(self.couplings, dtype=complex)))
        object.__setattr__(self, "frequencies", _readonly(np.asarray(self.frequencies, dtype=float)))
        if self.couplings.shape != self.frequencies.shape or self.couplings.ndim != 1:
            raise ValueError("discrete modes need matching 1-D couplings and frequencies")


@dataclass(frozen=True)
class TabulatedDensity:
    """J(ω) sampled on a strictly increasing frequency grid; zero outside it."""

    frequencies: NDArray[np.float64]
    values: NDArray[np.float64]

    def __post_init__(self):
        object.__setattr__(self, "frequencies", _readonly(np.asarray(self.frequencies, dtype=float)))
        object.__setattr__(self, "values", _readonly(np.asarray(self.values, dtype=float)))
        if self.frequencies.shape != self.values.shape or self.frequencies.ndim != 1:
            raise ValueError("tabulated density needs matching 1-D frequencies and values")

    @property
    def band(self) -> tuple[float, float]:
        return (float(self.frequencies[0]), float(self.frequencies[-1]))


SpectralDensity = Union[SemicircleDensity, DiscreteModes, TabulatedDensity]


def evaluate_spectral_density(density: SpectralDensity, omega: NDArray | float):
    """Pointwise J(ω).  DiscreteModes is rejected (no pointwise density)."""
    if isinstance(density, SemicircleDensity):
        w = np.asarray(omega, dtype=float)
        arg = 4.0 * density.hopping**2 - (w - density.center) ** 2
        return density.coupling_ratio**2 * np.sqrt(np.maximum(arg, 0.0))
    if isinstance(density, TabulatedDensity):
        w = np.asarray(omega, dtype=float)
        return np.interp(w, density.frequencies, density.values, left=0.0, right=0.0)
    raise TypeError("a discrete-mode comb has no pointwise spectral density")


# --- waveguides and the full network spec --------------------------------------

@dataclass(frozen=True)
class WaveguideSpec:
    """One waveguide channel: a scalar density, a coupling vector and a temperature.

    The N×N matrix density seen by the resonators is the rank-1 lift
    J_ij(ω) = c_i conj(c_j) J(ω), which is Hermitian PSD at every frequency
    by construction.  ``coupling`` holds the dimensionless relative weights
    c_i (length N).
    """

    label: str
    density: SpectralDensity
    coupling: NDArray[np.complex128]
    temperature: float

    def __post_init__(self):
        c = np.asarray(self.coupling, dtype=complex)
        if c.ndim != 1:
            raise ValueError("coupling vector must be 1-D")
        object.__setattr__(self, "coupling", _readonly(c))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform simulation grid: n_steps steps of h = (t_end - t0)/n_steps.

    Every tabulated function in the pipeline shares this grid.  Observables
    are materialized every ``output_every`` steps.
    """

    t0: float
    t_end: float
    n_steps: int
    output_every: int = 1

    @property
    def h(self) -> float:
        return (self.t_end - self.t0) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.n_steps + 1)

    @property
    def output_indices(self) -> np.ndarray:
        return np.arange(0, self.n_steps + 1, self.output_every)

    @property
    def output_times(self) -> np.ndarray:
        return self.t0 + self.h * self.output_indices


@dataclass(frozen=True)
class NetworkSpec:
    """Full model of a driven resonator network coupled to waveguides."""

    frequencies: FrequencyMatrix
    drives: tuple[DrivingSignal, ...]
    waveguides: tuple[WaveguideSpec, ...]
    initial_field: NDArray[np.complex128]
    initial_occupation: NDArray[np.complex128]
    grid: TimeGrid

    def __post_init__(self):
        object.__setattr__(self, "drives", tuple(self.drives))
        object.__setattr__(self, "waveguides", tuple(self.waveguides))
        a0 = np.asarray(self.initial_field, dtype=complex)
        if a0.ndim != 1:
            raise ValueError("initial field must be a vector")
        object.__setattr__(self, "initial_field", _readonly(a0))
        object.__setattr__(
            self,
            "initial_occupation",
            _as_complex_matrix(self.initial_occupation, "initial occupation"),
        )

    @property
    def dim(self) -> int:
        return self.frequencies.dim

    def drive_vector(self, t: NDArray | float) -> np.ndarray:
        """Total drive vector f(t), shape (..., N); drives on one mode add."""
        t_arr = np.asarray(t, dtype=float)
        f = np.zeros(t_arr.shape + (self.dim,), dtype=complex)
        for d in self.drives:
            f[..., d.target] += evaluate_drive(d, t_arr)
        return f


# --- validation -----------------------------------------------------------------

HERMITICITY_RTOL = 1e-12


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_failed(self):
        if not self.ok:
            raise ConfigError("invalid network spec:\n  " + "\n  ".join(self.violations))


def _check_hermitian(a: np.ndarray, rtol: float = HERMITICITY_RTOL) -> bool:
    scale = max(float(np.max(np.abs(a))), 1.0)
    return bool(np.max(np.abs(a - a.conj().T)) <= rtol * scale)


def _min_eigval(a: np.ndarray) -> float:
    return float(np.min(np.linalg.eigvalsh(0.5 * (a + a.conj().T))))


def validate(spec: NetworkSpec) -> ValidationReport:
    """Check every physical invariant of a spec; report-valued, never raises.

    Returns a report listing violated invariants with their locations, plus
    non-fatal warnings (e.g. an under-resolved carrier).
    """
    bad: list[str] = []
    warn: list[str] = []
    n = spec.dim

    om = spec.frequencies.matrix
    if not _check_hermitian(om):
        bad.append("frequencies: matrix is not Hermitian")
    if np.any(om.diagonal().real <= 0.0) or np.any(np.abs(om.diagonal().imag) > 0.0):
        bad.append("frequencies: diagonal entries must be real and strictly positive")

    for i, d in enumerate(spec.drives):
        loc = f"drives[{i}]"
        if not 0 <= d.target < n:
            bad.append(f"{loc}: target {d.target} out of range for {n} modes")
        if isinstance(d, MonochromaticDrive):
            if d.amplitude < 0:
                bad.append(f"{loc}: amplitude must be >= 0")
        else:
            if np.any(np.diff(d.times) <= 0):
                bad.append(f"{loc}: tabulated times must be strictly increasing")
            elif d.times[0] > spec.grid.t0 or d.times[-1] < spec.grid.t_end:
                bad.append(f"{loc}: tabulated window does not cover the simulation window")

    for i, wg in enumerate(spec.waveguides):
        loc = f"waveguides[{i}] ({wg.label!r})"
        if wg.temperature < 0:
            bad.append(f"{loc}: temperature must be >= 0 K")
        if wg.coupling.shape[0] != n:
            bad.append(f"{loc}: coupling vector has length {wg.coupling.shape[0]}, expected {n}")
        dens = wg.density
        if isinstance(dens, SemicircleDensity):
            if dens.hopping <= 0:
                bad.append(f"{loc}: hopping must be > 0")
            if dens.coupling_ratio < 0:
                bad.append(f"{loc}: coupling ratio must be >= 0")
        elif isinstance(dens, TabulatedDensity):
            if np.any(np.diff(dens.frequencies) <= 0):
                bad.append(f"{loc}: tabulated frequencies must be strictly increasing")
            if np.any(dens.values < 0):
                bad.append(f"{loc}: spectral density must be >= 0 everywhere")

    rho0 = spec.initial_occupation
    a0 = spec.initial_field
    if a0.shape[0] != n:
        bad.append(f"initial_field: length {a0.shape[0]}, expected {n}")
    if rho0.shape[0] != n:
        bad.append(f"initial_occupation: shape {rho0.shape}, expected ({n}, {n})")
    elif not _check_hermitian(rho0):
        bad.append("initial_occupation: not Hermitian")
    else:
        tol = 1e-10 * max(float(np.max(np.abs(rho0))), 1.0)
        if _min_eigval(rho0) < -tol:
            bad.append("initial_occupation: not positive semidefinite")
        if a0.shape[0] == n:
            excess = rho0 - np.outer(a0, a0.conj())
            if _min_eigval(excess) < -tol:
                bad.append(
                    "initial state: occupation minus field outer product is not PSD "
                    "(not a physical Gaussian-compatible state)"
                )

    g = spec.grid
    if g.t_end <= g.t0:
        bad.append("grid: t_end must exceed t0")
    if g.n_steps < 1:
        bad.append("grid: n_steps must be positive")
    if g.output_every < 1:
        bad.append("grid: output_every must be positive")
    elif g.t_end > g.t0 and n > 0 and om.shape[0] == n:
        omega_max = float(np.max(np.abs(om)))
        if omega_max > 0 and g.h * omega_max > 0.15:
            warn.append(
                f"grid: h*omega_max = {g.h * omega_max:.3f} > 0.15; "
                "the fastest carrier is resolved by fewer than ~40 points per period"
            )

    return ValidationReport(tuple(bad), tuple(warn))


# --- JSON (de)serialization -----------------------------------------------------

def _complex_to_json(z: complex):
    z = complex(z)
    return z.real if z.imag == 0.0 else [z.real, z.imag]


def _complex_from_json(v, where: str) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(v[0], v[1])
    raise ConfigError(f"{where}: expected a number or [re, im] pair, got {v!r}")


def _require_keys(d: dict, allowed: set[str], required: set[str], where: str):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(d)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


def _drive_from_dict(d: dict, i: int, default_t_ref: float) -> DrivingSignal:
    where = f"drives[{i}]"
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError(f"{where}: expected an object with a 'type' key")
    kind = d["type"]
    if kind == "monochromatic":
        _require_keys(d, {"type", "target", "amplitude", "frequency", "phase", "t_ref"},
                      {"type", "target", "amplitude", "frequency"}, where)
        return MonochromaticDrive(
            target=int(d["target"]),
            amplitude=float(d["amplitude"]),
            frequency=float(d["frequency"]),
            phase=float(d.get("phase", 0.0)),
            t_ref=float(d.get("t_ref", default_t_ref)),
        )
    if kind == "tabulated":
        _require_keys(d, {"type", "target", "times", "values"},
                      {"type", "target", "times", "values"}, where)
        values = np.array([_complex_from_json(v, where) for v in d["values"]], dtype=complex)
        return TabulatedDrive(target=int(d["target"]),
                              times=np.asarray(d["times"], dtype=float), values=values)
    raise ConfigError(f"{where}: unknown drive type {kind!r}")


def _density_from_dict(d: dict, where: str) -> SpectralDensity:
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError(f"{where}: expected an object with a 'type' key")
    kind = d["type"]
    if kind == "semicircle":
        _require_keys(d, {"type", "center", "hopping", "coupling_ratio"},
                      {"type", "center", "hopping", "coupling_ratio"}, where)
        return SemicircleDensity(center=float(d["center"]), hopping=float(d["hopping"]),
                                 coupling_ratio=float(d["coupling_ratio"]))
    if kind == "discrete":
        _require_keys(d, {"type", "couplings", "frequencies"},
                      {"type", "couplings", "frequencies"}, where)
        couplings = np.array([_complex_from_json(v, where) for v in d["couplings"]], dtype=complex)
        return DiscreteModes(couplings=couplings,
                             frequencies=np.asarray(d["frequencies"], dtype=float))
    if kind == "tabulated":
        _require_keys(d, {"type", "frequencies", "values"}, {"type", "frequencies", "values"}, where)
        return TabulatedDensity(frequencies=np.asarray(d["frequencies"], dtype=float),
                                values=np.asarray(d["values"], dtype=float))
    raise ConfigError(f"{where}: unknown density type {kind!r}")


def network_spec_from_dict(doc: dict) -> NetworkSpec:
    """Build and validate a NetworkSpec from a plain JSON-style document.

    Unknown keys and any violated invariant are rejected.
    """
    _require_keys(doc, {"frequencies", "drives", "waveguides", "initial_field",
                        "initial_occupation", "grid"},
                  {"frequencies", "waveguides", "grid"}, "spec")

    gd = doc["grid"]
    _require_keys(gd, {"t0", "t_end", "n_steps", "output_every"},
                  {"t0", "t_end", "n_steps"}, "grid")
    grid = TimeGrid(t0=float(gd["t0"]), t_end=float(gd["t_end"]),
                    n_steps=int(gd["n_steps"]), output_every=int(gd.get("output_every", 1)))

    freq_rows = doc["frequencies"]
    om = np.array([[_complex_from_json(x, "frequencies") for x in row] for row in freq_rows],
                  dtype=complex)
    frequencies = FrequencyMatrix(om)
    n = frequencies.dim

    drives = tuple(_drive_from_dict(d, i, grid.t0) for i, d in enumerate(doc.get("drives", [])))

    waveguides = []
    for i, w in enumerate(doc["waveguides"]):
        where = f"waveguides[{i}]"
        _require_keys(w, {"label", "density", "coupling", "temperature"},
                      {"density", "temperature"}, where)
        coupling = np.array(
            [_complex_from_json(v, where) for v in w.get("coupling", [1.0] * n)], dtype=complex
        )
        waveguides.append(WaveguideSpec(
            label=str(w.get("label", f"waveguide{i}")),
            density=_density_from_dict(w["density"], where + ".density"),
            coupling=coupling,
            temperature=float(w["temperature"]),
        ))

    initial_field = np.array(
        [_complex_from_json(v, "initial_field") for v in doc.get("initial_field", [0.0] * n)],
        dtype=complex)
    occ = doc.get("initial_occupation")
    if occ is None:
        initial_occupation = np.zeros((n, n), dtype=complex)
    else:
        initial_occupation = np.array(
            [[_complex_from_json(x, "initial_occupation") for x in row] for row in occ],
            dtype=complex)

    spec = NetworkSpec(frequencies=frequencies, drives=drives, waveguides=tuple(waveguides),
                       initial_field=initial_field, initial_occupation=initial_occupation,
                       grid=grid)
    validate(spec).raise_if_failed()
    return spec


def network_spec_to_dict(spec: NetworkSpec) -> dict:
    """Inverse of :func:`network_spec_from_dict` (round-trips through JSON)."""
    def drive_dict(d: DrivingSignal) -> dict:
        if isinstance(d, MonochromaticDrive):
            return {"type": "monochromatic", "target": d.target, "amplitude": d.amplitude,
                    "frequency": d.frequency, "phase": d.phase, "t_ref": d.t_ref}
        return {"type": "tabulated", "target": d.target, "times": d.times.tolist(),
                "values": [_complex_to_json(v) for v in d.values]}

    def density_dict(s: SpectralDensity) -> dict:
        if isinstance(s, SemicircleDensity):
            return {"type": "semicircle", "center": s.center, "hopping": s.hopping,
                    "coupling_ratio": s.coupling_ratio}
        if isinstance(s, DiscreteModes):
            return {"type": "discrete", "couplings": [_complex_to_json(v) for v in s.couplings],
                    "frequencies": s.frequencies.tolist()}
        return {"type": "tabulated", "frequencies": s.frequencies.tolist(),
                "values": s.values.tolist()}

    return {
        "frequencies": [[_complex_to_json(x) for x in row] for row in spec.frequencies.matrix],
        "drives": [drive_dict(d) for d in spec.drives],
        "waveguides": [
            {"label": w.label, "density": density_dict(w.density),
             "coupling": [_complex_to_json(c) for c in w.coupling],
             "temperature": w.temperature}
            for w in spec.waveguides
        ],
        "initial_field": [_complex_to_json(v) for v in spec.initial_field],
        "initial_occupation": [[_complex_to_json(x) for x in row]
                               for row in spec.initial_occupation],
        "grid": {"t0": spec.grid.t0, "t_end": spec.grid.t_end,
                 "n_steps": spec.grid.n_steps, "output_every": spec.grid.output_every},
    }
