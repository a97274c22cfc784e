"""photonet: transient photonic transport in driven resonator networks.

The pipeline, bottom to top:

1. :mod:`photonet.model` — declarative network description and validation.
2. :mod:`photonet.kernels` — waveguide memory kernels on the time grid.
3. :mod:`photonet.dynamics` — Volterra solver for the propagators u, ū, v, y.
4. :mod:`photonet.coefficients` — exact master-equation coefficients.
5. :mod:`photonet.transport` — observables, photocurrents, continuity balance.
6. :mod:`photonet.bornmarkov` — weak-coupling closed forms (oracle/preview).
7. :mod:`photonet.cli` — scenario runner and trace comparison.
"""

from .bornmarkov import (
    BMParameters,
    bm_observables,
    bm_parameters,
    bm_photocurrent,
    bm_propagator,
    bm_source,
    bm_trace,
    isolated_cavity_field,
)
from .coefficients import (
    CoefficientTrace,
    SingularPropagatorError,
    coefficient_trace,
    compute_drive_shift,
    compute_kappa,
    compute_lambda,
)
from .dynamics import (
    PropagatorSet,
    SolverAbortError,
    dyson_defect,
    integrate_ubar_column,
    solve_propagators,
    solve_u,
    solve_v_column,
    solve_y,
    ubar_column,
    v_column_double_integral,
)
from .kernels import (
    KernelSet,
    build_kernel_set,
    dissipation_kernel,
    noise_kernel,
    tabulate_dissipation,
    tabulate_noise,
)
from .model import (
    KB_OVER_HBAR,
    ConfigError,
    DiscreteModes,
    FrequencyMatrix,
    MonochromaticDrive,
    NetworkSpec,
    SemicircleDensity,
    TabulatedDensity,
    TabulatedDrive,
    TimeGrid,
    ValidationReport,
    WaveguideSpec,
    evaluate_drive,
    evaluate_spectral_density,
    network_spec_from_dict,
    network_spec_to_dict,
    thermal_occupation,
    validate,
)
from .transport import (
    TransportTrace,
    cavity_field,
    generalized_correlation,
    lesser_green,
    occupation,
    photocurrent,
    retarded_green,
    transport_trace,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
