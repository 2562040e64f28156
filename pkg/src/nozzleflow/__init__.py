"""Global steady subsonic flow through infinite 2-D nozzles.

Stream-function solver for the steady isentropic Euler system: far-field
states in the asymptotic strips, a truncated quasilinear elliptic boundary
value problem on finite sections, field recovery with invariant
diagnostics, and the critical (choking) mass flux.
"""

from .gas import (
    CriticalState,
    GasDomainError,
    GasLaw,
    SupersonicStateError,
    critical_flux,
    critical_flux_deriv,
    critical_state,
    enthalpy,
    enthalpy_inverse,
    momentum_sq,
    pressure,
    sonic_density,
    sound_speed_sq,
    stagnation_density,
    subsonic_density,
)
from .farfield import (
    AdmissibilityReport,
    BernoulliProfile,
    FarFieldError,
    FarFieldStates,
    check_assumptions,
    solve_farfield,
)
from .geometry import (
    BoundaryData,
    Domain,
    GeometryError,
    Mesh,
    NozzleGeometry,
    boundary_values,
    build_nozzle,
    generate_mesh,
    truncate,
)
from .elliptic import (
    ContinuationResult,
    SolveResult,
    SolverError,
    continuation_solve,
    cutoff,
    farfield_deviation,
    solve_bvp,
    truncated_density,
    truncation_eps,
)
from .flow import (
    FlowField,
    StreamlineError,
    bernoulli_drift,
    diagnostics,
    mass_flux_error,
    recover_fields,
    solve_strip_profile,
    stream_margin,
    trace_streamline,
    vorticity_residual,
)
from .critical import (
    CriticalResult,
    CriticalSearchError,
    MarginSample,
    evaluate_mass_flux,
    find_critical,
    margin_curve,
)
from .cli import ConfigError, RunConfig, parse_config, run

__version__ = "0.1.0"
