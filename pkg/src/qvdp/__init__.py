"""Simulator for two quadratically coupled van der Pol oscillators:
classical mean-field synchronization and the full quantum (Lindblad)
phenomenology: Arnold tongues, synchronization blockade, Kerr
resonances, phonon statistics, Wigner limit cycles and power spectra.

"""

from .model import (
    SuperOperator,
    SystemParams,
    build_hamiltonian,
    build_liouvillian,
    dissipator,
    single_mode_liouvillian,
)
from .operators import (
    DensityMatrix,
    FockSpace,
    SparseOperator,
    expectation,
    fidelity,
    identity,
    ladder,
    number_operator,
    partial_trace,
    trace_distance,
)
from .solvers import (
    NonUniqueSteadyState,
    SolveOptions,
    SolverError,
    SteadyStateError,
    StiffIntegrationError,
    Trajectory,
    TruncationError,
    evolve,
    solve_steady_state,
    steady_state,
    steady_state_residual,
    two_time_correlation,
)

__version__ = "0.1.0"
