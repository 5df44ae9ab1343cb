"""Steady states, time evolution and two-time correlations of the
vectorized generator.

The steady state is found from the modified linear system in which the
first row of the generator is replaced by the trace functional and the
right-hand side is the matching unit vector; the direct path factorizes
the system with sparse LU and polishes with iterative refinement, the
iterative path runs diagonally preconditioned LGMRES on the same system.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .model import SuperOperator, SystemParams, build_liouvillian, trace_functional, unvec, vec
from .operators import DensityMatrix, SparseOperator

__all__ = [
    "SolveOptions",
    "Trajectory",
    "SolverError",
    "NonUniqueSteadyState",
    "SteadyStateError",
    "StiffIntegrationError",
    "TruncationError",
    "steady_state",
    "steady_state_residual",
    "solve_steady_state",
    "evolve",
    "two_time_correlation",
]

_EIG_FLOOR = -1e-8


class SolverError(RuntimeError):
    """Base class for solver failures."""


class NonUniqueSteadyState(SolverError):
    """The generator has a null space of dimension > 1."""


class SteadyStateError(SolverError):
    """Steady-state solve did not meet its residual or positivity contract."""


class StiffIntegrationError(SolverError):
    """Time integration failed (step size underflow / stiffness)."""


class TruncationError(SolverError):
    """Fock truncation could not be made large enough."""


@dataclass(frozen=True)
class SolveOptions:
    """Numerical knobs shared by the solvers.

    ``method`` selects the steady-state path ("direct" sparse LU or
    "iterative" Krylov); ``tol`` is the steady-state residual bound;
    ``max_iter`` bounds Krylov iterations; ``rtol``/``atol`` are the
    adaptive integrator tolerances.
    """

    method: str = "direct"
    tol: float = 1e-10
    max_iter: int = 20000
    rtol: float = 1e-8
    atol: float = 1e-10

    def __post_init__(self):
        if self.method not in ("direct", "iterative"):
            raise ValueError(f"method must be 'direct' or 'iterative', got {self.method!r}")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")


@dataclass(frozen=True)
class Trajectory:
    """Times (strictly increasing) and the density matrix at each time."""

    times: np.ndarray
    states: tuple[DensityMatrix, ...]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) != len(self.states):
            raise ValueError("times and states must align")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", tuple(self.states))


def _modified_system(liouv: SuperOperator):
    """Replace row 0 of the generator by the trace functional."""
    dim = liouv.space.size
    n = dim * dim
    top = trace_functional(dim)
    m = sp.vstack([top, liouv.matrix[1:, :]], format="csc")
    b = np.zeros(n, dtype=complex)
    b[0] = 1.0
    return m, b


def _clean_state(x: np.ndarray, liouv: SuperOperator) -> DensityMatrix:
    """Hermitize, reject real negatives, flush tiny ones, renormalize."""
    dim = liouv.space.size
    rho = unvec(x, dim)
    rho = 0.5 * (rho + rho.conj().T)
    w, v = np.linalg.eigh(rho)
    if w.min() < _EIG_FLOOR:
        raise SteadyStateError(
            f"steady state has eigenvalue {w.min():.3e} below the {_EIG_FLOOR} floor"
        )
    w = np.clip(w, 0.0, None)
    rho = (v * w) @ v.conj().T
    rho = rho / np.trace(rho).real
    return DensityMatrix(liouv.space, rho)


def steady_state_residual(liouv: SuperOperator, rho: DensityMatrix) -> float:
    """Infinity norm of L applied to the state."""
    return float(np.max(np.abs(liouv.matrix @ vec(rho.entries))))


def steady_state(liouv: SuperOperator, opts: SolveOptions | None = None) -> DensityMatrix:
    """Unique trace-one solution of ``L rho = 0``.

    Raises
    ------
    NonUniqueSteadyState
        If the trace-augmented system is singular, i.e. the null space
        of the generator is degenerate.
    SteadyStateError
        If the residual bound ``opts.tol`` cannot be met or the solution
        is not positive within the documented floor.
    """
    opts = opts or SolveOptions()
    m, b = _modified_system(liouv)

    if opts.method == "direct":
        try:
            lu = spla.splu(m)
        except RuntimeError as err:
            raise NonUniqueSteadyState(
                f"trace-augmented system is singular ({err}); the generator has "
                "a degenerate null space"
            ) from None
        x = lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise NonUniqueSteadyState("singular solve produced non-finite entries")
        # one or two refinement sweeps push the residual to rounding level
        for _ in range(3):
            r = b - m @ x
            if np.max(np.abs(r)) < 0.1 * opts.tol:
                break
            x = x + lu.solve(r)
    else:
        diag = m.diagonal()
        diag = np.where(np.abs(diag) > 1e-14, diag, 1.0)
        precond = spla.LinearOperator(m.shape, matvec=lambda v: v / diag)
        x, info = spla.lgmres(
            m, b, M=precond, rtol=opts.tol, atol=0.0, maxiter=opts.max_iter
        )
        if info != 0:
            res = float(np.max(np.abs(b - m @ x)))
            raise SteadyStateError(
                f"Krylov steady-state solve did not converge (info={info}, "
                f"final residual {res:.3e})"
            )

    rho = _clean_state(x, liouv)
    res = steady_state_residual(liouv, rho)
    if res > opts.tol:
        raise SteadyStateError(f"steady-state residual {res:.3e} exceeds tol {opts.tol:.1e}")
    return rho


def _tail_population(rho: DensityMatrix) -> float:
    """Largest per-mode population of the top two retained Fock levels."""
    if rho.space.n_modes == 1:
        return float(rho.mode_populations(0)[-2:].sum())
    return max(float(rho.mode_populations(mode)[-2:].sum()) for mode in (0, 1))


def solve_steady_state(
    params: SystemParams,
    opts: SolveOptions | None = None,
    tail_mass: float = 1e-6,
    dim_step: int = 4,
    max_dim: int = 40,
):
    """Build the generator and solve it, growing the truncation until the
    top two Fock levels of each mode carry less than ``tail_mass``.

    Returns ``(rho, params_used, residual)``.
    """
    opts = opts or SolveOptions()
    current = params
    while True:
        liouv = build_liouvillian(current)
        rho = steady_state(liouv, opts)
        if _tail_population(rho) < tail_mass:
            return rho, current, steady_state_residual(liouv, rho)
        if max(current.dims) + dim_step > max_dim:
            raise TruncationError(
                f"tail population {_tail_population(rho):.3e} still above "
                f"{tail_mass:.1e} at dims {current.dims}"
            )
        current = current.replace(dims=tuple(d + dim_step for d in current.dims))


def _is_uniform(times: np.ndarray) -> bool:
    if len(times) < 3:
        return len(times) == 2
    steps = np.diff(times)
    return bool(np.all(np.abs(steps - steps[0]) <= 1e-12 * max(steps[0], 1.0)))


def _propagate(liouv: SuperOperator, v0: np.ndarray, times: np.ndarray,
               opts: SolveOptions) -> np.ndarray:
    """exp(L t) applied to a raw vector, sampled at the requested times.

    Uniform grids go through the Krylov matrix-exponential propagator
    (exact to rounding, robust to stiffness); anything else falls back
    to the adaptive explicit stepper at the requested tolerances.
    """
    times = np.asarray(times, dtype=float)
    v0 = np.asarray(v0, dtype=complex)
    matrix = liouv.matrix

    t_end = float(times[-1])
    if t_end == 0.0:
        return np.tile(v0, (len(times), 1))

    if len(times) == 1:
        return spla.expm_multiply(matrix * t_end, v0)[None, :]

    if _is_uniform(times):
        out = spla.expm_multiply(
            matrix, v0, start=float(times[0]), stop=t_end, num=len(times), endpoint=True
        )
        return np.asarray(out)

    sol = solve_ivp(
        lambda _t, y: matrix @ y,
        (0.0, t_end),
        v0,
        t_eval=times,
        method="DOP853",
        rtol=opts.rtol,
        atol=opts.atol,
    )
    if not sol.success:
        raise StiffIntegrationError(f"time integration failed: {sol.message}")
    return sol.y.T


def evolve(
    liouv: SuperOperator,
    rho0: DensityMatrix,
    times,
    opts: SolveOptions | None = None,
) -> Trajectory:
    """Evolve a state under the generator, with dense output at ``times``.

    ``times`` must be strictly increasing and start at t >= 0; the state
    at each entry is ``exp(L t) rho0``.
    """
    opts = opts or SolveOptions()
    if liouv.space != rho0.space:
        raise ValueError("generator and state live on different spaces")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("times must be a non-empty 1-d sequence")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    if times[0] < 0:
        raise ValueError("times must be non-negative")

    ys = _propagate(liouv, vec(rho0.entries), times, opts)
    dim = liouv.space.size
    states = tuple(DensityMatrix(liouv.space, unvec(y, dim)) for y in ys)
    return Trajectory(times, states)


def two_time_correlation(
    liouv: SuperOperator,
    rho_ss: DensityMatrix,
    op_a: SparseOperator,
    op_b: SparseOperator,
    times,
    opts: SolveOptions | None = None,
) -> np.ndarray:
    """Stationary correlation <A(t) B(0)> by quantum regression.

    The operator-deformed state ``B rho_ss`` is propagated under the same
    generator and contracted with A at every lag:
    ``C(t) = Tr[A exp(L t)(B rho_ss)]``; at t = 0 this is Tr[A B rho_ss].
    """
    opts = opts or SolveOptions()
    if not (liouv.space == rho_ss.space == op_a.space == op_b.space):
        raise ValueError("generator, state and operators must share one space")
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("lags must be non-negative")
    if np.any(np.diff(times) <= 0):
        raise ValueError("lags must be strictly increasing")

    dim = liouv.space.size
    v0 = vec(op_b.matrix @ rho_ss.entries)
    ys = _propagate(liouv, v0, times, opts)
    out = np.empty(len(times), dtype=complex)
    a = op_a.matrix
    for k, y in enumerate(ys):
        out[k] = a.multiply(unvec(y, dim).T).sum()
    return out
