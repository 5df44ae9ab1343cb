import numpy as np
import pytest
import scipy.linalg

from qvdp import (
    DensityMatrix,
    FockSpace,
    NonUniqueSteadyState,
    SolveOptions,
    SteadyStateError,
    SystemParams,
    build_liouvillian,
    dissipator,
    evolve,
    expectation,
    fidelity,
    ladder,
    number_operator,
    single_mode_liouvillian,
    solve_steady_state,
    steady_state,
    steady_state_residual,
    trace_distance,
    two_time_correlation,
)
from qvdp.model import unvec, vec

from conftest import random_density


def test_quantum_limit_two_thirds_weight():
    liouv = single_mode_liouvillian(1.0, 1000.0, 8)
    rho = steady_state(liouv)
    pops = np.real(np.diag(rho.entries))
    assert pops[0] == pytest.approx(2 / 3, abs=1e-2)
    assert pops[1] == pytest.approx(1 / 3, abs=1e-2)


def test_uncoupled_steady_state_factorizes():
    p = SystemParams(delta=0.0, zeta=0.0, gamma1=1.0, gamma2=10.0, dims=(8, 8))
    rho = steady_state(build_liouvillian(p))
    single = steady_state(single_mode_liouvillian(1.0, 10.0, 8))
    product = DensityMatrix(p.space, np.kron(single.entries, single.entries))
    assert fidelity(rho, product) > 1.0 - 1e-8


def test_steady_state_contract_and_residual():
    p = SystemParams(delta=2.0, zeta=4.0, kerr1=1.0, kerr2=1.0, gamma2=10.0, dims=(8, 8))
    liouv = build_liouvillian(p)
    rho = steady_state(liouv)
    assert rho.trace == pytest.approx(1.0, abs=1e-12)
    assert rho.hermiticity_error() < 1e-10
    assert rho.min_eigenvalue() >= -1e-8
    assert steady_state_residual(liouv, rho) < 1e-10


def test_steady_state_invariant_under_truncation_growth():
    # at a truncation accepted by the tail rule, +4 levels must not move
    # the state beyond 1e-6 in trace distance
    base = SystemParams(delta=1.0, zeta=3.0, gamma2=10.0, dims=(8, 8))
    rho_ok, accepted, _ = solve_steady_state(base)
    grown = accepted.replace(dims=tuple(d + 4 for d in accepted.dims))
    rho_big = steady_state(build_liouvillian(grown))
    d_small = accepted.dims
    embedded = np.zeros((grown.space.size, grown.space.size), dtype=complex)
    for i1 in range(d_small[0]):
        for i2 in range(d_small[1]):
            for j1 in range(d_small[0]):
                for j2 in range(d_small[1]):
                    embedded[grown.space.index((i1, i2)), grown.space.index((j1, j2))] = \
                        rho_ok.entries[accepted.space.index((i1, i2)), accepted.space.index((j1, j2))]
    assert trace_distance(DensityMatrix(grown.space, embedded), rho_big) < 1e-6


def test_degenerate_null_space_is_surfaced():
    # pure dephasing conserves every Fock population: null space dim > 1
    space = FockSpace((4,))
    liouv = dissipator(number_operator(space, 0), 1.0)
    with pytest.raises(NonUniqueSteadyState):
        steady_state(liouv)


def test_iterative_method_matches_direct():
    p = SystemParams(delta=0.5, zeta=2.0, gamma2=10.0, dims=(6, 6))
    liouv = build_liouvillian(p)
    direct = steady_state(liouv, SolveOptions(method="direct"))
    iterative = steady_state(liouv, SolveOptions(method="iterative", tol=1e-10))
    assert trace_distance(direct, iterative) < 1e-8


def test_iterative_nonconvergence_reports_residual():
    p = SystemParams(delta=0.5, zeta=2.0, gamma2=10.0, dims=(6, 6))
    liouv = build_liouvillian(p)
    with pytest.raises(SteadyStateError, match="residual"):
        steady_state(liouv, SolveOptions(method="iterative", tol=1e-13, max_iter=1))


def test_adaptive_truncation_grows_until_tail_is_empty():
    p = SystemParams(delta=0.0, zeta=3.0, gamma1=1.0, gamma2=2.0, dims=(4, 4))
    rho, used, residual = solve_steady_state(p)
    assert used.dims[0] > 4
    assert residual < 1e-10
    for mode in (0, 1):
        assert rho.mode_populations(mode)[-2:].sum() < 1e-6


class TestEvolve:
    def test_zero_generator_constant_trajectory(self, rng):
        from qvdp.model import build_hamiltonian, hamiltonian_superop

        p = SystemParams(delta=0.0, zeta=0.0, dims=(4, 4))
        zero = hamiltonian_superop(build_hamiltonian(p))
        rho0 = random_density(p.space, rng)
        traj = evolve(zero, rho0, [0.5, 1.0, 2.0])
        for state in traj.states:
            assert np.allclose(state.entries, rho0.entries, atol=1e-10)

    def test_long_time_limit_reaches_steady_state(self, rng):
        p = SystemParams(delta=0.7, zeta=2.0, gamma2=10.0, dims=(6, 6))
        liouv = build_liouvillian(p)
        rho0 = random_density(p.space, rng)
        traj = evolve(liouv, rho0, [50.0])
        assert trace_distance(traj.states[-1], steady_state(liouv)) < 1e-4

    def test_trace_conserved_and_positivity_drift(self, rng):
        p = SystemParams(delta=0.3, zeta=2.0, gamma2=10.0, dims=(5, 5))
        liouv = build_liouvillian(p)
        rho0 = random_density(p.space, rng)
        traj = evolve(liouv, rho0, np.linspace(0.2, 6.0, 30))
        for state in traj.states:
            assert abs(state.trace - 1.0) < 1e-8
            assert state.min_eigenvalue() >= -1e-6

    def test_nonuniform_times_agree_with_uniform(self, rng):
        # same trajectory through the Krylov fast path and the adaptive stepper
        p = SystemParams(delta=0.9, zeta=1.5, gamma2=8.0, dims=(4, 4))
        liouv = build_liouvillian(p)
        rho0 = random_density(p.space, rng)
        uneven = np.array([0.11, 0.35, 0.4, 1.3])
        traj_a = evolve(liouv, rho0, uneven)
        for t, state in zip(uneven, traj_a.states):
            ref = evolve(liouv, rho0, [t]).states[-1]
            assert np.max(np.abs(state.entries - ref.entries)) < 1e-7

    def test_rejects_bad_time_grids(self, rng):
        p = SystemParams(dims=(4, 4))
        liouv = build_liouvillian(p)
        rho0 = random_density(p.space, rng)
        with pytest.raises(ValueError):
            evolve(liouv, rho0, [1.0, 0.5])
        with pytest.raises(ValueError):
            evolve(liouv, rho0, [-1.0, 0.5])


class TestTwoTimeCorrelation:
    def test_zero_lag_is_occupation(self):
        p = SystemParams(delta=0.0, zeta=1.0, gamma2=10.0, dims=(6, 6))
        liouv = build_liouvillian(p)
        rho = steady_state(liouv)
        a1 = ladder(p.space, 0, "lower")
        corr = two_time_correlation(liouv, rho, a1.dag(), a1, [0.0, 0.5])
        n1 = expectation(a1.dag() @ a1, rho)
        assert corr[0] == pytest.approx(n1, abs=1e-12)

    def test_correlation_decays(self):
        liouv = single_mode_liouvillian(1.0, 10.0, 8)
        rho = steady_state(liouv)
        space = FockSpace((8,))
        a = ladder(space, 0, "lower")
        corr = two_time_correlation(liouv, rho, a.dag(), a, [0.0, 30.0])
        assert abs(corr[-1]) < 1e-3 * abs(corr[0])

    def test_against_dense_propagator_oracle(self):
        # brute force: full matrix exponential of the generator at small size
        liouv = single_mode_liouvillian(1.0, 7.0, 6)
        rho = steady_state(liouv)
        space = FockSpace((6,))
        a = ladder(space, 0, "lower")
        times = np.array([0.0, 0.13, 0.4, 0.77, 1.9])
        corr = two_time_correlation(liouv, rho, a.dag(), a, times)
        dense = liouv.matrix.toarray()
        v0 = vec(a.matrix @ rho.entries)
        for t, value in zip(times, corr):
            propagated = unvec(scipy.linalg.expm(dense * t) @ v0, 6)
            expected = np.trace(a.dag().matrix.toarray() @ propagated)
            assert value == pytest.approx(expected, abs=1e-8)
