import numpy as np
import pytest

from qvdp import (
    DensityMatrix,
    FockSpace,
    expectation,
    fidelity,
    identity,
    ladder,
    number_operator,
    partial_trace,
    trace_distance,
)

from conftest import random_density


def test_lowering_matrix_entries():
    space = FockSpace((3,))
    a = ladder(space, 0, "lower").to_dense()
    expected = np.zeros((3, 3), dtype=complex)
    expected[0, 1] = 1.0
    expected[1, 2] = np.sqrt(2.0)
    assert np.array_equal(a, expected)


def test_tensor_embedding_second_mode():
    space = FockSpace((2, 2))
    a = ladder(space, 1, "lower").to_dense()
    sigma = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    assert np.array_equal(a, np.kron(np.eye(2), sigma))


def test_raise_is_exact_adjoint():
    space = FockSpace((7, 5))
    for mode in (0, 1):
        low = ladder(space, mode, "lower").matrix
        high = ladder(space, mode, "raise").matrix
        diff = (high - low.conjugate().transpose()).tocsr()
        assert diff.nnz == 0


@pytest.mark.parametrize("dim", range(2, 31))
def test_commutator_below_cutoff(dim):
    # truncation breaks [a, a+] = 1 only on the top level
    space = FockSpace((dim,))
    a = ladder(space, 0, "lower").to_dense()
    comm = a @ a.conj().T - a.conj().T @ a
    expected = np.eye(dim)
    expected[-1, -1] = -(dim - 1)  # truncation artifact
    assert np.allclose(comm, expected, atol=1e-12)


def test_mode_out_of_range():
    space = FockSpace((4, 4))
    with pytest.raises(ValueError):
        ladder(space, 2, "lower")
    with pytest.raises(ValueError):
        ladder(space, 0, "sideways")


def test_fock_space_validation():
    with pytest.raises(ValueError):
        FockSpace((1, 4))
    assert FockSpace((3, 5)).size == 15
    assert FockSpace((3, 5)).index((2, 4)) == 14


def test_expectation_number_operator():
    space = FockSpace((4,))
    n_op = number_operator(space, 0)
    one = np.zeros((4, 4), dtype=complex)
    one[1, 1] = 1.0
    assert expectation(n_op, DensityMatrix(space, one)) == pytest.approx(1.0)


def test_expectation_identity_is_trace(rng):
    space = FockSpace((3, 4))
    rho = random_density(space, rng)
    assert expectation(identity(space), rho) == pytest.approx(1.0)


def test_expectation_thermal_mixture():
    space = FockSpace((4,))
    rho = DensityMatrix(space, np.diag([2 / 3, 1 / 3, 0, 0]).astype(complex))
    assert expectation(number_operator(space, 0), rho) == pytest.approx(1 / 3)


def test_expectation_shape_mismatch(rng):
    rho = random_density(FockSpace((3,)), rng)
    with pytest.raises(ValueError):
        expectation(number_operator(FockSpace((4,)), 0), rho)


def test_expectation_real_for_hermitian(rng):
    space = FockSpace((4, 3))
    rho = random_density(space, rng)
    n_op = number_operator(space, 0)
    assert abs(expectation(n_op, rho).imag) < 1e-10


def test_expectation_linear(rng):
    space = FockSpace((3, 3))
    op = number_operator(space, 0) + 0.7 * ladder(space, 1, "lower")
    r1 = random_density(space, rng)
    r2 = random_density(space, rng)
    mix = DensityMatrix(space, 0.25 * r1.entries + 0.75 * r2.entries)
    lhs = expectation(op, mix)
    rhs = 0.25 * expectation(op, r1) + 0.75 * expectation(op, r2)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_partial_trace_basis_state():
    space = FockSpace((3, 3))
    rho = np.zeros((9, 9), dtype=complex)
    idx = space.index((0, 1))
    rho[idx, idx] = 1.0
    reduced = partial_trace(DensityMatrix(space, rho), keep=0)
    assert np.allclose(reduced.entries, np.diag([1.0, 0.0, 0.0]))


def test_partial_trace_product_state(rng):
    s1, s2 = FockSpace((3,)), FockSpace((4,))
    r1 = random_density(s1, rng)
    r2 = random_density(s2, rng)
    joint = DensityMatrix(FockSpace((3, 4)), np.kron(r1.entries, r2.entries))
    assert np.allclose(partial_trace(joint, keep=1).entries, r2.entries, atol=1e-12)
    assert np.allclose(partial_trace(joint, keep=0).entries, r1.entries, atol=1e-12)


def test_partial_trace_preserves_trace_and_hermiticity(rng):
    space = FockSpace((4, 5))
    for _ in range(20):
        rho = random_density(space, rng)
        for keep in (0, 1):
            red = partial_trace(rho, keep)
            assert red.trace == pytest.approx(1.0, abs=1e-12)
            assert red.hermiticity_error() < 1e-12


def test_partial_trace_rejects_single_mode(rng):
    rho = random_density(FockSpace((4,)), rng)
    with pytest.raises(ValueError):
        partial_trace(rho, keep=0)


def test_trace_distance_and_fidelity(rng):
    space = FockSpace((3, 3))
    rho = random_density(space, rng)
    assert trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-12)
    assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-10)
    other = random_density(space, rng)
    td = trace_distance(rho, other)
    assert 0.0 < td <= 1.0


def test_density_matrix_validation():
    space = FockSpace((3,))
    good = DensityMatrix(space, np.diag([0.5, 0.5, 0.0]).astype(complex))
    good.assert_valid()
    bad_trace = DensityMatrix(space, np.diag([0.7, 0.5, 0.0]).astype(complex))
    with pytest.raises(ValueError):
        bad_trace.assert_valid()
    negative = DensityMatrix(space, np.diag([1.2, -0.2, 0.0]).astype(complex))
    with pytest.raises(ValueError):
        negative.assert_valid()
