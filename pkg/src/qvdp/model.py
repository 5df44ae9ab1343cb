"""Rotating-frame Hamiltonian and Liouvillian of two van der Pol
oscillators with a quadratic (two-to-one phonon exchange) coupling.

Each oscillator gains single phonons at rate ``gamma1`` and loses phonon
pairs at rate ``gamma2``; the exchange term ``zeta * (a1^dag^2 a2 + h.c.)``
converts two phonons of mode 1 into one phonon of mode 2 and back.  The
simulation frame rotates at ``omega1`` for mode 1 and ``2 * omega1`` for
mode 2, which leaves a time-independent generator in which only the
detuning ``delta = omega2 - 2 * omega1`` survives; the lab-frame
frequencies are kept solely for labelling spectra.

Superoperators act on column-stacked density matrices:
``vec(rho)[c * N + r] = rho[r, c]`` so that ``vec(A X B) = (B^T kron A) vec(X)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .operators import (
    DensityMatrix,
    FockSpace,
    SparseOperator,
    identity,
    ladder,
)

__all__ = [
    "SystemParams",
    "SuperOperator",
    "vec",
    "unvec",
    "vec_index",
    "trace_functional",
    "build_hamiltonian",
    "dissipator",
    "hamiltonian_superop",
    "build_liouvillian",
    "single_mode_liouvillian",
]

_HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the coupled-oscillator master equation.

    All rates share one unit system; the conventional choice (used by
    every bundled configuration) is ``gamma1 = 1`` so that frequencies
    and rates are read in units of the gain rate.

    Parameters
    ----------
    delta : float
        Detuning ``omega2 - 2 * omega1`` of the two-to-one resonance.
    kerr1, kerr2 : float
        Self-Kerr strengths of the two modes.
    gamma1 : float
        Linear (one-phonon) gain rate, > 0.
    gamma2 : float
        Two-phonon loss rate, > 0.
    zeta : float
        Quadratic coupling strength.
    dims : tuple[int, int]
        Fock truncation per mode; at least 4 so that ``a_i^2`` is
        represented faithfully on the occupied levels.
    omega1, omega2 : float, optional
        Lab-frame frequencies.  When both are given they must be
        consistent with ``delta``; they only shift spectrum axes.
    """

    delta: float = 0.0
    kerr1: float = 0.0
    kerr2: float = 0.0
    gamma1: float = 1.0
    gamma2: float = 10.0
    zeta: float = 0.0
    dims: tuple[int, int] = (20, 20)
    omega1: float | None = None
    omega2: float | None = None

    def __post_init__(self):
        if self.gamma1 <= 0:
            raise ValueError(f"gamma1 must be > 0, got {self.gamma1}")
        if self.gamma2 <= 0:
            raise ValueError(f"gamma2 must be > 0, got {self.gamma2}")
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 2:
            raise ValueError("dims must hold exactly two truncations")
        if any(d < 4 for d in dims):
            raise ValueError(f"truncation below 4 cannot represent two-phonon loss, got {dims}")
        object.__setattr__(self, "dims", dims)
        if (self.omega1 is None) != (self.omega2 is None):
            raise ValueError("omega1 and omega2 must be given together")
        if self.omega1 is not None:
            derived = self.omega2 - 2.0 * self.omega1
            scale = max(1.0, abs(self.omega1), abs(self.omega2))
            if abs(derived - self.delta) > 1e-9 * scale:
                raise ValueError(
                    f"delta={self.delta} inconsistent with omega2 - 2*omega1 = {derived}"
                )
        for name in ("delta", "kerr1", "kerr2", "zeta"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @classmethod
    def from_lab_frequencies(cls, omega1: float, omega2: float, **kwargs) -> "SystemParams":
        return cls(delta=omega2 - 2.0 * omega1, omega1=omega1, omega2=omega2, **kwargs)

    def replace(self, **changes) -> "SystemParams":
        from dataclasses import replace as _replace

        return _replace(self, **changes)

    @property
    def space(self) -> FockSpace:
        return FockSpace(self.dims)


@dataclass(frozen=True)
class SuperOperator:
    """Sparse linear map on column-stacked density matrices."""

    space: FockSpace
    matrix: sp.csr_matrix

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=complex, copy=True)
        n = self.space.size ** 2
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match space size {n}")
        m.sum_duplicates()
        m.sort_indices()
        object.__setattr__(self, "matrix", m)

    def apply(self, rho: DensityMatrix | np.ndarray) -> np.ndarray:
        mat = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
        return unvec(self.matrix @ vec(mat), self.space.size)

    def __add__(self, other):
        if isinstance(other, SuperOperator):
            if self.space != other.space:
                raise ValueError("superoperators act on different spaces")
            return SuperOperator(self.space, self.matrix + other.matrix)
        return NotImplemented


def vec(mat: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(mat, dtype=complex).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(v, dtype=complex).reshape((dim, dim), order="F")


def vec_index(space: FockSpace, row_occ, col_occ) -> int:
    """Position of the matrix element |row_occ><col_occ| in vec(rho)."""
    r = space.index(row_occ)
    c = space.index(col_occ)
    return c * space.size + r


def trace_functional(dim: int) -> sp.csr_matrix:
    """Row vector t with t @ vec(rho) = Tr[rho]."""
    diag_idx = np.arange(dim) * dim + np.arange(dim)
    data = np.ones(dim, dtype=complex)
    return sp.csr_matrix((data, (np.zeros(dim, dtype=int), diag_idx)), shape=(1, dim * dim))


def _left_mul(op: sp.spmatrix) -> sp.csr_matrix:
    n = op.shape[0]
    return sp.kron(sp.identity(n, dtype=complex, format="csr"), op, format="csr")


def _right_mul(op: sp.spmatrix) -> sp.csr_matrix:
    n = op.shape[0]
    return sp.kron(op.T, sp.identity(n, dtype=complex, format="csr"), format="csr")


def build_hamiltonian(params: SystemParams, frame: str = "rotating") -> SparseOperator:
    """Coupled-system Hamiltonian.

    In the rotating frame:
    ``H = delta * n2 + kerr1 * a1d^2 a1^2 + kerr2 * a2d^2 a2^2
    + zeta * (a1d^2 a2 + a1^2 a2d)``.  The lab frame adds
    ``omega1 * n1 + omega2 * n2`` in place of the detuning term and
    requires the lab frequencies to be set.
    """
    space = params.space
    a1 = ladder(space, 0, "lower")
    a2 = ladder(space, 1, "lower")
    n1 = a1.dag() @ a1
    n2 = a2.dag() @ a2

    if frame == "rotating":
        h = params.delta * n2
    elif frame == "lab":
        if params.omega1 is None:
            raise ValueError("lab-frame Hamiltonian needs omega1 and omega2")
        h = params.omega1 * n1 + params.omega2 * n2
    else:
        raise ValueError(f"frame must be 'rotating' or 'lab', got {frame!r}")

    h = h + params.kerr1 * (a1.dag() @ a1.dag() @ a1 @ a1)
    h = h + params.kerr2 * (a2.dag() @ a2.dag() @ a2 @ a2)
    exchange = a1.dag() @ a1.dag() @ a2
    h = h + params.zeta * (exchange + exchange.dag())

    herm = h.hermiticity_error()
    if herm > _HERMITICITY_TOL:
        raise AssertionError(f"Hamiltonian not Hermitian: deviation {herm:.3e}")
    return h


def dissipator(op: SparseOperator, rate: float) -> SuperOperator:
    """Vectorized Lindblad dissipator
    ``rate * (o rho o^dag - (1/2) {o^dag o, rho})``."""
    if rate < 0:
        raise ValueError(f"dissipation rate must be >= 0, got {rate}")
    o = op.matrix
    odag_o = (o.conjugate().transpose() @ o).tocsr()
    jump = sp.kron(o.conjugate(), o, format="csr")
    anti = _left_mul(odag_o) + _right_mul(odag_o)
    return SuperOperator(op.space, rate * (jump - 0.5 * anti))


def hamiltonian_superop(h: SparseOperator) -> SuperOperator:
    """Vectorized commutator ``-i [H, .]``."""
    m = -1j * (_left_mul(h.matrix) - _right_mul(h.matrix))
    return SuperOperator(h.space, m)


def build_liouvillian(params: SystemParams, frame: str = "rotating") -> SuperOperator:
    """Full generator: coherent part plus one-phonon gain and two-phonon
    loss on both modes."""
    space = params.space
    liouv = hamiltonian_superop(build_hamiltonian(params, frame=frame))
    for mode in (0, 1):
        a = ladder(space, mode, "lower")
        liouv = liouv + dissipator(a.dag(), params.gamma1)
        liouv = liouv + dissipator(a @ a, params.gamma2)
    return liouv


def single_mode_liouvillian(gamma1: float, gamma2: float, dim: int) -> SuperOperator:
    """Generator of one uncoupled oscillator (gain + two-phonon loss)."""
    if gamma1 <= 0 or gamma2 <= 0:
        raise ValueError("rates must be > 0")
    if dim < 4:
        raise ValueError(f"truncation below 4 cannot represent two-phonon loss, got {dim}")
    space = FockSpace((dim,))
    a = ladder(space, 0, "lower")
    return dissipator(a.dag(), gamma1) + dissipator(a @ a, gamma2)
