"""Truncated Fock spaces, ladder operators and the small linear-algebra
toolkit every other module consumes.

Two conventions are frozen here and relied on everywhere else:

* tensor factors are ordered mode 0 (x) mode 1 with mode 0 as the slow
  index, so the composite basis state ``|n0, n1>`` lives at row
  ``n0 * dims[1] + n1``;
* operators are CSR matrices kept in canonical (sorted, duplicate-free)
  form, which makes iteration order and therefore every downstream
  output bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np
import scipy.sparse as sp

__all__ = [
    "FockSpace",
    "SparseOperator",
    "DensityMatrix",
    "ladder",
    "number_operator",
    "identity",
    "expectation",
    "partial_trace",
    "trace_distance",
    "fidelity",
]


@dataclass(frozen=True)
class FockSpace:
    """Composite Hilbert space of truncated bosonic modes.

    ``dims[i]`` is the number of retained Fock levels of mode ``i``
    (states ``0 .. dims[i]-1``).
    """

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise ValueError("need at least one mode")
        if any(d < 2 for d in dims):
            raise ValueError(f"every truncation must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def size(self) -> int:
        return prod(self.dims)

    @property
    def n_modes(self) -> int:
        return len(self.dims)

    def index(self, occupations) -> int:
        """Row index of the basis state with the given occupations."""
        if len(occupations) != self.n_modes:
            raise ValueError("one occupation number per mode required")
        idx = 0
        for n, d in zip(occupations, self.dims):
            n = int(n)
            if not 0 <= n < d:
                raise ValueError(f"occupation {n} outside 0..{d - 1}")
            idx = idx * d + n
        return idx


def _as_canonical_csr(matrix) -> sp.csr_matrix:
    m = sp.csr_matrix(matrix, dtype=complex, copy=True)
    m.sum_duplicates()
    m.sort_indices()
    return m


@dataclass(frozen=True)
class SparseOperator:
    """Complex sparse operator tagged with the space it acts on."""

    space: FockSpace
    matrix: sp.csr_matrix

    def __post_init__(self):
        m = _as_canonical_csr(self.matrix)
        n = self.space.size
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match space size {n}")
        object.__setattr__(self, "matrix", m)

    def _require_same_space(self, other: "SparseOperator"):
        if self.space != other.space:
            raise ValueError("operators act on different spaces")

    def dag(self) -> "SparseOperator":
        return SparseOperator(self.space, self.matrix.conjugate().transpose())

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            self._require_same_space(other)
            return SparseOperator(self.space, self.matrix @ other.matrix)
        return NotImplemented

    def __add__(self, other):
        if isinstance(other, SparseOperator):
            self._require_same_space(other)
            return SparseOperator(self.space, self.matrix + other.matrix)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SparseOperator):
            self._require_same_space(other)
            return SparseOperator(self.space, self.matrix - other.matrix)
        return NotImplemented

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return SparseOperator(self.space, self.matrix * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def hermiticity_error(self) -> float:
        delta = self.matrix - self.matrix.conjugate().transpose()
        return 0.0 if delta.nnz == 0 else abs(delta).max()


@dataclass(frozen=True)
class DensityMatrix:
    """Dense density matrix on a :class:`FockSpace`.

    Construction only checks the shape; :meth:`assert_valid` runs the
    full Hermiticity / unit-trace / positivity checks where a contract
    requires them (solver outputs, test oracles).
    """

    space: FockSpace
    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        n = self.space.size
        if m.shape != (n, n):
            raise ValueError(f"entries shape {m.shape} does not match space size {n}")
        object.__setattr__(self, "entries", m)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.entries + self.entries.conj().T)).min())

    def assert_valid(self, herm_tol=1e-10, trace_tol=1e-10, eig_floor=-1e-8):
        herm = self.hermiticity_error()
        if herm > herm_tol:
            raise ValueError(f"not Hermitian: max deviation {herm:.3e}")
        tr_err = abs(self.trace - 1.0)
        if tr_err > trace_tol:
            raise ValueError(f"trace deviates from 1 by {tr_err:.3e}")
        lo = self.min_eigenvalue()
        if lo < eig_floor:
            raise ValueError(f"negative eigenvalue {lo:.3e}")

    def mode_populations(self, mode: int) -> np.ndarray:
        """Diagonal occupation distribution of one mode (others traced out)."""
        if self.space.n_modes == 1:
            if mode != 0:
                raise ValueError("single-mode state has only mode 0")
            return np.real(np.diag(self.entries)).copy()
        return np.real(np.diag(partial_trace(self, keep=mode).entries)).copy()


def _local_lowering(dim: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1.0, dim)), offsets=1, format="csr", dtype=complex)


def _embed(space: FockSpace, mode: int, local: sp.spmatrix) -> sp.csr_matrix:
    out = None
    for i, d in enumerate(space.dims):
        factor = local if i == mode else sp.identity(d, dtype=complex, format="csr")
        out = factor if out is None else sp.kron(out, factor, format="csr")
    return out


def ladder(space: FockSpace, mode: int, kind: str) -> SparseOperator:
    """Annihilation (``"lower"``) or creation (``"raise"``) operator of one
    mode, embedded in the composite space by tensoring with identities.

    The lowering operator has entries sqrt(k) at (k-1, k) on the mode's
    factor; raising is its exact adjoint.
    """
    if not 0 <= mode < space.n_modes:
        raise ValueError(f"mode {mode} out of range for {space.n_modes} modes")
    if kind not in ("lower", "raise"):
        raise ValueError(f"kind must be 'lower' or 'raise', got {kind!r}")
    local = _local_lowering(space.dims[mode])
    if kind == "raise":
        local = local.conjugate().transpose().tocsr()
    return SparseOperator(space, _embed(space, mode, local))


def number_operator(space: FockSpace, mode: int) -> SparseOperator:
    a = ladder(space, mode, "lower")
    return a.dag() @ a


def identity(space: FockSpace) -> SparseOperator:
    return SparseOperator(space, sp.identity(space.size, dtype=complex, format="csr"))


def expectation(op: SparseOperator, rho: DensityMatrix) -> complex:
    """Tr[O rho]."""
    if op.space != rho.space:
        raise ValueError("operator and state live on different spaces")
    return complex(op.matrix.multiply(rho.entries.T).sum())


def partial_trace(rho: DensityMatrix, keep: int) -> DensityMatrix:
    """Reduced state of one mode of a two-mode density matrix."""
    if rho.space.n_modes != 2:
        raise ValueError("partial_trace is defined for two-mode states")
    if keep not in (0, 1):
        raise ValueError(f"keep must be 0 or 1, got {keep}")
    d0, d1 = rho.space.dims
    blocks = rho.entries.reshape(d0, d1, d0, d1)
    if keep == 0:
        reduced = np.einsum("abcb->ac", blocks)
        dim = d0
    else:
        reduced = np.einsum("abad->bd", blocks)
        dim = d1
    return DensityMatrix(FockSpace((dim,)), reduced)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """(1/2) * trace norm of rho - sigma."""
    if rho.space != sigma.space:
        raise ValueError("states live on different spaces")
    diff = rho.entries - sigma.entries
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    if rho.space != sigma.space:
        raise ValueError("states live on different spaces")
    w, v = np.linalg.eigh(0.5 * (rho.entries + rho.entries.conj().T))
    w = np.clip(w, 0.0, None)
    sqrt_rho = (v * np.sqrt(w)) @ v.conj().T
    inner = sqrt_rho @ sigma.entries @ sqrt_rho
    ev = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.clip(ev, 0.0, None))) ** 2)
