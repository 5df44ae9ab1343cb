"""Weak-coupling expansion of the steady state.

The uncoupled steady state is diagonal with occupation weights given by
a confluent-hypergeometric closed form that depends only on the gain to
two-phonon-loss ratio.  The coupling populates the coherence family
``|n+2, m-1><n, m|`` at first order; each element is obtained by
inverting the corresponding diagonal entry ``lambda`` of the uncoupled
generator on that subspace.

Three routes to the correction are available:

* ``"printed"`` inverts each element with the published closed-form
  ``lambda``.  For small (n, m) and strong two-phonon loss that
  expression goes negative (e.g. -16.5 gamma1 at n=0, m=1,
  gamma2 = 10 gamma1), which would make the inverted mode grow rather
  than decay.
* ``"numerical"`` keeps the element-by-element inversion but reads the
  decay rate off the diagonal of the actual uncoupled generator; the
  coherent part, which the closed form gets right, stays analytic.
* ``"sector"`` (default) solves the uncoupled generator restricted to
  the full coherence sector instead of inverting its diagonal alone.
  The dissipators couple neighbouring (n, m) members of the family, and
  at gamma2 = 10 gamma1 dropping that mixing biases the measure by
  about 20 percent; the sector solve tracks the full steady state to
  well under a percent at weak coupling.

Mismatches between the printed and numerical decay rates are logged
once per parameter set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import hyp1f1, poch

from .model import SystemParams, build_liouvillian, vec_index
from .operators import DensityMatrix, FockSpace

__all__ = [
    "DiagonalWeights",
    "PerturbationTerm",
    "DegenerateDenominator",
    "unperturbed_weights",
    "lambda_nm",
    "lambda_nm_numerical",
    "correction_terms",
    "first_order_density",
    "perturbed_steady_state",
    "perturbative_sync",
]

logger = logging.getLogger(__name__)


class DegenerateDenominator(ZeroDivisionError):
    """A first-order denominator vanished (exact resonance, zero width)."""


@dataclass(frozen=True)
class DiagonalWeights:
    """Occupation probabilities of one uncoupled oscillator."""

    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.ndim != 1 or np.any(p < 0):
            raise ValueError("probabilities must be a non-negative vector")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()}, not 1")
        object.__setattr__(self, "probabilities", p)

    @property
    def mean_occupation(self) -> float:
        return float(np.arange(len(self.probabilities)) @ self.probabilities)


@dataclass(frozen=True)
class PerturbationTerm:
    """One coherence family member of the first-order correction."""

    n: int
    m: int
    lam: complex
    weight_diff: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")


def unperturbed_weights(gamma_ratio: float, cutoff: int) -> DiagonalWeights:
    """Diagonal weights of the uncoupled oscillator steady state.

    ``gamma_ratio`` is gain over two-phonon loss (gamma1 / gamma2); the
    n-th unnormalized weight is
    ``gamma_ratio**n * M(1 + n, gamma_ratio + n, gamma_ratio) / (gamma_ratio)_n``
    with M the confluent hypergeometric function and ``(x)_n`` the
    Pochhammer symbol.  Weights are normalized over the cutoff.
    """
    if gamma_ratio <= 0:
        raise ValueError("gamma_ratio must be > 0")
    if cutoff < 2:
        raise ValueError("cutoff must be >= 2")
    extra = 8
    n = np.arange(cutoff + extra)
    raw = gamma_ratio ** n * hyp1f1(1 + n, gamma_ratio + n, gamma_ratio) / poch(gamma_ratio, n)
    tail = raw[cutoff:].sum() / raw.sum()
    if tail > 1e-8:
        raise ValueError(
            f"cutoff {cutoff} keeps only {1 - tail:.10f} of the weight mass; "
            "increase the truncation"
        )
    kept = raw[:cutoff]
    return DiagonalWeights(kept / kept.sum())


def lambda_nm(n: int, m: int, params: SystemParams) -> complex:
    """Literal closed-form diagonal eigenvalue on |n+2, m-1><n, m|:
    ``i*(delta - 2K(2n - m + 2)) - Gamma`` with
    ``Gamma = (gamma1/2)(2(n+m)+5) + gamma2((n+2)^2 + (m-1)^2 - 2(n+3))``.

    Uses ``kerr1`` as the common Kerr strength (all bundled sweeps set
    ``kerr1 == kerr2``).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if n < 0:
        raise ValueError("n must be >= 0")
    kerr = params.kerr1
    drift = params.delta - 2.0 * kerr * (2 * n - m + 2)
    gamma = params.gamma1 / 2.0 * (2 * (n + m) + 5) + params.gamma2 * (
        (n + 2) ** 2 + (m - 1) ** 2 - 2 * (n + 3)
    )
    return 1j * drift - gamma


@lru_cache(maxsize=16)
def _numerical_decay_rates(gamma1: float, gamma2: float, dims: tuple) -> np.ndarray:
    """Decay rate of every |n+2, m-1><n, m| element, read off the
    uncoupled generator's diagonal.  Independent of detuning and Kerr,
    which only contribute to the imaginary part."""
    params = SystemParams(
        delta=0.0, kerr1=0.0, kerr2=0.0, gamma1=gamma1, gamma2=gamma2,
        zeta=0.0, dims=dims,
    )
    diag = build_liouvillian(params).matrix.diagonal()
    space = FockSpace(dims)
    d1, d2 = dims
    out = np.full((d1, d2), np.nan)
    mismatch = 0
    for n in range(d1 - 2):
        for m in range(1, d2):
            idx = vec_index(space, (n + 2, m - 1), (n, m))
            out[n, m] = -diag[idx].real
            printed = -lambda_nm(n, m, params).real
            if abs(out[n, m] - printed) > 1e-9 * max(1.0, abs(out[n, m])):
                mismatch += 1
    if mismatch:
        logger.info(
            "closed-form decay rate disagrees with the generator diagonal for "
            "%d of the (n, m) pairs at gamma1=%g, gamma2=%g; using the "
            "requested mode's values",
            mismatch, gamma1, gamma2,
        )
    return out


def lambda_nm_numerical(n: int, m: int, params: SystemParams) -> complex:
    """Same coherent drift as :func:`lambda_nm` but with the decay rate
    extracted from the uncoupled generator."""
    if m < 1:
        raise ValueError("m must be >= 1")
    d1, d2 = params.dims
    if n + 2 >= d1 or m >= d2:
        raise ValueError(f"(n={n}, m={m}) outside truncation {params.dims}")
    rates = _numerical_decay_rates(params.gamma1, params.gamma2, params.dims)
    drift = params.delta - 2.0 * params.kerr1 * (2 * n - m + 2)
    return 1j * drift - rates[n, m]


def _lambda_fn(lambda_mode: str):
    if lambda_mode == "printed":
        return lambda_nm
    if lambda_mode == "numerical":
        return lambda_nm_numerical
    raise ValueError(f"lambda_mode must be 'printed' or 'numerical', got {lambda_mode!r}")


def _weights_pair(params: SystemParams):
    d1, d2 = params.dims
    ratio = params.gamma1 / params.gamma2
    return (
        unperturbed_weights(ratio, d1).probabilities,
        unperturbed_weights(ratio, d2).probabilities,
    )


def _sector_pairs(dims: tuple):
    d1, d2 = dims
    return [(n, m) for n in range(d1 - 2) for m in range(1, d2)]


def correction_terms(params: SystemParams, lambda_mode: str = "numerical"):
    """Yield every (n, m) coherence family member within the truncation."""
    lam_of = _lambda_fn(lambda_mode)
    p1, p2 = _weights_pair(params)
    for n, m in _sector_pairs(params.dims):
        w_diff = p1[n] * p2[m] - p1[n + 2] * p2[m - 1]
        lam = lam_of(n, m, params)
        if lam == 0:
            raise DegenerateDenominator(
                f"lambda vanishes at (n={n}, m={m}); exact resonance with zero width"
            )
        yield PerturbationTerm(n=n, m=m, lam=lam, weight_diff=w_diff)


@lru_cache(maxsize=16)
def _sector_dissipative_block(gamma1: float, gamma2: float, dims: tuple) -> np.ndarray:
    """Uncoupled generator restricted to the |n+2, m-1><n, m| coherence
    sector, dissipative part only (detuning and Kerr enter the sector
    diagonal analytically)."""
    params = SystemParams(
        delta=0.0, kerr1=0.0, kerr2=0.0, gamma1=gamma1, gamma2=gamma2,
        zeta=0.0, dims=dims,
    )
    liouv = build_liouvillian(params).matrix.tocsc()
    space = FockSpace(dims)
    idx = np.array([vec_index(space, (n + 2, m - 1), (n, m)) for n, m in _sector_pairs(dims)])
    return liouv[np.ix_(idx, idx)].toarray()


def _sector_elements(params: SystemParams) -> np.ndarray:
    """First-order coherence amplitudes from the full sector solve."""
    p1, p2 = _weights_pair(params)
    pairs = _sector_pairs(params.dims)
    block = _sector_dissipative_block(params.gamma1, params.gamma2, params.dims).copy()
    drift = np.array(
        [params.delta - 2.0 * params.kerr1 * (2 * n - m + 2) for n, m in pairs]
    )
    block[np.diag_indices_from(block)] += 1j * drift
    rhs = np.array(
        [
            1j
            * params.zeta
            * np.sqrt(m * (n + 1) * (n + 2))
            * (p1[n] * p2[m] - p1[n + 2] * p2[m - 1])
            for n, m in pairs
        ]
    )
    try:
        return np.linalg.solve(block, rhs)
    except np.linalg.LinAlgError as err:
        raise DegenerateDenominator(f"coherence-sector solve is singular: {err}") from None


def first_order_density(params: SystemParams, mode: str = "sector") -> np.ndarray:
    """Traceless first-order (in coupling) correction to the steady state.

    Populates the |n+2, m-1><n, m| subspace and its Hermitian conjugate.
    In the element-inversion modes each amplitude is
    ``i * zeta * sqrt(m (n+1) (n+2)) * (w_nm - w_{n+2, m-1}) / lambda``;
    in ``"sector"`` mode the amplitudes solve the uncoupled generator on
    the whole sector at once.  Scales exactly linearly in the coupling.
    """
    space = params.space
    d = space.size
    out = np.zeros((d, d), dtype=complex)
    pairs = _sector_pairs(params.dims)
    if mode == "sector":
        amps = _sector_elements(params)
    else:
        amps = np.array(
            [
                1j * params.zeta * np.sqrt(t.m * (t.n + 1) * (t.n + 2)) * t.weight_diff / t.lam
                for t in correction_terms(params, lambda_mode=mode)
            ]
        )
    for (n, m), amp in zip(pairs, amps):
        r = space.index((n + 2, m - 1))
        c = space.index((n, m))
        out[r, c] += amp
        out[c, r] += np.conj(amp)
    return out


def perturbed_steady_state(params: SystemParams, mode: str = "sector") -> DensityMatrix:
    """Product of uncoupled weights plus the first-order coherences."""
    p1, p2 = _weights_pair(params)
    rho0 = np.kron(np.diag(p1), np.diag(p2)).astype(complex)
    return DensityMatrix(params.space, rho0 + first_order_density(params, mode))


def perturbative_sync(params: SystemParams, mode: str = "sector") -> complex:
    """First-order synchronization measure.

    Contracts the first-order coherences with the two-to-one phase
    operator and normalizes by the uncoupled phonon numbers:
    ``S = sum_nm sqrt(m (n+1)(n+2)) rho1_{n+2,m-1;n,m} / sqrt(<n1><n2>)``,
    which in the element-inversion modes reduces to
    ``sum_nm (w_nm - w_{n+2,m-1}) * i * zeta * m (n+1)(n+2) / (lambda * sqrt(<n1><n2>))``.
    """
    d1, d2 = params.dims
    ratio = params.gamma1 / params.gamma2
    w1 = unperturbed_weights(ratio, d1)
    w2 = unperturbed_weights(ratio, d2)
    norm = np.sqrt(w1.mean_occupation * w2.mean_occupation)
    if mode == "sector":
        amps = _sector_elements(params)
        weights = np.array([np.sqrt(m * (n + 1) * (n + 2)) for n, m in _sector_pairs(params.dims)])
        return complex(weights @ amps / norm)
    total = 0.0 + 0.0j
    for term in correction_terms(params, lambda_mode=mode):
        n, m = term.n, term.m
        total += (
            term.weight_diff
            * 1j
            * params.zeta
            * (m * (n + 1) * (n + 2))
            / (term.lam * norm)
        )
    return total
