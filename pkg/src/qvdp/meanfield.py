"""Classical (mean-field) limit: amplitude and phase dynamics, locked
fixed points via a quintic in the squared-amplitude ratio, linear
stability, and Arnold-tongue maps.

The amplitude equations in the frame rotating at (omega1, 2 * omega1)
are

    da1/dt = (-2i K1 |a1|^2 + g1/2 - g2 |a1|^2) a1 - 2i zeta conj(a1) a2
    da2/dt = (-i delta - 2i K2 |a2|^2 + g1/2 - g2 |a2|^2) a2 - i zeta a1^2

and in polar form (phi = theta2 - 2 theta1, z = r1^2 / r2^2)

    dr1/dt  = (g1/2 - g2 r1^2) r1 + 2 zeta r1 r2 sin(phi)
    dr2/dt  = (g1/2 - g2 r2^2) r2 - zeta r1^2 sin(phi)
    dphi/dt = -delta - 2 K (r2^2 - 2 r1^2) - zeta ((r1^2 - 4 r2^2) / r2) cos(phi)

Locked states exist where all three vanish; the amplitude ratio z obeys
a quintic polynomial and the remaining variables follow in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.integrate import solve_ivp
from scipy.optimize import root as _root

from .model import SystemParams

__all__ = [
    "MeanFieldState",
    "PolarFixedPoint",
    "StabilityReport",
    "DegeneratePhase",
    "TongueMap",
    "mean_field_rhs",
    "polar_rhs",
    "quintic_coefficients",
    "quintic_roots",
    "fixed_points",
    "classify_stability",
    "critical_phase",
    "critical_coupling",
    "arnold_tongue",
    "integrate_mean_field",
]

_STABILITY_MARGIN = 1e-9
_FP_RESIDUAL_TOL = 1e-9


class DegeneratePhase(ArithmeticError):
    """The closed-form locked phase is indeterminate (0/0) outside the
    known degenerate configuration."""


@dataclass(frozen=True)
class MeanFieldState:
    """Complex limit-cycle amplitudes of the two oscillators."""

    alpha1: complex
    alpha2: complex

    def __post_init__(self):
        if not (np.isfinite(self.alpha1) and np.isfinite(self.alpha2)):
            raise ValueError("amplitudes must be finite")


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    marginal: bool
    eigenvalues: np.ndarray


@dataclass(frozen=True)
class PolarFixedPoint:
    """Locked state in polar coordinates.

    ``z`` is the squared amplitude ratio r1^2 / r2^2; ``stable`` is None
    until :func:`classify_stability` has been attached and for marginal
    cases.
    """

    r1: float
    r2: float
    phi: float
    z: float
    stable: bool | None = None
    eigenvalues: np.ndarray | None = None

    def __post_init__(self):
        if self.r1 < 0 or self.r2 < 0:
            raise ValueError("amplitudes must be >= 0")
        if not -np.pi < self.phi <= np.pi:
            raise ValueError("phi must be the principal value")


def mean_field_rhs(state: MeanFieldState, params: SystemParams) -> tuple[complex, complex]:
    """Rotating-frame amplitude derivatives."""
    a1, a2 = state.alpha1, state.alpha2
    g1, g2 = params.gamma1, params.gamma2
    d1 = (-2j * params.kerr1 * abs(a1) ** 2 + g1 / 2.0 - g2 * abs(a1) ** 2) * a1 \
        - 2j * params.zeta * np.conj(a1) * a2
    d2 = (-1j * params.delta - 2j * params.kerr2 * abs(a2) ** 2 + g1 / 2.0
          - g2 * abs(a2) ** 2) * a2 - 1j * params.zeta * a1 ** 2
    return complex(d1), complex(d2)


def polar_rhs(r1: float, r2: float, phi: float, params: SystemParams) -> tuple[float, float, float]:
    """Amplitude/relative-phase derivatives; singular at r2 = 0.

    With equal Kerr strengths the phase equation reduces to the common
    form ``-delta - 2 K (r2^2 - 2 r1^2) - ...``; unequal strengths enter
    as ``-2 (K2 r2^2 - 2 K1 r1^2)``, consistent with the Cartesian flow.
    """
    if r2 <= 0:
        raise ValueError("polar phase equation is singular at r2 = 0")
    g1, g2, zeta = params.gamma1, params.gamma2, params.zeta
    dr1 = (g1 / 2.0 - g2 * r1 ** 2) * r1 + 2.0 * zeta * r1 * r2 * np.sin(phi)
    dr2 = (g1 / 2.0 - g2 * r2 ** 2) * r2 - zeta * r1 ** 2 * np.sin(phi)
    dphi = -params.delta - 2.0 * (params.kerr2 * r2 ** 2 - 2.0 * params.kerr1 * r1 ** 2) \
        - zeta * ((r1 ** 2 - 4.0 * r2 ** 2) / r2) * np.cos(phi)
    return float(dr1), float(dr2), float(dphi)


def quintic_coefficients(params: SystemParams) -> np.ndarray:
    """Coefficients (lowest order first) of the locked-ratio quintic

    ``(g1 / 2 g2) zeta^2 (z+2)(z^2+2)(z-4)^2 - (g1^2 / 4)(z-1)^2 (z-4)^2
    - (2 K (g1 / 2 g2)(1 - 2z)(z+2) + delta (z^2+2))^2``.
    """
    if params.kerr1 != params.kerr2:
        raise ValueError("locked-state closed forms assume a common Kerr strength")
    g1, g2 = params.gamma1, params.gamma2
    half_ratio = g1 / (2.0 * g2)
    zp2 = np.array([2.0, 1.0])
    z2p2 = np.array([2.0, 0.0, 1.0])
    zm4 = np.array([-4.0, 1.0])
    zm1 = np.array([-1.0, 1.0])
    term1 = half_ratio * params.zeta ** 2 * npoly.polymul(
        npoly.polymul(zp2, z2p2), npoly.polymul(zm4, zm4)
    )
    term2 = (g1 ** 2 / 4.0) * npoly.polymul(npoly.polymul(zm1, zm1), npoly.polymul(zm4, zm4))
    inner = npoly.polyadd(
        2.0 * params.kerr1 * half_ratio * npoly.polymul(np.array([1.0, -2.0]), zp2),
        params.delta * z2p2,
    )
    term3 = npoly.polymul(inner, inner)
    coeffs = npoly.polysub(npoly.polysub(term1, term2), term3)
    out = np.zeros(6)
    out[: len(coeffs)] = coeffs
    return out


def _polish_root(coeffs: np.ndarray, z0: float) -> float:
    """A few Newton steps on the quintic."""
    deriv = npoly.polyder(coeffs)
    z = z0
    for _ in range(50):
        p = npoly.polyval(z, coeffs)
        dp = npoly.polyval(z, deriv)
        if dp == 0:
            break
        step = p / dp
        z_new = z - step
        if not np.isfinite(z_new):
            break
        if abs(z_new - z) <= 1e-15 * max(1.0, abs(z)):
            z = z_new
            break
        z = z_new
    return z


def quintic_roots(params: SystemParams, residual_tol: float = 1e-12) -> list[float]:
    """Positive real roots of the locked-ratio quintic, companion-matrix
    eigenvalues polished by Newton iteration.  Degenerate (double) roots
    are merged.  Empty list means no candidate locked amplitude ratio.
    """
    if params.gamma2 <= 0:
        raise ValueError("gamma2 must be > 0")
    coeffs = quintic_coefficients(params)
    if np.allclose(coeffs, 0.0):
        return []
    roots = npoly.polyroots(coeffs)
    scale = float(np.max(np.abs(coeffs)))
    out: list[float] = []
    for r in roots:
        if abs(r.imag) > 1e-7 * max(1.0, abs(r.real)):
            continue
        z = _polish_root(coeffs, float(r.real))
        if z <= 1e-12:
            continue
        pval = abs(npoly.polyval(z, coeffs))
        allowance = residual_tol * max(1.0, scale * max(1.0, z) ** 5 * 1e-3)
        if pval > allowance:
            continue
        if any(abs(z - prev) <= 1e-6 * max(1.0, abs(prev)) for prev in out):
            continue
        out.append(z)
    return sorted(out)


def critical_phase(zeta: float, gamma1: float, gamma2: float) -> float | None:
    """Locked phase ``arcsin(sqrt(g1 g2 / 6) / (2 zeta))`` of the
    equal-ratio branch; None below the critical coupling where the
    arcsine argument exceeds one."""
    if zeta <= 0:
        raise ValueError("zeta must be > 0")
    arg = np.sqrt(gamma1 * gamma2 / 6.0) / (2.0 * zeta)
    if arg > 1.0:
        return None
    return float(np.arcsin(arg))


def critical_coupling(gamma1: float, gamma2: float) -> float:
    """Coupling at which the pair of equal-ratio locked phases appears."""
    return 0.5 * np.sqrt(gamma1 * gamma2 / 6.0)


def _wrap_phase(phi: float) -> float:
    phi = (phi + np.pi) % (2.0 * np.pi) - np.pi
    if phi <= -np.pi:
        phi += 2.0 * np.pi
    return float(phi)


def _residual_norm(r1, r2, phi, params) -> float:
    return float(np.max(np.abs(polar_rhs(r1, r2, phi, params))))


def _polar_residual_raw(x, params):
    """Same flow as :func:`polar_rhs` but tolerant of trial points with
    r2 <= 0 so the root polisher can step through them."""
    r1, r2, phi = x
    if r2 == 0.0:
        return np.array([1e9, 1e9, 1e9])
    g1, g2, zeta = params.gamma1, params.gamma2, params.zeta
    return np.array([
        (g1 / 2.0 - g2 * r1 ** 2) * r1 + 2.0 * zeta * r1 * r2 * np.sin(phi),
        (g1 / 2.0 - g2 * r2 ** 2) * r2 - zeta * r1 ** 2 * np.sin(phi),
        -params.delta - 2.0 * (params.kerr2 * r2 ** 2 - 2.0 * params.kerr1 * r1 ** 2)
        - zeta * ((r1 ** 2 - 4.0 * r2 ** 2) / r2) * np.cos(phi),
    ])


def _polar_jacobian_exact(x, params):
    r1, r2, phi = x
    g1, g2, zeta = params.gamma1, params.gamma2, params.zeta
    k1, k2 = params.kerr1, params.kerr2
    s, c = np.sin(phi), np.cos(phi)
    return np.array([
        [g1 / 2.0 - 3.0 * g2 * r1 ** 2 + 2.0 * zeta * r2 * s,
         2.0 * zeta * r1 * s,
         2.0 * zeta * r1 * r2 * c],
        [-2.0 * zeta * r1 * s,
         g1 / 2.0 - 3.0 * g2 * r2 ** 2,
         -zeta * r1 ** 2 * c],
        [8.0 * k1 * r1 - 2.0 * zeta * (r1 / r2) * c,
         -4.0 * k2 * r2 + zeta * c * (r1 ** 2 + 4.0 * r2 ** 2) / r2 ** 2,
         zeta * ((r1 ** 2 - 4.0 * r2 ** 2) / r2) * s],
    ])


def _polish_fixed_point(r1, r2, phi, params):
    """Refine a closed-form seed.  The amplitudes from the quintic are
    already near-exact, so the polished point must stay in a small trust
    region; whichever of seed and solver output has the smaller residual
    wins (the solver flags 'no progress' when it starts at rounding
    level, and near bifurcations it can wander to a different branch).
    """
    seed = np.array([r1, r2, phi])
    best = seed
    best_res = float(np.max(np.abs(_polar_residual_raw(seed, params))))
    if best_res > 1e-13:
        sol = _root(
            _polar_residual_raw,
            seed,
            args=(params,),
            jac=lambda x, p: _polar_jacobian_exact(x, p),
            method="hybr",
            tol=1e-13,
        )
        x = sol.x
        in_region = (
            x[1] > 0
            and abs(x[0] - r1) <= 0.2 * max(r1, 0.05)
            and abs(x[1] - r2) <= 0.2 * max(r2, 0.05)
        )
        if in_region:
            res = float(np.max(np.abs(_polar_residual_raw(x, params))))
            if res < best_res:
                best, best_res = x, res
    return float(abs(best[0])), float(best[1]), _wrap_phase(float(best[2]))


def fixed_points(params: SystemParams, classify: bool = True) -> list[PolarFixedPoint]:
    """All locked states: one amplitude pair per positive quintic root,
    with the phase from the closed-form arctangent resolved onto the
    branch that also satisfies the amplitude equations.

    In the degenerate configuration (zero detuning, zero Kerr, ratio
    z = 4) the arctangent is 0/0 and both equal-ratio phases are
    returned; elsewhere an indeterminate phase raises
    :class:`DegeneratePhase`.
    """
    if params.zeta == 0.0:
        return []
    g1, g2 = params.gamma1, params.gamma2
    found: list[PolarFixedPoint] = []
    for z in quintic_roots(params):
        r2 = np.sqrt(g1 * (z + 2.0) / (2.0 * g2 * (z * z + 2.0)))
        r1 = np.sqrt(z) * r2
        num = -g2 * r2 ** 2 * (z - 1.0) * (z - 4.0) / (z + 2.0)
        den = params.delta + 2.0 * params.kerr1 * r2 ** 2 * (1.0 - 2.0 * z)
        # 0/0 detection against the natural scales of each expression
        den_zero = abs(den) <= 1e-10 * max(1.0, abs(params.delta), abs(params.kerr1))
        num_zero = abs(num) <= 1e-5 * g2 * r2 ** 2

        candidates: list[float]
        if den_zero and num_zero:
            if abs(z - 4.0) < 1e-4 and abs(params.kerr1) < 1e-12 and abs(params.delta) < 1e-12:
                phi0 = critical_phase(abs(params.zeta), g1, g2)
                if phi0 is None:
                    continue
                candidates = [phi0, np.pi - phi0]
            else:
                raise DegeneratePhase(
                    f"locked phase indeterminate at z={z:.6g}, "
                    f"delta={params.delta}, kerr={params.kerr1}"
                )
        else:
            with np.errstate(divide="ignore"):
                base = float(np.arctan(num / den)) if den != 0.0 else np.pi / 2.0 * np.sign(num)
            candidates = [base, base + np.pi]

        for phi in candidates:
            phi_w = _wrap_phase(phi)
            r1_p, r2_p, phi_p = _polish_fixed_point(r1, r2, phi_w, params)
            if _residual_norm(r1_p, r2_p, phi_p, params) > _FP_RESIDUAL_TOL:
                continue
            z_p = (r1_p / r2_p) ** 2
            fp = PolarFixedPoint(r1=r1_p, r2=r2_p, phi=phi_p, z=z_p)
            if any(
                abs(fp.r1 - o.r1) < 1e-7 and abs(fp.r2 - o.r2) < 1e-7
                and abs(_wrap_phase(fp.phi - o.phi)) < 1e-7
                for o in found
            ):
                continue
            found.append(fp)

    if classify:
        classified = []
        for fp in found:
            rep = classify_stability(fp, params)
            classified.append(
                PolarFixedPoint(
                    r1=fp.r1, r2=fp.r2, phi=fp.phi, z=fp.z,
                    stable=None if rep.marginal else rep.stable,
                    eigenvalues=rep.eigenvalues,
                )
            )
        return classified
    return found


def _polar_jacobian(fp: PolarFixedPoint, params: SystemParams) -> np.ndarray:
    x0 = np.array([fp.r1, fp.r2, fp.phi])
    jac = np.zeros((3, 3))
    for j in range(3):
        step = 1e-6 * max(abs(x0[j]), 1e-3)
        xp = x0.copy(); xp[j] += step
        xm = x0.copy(); xm[j] -= step
        fp_ = np.array(polar_rhs(*xp, params))
        fm_ = np.array(polar_rhs(*xm, params))
        jac[:, j] = (fp_ - fm_) / (2.0 * step)
    return jac


def classify_stability(fp: PolarFixedPoint, params: SystemParams) -> StabilityReport:
    """Linear stability from the 3x3 Jacobian of the polar flow
    (central differences, relative step 1e-6).

    The origin (both amplitudes zero) is handled from the amplitude
    linearization directly: the linear gain makes it unstable for any
    positive gamma1.  Marginal spectra (a real part within 1e-9 of
    zero) are flagged, not classified.
    """
    if fp.r1 == 0.0 and fp.r2 == 0.0:
        eig = np.array([params.gamma1 / 2.0, params.gamma1 / 2.0, params.gamma1 / 2.0])
        return StabilityReport(stable=False, marginal=False, eigenvalues=eig)
    if _residual_norm(fp.r1, fp.r2, fp.phi, params) > _FP_RESIDUAL_TOL:
        raise ValueError("not a fixed point: residual above 1e-9")
    eig = np.linalg.eigvals(_polar_jacobian(fp, params))
    reals = eig.real
    marginal = bool(np.any(np.abs(reals) <= _STABILITY_MARGIN))
    stable = bool(np.all(reals < -_STABILITY_MARGIN))
    return StabilityReport(stable=stable and not marginal, marginal=marginal, eigenvalues=eig)


def integrate_mean_field(
    params: SystemParams,
    alpha1_0: complex,
    alpha2_0: complex,
    t_final: float = 200.0,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> MeanFieldState:
    """Integrate the amplitude equations (Cartesian form, safe at the
    origin) and return the final state."""

    def rhs(_t, y):
        state = MeanFieldState(complex(y[0]), complex(y[1]))
        d1, d2 = mean_field_rhs(state, params)
        return [d1, d2]

    sol = solve_ivp(
        rhs,
        (0.0, t_final),
        np.array([alpha1_0, alpha2_0], dtype=complex),
        method="DOP853",
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise RuntimeError(f"mean-field integration failed: {sol.message}")
    return MeanFieldState(complex(sol.y[0, -1]), complex(sol.y[1, -1]))


@dataclass(frozen=True)
class TongueMap:
    """Per-cell synchronization map over a coupling/detuning grid."""

    zeta_values: np.ndarray
    delta_values: np.ndarray
    synchronized: np.ndarray
    stable_phases: list
    errors: list

    def phase_map(self) -> np.ndarray:
        """First (smallest) stable phase per cell, NaN where unlocked."""
        out = np.full(self.synchronized.shape, np.nan)
        for i in range(out.shape[0]):
            for j in range(out.shape[1]):
                phases = self.stable_phases[i][j]
                if phases:
                    out[i, j] = phases[0]
        return out


def arnold_tongue(zeta_values, delta_values, params: SystemParams) -> TongueMap:
    """Classify every (zeta, delta) cell: synchronized iff at least one
    stable locked state exists; all stable phases are reported so that
    multistability stays visible.  Cells where the fixed-point search
    fails are marked in ``errors`` and counted unsynchronized.
    """
    zeta_values = np.asarray(zeta_values, dtype=float)
    delta_values = np.asarray(delta_values, dtype=float)
    sync = np.zeros((len(zeta_values), len(delta_values)), dtype=bool)
    phases: list = []
    errors: list = []
    for i, zeta in enumerate(zeta_values):
        row_p: list = []
        row_e: list = []
        for j, delta in enumerate(delta_values):
            cell = params.replace(zeta=float(zeta), delta=float(delta))
            try:
                fps = fixed_points(cell)
                stable = sorted(fp.phi for fp in fps if fp.stable)
                sync[i, j] = bool(stable)
                row_p.append(stable)
                row_e.append(None)
            except Exception as err:  # per-cell failures never abort the map
                row_p.append([])
                row_e.append(f"{type(err).__name__}: {err}")
        phases.append(row_p)
        errors.append(row_e)
    return TongueMap(
        zeta_values=zeta_values,
        delta_values=delta_values,
        synchronized=sync,
        stable_phases=phases,
        errors=errors,
    )
