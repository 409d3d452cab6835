"""Stability discriminant, closed-form thresholds and the horizontal-field construction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.integrate import quad

from .discretize import field_coefficients, quotient_bound, reduced_unit_forms, weight_forms
from .errors import (
    DenominatorBoundExceeded,
    IndefiniteDenominator,
    NoSignChange,
    NonPositiveParameter,
    RTConditionViolated,
    VerticalFieldPresent,
    ZeroPermeability,
    ParameterError,
)
from .model import ModeProfile, RTParameters, WaveVector, validate_parameters
from .spectrum import ModeLattice

NEUTRAL_WINDOW = 1e-12
RATIONAL_DENOMINATOR_BOUND = 10**4
RATIONAL_TOL = 1e-12
DIRICHLET_CAP = 10**6


@dataclass(frozen=True, eq=False)
class ThresholdReport:
    dis_value: float
    verdict: str
    vartheta_T: float | None
    m_S: float | None
    poincare_const: float
    a_const: float
    per_mode_curve: dict = field(default_factory=dict)
    argmax_wavevector: WaveVector | None = None
    infinite: bool = False
    infinite_modes: tuple = ()
    sup_may_be_limit: bool = False
    extrapolated: float | None = None
    vertical_bound: float | None = None
    lattice: ModeLattice | None = None
    degree: int = 32

    @property
    def dis_is_infinite(self):
        return self.infinite


def poincare_constant(l, tau):
    if not l > 0:
        raise NonPositiveParameter("l")
    if not tau > 0:
        raise NonPositiveParameter("tau")
    return l * tau / (l + tau)


def surface_tension_threshold(g, rho_jump, L1, L2):
    if not rho_jump > 0:
        raise RTConditionViolated(f"RT condition requires a positive density jump, got {rho_jump}")
    return g * rho_jump * max(L1 * L1, L2 * L2)


def vertical_field_threshold(g, rho_jump, lam, l, tau):
    if lam == 0:
        raise ZeroPermeability()
    if lam < 0:
        raise ParameterError("lambda must be nonnegative", "lambda")
    return math.sqrt(g * rho_jump / (lam * (1.0 / tau + 1.0 / l)))


def _verdict(dis):
    if math.isinf(dis) or dis > 1.0 + NEUTRAL_WINDOW:
        return "Unstable"
    if dis < 1.0 - NEUTRAL_WINDOW:
        return "Stable"
    return "Neutral"


def _closed_forms(p: RTParameters):
    pc = poincare_constant(p.l, p.tau)
    a_const = max(p.L1**2, p.L2**2)
    vt = None
    if p.kappa_plus == 0 and p.kappa_minus == 0 and not any(p.effective_field):
        vt = surface_tension_threshold(p.g, p.rho_jump, p.L1, p.L2)
    mS = None
    if p.vartheta == 0 and p.kappa_plus == 0 and p.kappa_minus == 0 and p.lam > 0:
        mS = vertical_field_threshold(p.g, p.rho_jump, p.lam, p.l, p.tau)
    return pc, a_const, vt, mS


class _QuotientCache:
    """Per-class quotient sup, keyed like the spectrum sweep."""

    def __init__(self, p, degree):
        self.p = p
        self.degree = degree
        self.units = {}
        self.values = {}

    def value(self, w: WaveVector):
        p = self.p
        a, b = field_coefficients(p, w.xi1, w.xi2)
        xi_sq = w.xi_norm**2
        key = (float(f"{xi_sq:.12e}"), float(f"{a * a:.12e}"))
        if key in self.values:
            return self.values[key]
        u = self.units.get(key[0])
        if u is None:
            u = self.units[key[0]] = reduced_unit_forms(p.l, p.tau, w.xi_norm, self.degree)
        f = weight_forms(u, p, abs(a), b, xi_sq)
        try:
            v = quotient_bound(f.B_grav, f.K_stab)
        except IndefiniteDenominator:
            v = math.inf
        self.values[key] = v
        return v


def discriminant(p: RTParameters, lattice: ModeLattice, degree: int = 32, _cache=None) -> ThresholdReport:
    """Sup over the lattice of the gravity-to-stabilizer quotient.

    Dis > 1 means unstable. With no tension, elasticity or vertical field
    the stabilizer cannot control the interface and Dis is infinite.
    """
    validate_parameters(p)
    pc, a_const, vt, mS = _closed_forms(p)
    m3 = p.effective_field[2]
    vbound = None
    if m3 != 0 and p.vartheta == 0 and p.kappa_plus == 0 and p.kappa_minus == 0:
        vbound = p.g * p.rho_jump / (m3 * m3 * (1.0 / p.tau + 1.0 / p.l))
    common = dict(vartheta_T=vt, m_S=mS, poincare_const=pc, a_const=a_const,
                  vertical_bound=vbound, lattice=lattice, degree=degree)
    if p.vartheta == 0 and p.kappa_plus == 0 and p.kappa_minus == 0 and m3 == 0:
        return ThresholdReport(dis_value=math.inf, verdict="Unstable", infinite=True, **common)

    cache = _cache or _QuotientCache(p, degree)
    per_wave = {w: cache.value(w) for w in lattice.wavevectors(p)}
    curve = {}
    for w, v in per_wave.items():
        key = w.xi_norm
        curve[key] = max(curve.get(key, -math.inf), v)
    curve = dict(sorted(curve.items()))
    best_w, best = None, -math.inf
    for w in sorted(per_wave, key=lambda w: w.indices):
        if per_wave[w] > best:
            best_w, best = w, per_wave[w]
    inf_modes = tuple(w.indices for w in sorted(per_wave, key=lambda w: w.indices) if math.isinf(per_wave[w]))

    on_shell = max(abs(best_w.k1), abs(best_w.k2)) == lattice.k_max
    extrap = None
    if on_shell and not math.isinf(best):
        extrap = _richardson(curve)
    return ThresholdReport(
        dis_value=best,
        verdict=_verdict(best),
        per_mode_curve=curve,
        argmax_wavevector=best_w,
        infinite=math.isinf(best),
        infinite_modes=inf_modes,
        sup_may_be_limit=bool(on_shell),
        extrapolated=extrap,
        **common,
    )


def _richardson(curve):
    """Limit as |xi| -> infinity assuming value ~ c0 + c1 / |xi|, from the two largest |xi|."""
    ks = list(curve)
    if len(ks) < 2:
        return None
    k1, k2 = ks[-2], ks[-1]
    v1, v2 = curve[k1], curve[k2]
    return (k2 * v2 - k1 * v1) / (k2 - k1)


def dirichlet_approximation(alpha: float, N: int):
    """Smallest n in 1..N with |n alpha - m| < 1/N, m the nearest integer."""
    N = int(N)
    if N < 1:
        raise ValueError("N must be at least 1")
    for n in range(1, N + 1):
        m = round(n * alpha)
        if abs(n * alpha - m) < 1.0 / N:
            return n, int(m)
    raise AssertionError("Dirichlet approximation failed; input is not finite")  # pragma: no cover


def _bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1.0
    out[m] = np.exp(1.0 - 1.0 / (1.0 - t[m] ** 2))
    return out


def _dbump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1.0
    tm = t[m]
    out[m] = np.exp(1.0 - 1.0 / (1.0 - tm**2)) * (-2.0 * tm / (1.0 - tm**2) ** 2)
    return out


class BumpEnvelope:
    """psi(y3): the bump exp(1 - 1/(1 - t^2)), stretched to 60% of each layer.

    t = y3 / (0.6 l) below the interface and y3 / (0.6 tau) above, so
    psi(0) = 1 and the support stays inside (-l, tau).
    """

    def __init__(self, l, tau):
        self.cm, self.cp = 0.6 * l, 0.6 * tau
        self.l, self.tau = l, tau

    def _scale(self, y):
        return np.where(np.asarray(y) < 0, self.cm, self.cp)

    def __call__(self, y):
        c = self._scale(y)
        return _bump(np.asarray(y) / c)

    def derivative(self, y):
        c = self._scale(y)
        return _dbump(np.asarray(y) / c) / c

    def norms(self):
        """(||psi||^2, ||psi'||^2) by adaptive quadrature."""
        f = lambda y: float(self(y)) ** 2
        df = lambda y: float(self.derivative(y)) ** 2
        opts = dict(epsabs=1e-14, epsrel=1e-12, limit=200)
        n0 = quad(f, -self.cm, 0.0, **opts)[0] + quad(f, 0.0, self.cp, **opts)[0]
        n1 = quad(df, -self.cm, 0.0, **opts)[0] + quad(df, 0.0, self.cp, **opts)[0]
        return n0, n1


def _rational(beta):
    frac = Fraction(beta).limit_denominator(RATIONAL_DENOMINATOR_BOUND)
    if abs(float(frac) - beta) <= RATIONAL_TOL * max(1.0, abs(beta)):
        return frac
    return None


def _test_profile(w: WaveVector, env: BumpEnvelope, degree, l, tau):
    k2 = w.xi_norm**2

    def fn(y):
        psi = env(y)
        dpsi = env.derivative(y)
        return np.vstack([1j * w.xi1 * dpsi / k2, 1j * w.xi2 * dpsi / k2, psi])

    return ModeProfile.from_function(fn, w, degree, l, tau)


def horizontal_field_destabilizer(p: RTParameters, a_target: float, degree: int = 64):
    """A mode whose field-line bending energy is below a_target * theta(0)^2.

    The profile is (i xi psi' / |xi|^2, psi) with psi the bump envelope,
    divergence-free by construction. Returns (WaveVector, ModeProfile,
    achieved_ratio) with the ratio ||d_M w||^2 / |theta(0)|^2 evaluated by
    quadrature on the analytic field, using the effective field.
    """
    m1, m2, m3 = p.effective_field
    if p.M_bar[2] != 0:
        raise VerticalFieldPresent()
    if m1 == 0 and m2 == 0:
        raise ParameterError("horizontal field must be nonzero", "M_bar")
    if not a_target > 0:
        raise ParameterError("a_target must be positive", "a_target")
    env = BumpEnvelope(p.l, p.tau)
    n0, n1 = env.norms()

    def ratio(w):
        a, _ = field_coefficients(p, w.xi1, w.xi2)
        return a * a * (n1 / w.xi_norm**2 + n0)

    if m1 == 0:
        w = WaveVector(1, 0, p.L1, p.L2)
        return w, _test_profile(w, env, degree, p.l, p.tau), ratio(w)
    beta = p.L1 * m2 / (m1 * p.L2)
    frac = _rational(beta)
    if frac is not None:
        w = WaveVector(frac.numerator, -frac.denominator, p.L1, p.L2).canonical()
        return w, _test_profile(w, env, degree, p.l, p.tau), ratio(w)
    N = 1
    while N <= DIRICHLET_CAP:
        n, m = dirichlet_approximation(beta, N)
        w = WaveVector(-m, n, p.L1, p.L2).canonical()
        r = ratio(w)
        if r < a_target:
            return w, _test_profile(w, env, degree, p.l, p.tau), r
        N *= 2
    raise DenominatorBoundExceeded(f"no wavevector reached ratio {a_target} with N <= {DIRICHLET_CAP}")


_COEFFICIENTS = ("vartheta", "M3", "kappa_scale")


def with_coefficient(p: RTParameters, name: str, value: float) -> RTParameters:
    """Copy of p with one threshold coefficient set.

    ``kappa_scale`` multiplies both elasticity coefficients; ``M3`` sets the
    third component of M_bar.
    """
    if name == "vartheta":
        return p.replace(vartheta=value)
    if name == "M3":
        return p.replace(M_bar=(p.M_bar[0], p.M_bar[1], value))
    if name == "kappa_scale":
        return p.replace(kappa_plus=p.kappa_plus * value, kappa_minus=p.kappa_minus * value)
    raise ParameterError(f"unknown coefficient {name!r}; expected one of {_COEFFICIENTS}", "coefficient")


def critical_coefficient(p: RTParameters, coefficient_name: str, bracket, lattice: ModeLattice,
                         degree: int = 32, tol: float = 1e-3):
    """Coefficient value where Dis crosses 1, bisected to relative width tol."""
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise ValueError("bracket must satisfy lo < hi")
    unit_cache = {}

    def unstable(v):
        q = with_coefficient(p, coefficient_name, v)
        c = _QuotientCache(q, degree)
        c.units = unit_cache
        return discriminant(q, lattice, degree, _cache=c).verdict == "Unstable"

    u_lo, u_hi = unstable(lo), unstable(hi)
    if u_lo == u_hi:
        raise NoSignChange(f"verdict is {'Unstable' if u_lo else 'Stable'} at both ends of {bracket}")
    while hi - lo > tol * max(abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if unstable(mid) == u_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
