"""Largest growth rate by the modified variational method, and the normal mode.

The rate Lambda is the root of ``h(s) = s - sqrt(-alpha(s))`` on
(0, J), where J is the neutral point alpha(J) = 0. Because alpha is
increasing, h is increasing, so bisection always converges.

Each per-mode value is monotone in s as well, which allows exact pruning:
on a bracket [a, b] a mode whose value at (or below) a already exceeds the
global minimum at b cannot be the minimizer anywhere in the bracket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ExpansionExhausted,
    NotUnstable,
    StableInput,
    ToleranceNotMet,
)
from .model import ModeProfile, RTParameters, WaveVector, validate_parameters
from .spectrum import (
    ModeCache,
    ModeLattice,
    _argmin,
    _needs_extension,
    sample_on,
)

# s = 0 minima above -NEUTRAL_TOL * scale count as "not unstable"
NEUTRAL_TOL = 1e-10
MAX_DOUBLINGS = 60


@dataclass(frozen=True, eq=False)
class GrowthResult:
    verdict: str
    Lambda: float | None
    critical_wavevector: WaveVector | None
    eigenprofile: ModeProfile | None
    pressure_profile: object
    frak_J: tuple | None
    iterations: list
    residual_report: dict | None
    varsigma: float
    alpha_at_Lambda: float | None = None
    fixed_point_residual: float | None = None
    pressure_consistency: float | None = None
    lattice: ModeLattice | None = None
    degree: int = 32
    parameters: RTParameters | None = None

    @property
    def unstable(self):
        return self.verdict == "Unstable"


@dataclass(frozen=True, eq=False)
class NormalMode:
    """e^{Lambda t} (w / Lambda, w, beta)."""

    Lambda: float
    eta_profile: ModeProfile
    u_profile: ModeProfile
    q_profile: object
    wavevector: WaveVector

    def field(self, t):
        c = math.exp(self.Lambda * t)
        return self.eta_profile.scaled(c), self.u_profile.scaled(c), self.q_profile.scaled(c)


class _Alpha:
    """alpha on a frozen lattice with a log and bracket pruning."""

    def __init__(self, p, lattice, cache: ModeCache):
        self.p = p
        self.lattice = lattice
        self.cache = cache
        self.wavevectors = lattice.wavevectors(p)
        cache.ensure(self.wavevectors)
        self.classes = sorted({cache.key(w) for w in self.wavevectors})
        self.log = []

    def full(self, s):
        vals = self.cache.class_values(self.classes, s)
        a = min(vals.values())
        self.log.append((float(s), a))
        return a

    def pruned(self, s, lower, upper_alpha):
        """Global minimum at s using only classes that can still attain it.

        ``lower[k]`` is a value of class k at some point not above s;
        ``upper_alpha`` is the global minimum at some point not below s.
        """
        slack = 1e-12 * max(1.0, abs(upper_alpha))
        live = [k for k in self.classes if lower.get(k, -math.inf) <= upper_alpha + slack]
        vals = self.cache.class_values(live, s)
        a = min(vals.values())
        self.log.append((float(s), a))
        return a, vals


def _neutral_scale(p):
    return max(1.0, p.g * p.rho_jump / p.rho_minus)


def find_neutral_bound(p: RTParameters, lattice: ModeLattice, degree: int = 32,
                       s_hi_guess: float = 1.0, cache: ModeCache | None = None,
                       threads=None, rel_width: float = 1e-3, _alpha=None):
    """Bracket (s_lo, s_hi) with alpha(s_lo) < 0 < alpha(s_hi)."""
    if cache is None:
        cache = ModeCache(p, degree, threads)
    A = _alpha or _Alpha(p, lattice.frozen(), cache)
    hi = float(s_hi_guess)
    a_hi = A.full(hi)
    n = 0
    while a_hi <= 0:
        if n >= MAX_DOUBLINGS:
            raise ExpansionExhausted(f"alpha still nonpositive at s = {hi}")
        hi *= 2.0
        a_hi = A.full(hi)
        n += 1
    lo, a_lo = hi, a_hi
    n = 0
    # rounding-level negatives are not instability
    floor = -NEUTRAL_TOL * _neutral_scale(p)
    while a_lo >= floor:
        if n >= MAX_DOUBLINGS:
            raise NotUnstable("alpha is nonnegative at every probed s > 0")
        lo *= 0.5
        a_lo = A.full(lo)
        n += 1
    if n:
        hi = 2.0 * lo
    while hi - lo > rel_width * hi:
        mid = 0.5 * (lo + hi)
        a_mid = A.full(mid)
        if a_mid < 0:
            lo = mid
        else:
            hi = mid
    return lo, hi


def _bisect_fixed_point(A: _Alpha, varsigma_by_class, J_hi, a_J, tol):
    """Bisection on h(s) = s - sqrt(max(0, -alpha(s))) over [0, J_hi]."""
    lower = dict(varsigma_by_class)
    lo, hi = 0.0, J_hi
    a_hi = a_J
    while True:
        mid = 0.5 * (lo + hi)
        a_mid, vals = A.pruned(mid, lower, a_hi)
        h = mid - math.sqrt(max(0.0, -a_mid))
        fp = abs(mid * mid + a_mid)
        if abs(h) <= tol and fp <= 0.5 * tol * max(1.0, mid * mid):
            return mid, a_mid
        if hi - lo <= 4.0 * np.finfo(float).eps * max(hi, 1.0):
            raise ToleranceNotMet(
                f"bracket collapsed at s = {mid} with |h| = {abs(h):.3e}, "
                f"|s^2 + alpha| = {fp:.3e}"
            )
        if h < 0:
            lo = mid
            lower.update(vals)
        else:
            hi, a_hi = mid, a_mid


def _stable_result(p, varsigma, lattice, degree, log):
    return GrowthResult(
        verdict="Stable",
        Lambda=None,
        critical_wavevector=None,
        eigenprofile=None,
        pressure_profile=None,
        frak_J=None,
        iterations=log,
        residual_report=None,
        varsigma=varsigma,
        lattice=lattice,
        degree=degree,
        parameters=p,
    )


def solve_growth_rate(p: RTParameters, lattice: ModeLattice, degree: int = 32,
                      tol: float = 1e-8, threads=None, s_hi_guess: float = 1.0,
                      cache: ModeCache | None = None, with_pressure: bool = True) -> GrowthResult:
    """Largest growth rate on the lattice, with eigenprofile and pressure."""
    validate_parameters(p)
    if cache is None:
        cache = ModeCache(p, degree, threads)
    base = lattice.frozen()
    wv0 = base.wavevectors(p)
    per0 = cache.values(wv0, 0.0)
    _, varsigma = _argmin(per0)
    log = [(0.0, varsigma)]
    if varsigma >= -NEUTRAL_TOL * _neutral_scale(p):
        return _stable_result(p, varsigma, base, degree, log)

    lat = base
    while True:
        A = _Alpha(p, lat, cache)
        A.log = log
        by_class = cache.class_values(A.classes, 0.0)
        J = find_neutral_bound(p, lat, degree, s_hi_guess, cache, _alpha=A)
        a_J = A.full(J[1])
        Lam, a_Lam = _bisect_fixed_point(A, by_class, J[1], a_J, tol)
        if lattice.adaptive:
            per = cache.values(lat.wavevectors(p), Lam)
            if _needs_extension(lat, per, min(per.values())):
                if lat.k_max >= lattice.cap:
                    from .errors import LatticeExhausted

                    raise LatticeExhausted(f"margin not met at Lambda on k_max = {lat.k_max}")
                lat = lat.with_k_max(min(lattice.cap, max(lat.k_max + 1, (3 * lat.k_max) // 2)))
                continue
        break

    sample = sample_on(p, Lam, lat, cache)
    w = sample.argmin_profile
    beta, consistency, residual = None, None, None
    if with_pressure:
        from .discretize import build_mode_operators
        from .stokes import pressure_for_eigenmode

        ops = build_mode_operators(p, sample.argmin_wavevector, degree)
        beta, consistency = pressure_for_eigenmode(p, ops, w, Lam)
        mode = NormalMode(Lam, w.scaled(1.0 / Lam), w, beta, sample.argmin_wavevector)
        residual = normal_mode_residual(p, mode, degree)
    return GrowthResult(
        verdict="Unstable",
        Lambda=Lam,
        critical_wavevector=sample.argmin_wavevector,
        eigenprofile=w,
        pressure_profile=beta,
        frak_J=J,
        iterations=log,
        residual_report=residual,
        varsigma=varsigma,
        alpha_at_Lambda=sample.alpha,
        fixed_point_residual=abs(Lam * Lam + sample.alpha),
        pressure_consistency=consistency,
        lattice=lat,
        degree=degree,
        parameters=p,
    )


def build_normal_mode(result: GrowthResult) -> NormalMode:
    if result.verdict != "Unstable":
        raise StableInput("a normal mode exists only for an unstable result")
    w = result.eigenprofile
    Lam = result.Lambda
    return NormalMode(Lam, w.scaled(1.0 / Lam), w, result.pressure_profile, result.critical_wavevector)


def normal_mode_residual(p: RTParameters, mode: NormalMode, degree: int | None = None) -> dict:
    """Strong-form residuals of the linearized mode equations.

    Interior: Lam^2 rho w - d_M^2 w + Lam grad beta - (Lam mu + kappa rho) Lap w
    at interior nodes. Interface: the stress jump balance at y3 = 0. Each
    is reported relative to its largest individual term.
    """
    w = mode.u_profile
    beta = mode.q_profile
    Lam = mode.Lambda
    xi1, xi2 = w.wavevector.xi1, w.wavevector.xi2
    k2 = xi1 * xi1 + xi2 * xi2
    a, b = (p.effective_field[0] * xi1 + p.effective_field[1] * xi2), p.effective_field[2]
    lo, hi = w.layers
    layers = (
        (lo, w.layer_minus, beta.at_nodes(0), p.rho_minus, p.mu_minus, p.kappa_minus),
        (hi, w.layer_plus, beta.at_nodes(1), p.rho_plus, p.mu_plus, p.kappa_plus),
    )
    interior_res, interior_scale = 0.0, 0.0
    traces = []
    for lay, u, q, rho, mu, kappa in layers:
        D = lay.D
        du = u @ D.T
        d2u = du @ D.T
        dq = q @ D.T
        grad_q = np.vstack([1j * xi1 * q, 1j * xi2 * q, dq])
        lap = d2u - k2 * u
        dm2 = -a * a * u + 2j * a * b * du + b * b * d2u
        nu = Lam * mu + kappa * rho
        terms = (Lam * Lam * rho * u, -dm2, Lam * grad_q, -nu * lap)
        res = sum(terms)[:, 1:-1]
        interior_res = max(interior_res, float(np.max(np.abs(res))))
        interior_scale = max(interior_scale, max(float(np.max(np.abs(t[:, 1:-1]))) for t in terms))
        traces.append((u, du, q, nu))

    def stress_e3(idx, u, du, q, nu):
        # (Lam beta I - nu Dw) e3 - M3 d_M w at one node
        ue, de, qe = u[:, idx], du[:, idx], q[idx]
        Dw = np.array([de[0] + 1j * xi1 * ue[2], de[1] + 1j * xi2 * ue[2], 2.0 * de[2]])
        S = -nu * Dw
        S[2] += Lam * qe
        return S - b * (1j * a * ue + b * de)

    s_minus = stress_e3(-1, *traces[0])
    s_plus = stress_e3(0, *traces[1])
    theta0 = w.interface_trace
    load = np.array([0.0, 0.0, (p.g * p.rho_jump - p.vartheta * k2) * theta0])
    iface = (s_plus - s_minus) - load
    iface_scale = max(float(np.max(np.abs(s_plus))), float(np.max(np.abs(s_minus))),
                      float(np.max(np.abs(load))))

    inv = w.invariant_residuals()
    rel = lambda r, sc: r / sc if sc > 0 else r
    return {
        "interior": rel(interior_res, interior_scale),
        "interface": rel(float(np.max(np.abs(iface))), iface_scale),
        "boundary": inv["dirichlet"],
        "divergence": inv["divergence"],
        "continuity": inv["continuity"],
        "interior_abs": interior_res,
        "interface_abs": float(np.max(np.abs(iface))),
    }
