"""Problem parameters, Fourier modes and the energy functionals.

A perturbation is a single horizontal Fourier mode
``w(y) = w_hat(y3) exp(i xi . y_h)`` with ``xi = (k1 / L1, k2 / L2)``.
Every energy below is the per-mode value with the common horizontal
measure ``4 pi^2 L1 L2`` divided out.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import _spectral
from .errors import (
    NegativeCoefficient,
    NonPositiveParameter,
    ParameterError,
    ProfileMismatch,
    RTConditionViolated,
)

_POSITIVE = ("rho_plus", "rho_minus", "mu_plus", "mu_minus", "g", "l", "tau", "L1", "L2")
_NONNEGATIVE = ("kappa_plus", "kappa_minus", "vartheta", "lam")


@dataclass(frozen=True)
class RTParameters:
    """Physical and geometric constants of a two-layer configuration.

    ``lam`` scales the impressed field: the operators only ever see
    ``sqrt(lam) * M_bar``.
    """

    rho_plus: float
    rho_minus: float
    mu_plus: float = 1.0
    mu_minus: float = 1.0
    kappa_plus: float = 0.0
    kappa_minus: float = 0.0
    vartheta: float = 0.0
    g: float = 1.0
    lam: float = 0.0
    M_bar: tuple = (0.0, 0.0, 0.0)
    l: float = 1.0
    tau: float = 1.0
    L1: float = 1.0
    L2: float = 1.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if f.name != "M_bar":
                object.__setattr__(self, f.name, float(getattr(self, f.name)))
        m = tuple(float(c) for c in self.M_bar)
        if len(m) != 3:
            raise ValueError("M_bar must have three components")
        object.__setattr__(self, "M_bar", m)

    @property
    def rho_jump(self):
        return self.rho_plus - self.rho_minus

    @property
    def effective_field(self):
        s = math.sqrt(self.lam)
        return tuple(s * c for c in self.M_bar)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["M_bar"] = list(self.M_bar)
        return d


def validate_parameters(p: RTParameters) -> RTParameters:
    """Return ``p`` unchanged, or raise naming the first offending field."""
    for name in _POSITIVE:
        v = getattr(p, name)
        if not (v > 0) or not math.isfinite(v):
            raise NonPositiveParameter(name)
    for name in _NONNEGATIVE:
        v = getattr(p, name)
        if not (v >= 0) or not math.isfinite(v):
            raise NegativeCoefficient("lambda" if name == "lam" else name)
    if not all(math.isfinite(c) for c in p.M_bar):
        raise ParameterError("M_bar components must be finite", "M_bar")
    if not p.rho_plus > p.rho_minus:
        raise RTConditionViolated(
            f"RT condition rho_plus > rho_minus violated ({p.rho_plus} <= {p.rho_minus})"
        )
    return p


@dataclass(frozen=True)
class WaveVector:
    k1: int
    k2: int
    L1: float = 1.0
    L2: float = 1.0

    @classmethod
    def for_params(cls, k1, k2, p: RTParameters):
        return cls(int(k1), int(k2), p.L1, p.L2)

    @property
    def xi1(self):
        return self.k1 / self.L1

    @property
    def xi2(self):
        return self.k2 / self.L2

    @property
    def xi(self):
        return np.array([self.xi1, self.xi2])

    @property
    def xi_norm(self):
        return math.hypot(self.xi1, self.xi2)

    @property
    def indices(self):
        return (self.k1, self.k2)

    def canonical(self):
        """Representative of the pair {xi, -xi} on the half lattice."""
        if self.k1 < 0 or (self.k1 == 0 and self.k2 < 0):
            return WaveVector(-self.k1, -self.k2, self.L1, self.L2)
        return self


@dataclass(frozen=True, eq=False)
class ModeProfile:
    """Nodal values of (phi, psi, theta) on each layer.

    ``layer_minus`` lives on (-l, 0) and ``layer_plus`` on (0, tau); both
    have shape ``(3, degree + 1)`` with nodes in ascending y3.
    """

    layer_minus: np.ndarray
    layer_plus: np.ndarray
    wavevector: WaveVector
    degree: int
    l: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        shape = (3, self.degree + 1)
        for name in ("layer_minus", "layer_plus"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != shape:
                raise ProfileMismatch(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_vector(cls, x, wavevector, degree, l=1.0, tau=1.0):
        x = np.asarray(x, dtype=complex)
        nb = 3 * (degree + 1)
        if x.shape != (2 * nb,):
            raise ProfileMismatch(f"vector length {x.shape} does not match degree {degree}")
        return cls(x[:nb].reshape(3, -1), x[nb:].reshape(3, -1), wavevector, degree, l, tau)

    @classmethod
    def from_function(cls, fn, wavevector, degree, l=1.0, tau=1.0):
        """Sample ``fn(y) -> (3, len(y))`` at the collocation nodes."""
        lo, hi = _spectral.layer(-l, 0.0, degree), _spectral.layer(0.0, tau, degree)
        return cls(np.asarray(fn(lo.nodes)), np.asarray(fn(hi.nodes)), wavevector, degree, l, tau)

    @classmethod
    def zeros(cls, wavevector, degree, l=1.0, tau=1.0):
        z = np.zeros((3, degree + 1), dtype=complex)
        return cls(z, z, wavevector, degree, l, tau)

    @property
    def vector(self):
        return np.concatenate([self.layer_minus.ravel(), self.layer_plus.ravel()])

    @property
    def layers(self):
        return (
            _spectral.layer(-self.l, 0.0, self.degree),
            _spectral.layer(0.0, self.tau, self.degree),
        )

    @property
    def nodes(self):
        lo, hi = self.layers
        return lo.nodes, hi.nodes

    @property
    def interface_trace(self):
        """theta at y3 = 0, averaged over the two one-sided traces."""
        return 0.5 * (self.layer_minus[2, -1] + self.layer_plus[2, 0])

    def scaled(self, c):
        return ModeProfile(
            c * self.layer_minus, c * self.layer_plus, self.wavevector, self.degree, self.l, self.tau
        )

    def evaluate(self, y):
        """Values of (phi, psi, theta) at points y in [-l, tau]; the plus layer wins at 0."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.zeros((3, y.size), dtype=complex)
        lo, hi = self.layers
        below = y < 0
        if below.any():
            out[:, below] = self.layer_minus @ lo.interp(y[below]).T
        if (~below).any():
            out[:, ~below] = self.layer_plus @ hi.interp(y[~below]).T
        return out

    def derivative(self):
        """Nodal values of d/dy3 on each layer."""
        lo, hi = self.layers
        return self.layer_minus @ lo.D.T, self.layer_plus @ hi.D.T

    def invariant_residuals(self):
        """Max-abs violation of continuity, wall and divergence conditions."""
        dm, dp = self.derivative()
        xi1, xi2 = self.wavevector.xi1, self.wavevector.xi2
        div_m = 1j * xi1 * self.layer_minus[0] + 1j * xi2 * self.layer_minus[1] + dm[2]
        div_p = 1j * xi1 * self.layer_plus[0] + 1j * xi2 * self.layer_plus[1] + dp[2]
        return {
            "continuity": float(np.max(np.abs(self.layer_plus[:, 0] - self.layer_minus[:, -1]))),
            "dirichlet": float(
                max(np.max(np.abs(self.layer_minus[:, 0])), np.max(np.abs(self.layer_plus[:, -1])))
            ),
            "divergence": float(max(np.max(np.abs(div_m)), np.max(np.abs(div_p)))),
        }


@dataclass(frozen=True)
class FunctionalValues:
    E: float
    I: float
    F: float
    rho_norm_sq: float
    grav_term: float
    visc_term: float
    s: float = 0.0
    # every value above is per unit horizontal measure
    horizontal_measure: float = field(default=1.0)


def _quad(K, x):
    return float(np.real(np.vdot(x, K @ x)))


def evaluate_functionals(p: RTParameters, w: ModeProfile, s: float = 0.0, ops=None) -> FunctionalValues:
    """Energies E, I and F(., s) of a mode profile.

    ``visc_term`` is half the squared mu-weighted symmetric-gradient norm,
    so ``F = E + s * visc_term``.
    """
    from .discretize import build_mode_operators

    if (w.l, w.tau) != (p.l, p.tau):
        raise ProfileMismatch("profile layer depths differ from the parameters")
    if (w.wavevector.L1, w.wavevector.L2) != (p.L1, p.L2):
        raise ProfileMismatch("profile wavevector uses different period scales")
    if ops is None:
        ops = build_mode_operators(p, w.wavevector, w.degree)
    elif ops.degree != w.degree or ops.wavevector != w.wavevector:
        raise ProfileMismatch(
            f"operators built for degree {ops.degree} at {ops.wavevector.indices}, "
            f"profile has degree {w.degree} at {w.wavevector.indices}"
        )
    x = w.vector
    grav = _quad(ops.B_grav, x)
    stab = _quad(ops.B_tens, x) + _quad(ops.K_elast, x) + _quad(ops.K_mag, x)
    visc = _quad(ops.K_visc, x)
    E = stab - grav
    return FunctionalValues(
        E=E,
        I=stab,
        F=E + s * visc,
        rho_norm_sq=_quad(ops.M, x),
        grav_term=grav,
        visc_term=visc,
        s=float(s),
        horizontal_measure=4.0 * math.pi**2 * p.L1 * p.L2,
    )
