"""Per-mode discretization: unit forms, constraint kernel and the operator bundle.

The unknown on each layer is the triple (phi, psi, theta) of nodal values
at the Lobatto points; the global vector is ``[lower, upper]`` with the
components of a layer stored contiguously. Every quadratic form is
assembled on the doubled Clenshaw-Curtis grid, so it is exact for the
polynomial space.

Forms that do not depend on the physical parameters (the "unit" forms)
are built once per (geometry, wavevector, degree) and then weighted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.linalg as sla

from . import _spectral
from .errors import DegreeTooLow, IndefiniteDenominator, ProfileMismatch, RankDeficiency
from .model import RTParameters, WaveVector

MIN_DEGREE = 8


@dataclass(frozen=True, eq=False)
class UnitForms:
    """Parameter-free pieces of every form for one wavevector.

    ``sym_*`` is the integral of |Dw|^2 with Dw = grad w + grad w^T,
    ``grad3`` the integral of |w'|^2, ``cross`` the Hermitian form of
    ``2 Re(conj(i w) . w')`` and ``trace`` selects theta(0).
    """

    mass_minus: np.ndarray
    mass_plus: np.ndarray
    sym_minus: np.ndarray
    sym_plus: np.ndarray
    grad3: np.ndarray
    cross: np.ndarray
    trace: np.ndarray
    div_raw: np.ndarray
    constraints: np.ndarray
    Z: np.ndarray
    xi: tuple
    degree: int
    l: float
    tau: float

    @property
    def l2(self):
        return self.mass_minus + self.mass_plus

    def reduce(self):
        Z = self.Z
        zh = Z.conj().T
        red = lambda K: _herm(zh @ K @ Z)
        return ReducedUnitForms(
            mass_minus=red(self.mass_minus),
            mass_plus=red(self.mass_plus),
            sym_minus=red(self.sym_minus),
            sym_plus=red(self.sym_plus),
            grad3=red(self.grad3),
            cross=red(self.cross),
            trace=zh @ self.trace,
            xi_norm=math.hypot(*self.xi),
        )


@dataclass(frozen=True, eq=False)
class ReducedUnitForms:
    mass_minus: np.ndarray
    mass_plus: np.ndarray
    sym_minus: np.ndarray
    sym_plus: np.ndarray
    grad3: np.ndarray
    cross: np.ndarray
    trace: np.ndarray
    xi_norm: float


@dataclass(frozen=True, eq=False)
class FormSet:
    """The six weighted forms, either full-size or reduced to the kernel."""

    M: np.ndarray
    K_visc: np.ndarray
    K_elast: np.ndarray
    K_mag: np.ndarray
    B_grav: np.ndarray
    B_tens: np.ndarray

    @property
    def K_stab(self):
        """Everything that enters the stabilizing term I."""
        return self.B_tens + self.K_elast + self.K_mag


def _herm(K):
    return 0.5 * (K + K.conj().T)


def _layer_blocks(lay, xi1, xi2):
    nb = lay.n + 1
    W = lay.W[:, None]
    eye3 = np.eye(3)
    gram = lay.gram
    X = lay.P.T @ (W * lay.DP)
    mass = np.kron(eye3, gram)
    grad3 = np.kron(eye3, lay.DP.T @ (W * lay.DP))
    cross = np.kron(eye3, -1j * X + 1j * X.T)

    # G[c][d]: derivative along direction d of component c, fine grid x dofs
    Z0 = np.zeros_like(lay.P)
    G = []
    for c in range(3):
        row = []
        for d, op in enumerate((1j * xi1 * lay.P, 1j * xi2 * lay.P, lay.DP)):
            blocks = [Z0, Z0, Z0]
            blocks[c] = op
            row.append(np.hstack(blocks))
        G.append(row)
    sym = np.zeros((3 * nb, 3 * nb), dtype=complex)
    for c in range(3):
        for d in range(c, 3):
            S = G[c][d] + G[d][c]
            term = S.conj().T @ (W * S)
            sym += term if c == d else 2.0 * term

    div = np.hstack([1j * xi1 * np.eye(nb), 1j * xi2 * np.eye(nb), lay.D])
    return mass, sym, grad3, cross, div


def _build_unit_forms(l, tau, xi1, xi2, degree):
    n = degree
    nb = n + 1
    half = 3 * nb
    ndof = 2 * half
    lo = _spectral.layer(-l, 0.0, n)
    hi = _spectral.layer(0.0, tau, n)
    m_lo, s_lo, g_lo, c_lo, d_lo = _layer_blocks(lo, xi1, xi2)
    m_hi, s_hi, g_hi, c_hi, d_hi = _layer_blocks(hi, xi1, xi2)

    def embed(block, which):
        out = np.zeros((ndof, ndof), dtype=complex)
        sl = slice(0, half) if which == 0 else slice(half, ndof)
        out[sl, sl] = block
        return out

    div_raw = np.zeros((2 * nb, ndof), dtype=complex)
    div_raw[:nb, :half] = d_lo
    div_raw[nb:, half:] = d_hi

    idx = lambda layer_, comp, node: layer_ * half + comp * nb + node
    bc = np.zeros((9, ndof), dtype=complex)
    for c in range(3):
        bc[c, idx(0, c, 0)] = 1.0
        bc[3 + c, idx(1, c, n)] = 1.0
        bc[6 + c, idx(1, c, 0)] = 1.0
        bc[6 + c, idx(0, c, n)] = -1.0
    trace = np.zeros(ndof)
    trace[idx(0, 2, n)] = 0.5
    trace[idx(1, 2, 0)] = 0.5

    div_n = div_raw / np.max(np.abs(div_raw), axis=1, keepdims=True)
    stack = np.vstack([div_n, bc])
    Q, R, _ = sla.qr(stack.conj().T, pivoting=True, mode="full")
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > diag[0] * max(stack.shape) * 1e-13))
    if rank < stack.shape[0]:
        raise RankDeficiency(
            f"constraint stack has rank {rank} < {stack.shape[0]} at xi=({xi1}, {xi2})"
        )
    Z = Q[:, rank:]
    return UnitForms(
        mass_minus=embed(m_lo, 0),
        mass_plus=embed(m_hi, 1),
        sym_minus=embed(s_lo, 0),
        sym_plus=embed(s_hi, 1),
        grad3=embed(g_lo, 0) + embed(g_hi, 1),
        cross=embed(c_lo, 0) + embed(c_hi, 1),
        trace=trace,
        div_raw=div_raw,
        constraints=stack,
        Z=Z,
        xi=(float(xi1), float(xi2)),
        degree=n,
        l=float(l),
        tau=float(tau),
    )


@lru_cache(maxsize=16)
def unit_forms(l, tau, xi1, xi2, degree):
    return _build_unit_forms(l, tau, xi1, xi2, degree)


def reduced_unit_forms(l, tau, xi_norm, degree):
    """Kernel-reduced unit forms in the frame xi = (|xi|, 0).

    Every weighted form is invariant under a horizontal rotation of
    (phi, psi), so these serve any wavevector of the same length.
    """
    return _build_unit_forms(l, tau, xi_norm, 0.0, degree).reduce()


def field_coefficients(p: RTParameters, xi1, xi2):
    """(M_h . xi, M_3) for the effective field sqrt(lambda) M_bar."""
    m1, m2, m3 = p.effective_field
    return m1 * xi1 + m2 * xi2, m3


def weight_forms(u, p: RTParameters, a, b, xi_sq, full=True):
    """Combine unit forms with the physical coefficients.

    ``u`` is a UnitForms (``full=True``) or ReducedUnitForms. ``a`` and
    ``b`` are the horizontal and vertical field coefficients.
    """
    mass_m, mass_p = u.mass_minus, u.mass_plus
    sym_m, sym_p = u.sym_minus, u.sym_plus
    l2 = mass_m + mass_p
    e = u.trace
    ee = np.outer(e, e.conj())
    return FormSet(
        M=p.rho_minus * mass_m + p.rho_plus * mass_p,
        K_visc=0.5 * (p.mu_minus * sym_m + p.mu_plus * sym_p),
        K_elast=0.5 * (p.kappa_minus * p.rho_minus * sym_m + p.kappa_plus * p.rho_plus * sym_p),
        K_mag=a * a * l2 + b * b * u.grad3 + a * b * u.cross,
        B_grav=p.g * p.rho_jump * ee,
        B_tens=p.vartheta * xi_sq * ee,
    )


@dataclass(frozen=True, eq=False)
class ModeOperators:
    """Hermitian forms for one Fourier mode plus the constraint kernel."""

    M: np.ndarray
    K_visc: np.ndarray
    K_elast: np.ndarray
    K_mag: np.ndarray
    B_grav: np.ndarray
    B_tens: np.ndarray
    C: np.ndarray
    Z: np.ndarray
    constraints: np.ndarray
    dof_count: int
    wavevector: WaveVector
    degree: int
    l: float
    tau: float
    parameters: RTParameters
    unit: UnitForms

    @property
    def kernel_dim(self):
        return self.Z.shape[1]

    def reduce(self, K):
        return _herm(self.Z.conj().T @ K @ self.Z)

    @cached_property
    def reduced(self) -> FormSet:
        return FormSet(
            *(self.reduce(getattr(self, n)) for n in ("M", "K_visc", "K_elast", "K_mag", "B_grav", "B_tens"))
        )

    def form(self, name_or_matrix):
        if isinstance(name_or_matrix, str):
            if name_or_matrix == "K_stab":
                return self.B_tens + self.K_elast + self.K_mag
            return getattr(self, name_or_matrix)
        K = np.asarray(name_or_matrix)
        if K.shape != (self.dof_count, self.dof_count):
            raise ProfileMismatch(f"form of shape {K.shape} does not match dof_count {self.dof_count}")
        return K


def build_mode_operators(p: RTParameters, xi, degree: int) -> ModeOperators:
    if degree < MIN_DEGREE:
        raise DegreeTooLow(f"degree must be at least {MIN_DEGREE}, got {degree}")
    if not isinstance(xi, WaveVector):
        xi = WaveVector.for_params(xi[0], xi[1], p)
    u = unit_forms(p.l, p.tau, xi.xi1, xi.xi2, int(degree))
    a, b = field_coefficients(p, xi.xi1, xi.xi2)
    f = weight_forms(u, p, a, b, xi.xi_norm**2)
    nb = degree + 1
    return ModeOperators(
        M=f.M,
        K_visc=f.K_visc,
        K_elast=f.K_elast,
        K_mag=f.K_mag,
        B_grav=f.B_grav,
        B_tens=f.B_tens,
        C=u.constraints[: 2 * nb],
        Z=u.Z,
        constraints=u.constraints,
        dof_count=6 * nb,
        wavevector=xi,
        degree=int(degree),
        l=p.l,
        tau=p.tau,
        parameters=p,
        unit=u,
    )


def quotient_bound(N, D, rtol=1e-10):
    """sup of x^H N x / x^H D x for Hermitian N and semidefinite D.

    A singular D is allowed as long as N vanishes on its null space;
    otherwise the quotient is unbounded.
    """
    N, D = _herm(np.asarray(N)), _herm(np.asarray(D))
    d, V = sla.eigh(D)
    dscale = np.max(np.abs(d)) if d.size else 0.0
    nscale = np.max(np.abs(N)) if N.size else 0.0
    if dscale == 0.0:
        if nscale == 0.0:
            return 0.0
        raise IndefiniteDenominator("denominator form vanishes on the kernel")
    cut = rtol * dscale
    if d[0] < -cut:
        raise IndefiniteDenominator(f"denominator has negative eigenvalue {d[0]:.3e}")
    pos = d > cut
    Vn = V[:, ~pos]
    if Vn.shape[1] and nscale > 0.0:
        leak = np.max(np.abs(N @ Vn))
        if leak > 1e3 * rtol * nscale * max(1.0, math.sqrt(N.shape[0])):
            raise IndefiniteDenominator(
                "numerator is nonzero on the null space of the denominator"
            )
    if not pos.any():
        return 0.0
    B = V[:, pos] / np.sqrt(d[pos])
    T = _herm(B.conj().T @ N @ B)
    return float(sla.eigvalsh(T)[-1])


def rayleigh_quotient_bound(ops: ModeOperators, numerator_form, denominator_form) -> float:
    """Largest generalized eigenvalue of the pair restricted to ker C.

    Forms may be given as full matrices or by attribute name
    ("B_grav", "K_stab", ...).
    """
    Nr = ops.reduce(ops.form(numerator_form))
    Dr = ops.reduce(ops.form(denominator_form))
    return quotient_bound(Nr, Dr)
