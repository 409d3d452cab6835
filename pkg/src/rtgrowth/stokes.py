"""Per-mode two-layer Stokes problem and pressure recovery for eigenmodes.

Strong collocation on each layer: velocity is a degree-N polynomial per
component, pressure a degree-(N-2) polynomial stored at the N-1 interior
Lobatto nodes. The equations

    i xi q - nu (D^2 - |xi|^2) u_h = f_h
    q'     - nu (D^2 - |xi|^2) u_3 = f_3
    i xi . u_h + u_3'             = h

hold at interior nodes, with no-slip walls, continuity of u at y3 = 0 and
the stress jump [[(q I - nu Du) e3]] = j. The system is square.

For xi != 0 the mode e^{i xi . y_h} already has zero horizontal mean, so
no pressure gauge is needed; for xi = 0 the pressure is fixed by a
mean-zero row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import _spectral
from .errors import DegreeTooLow, IncompatibleData, SingularSystem
from .model import ModeProfile, RTParameters, WaveVector


@dataclass(frozen=True, eq=False)
class PressureProfile:
    """Pressure values at the interior Lobatto nodes of each layer."""

    minus: np.ndarray
    plus: np.ndarray
    degree: int
    l: float
    tau: float

    def _layer(self, which):
        lay = _spectral.layer(-self.l, 0.0, self.degree) if which == 0 else _spectral.layer(0.0, self.tau, self.degree)
        return lay, (self.minus if which == 0 else self.plus)

    def at_nodes(self, which):
        """Values at all velocity nodes of one layer (0 lower, 1 upper)."""
        lay, q = self._layer(which)
        E = _to_all_nodes(self.degree)
        return E @ q

    def at(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.zeros(y.size, dtype=complex)
        below = y < 0
        for which, mask in ((0, below), (1, ~below)):
            if mask.any():
                lay, q = self._layer(which)
                ref_int = _spectral.gll_nodes(self.degree)[1:-1]
                out[mask] = _spectral.interp_matrix(ref_int, lay.to_reference(y[mask])) @ q
        return out

    @property
    def jump(self):
        """[[q]] at y3 = 0, upper minus lower."""
        return complex(self.at_nodes(1)[0] - self.at_nodes(0)[-1])

    def scaled(self, c):
        return PressureProfile(c * self.minus, c * self.plus, self.degree, self.l, self.tau)

    def max_abs(self):
        return float(max(np.max(np.abs(self.minus)), np.max(np.abs(self.plus))))


def _to_all_nodes(n):
    ref = _spectral.gll_nodes(n)
    return _spectral.interp_matrix(ref[1:-1], ref)


@dataclass(frozen=True, eq=False)
class StokesModeSolution:
    velocity_profile: ModeProfile
    pressure_profile: PressureProfile
    jump_of_q: complex
    residual: float
    # the horizontal mean of a nonzero mode vanishes identically
    pressure_mean: complex = 0.0


def _as_layers(data, n, rows, name):
    if data is None:
        return np.zeros((rows, n + 1), dtype=complex), np.zeros((rows, n + 1), dtype=complex)
    if isinstance(data, ModeProfile):
        return data.layer_minus, data.layer_plus
    lo, hi = data
    lo = np.asarray(lo, dtype=complex).reshape(rows, -1)
    hi = np.asarray(hi, dtype=complex).reshape(rows, -1)
    if lo.shape[1] != n + 1 or hi.shape[1] != n + 1:
        raise ValueError(f"{name} must have {n + 1} nodal values per layer")
    return lo, hi


def solve_mode_stokes(p: RTParameters, xi, degree: int, rhs_interior=None, rhs_divergence=None,
                      rhs_jump=None, viscosity=None) -> StokesModeSolution:
    """Solve the stratified Stokes problem for one Fourier mode.

    ``rhs_interior`` holds nodal values of f per layer (ModeProfile or a
    pair of (3, N+1) arrays), ``rhs_divergence`` nodal values of h (pair
    of length N+1 arrays), ``rhs_jump`` the 3-vector j. ``viscosity``
    defaults to (mu_minus, mu_plus).
    """
    if degree < 8:
        raise DegreeTooLow(f"degree must be at least 8, got {degree}")
    if not isinstance(xi, WaveVector):
        xi = WaveVector.for_params(xi[0], xi[1], p)
    n = int(degree)
    nb = n + 1
    ni = n - 1
    xi1, xi2 = xi.xi1, xi.xi2
    k2 = xi1 * xi1 + xi2 * xi2
    nu = (p.mu_minus, p.mu_plus) if viscosity is None else tuple(float(v) for v in viscosity)
    f = _as_layers(rhs_interior, n, 3, "rhs_interior")
    h = _as_layers(rhs_divergence, n, 1, "rhs_divergence")
    j = np.zeros(3, dtype=complex) if rhs_jump is None else np.asarray(rhs_jump, dtype=complex)

    lays = (_spectral.layer(-p.l, 0.0, n), _spectral.layer(0.0, p.tau, n))
    ref = _spectral.gll_nodes(n)
    E = _to_all_nodes(n)  # interior pressure values -> all nodes
    Dq_ref = _spectral.diff_matrix(ref[1:-1])

    nu_dofs = 6 * nb
    ndof = nu_dofs + 2 * ni
    uidx = lambda L, c: L * 3 * nb + c * nb
    qidx = lambda L: nu_dofs + L * ni
    rows, rhs = [], []

    def new_row():
        return np.zeros(ndof, dtype=complex)

    for L, lay in enumerate(lays):
        half = 0.5 * lay.length
        D = lay.D
        H = D @ D - k2 * np.eye(nb)
        Dq = Dq_ref / half
        for c in range(3):
            for i in range(1, n):
                r = new_row()
                r[uidx(L, c): uidx(L, c) + nb] = -nu[L] * H[i]
                if c < 2:
                    r[qidx(L) + i - 1] = 1j * (xi1, xi2)[c]
                else:
                    r[qidx(L): qidx(L) + ni] = Dq[i - 1]
                rows.append(r)
                rhs.append(f[L][c, i])
        for i in range(1, n):
            r = new_row()
            r[uidx(L, 0) + i] = 1j * xi1
            r[uidx(L, 1) + i] = 1j * xi2
            r[uidx(L, 2): uidx(L, 2) + nb] = D[i]
            rows.append(r)
            rhs.append(h[L][0, i])
    for c in range(3):
        r = new_row(); r[uidx(0, c)] = 1.0; rows.append(r); rhs.append(0.0)
        r = new_row(); r[uidx(1, c) + n] = 1.0; rows.append(r); rhs.append(0.0)
        r = new_row(); r[uidx(1, c)] = 1.0; r[uidx(0, c) + n] = -1.0; rows.append(r); rhs.append(0.0)

    # stress jump: upper trace (node 0) minus lower trace (node n)
    jump_rows = [new_row() for _ in range(3)]
    for L, node, sign in ((1, 0, 1.0), (0, n, -1.0)):
        D = lays[L].D
        for c in range(2):
            jr = jump_rows[c]
            jr[uidx(L, c): uidx(L, c) + nb] += -sign * nu[L] * D[node]
            jr[uidx(L, 2) + node] += -sign * nu[L] * 1j * (xi1, xi2)[c]
        jr = jump_rows[2]
        jr[uidx(L, 2): uidx(L, 2) + nb] += -sign * 2.0 * nu[L] * D[node]
        jr[qidx(L): qidx(L) + ni] += sign * E[node]
    rows.extend(jump_rows)
    rhs.extend(j)

    A = np.array(rows)
    b = np.array(rhs, dtype=complex)
    zero_mode = k2 == 0.0
    if zero_mode:
        # gauge: mean-zero pressure over both layers
        r = new_row()
        for L, lay in enumerate(lays):
            r[qidx(L): qidx(L) + ni] = (lay.W @ lay.P) @ E
        A = np.vstack([A, r])
        b = np.append(b, 0.0)
        flux = sum(float(np.abs(lay.W @ (lay.P @ h[L][0]))) for L, lay in enumerate(lays))
        total = abs(sum(lay.W @ (lay.P @ h[L][0]) for L, lay in enumerate(lays)))
        if total > 1e-8 * max(1.0, flux):
            raise IncompatibleData(f"divergence data has nonzero net flux {total:.3e}")

    scale = np.max(np.abs(A), axis=1)
    A = A / scale[:, None]
    b = b / scale
    if zero_mode:
        x, *_ = sla.lstsq(A, b)
        res = float(np.max(np.abs(A @ x - b))) if b.size else 0.0
        if res > 1e-8 * max(1.0, float(np.max(np.abs(b)))):
            raise IncompatibleData(f"data incompatible with the zero mode (residual {res:.3e})")
    else:
        try:
            lu = sla.lu_factor(A, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SingularSystem(str(exc)) from exc
        if np.min(np.abs(np.diag(lu[0]))) < 1e-14 * np.max(np.abs(np.diag(lu[0]))):
            raise SingularSystem("Stokes collocation matrix is numerically singular")
        x = sla.lu_solve(lu, b)
        res = float(np.max(np.abs(A @ x - b)))

    u = ModeProfile.from_vector(x[:nu_dofs], xi, n, p.l, p.tau)
    q = PressureProfile(x[qidx(0): qidx(0) + ni], x[qidx(1): qidx(1) + ni], n, p.l, p.tau)
    mean = 0.0
    if zero_mode:
        mean = complex(sum(lay.W @ (lay.P @ q.at_nodes(L)) for L, lay in enumerate(lays)))
    return StokesModeSolution(u, q, q.jump, res, mean)


def stokes_operator(p: RTParameters, u: ModeProfile, q: PressureProfile, viscosity=None):
    """Apply the Stokes operator to (u, q): nodal f, h per layer and the jump j.

    Used to manufacture data and to measure residuals.
    """
    xi1, xi2 = u.wavevector.xi1, u.wavevector.xi2
    k2 = xi1 * xi1 + xi2 * xi2
    nu = (p.mu_minus, p.mu_plus) if viscosity is None else viscosity
    f, h, stress = [], [], []
    for L, (lay, uu) in enumerate(zip(u.layers, (u.layer_minus, u.layer_plus))):
        D = lay.D
        du = uu @ D.T
        lap = du @ D.T - k2 * uu
        qq = q.at_nodes(L)
        dq = qq @ D.T
        f.append(np.vstack([1j * xi1 * qq, 1j * xi2 * qq, dq]) - nu[L] * lap)
        h.append((1j * xi1 * uu[0] + 1j * xi2 * uu[1] + du[2])[None, :])
        node = -1 if L == 0 else 0
        S = -nu[L] * np.array(
            [du[0, node] + 1j * xi1 * uu[2, node], du[1, node] + 1j * xi2 * uu[2, node], 2.0 * du[2, node]]
        )
        S[2] += qq[node]
        stress.append(S)
    return (f[0], f[1]), (h[0], h[1]), stress[1] - stress[0]


def _kkt_pressure(ops, w: ModeProfile, sigma, s):
    """Pressure from the divergence multiplier of the constrained eigenproblem."""
    A = s * ops.K_visc + ops.K_elast + ops.K_mag + ops.B_tens - ops.B_grav
    x = w.vector
    r = A @ x - sigma * (ops.M @ x)
    Cs = ops.constraints
    nu, *_ = sla.lstsq(Cs.conj().T, r)
    n = ops.degree
    nb = n + 1
    raw = ops.unit.div_raw
    row_scale = np.max(np.abs(raw), axis=1)
    nu_div = nu[: 2 * nb] / row_scale
    lays = w.layers
    vals = []
    for L, lay in enumerate(lays):
        # the multiplier pairs with nodal divergence values through the Gram matrix
        vals.append(np.linalg.solve(lay.gram, nu_div[L * nb:(L + 1) * nb]))
    return vals[0] / s, vals[1] / s


def pressure_for_eigenmode(p: RTParameters, ops, w: ModeProfile, Lambda: float):
    """Mode pressure beta by a Stokes solve, cross-checked against the KKT multiplier.

    Returns (PressureProfile, consistency) where consistency is the relative
    max-norm gap between the two recoveries at the velocity nodes.
    """
    s = float(Lambda)
    xi = w.wavevector
    xi1, xi2 = xi.xi1, xi.xi2
    k2 = xi1 * xi1 + xi2 * xi2
    m1, m2, b = p.effective_field
    a = m1 * xi1 + m2 * xi2
    x = w.vector
    sigma = float(np.real(np.vdot(x, (s * ops.K_visc + ops.K_elast + ops.K_mag + ops.B_tens - ops.B_grav) @ x)))
    mass = float(np.real(np.vdot(x, ops.M @ x)))
    if mass == 0.0:
        zero = np.zeros(w.degree - 1, dtype=complex)
        return PressureProfile(zero, zero, w.degree, w.l, w.tau), 0.0
    sigma /= mass

    nu = (
        s * p.mu_minus + p.kappa_minus * p.rho_minus + b * b,
        s * p.mu_plus + p.kappa_plus * p.rho_plus + b * b,
    )
    f = []
    for lay, u, rho in zip(w.layers, (w.layer_minus, w.layer_plus), (p.rho_minus, p.rho_plus)):
        du = u @ lay.D.T
        f.append((-a * a + b * b * k2 + sigma * rho) * u + 2j * a * b * du)
    jump = np.array([0.0, 0.0, (p.g * p.rho_jump - p.vartheta * k2) * w.interface_trace])
    sol = solve_mode_stokes(p, xi, w.degree, (f[0], f[1]), None, jump, viscosity=nu)
    beta_b = sol.pressure_profile.scaled(1.0 / s)

    qa = _kkt_pressure(ops, w, sigma, s)
    pa = np.concatenate(qa)
    pb = np.concatenate([beta_b.at_nodes(0), beta_b.at_nodes(1)])
    ref = float(np.max(np.abs(pb)))
    consistency = float(np.max(np.abs(pa - pb))) / ref if ref > 0 else float(np.max(np.abs(pa)))
    return beta_b, consistency
