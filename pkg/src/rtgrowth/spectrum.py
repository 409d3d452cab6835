"""The modified variational value alpha(s) over a lattice of Fourier modes.

For each wavevector the infimum of F(., s) over unit-mass profiles is the
smallest eigenvalue of a reduced Hermitian-definite pencil, and alpha(s)
is the minimum over the lattice.

The mean mode xi = 0 is never swept. With rigid walls and a divergence
constraint it forces theta = 0 identically, so the gravity term vanishes
and the mode only carries nonnegative energy; it cannot lower a negative
infimum.

Two wavevectors of equal |xi| and equal (M_h . xi)^2 give identical
reduced pencils (rotate the horizontal components, and conjugate to flip
the sign of M_h . xi), so the sweep solves each distinct pair once.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from .discretize import (
    ModeOperators,
    build_mode_operators,
    field_coefficients,
    reduced_unit_forms,
    weight_forms,
)
from .errors import DegreeTooLow, LatticeExhausted, NumericalBreakdown
from .model import ModeProfile, RTParameters, WaveVector

DEFAULT_CAP = 256


@dataclass(frozen=True)
class ModeLattice:
    """Half lattice ``k1 >= 0``, ``(k1, k2) != 0``, ``max(|k1|, |k2|) <= k_max``.

    Pairs with ``k1 == 0`` keep only ``k2 > 0`` so each +-xi pair appears once.
    """

    k_max: int = 16
    adaptive: bool = False
    cap: int = DEFAULT_CAP
    margin_factor: float = 10.0
    margin_offset: float = 1.0

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")

    def indices(self):
        K = self.k_max
        out = [(0, k2) for k2 in range(1, K + 1)]
        out += [(k1, k2) for k1 in range(1, K + 1) for k2 in range(-K, K + 1)]
        return out

    def wavevectors(self, p: RTParameters):
        return [WaveVector(k1, k2, p.L1, p.L2) for k1, k2 in self.indices()]

    def shell_indices(self):
        return [k for k in self.indices() if max(abs(k[0]), abs(k[1])) == self.k_max]

    def xi_max(self, p: RTParameters):
        return self.k_max / min(p.L1, p.L2)

    def with_k_max(self, k_max):
        return replace(self, k_max=int(k_max))

    def frozen(self):
        return replace(self, adaptive=False)

    def __len__(self):
        return self.k_max * (2 * self.k_max + 1) + self.k_max


@dataclass(frozen=True, eq=False)
class AlphaSample:
    s: float
    alpha: float
    argmin_wavevector: WaveVector
    argmin_profile: ModeProfile | None
    per_mode_minima: dict
    lattice: ModeLattice | None = None
    argmin_visc_energy: float = float("nan")

    @property
    def shell_minimum(self):
        if self.lattice is None:
            return float("nan")
        K = self.lattice.k_max
        return min(
            v for w, v in self.per_mode_minima.items() if max(abs(w.k1), abs(w.k2)) == K
        )


def _canonical_phase(x):
    j = int(np.argmax(np.abs(x)))
    if x[j] == 0:
        return x
    x = x * (abs(x[j]) / x[j])
    x[j] = abs(x[j])
    return x


def min_constrained_eigen(ops: ModeOperators, s: float):
    """Smallest constrained eigenpair of F(., s) against the mass form.

    Returns (eigenvalue, ModeProfile) with the profile M-normalized and
    its largest entry real and positive.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    r = ops.reduced
    A = s * r.K_visc + r.K_stab - r.B_grav
    try:
        vals, vecs = sla.eigh(A, r.M, subset_by_index=[0, 0])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalBreakdown(f"eigensolve failed at {ops.wavevector.indices}: {exc}") from exc
    x = ops.Z @ vecs[:, 0]
    x = x / math.sqrt(float(np.real(np.vdot(x, ops.M @ x))))
    x = _canonical_phase(x)
    w = ModeProfile.from_vector(x, ops.wavevector, ops.degree, ops.l, ops.tau)
    return float(vals[0]), w


class _ModeSolver:
    """Whitened pencil of one mode class: lam_min(A0 + s V)."""

    __slots__ = ("A0", "V", "values")

    def __init__(self, forms):
        try:
            L = sla.cholesky(forms.M, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown(f"mass form not definite: {exc}") from exc
        def whiten(K):
            T = sla.solve_triangular(L, K, lower=True)
            T = sla.solve_triangular(L, T.conj().T, lower=True)
            return 0.5 * (T + T.conj().T)
        self.A0 = whiten(forms.K_stab - forms.B_grav)
        self.V = whiten(forms.K_visc)
        self.values = {}

    def __call__(self, s):
        v = self.values.get(s)
        if v is None:
            try:
                v = float(sla.eigvalsh(self.A0 + s * self.V, subset_by_index=[0, 0])[0])
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise NumericalBreakdown(f"eigensolve failed: {exc}") from exc
            self.values[s] = v
        return v


def _round_key(x):
    return float(f"{x:.12e}")


class ModeCache:
    """Per-computation store of mode solvers keyed by (|xi|^2, (M_h . xi)^2).

    Scoped to one parameter set and degree; discard it with the computation.
    """

    def __init__(self, p: RTParameters, degree: int, threads: int | None = None):
        if degree < 8:
            raise DegreeTooLow(f"degree must be at least 8, got {degree}")
        self.p = p
        self.degree = int(degree)
        self.threads = threads
        self.solvers = {}
        self._keys = {}

    def key(self, w: WaveVector):
        k = self._keys.get(w.indices)
        if k is None:
            a, _ = field_coefficients(self.p, w.xi1, w.xi2)
            k = (_round_key(w.xi_norm**2), _round_key(a * a))
            self._keys[w.indices] = k
        return k

    def ensure(self, wavevectors):
        """Build solvers for every class not yet seen."""
        by_norm = {}
        for w in wavevectors:
            k = self.key(w)
            if k not in self.solvers:
                by_norm.setdefault(k[0], {})[k] = w
        if not by_norm:
            return
        p = self.p
        b = p.effective_field[2]

        def build(group):
            xi_norm = next(iter(group.values())).xi_norm
            u = reduced_unit_forms(p.l, p.tau, xi_norm, self.degree)
            out = {}
            for k, w in group.items():
                a, _ = field_coefficients(p, w.xi1, w.xi2)
                out[k] = _ModeSolver(weight_forms(u, p, abs(a), b, w.xi_norm**2))
            return out

        groups = [by_norm[n] for n in sorted(by_norm)]
        for built in self._map(build, groups):
            self.solvers.update(built)

    def _map(self, fn, items):
        n = self.threads
        if n is None or n == 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=(n or None)) as ex:
            return list(ex.map(fn, items))

    def class_values(self, keys, s):
        keys = sorted(set(keys))
        vals = self._map(lambda k: self.solvers[k](s), keys)
        return dict(zip(keys, vals))

    def values(self, wavevectors, s):
        """Per-wavevector minima at s, in the given order."""
        self.ensure(wavevectors)
        cv = self.class_values([self.key(w) for w in wavevectors], s)
        return {w: cv[self.key(w)] for w in wavevectors}


def _argmin(per_mode):
    best_w, best_v = None, math.inf
    for w in sorted(per_mode, key=lambda w: w.indices):
        v = per_mode[w]
        if v < best_v:
            best_w, best_v = w, v
    return best_w, best_v


def _needs_extension(lattice: ModeLattice, per_mode, gmin):
    K = lattice.k_max
    shell = min(v for w, v in per_mode.items() if max(abs(w.k1), abs(w.k2)) == K)
    return shell < gmin + lattice.margin_factor * abs(gmin) + lattice.margin_offset


def adapt_lattice(p, s, lattice: ModeLattice, cache: ModeCache):
    """Grow k_max until the boundary shell clears the global minimum by the margin.

    Returns the (non-adaptive) lattice that satisfied the margin.
    """
    lat = lattice.frozen()
    while True:
        per_mode = cache.values(lat.wavevectors(p), s)
        _, gmin = _argmin(per_mode)
        if not _needs_extension(lat, per_mode, gmin):
            return lat
        if lat.k_max >= lattice.cap:
            raise LatticeExhausted(
                f"boundary shell still within margin of the minimum at k_max = {lat.k_max}"
            )
        lat = lat.with_k_max(min(lattice.cap, max(lat.k_max + 1, (3 * lat.k_max) // 2)))


def sample_on(p, s, lattice: ModeLattice, cache: ModeCache, profile=True):
    """alpha(s) on a fixed lattice, with the argmin profile rebuilt in its own frame."""
    per_mode = cache.values(lattice.wavevectors(p), s)
    w_star, gmin = _argmin(per_mode)
    prof, visc = None, float("nan")
    if profile:
        ops = build_mode_operators(p, w_star, cache.degree)
        _, prof = min_constrained_eigen(ops, s)
        x = prof.vector
        visc = float(np.real(np.vdot(x, ops.K_visc @ x)))
    return AlphaSample(
        s=float(s),
        alpha=gmin,
        argmin_wavevector=w_star,
        argmin_profile=prof,
        per_mode_minima=per_mode,
        lattice=lattice,
        argmin_visc_energy=visc,
    )


def alpha_of_s(p: RTParameters, s: float, lattice: ModeLattice, degree: int = 32,
               cache: ModeCache | None = None, threads=None, profile=True) -> AlphaSample:
    """Minimum over the lattice of the per-mode constrained eigenvalue at s."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    if cache is None:
        cache = ModeCache(p, degree, threads)
    lat = adapt_lattice(p, s, lattice, cache) if lattice.adaptive else lattice
    return sample_on(p, s, lat, cache, profile=profile)


def limit_alpha_at_zero(p: RTParameters, lattice: ModeLattice, degree: int = 32,
                        cache: ModeCache | None = None, threads=None) -> float:
    """Minimum of E over unit-mass profiles, on the lattice as given (no adaptation)."""
    if cache is None:
        cache = ModeCache(p, degree, threads)
    per_mode = cache.values(lattice.frozen().wavevectors(p), 0.0)
    return _argmin(per_mode)[1]
