"""Chebyshev-Gauss-Lobatto machinery on a single layer.

Nodes are stored in ascending order. All matrices act on nodal values.
"""

from functools import lru_cache

import numpy as np


def gll_nodes(n):
    """Chebyshev-Gauss-Lobatto points on [-1, 1], ascending, n + 1 of them."""
    return -np.cos(np.pi * np.arange(n + 1) / n)


def barycentric_weights(x):
    x = np.asarray(x, dtype=float)
    # scale differences so the products stay O(1) on a length-2 interval
    diff = 2.0 * (x[:, None] - x[None, :])
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / np.prod(diff, axis=1)
    return w / np.max(np.abs(w))


def diff_matrix(x):
    """First-derivative matrix for the polynomial interpolant through ``x``."""
    x = np.asarray(x, dtype=float)
    w = barycentric_weights(x)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    D = (w[None, :] / w[:, None]) / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def interp_matrix(x_from, x_to):
    """Matrix evaluating the interpolant through ``x_from`` at ``x_to``."""
    x_from = np.asarray(x_from, dtype=float)
    x_to = np.atleast_1d(np.asarray(x_to, dtype=float))
    w = barycentric_weights(x_from)
    dx = x_to[:, None] - x_from[None, :]
    exact = np.isclose(dx, 0.0, rtol=0.0, atol=1e-15)
    dx[exact] = 1.0
    T = w[None, :] / dx
    T /= T.sum(axis=1, keepdims=True)
    rows, cols = np.nonzero(exact)
    T[rows, :] = 0.0
    T[rows, cols] = 1.0
    return T


def clenshaw_curtis_weights(n):
    """Clenshaw-Curtis weights at the n + 1 Lobatto nodes on [-1, 1]."""
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    interior = slice(1, n)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n**2 - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * theta[interior]) / (4 * k**2 - 1)
        v -= np.cos(n * theta[interior]) / (n**2 - 1)
    else:
        w[0] = w[n] = 1.0 / n**2
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[interior]) / (4 * k**2 - 1)
    w[interior] = 2.0 * v / n
    return w[::-1].copy()


class Layer:
    """Nodal polynomial space of degree ``n`` on the interval [a, b].

    ``P``/``DP`` map nodal values to values/derivatives on the doubled
    Clenshaw-Curtis grid with weights ``W``; products of two degree-n
    polynomials integrate exactly there.
    """

    def __init__(self, a, b, n):
        self.a, self.b, self.n = float(a), float(b), int(n)
        half = 0.5 * (self.b - self.a)
        ref = gll_nodes(n)
        self.nodes = self.a + half * (ref + 1.0)
        self.D = diff_matrix(ref) / half
        fine_ref = gll_nodes(2 * n)
        self.fine_nodes = self.a + half * (fine_ref + 1.0)
        self.W = clenshaw_curtis_weights(2 * n) * half
        self.P = interp_matrix(ref, fine_ref)
        self.DP = self.P @ self.D
        self.gram = self.P.T @ (self.W[:, None] * self.P)

    @property
    def length(self):
        return self.b - self.a

    def to_reference(self, y):
        return 2.0 * (np.asarray(y, dtype=float) - self.a) / (self.b - self.a) - 1.0

    def interp(self, y):
        """Evaluation matrix at arbitrary points y in [a, b]."""
        return interp_matrix(gll_nodes(self.n), self.to_reference(y))

    def integrate(self, values_fine):
        return np.sum(self.W * values_fine, axis=-1)


@lru_cache(maxsize=64)
def layer(a, b, n):
    return Layer(a, b, n)
