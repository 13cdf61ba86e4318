"""Radial grids on ``(0, R]`` with parity-aware differentiation.

Radial profiles of a fixed angular degree are even or odd functions of
``r`` once extended to ``[-R, R]`` (``r^l`` times an even function).  Both
schemes store values at positive nodes only and fold the negative half in
through the parity, so regularity at the origin is built in and no node
sits at ``r = 0``.

``spectral``
    Chebyshev points ``x_j = cos(pi j / M)`` of ``[-R, R]`` with ``M`` odd;
    the positive half gives ``N`` nodes.
``fd``
    Staggered nodes ``r_j = (j - 1/2) dr``, ``j = 1..N``, with ``r_N = R``;
    second-order central differences, a ghost value at ``-dr/2`` taken from
    the parity, and a one-sided second-order stencil at ``R``.

Nodes are stored in increasing order, so the boundary node is ``r[-1]``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BarycentricInterpolator, CubicSpline

__all__ = ["RadialGrid", "build_grid", "cheb_matrix", "clenshaw_curtis"]


def cheb_matrix(M):
    """Chebyshev differentiation matrix on ``cos(pi j / M)``, ``j = 0..M``."""
    x = np.cos(np.pi * np.arange(M + 1) / M)
    c = np.ones(M + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(M + 1)
    X = np.tile(x, (M + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(M + 1))
    D -= np.diag(D.sum(axis=1))
    return D, x


def clenshaw_curtis(M):
    """Clenshaw-Curtis weights on the same points (integrate over [-1, 1])."""
    theta = np.pi * np.arange(M + 1) / M
    w = np.zeros(M + 1)
    v = np.ones(M - 1)
    inner = slice(1, M)
    if M % 2 == 0:
        w[0] = w[M] = 1.0 / (M**2 - 1)
        for k in range(1, M // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(M * theta[inner]) / (M**2 - 1)
    else:
        w[0] = w[M] = 1.0 / M**2
        for k in range(1, (M - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2.0 * v / M
    return w


@dataclass(frozen=True)
class RadialGrid:
    """Nodes, parity-folded derivative matrices and ``r^2 dr`` quadrature.

    Attributes
    ----------
    N : int
        Number of nodes in ``(0, R]``.
    r : ndarray
        Nodes in increasing order; ``r[-1] == R``.
    weights : ndarray
        ``sum(weights * f) ~ int_0^R f(r) r^2 dr``.
    design_order : int or None
        Convergence order of the finite-difference scheme (None for spectral).
    """

    N: int
    R: float
    scheme: str
    r: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    D_even: np.ndarray = field(repr=False)
    D_odd: np.ndarray = field(repr=False)
    design_order: int = None

    def D(self, parity):
        """First-derivative matrix for functions of the given parity (+1 or -1)."""
        return self.D_even if parity > 0 else self.D_odd

    def D2(self, parity):
        return self.D(-parity) @ self.D(parity)

    def integrate(self, f):
        """``int_0^R f r^2 dr``."""
        return self.weights @ f

    def norm(self, f):
        return float(np.sqrt(np.real(self.weights @ (np.abs(f) ** 2))))

    def interpolate(self, f, parity, r_new):
        """Evaluate the grid function (with its parity extension) at ``r_new``."""
        r_new = np.asarray(r_new, dtype=float)
        f = np.asarray(f)
        if self.scheme == "spectral":
            x = np.concatenate([-self.r, self.r[::-1]])
            y = np.concatenate([parity * f, f[::-1]])
            return BarycentricInterpolator(x, y)(r_new)
        x = np.concatenate([-self.r[::-1], self.r])
        y = np.concatenate([parity * f[::-1], f])
        return CubicSpline(x, y)(r_new)


def _spectral(N, R):
    M = 2 * N - 1
    D, x = cheb_matrix(M)
    cc = clenshaw_curtis(M)
    pos = np.arange(N)
    mirror = M - pos
    D_even = D[np.ix_(pos, pos)] + D[np.ix_(pos, mirror)]
    D_odd = D[np.ix_(pos, pos)] - D[np.ix_(pos, mirror)]
    # negative-sum trick: even functions include constants, kill them exactly
    D_even -= np.diag(D_even.sum(axis=1))
    r = R * x[:N]
    w = R**3 * cc[:N] * x[:N] ** 2
    # increasing order
    rev = np.arange(N)[::-1]
    return (r[rev], w[rev], D_even[np.ix_(rev, rev)] / R, D_odd[np.ix_(rev, rev)] / R)


def _fd(N, R):
    dr = R / (N - 0.5)
    r = (np.arange(1, N + 1) - 0.5) * dr
    mats = {}
    for par in (1, -1):
        D = np.zeros((N, N))
        for j in range(1, N - 1):
            D[j, j + 1] = 1.0
            D[j, j - 1] = -1.0
        # ghost at -dr/2 equals par * f(r_1)
        D[0, 1] = 1.0
        D[0, 0] = -par
        D[N - 1, N - 1] = 3.0
        D[N - 1, N - 2] = -4.0
        D[N - 1, N - 3] = 1.0
        mats[par] = D / (2 * dr)
    # hat-function weights: exact r^2 moments of the piecewise-linear
    # interpolant, constant on [0, r_1]
    w = np.zeros(N)
    w[0] += r[0] ** 3 / 3.0
    for j in range(N - 1):
        a, b = r[j], r[j + 1]
        h = b - a
        # int_a^b (b - s)/h s^2 ds and int_a^b (s - a)/h s^2 ds
        w[j] += (b * (b**3 - a**3) / 3 - (b**4 - a**4) / 4) / h
        w[j + 1] += ((b**4 - a**4) / 4 - a * (b**3 - a**3) / 3) / h
    return r, w, mats[1], mats[-1]


def build_grid(N, R=1.0, scheme="spectral"):
    """Radial grid with ``N`` nodes on ``(0, R]``.

    Raises
    ------
    ValueError
        If ``N < 16`` or the scheme is unknown.
    """
    if int(N) != N or N < 16:
        raise ValueError(f"need at least 16 radial nodes, got {N}")
    N = int(N)
    if scheme == "spectral":
        r, w, De, Do = _spectral(N, float(R))
        order = None
    elif scheme in ("fd", "finite-difference"):
        r, w, De, Do = _fd(N, float(R))
        scheme, order = "fd", 2
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return RadialGrid(N, float(R), scheme, r, w, De, Do, order)
