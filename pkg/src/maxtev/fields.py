"""Radial profiles of vector spherical harmonic fields and their derivatives.

A field of angular degree ``l`` (``L = l(l+1)``) is one of

``toroidal``
    ``a(r) r_hat x grad_s Y``; one profile, norm weight ``L``.
``poloidal``
    ``F_r(r) Y r_hat + F_t(r) r grad Y``; two profiles, weights ``(1, L)``.
``scalar``
    ``q(r) Y``; one profile, weight 1.

``curl``, ``div`` and ``grad`` map between the three kinds exactly, so
derivative norms of any order reduce to radial differentiation on the grid.
Profile arrays may carry trailing dimensions (columns of a matrix).
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["RadialField", "derivative_levels", "weighted_norm"]

TOROIDAL, POLOIDAL, SCALAR = "toroidal", "poloidal", "scalar"
_NCOMP = {TOROIDAL: 1, POLOIDAL: 2, SCALAR: 1}


@dataclass(frozen=True)
class RadialField:
    """Radial profiles of one field.

    Attributes
    ----------
    kind : str
        ``toroidal``, ``poloidal`` or ``scalar``.
    values : ndarray
        Shape ``(ncomp, N, ...)``.
    parity : int
        Parity in ``r`` of every component (the poloidal components share it).
    L : int
        ``l (l + 1)``.
    """

    kind: str
    values: np.ndarray
    parity: int
    L: int

    def __post_init__(self):
        if self.kind not in _NCOMP:
            raise ValueError(f"unknown field kind {self.kind!r}")
        if np.shape(self.values)[0] != _NCOMP[self.kind]:
            raise ValueError(f"{self.kind} field needs {_NCOMP[self.kind]} components")

    @property
    def component_weights(self):
        return (1.0, float(self.L)) if self.kind == POLOIDAL else ((float(self.L),) if self.kind == TOROIDAL else (1.0,))

    def derivatives(self, grid):
        """Fields one derivative up: curl and div of vectors, grad of scalars."""
        r = _col(grid.r, self.values)
        v, p, L = self.values, self.parity, self.L
        if self.kind == TOROIDAL:
            a = v[0]
            fr = -L * a / r
            ft = -(grid.D(-p) @ (r * a)) / r
            return [RadialField(POLOIDAL, np.stack([fr, ft]), -p, L)]
        if self.kind == POLOIDAL:
            fr, ft = v
            w = (-fr + grid.D(-p) @ (r * ft)) / r
            d = (grid.D(p) @ (r * r * fr)) / (r * r) - L * ft / r
            return [RadialField(TOROIDAL, w[None], -p, L), RadialField(SCALAR, d[None], -p, L)]
        q = v[0]
        return [RadialField(POLOIDAL, np.stack([grid.D(p) @ q, q / r]), -p, L)]


def _col(r, values):
    extra = np.ndim(values) - 2
    return r.reshape((-1,) + (1,) * extra)


def weighted_norm(field, grid):
    """L2 norm over the ball (angular factor included through the weights)."""
    return float(np.sqrt(_sqnorm(field, grid)))


def _sqnorm(field, grid):
    w = _col(grid.weights, field.values)
    return sum(c * np.sum(w * np.abs(x) ** 2) for c, x in zip(field.component_weights, field.values)).real


def derivative_levels(field, grid, order):
    """Squared norms ``||D^j field||^2`` for ``j = 0..order``.

    Level ``j`` is every field reachable by ``j`` applications of
    curl/div/grad; its squared norm is the sum over those fields.
    """
    out = []
    level = [field]
    for j in range(order + 1):
        out.append(sum(_sqnorm(f, grid) for f in level))
        if j < order:
            level = [g for f in level for g in f.derivatives(grid)]
    return out
