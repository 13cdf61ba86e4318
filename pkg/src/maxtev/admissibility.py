"""Forbidden angles and admissible rays for the shift parameter ``z``.

The shifted operator is invertible for large ``|z|`` along a ray
``z = r e^{i theta}`` as long as ``theta`` avoids

    C(m) = {arg(1/n(x)) : x in the closed ball},  {0},  arg((n_G + 1)/n_G)

where ``n_G`` is the (constant) index on the boundary.  Angles live in
``[0, 2 pi)`` and forbidden pieces are stored as closed arcs.
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import NoAdmissibleRayError

__all__ = ["Arc", "ForbiddenSet", "RaySelection", "contrast_cone", "choose_ray", "semiclassical"]

TWO_PI = 2.0 * math.pi
QUARTER = math.pi / 4


def wrap(theta):
    t = math.fmod(theta, TWO_PI)
    if t < 0:
        t += TWO_PI
    # fmod can return 2pi - tiny for tiny negative input
    return 0.0 if t >= TWO_PI else t + 0.0


def angular_distance(a, b):
    d = abs(wrap(a) - wrap(b))
    return min(d, TWO_PI - d)


@dataclass(frozen=True)
class Arc:
    """Closed arc starting at ``start`` (in ``[0, 2 pi)``) of counter-clockwise ``length``."""

    start: float
    length: float = 0.0

    @property
    def end(self):
        return self.start + self.length

    def distance(self, theta):
        """Angular distance from ``theta`` to the arc (0 inside)."""
        t = wrap(theta - self.start)
        if t <= self.length:
            return 0.0
        return min(t - self.length, TWO_PI - t)

    def is_point(self):
        return self.length == 0.0


@dataclass(frozen=True)
class ForbiddenSet:
    cone: tuple
    points: tuple

    @property
    def arcs(self):
        return self.cone + tuple(Arc(p) for p in self.points)

    def distance(self, theta):
        return min(a.distance(theta) for a in self.arcs)

    def cone_width(self):
        """Length of the shortest arc containing C(m)."""
        return _covering_width(self.cone)

    def to_dict(self):
        return {"cone": [[a.start, a.length] for a in self.cone], "points": list(self.points)}


def _merge_points(angles, tol=1e-12):
    """Shortest closed arc containing a set of angles."""
    a = np.sort(np.array([wrap(x) for x in angles]))
    if len(a) == 1 or a[-1] - a[0] <= tol:
        return Arc(float(a[0]))
    gaps = np.diff(np.concatenate([a, [a[0] + TWO_PI]]))
    i = int(np.argmax(gaps))
    start = a[(i + 1) % len(a)]
    return Arc(float(start), float(TWO_PI - gaps[i]))


def _covering_width(arcs):
    if not arcs:
        return 0.0
    pts = []
    for a in arcs:
        pts += list(np.linspace(a.start, a.end, 9)) if a.length else [a.start]
    return _merge_points(pts).length


def contrast_cone(medium, samples=4097):
    """Forbidden set ``C(m) U {0} U {arg((n_G + 1)/n_G)}`` of a medium.

    Piecewise-constant media give one point per layer.  Smooth interiors are
    sampled and the unwrapped argument of ``1/n`` gives a closed arc (the
    image of a connected set under a continuous map).
    """
    if medium.is_piecewise_constant:
        angs = sorted({wrap(-np.angle(n)) for _, n in medium.layers})
        cone = tuple(Arc(a) for a in angs)
    else:
        r = np.linspace(0.0, medium.radius, samples)
        ph = np.unwrap(-np.angle(medium.n(r)))
        lo, hi = float(ph.min()), float(ph.max())
        cone = (Arc(wrap(lo), hi - lo if hi - lo > 1e-14 else 0.0),)
    nb = medium.n_boundary
    pts = (0.0, wrap(float(np.angle((nb + 1) / nb))))
    return ForbiddenSet(cone, tuple(sorted(set(pts))))


@dataclass(frozen=True)
class RaySelection:
    """An admissible direction for ``z = r e^{i theta}``.

    Attributes
    ----------
    theta : float
        Selected angle in ``[0, 2 pi)``.
    forbidden : ForbiddenSet
    margin : float
        Enforced angular clearance from every forbidden angle.
    fits_quarter : bool
        Whether C(m) lies in an arc of length ``< pi/4``.
    family : tuple of float or None
        Admissible angles, increasing, with every cyclic gap ``< pi/4``.
    """

    theta: float
    forbidden: ForbiddenSet
    margin: float
    fits_quarter: bool
    family: tuple = None

    def z(self, r):
        return r * complex(math.cos(self.theta), math.sin(self.theta))

    def to_dict(self):
        return {"theta": self.theta, "margin": self.margin, "fits_quarter": self.fits_quarter,
                "family": list(self.family) if self.family else None,
                "forbidden": self.forbidden.to_dict()}


def semiclassical(lam):
    """Split ``lam = mu / h^2`` with ``|mu| = 1``; returns ``(h, mu)``."""
    lam = complex(lam)
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    h = abs(lam) ** -0.5
    return h, lam / abs(lam)


def _admissible(forb, theta, margin):
    return forb.distance(theta) >= margin


def _expanded_edges(forb, margin):
    """Admissible boundary angles: each forbidden arc pushed out by ``margin``."""
    out = []
    # a relative hair outward so the clearance is >= margin in floating point
    m = margin * (1 + 1e-12) + 1e-15
    for a in forb.arcs:
        out += [wrap(a.start - m), wrap(a.end + m)]
    return out


def _ray_family(forb, margin, step=QUARTER * (1 - 1e-3)):
    """Greedy walk around the circle keeping every gap below pi/4."""
    edges = sorted(e for e in _expanded_edges(forb, margin) if _admissible(forb, e, margin))
    if not edges:
        return None
    start = edges[0]
    fam = [start]
    cur = start
    for _ in range(200):
        if start + TWO_PI - cur < step:
            return tuple(sorted(wrap(t) for t in fam))
        # farthest admissible angle within one step
        cand = cur + step
        if not _admissible(forb, cand, margin):
            back = [cur + wrap(e - cur) for e in edges]
            back = [b for b in back if cur < b <= cand]
            if not back:
                return None
            cand = max(back)
        fam.append(cand)
        cur = cand
    return None


def choose_ray(medium, preference=math.pi / 2, margin=0.05):
    """Admissible angle nearest ``preference`` plus a quarter-gap ray family."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    forb = contrast_cone(medium)
    pref = wrap(preference)
    if _admissible(forb, pref, margin):
        theta = pref
    else:
        cands = [e for e in _expanded_edges(forb, margin) if _admissible(forb, e, margin)]
        if not cands:
            raise NoAdmissibleRayError("forbidden angles plus margin cover the whole circle")
        theta = min(cands, key=lambda e: (angular_distance(e, pref), e))
    fits = forb.cone_width() < QUARTER
    family = _ray_family(forb, margin) if fits else None
    return RaySelection(theta, forb, margin, fits, family)
