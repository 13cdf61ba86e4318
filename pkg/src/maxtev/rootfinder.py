"""Certified zero counting and refinement for analytic functions in rectangles.

Zeros are counted with the argument principle: the contour integral of
``f'/f`` around a rectangle, computed edge by edge with adaptive
Gauss-Kronrod (7/15) quadrature.  Boxes with more than one zero are split
until each piece holds at most one, and every split is checked for exact
conservation of the count.  Isolated zeros are polished by Newton's method
started from the contour centroid ``oint z f'/f / oint f'/f``.

Functions are passed as callables accepting complex arrays.  The derivative
is taken from, in order: an explicit ``df``, a ``value_and_derivative``
method on ``f``, or a Cauchy-integral (trapezoidal, Lyness-Moler) estimate.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import BoundaryZeroError, ConvergenceError

__all__ = [
    "Box",
    "BoxCount",
    "RootRecord",
    "contour_derivative",
    "winding_count",
    "find_roots",
    "newton_refine",
    "derivative_agreement",
]

log = logging.getLogger(__name__)

# boundary-zero avoidance: deterministic irrational perturbations
INFLATE = 1e-3 / ((1 + 5**0.5) / 2)
SPLIT_SHIFTS = (0.0, 0.0618034, -0.0902, 0.1459, -0.1803)

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle ``[re_min, re_max] x [im_min, im_max]``."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_max > self.re_min and self.im_max > self.im_min):
            raise ValueError(f"degenerate box {self.as_tuple()}")

    @classmethod
    def coerce(cls, b):
        if isinstance(b, Box):
            return b
        return cls(*map(float, b))

    def as_tuple(self):
        return (self.re_min, self.re_max, self.im_min, self.im_max)

    @property
    def center(self):
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    @property
    def diameter(self):
        return float(np.hypot(self.re_max - self.re_min, self.im_max - self.im_min))

    def corners(self):
        """Counter-clockwise corners starting at the lower left."""
        return [complex(self.re_min, self.im_min), complex(self.re_max, self.im_min),
                complex(self.re_max, self.im_max), complex(self.re_min, self.im_max)]

    def contains(self, z, slack=0.0):
        return (self.re_min - slack <= z.real <= self.re_max + slack
                and self.im_min - slack <= z.imag <= self.im_max + slack)

    def inflate(self, factor):
        c = self.center
        hw = 0.5 * (self.re_max - self.re_min) * factor
        hh = 0.5 * (self.im_max - self.im_min) * factor
        return Box(c.real - hw, c.real + hw, c.imag - hh, c.imag + hh)

    def split(self, shift=0.0):
        """Halve along the longer side; ``shift`` moves the cut off-center."""
        t = 0.5 + shift
        if self.re_max - self.re_min >= self.im_max - self.im_min:
            m = self.re_min + t * (self.re_max - self.re_min)
            return (Box(self.re_min, m, self.im_min, self.im_max),
                    Box(m, self.re_max, self.im_min, self.im_max))
        m = self.im_min + t * (self.im_max - self.im_min)
        return (Box(self.re_min, self.re_max, self.im_min, m),
                Box(self.re_min, self.re_max, m, self.im_max))


@dataclass
class BoxCount:
    """Winding certificate for one box of the subdivision tree."""

    rectangle: tuple
    winding: int
    status: str
    raw: complex = 0j
    depth: int = 0

    def to_dict(self):
        return {"rectangle": list(self.rectangle), "winding": int(self.winding),
                "status": self.status, "raw": [self.raw.real, self.raw.imag], "depth": self.depth}


@dataclass
class RootRecord:
    """A located zero.

    ``residual`` is the relative Newton step ``|f| / (|f'| max(1, |z|))`` for
    simple zeros and ``|f| / max_box |f|`` for clusters.
    """

    location: complex
    multiplicity: int
    residual: float
    box: tuple = None
    cluster: bool = False
    iterations: int = 0
    history: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {"re": self.location.real, "im": self.location.imag, "multiplicity": self.multiplicity,
                "residual": self.residual, "box": list(self.box) if self.box else None,
                "cluster": self.cluster}


# ----------------------------------------------------------------------
# derivatives

def contour_derivative(f, z, radius=None, m=16):
    """``f'(z)`` from the trapezoidal Cauchy integral on a small circle.

    Exponentially accurate in ``m`` for analytic ``f``; this is the complex
    analogue of complex-step differentiation.
    """
    z = np.asarray(z, dtype=complex)
    if radius is None:
        radius = 1e-2 * np.maximum(1.0, np.abs(z))
    radius = np.asarray(radius, dtype=float)
    w = np.exp(2j * np.pi * np.arange(m) / m)
    pts = z[..., None] + radius[..., None] * w
    vals = np.asarray(f(pts))
    return np.mean(vals * np.conj(w), axis=-1) / radius


def _make_fd(f, df=None, derivative="auto"):
    """Return a callable z -> (f(z), f'(z))."""
    if derivative == "complex-step":
        return lambda z: (np.asarray(f(z)), contour_derivative(f, z))
    if df is not None:
        return lambda z: (np.asarray(f(z)), np.asarray(df(z)))
    if hasattr(f, "value_and_derivative"):
        return f.value_and_derivative
    if derivative == "analytic":
        raise ValueError("analytic derivative requested but none is available")
    return lambda z: (np.asarray(f(z)), contour_derivative(f, z))


def derivative_agreement(f, z, df=None):
    """Relative gap between the analytic and the contour derivative at ``z``."""
    fd = _make_fd(f, df, "analytic")
    a = fd(np.asarray(z, dtype=complex))[1]
    c = contour_derivative(f, z)
    return float(np.max(np.abs(a - c) / np.maximum(np.abs(a), 1e-300)))


# ----------------------------------------------------------------------
# contour integration

def _contour_moments(fd, box, nmom, tol, boundary_tol=1e-6, max_intervals=20000):
    """``(1/2 pi i) oint ((z - c)/rho)^p f'/f dz`` for p < nmom, plus the
    smallest Newton step ``|f/f'|`` seen on the contour."""
    corners = box.corners()
    c, rho = box.center, 0.5 * box.diameter
    segs = [(corners[i], corners[(i + 1) % 4]) for i in range(4)]
    # (segment, t0, t1) on [0, 1]
    todo = [(s, j / 4, (j + 1) / 4) for s in range(4) for j in range(4)]
    total = np.zeros(nmom, dtype=complex)
    min_step = np.inf
    n_int = len(todo)
    while todo:
        a = np.array([segs[s][0] for s, _, _ in todo])
        d = np.array([segs[s][1] - segs[s][0] for s, _, _ in todo])
        t0 = np.array([t for _, t, _ in todo])
        t1 = np.array([t for _, _, t in todo])
        half = 0.5 * (t1 - t0)
        tt = (0.5 * (t0 + t1))[:, None] + half[:, None] * _NODES[None, :]
        zz = a[:, None] + d[:, None] * tt
        fv, dfv = fd(zz)
        fv, dfv = np.asarray(fv), np.asarray(dfv)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.abs(fv / dfv)
            g = dfv / fv
        if np.any(fv == 0) or not np.all(np.isfinite(g)):
            raise BoundaryZeroError("f vanishes on the contour", suggested_box=box.inflate(1 + INFLATE))
        min_step = min(min_step, float(np.min(step)))
        if min_step < boundary_tol * box.diameter:
            raise BoundaryZeroError(
                f"zero within {min_step:.2e} of the contour of {box.as_tuple()}",
                suggested_box=box.inflate(1 + INFLATE),
            )
        zn = (zz - c) / rho
        powers = zn[None, ...] ** np.arange(nmom)[:, None, None]
        integrand = powers * (g * d[:, None])[None] * half[None, :, None]
        K = integrand @ _WK
        G = integrand @ _WG15
        err = np.max(np.abs(K - G), axis=0)
        ok = err <= tol * 2 * half
        total += K[:, ok].sum(axis=1)
        nxt = []
        for i in np.nonzero(~ok)[0]:
            s, lo, hi = todo[i]
            mid = 0.5 * (lo + hi)
            nxt += [(s, lo, mid), (s, mid, hi)]
        n_int += len(nxt)
        if n_int > max_intervals:
            raise ConvergenceError("adaptive contour quadrature did not converge (zero close to the contour?)")
        todo = nxt
    return total / (2j * np.pi), min_step


def _count(fd, box, quadrature_tol, nmom=2, max_refine=4, boundary_tol=1e-6):
    tol = quadrature_tol
    for _ in range(max_refine):
        mom, _ = _contour_moments(fd, box, nmom, tol, boundary_tol)
        w = int(round(mom[0].real))
        if abs(mom[0] - w) < 0.25:
            return w, mom
        tol *= 1e-2
    raise ConvergenceError(f"winding integral {mom[0]:.6f} not within 0.25 of an integer")


def _count_inflating(fd, box, quadrature_tol, nmom=2, retries=6):
    b = box
    for i in range(retries):
        try:
            w, mom = _count(fd, b, quadrature_tol, nmom)
            return w, mom, b
        except BoundaryZeroError as exc:
            log.info("boundary zero on %s, inflating", b.as_tuple())
            b = box.inflate(1 + (i + 1) * INFLATE)
            last = exc
    raise last


def winding_count(f, box, quadrature_tol=1e-6, df=None, return_box=False):
    """Number of zeros of ``f`` in ``box`` counted with multiplicity.

    If a zero sits on the contour the box is inflated by a fixed irrational
    factor and the count is retried; ``return_box=True`` reports the box that
    was actually used.
    """
    fd = _make_fd(f, df)
    w, _, used = _count_inflating(fd, Box.coerce(box), quadrature_tol)
    if w < 0:
        raise ConvergenceError(f"negative winding {w}: f is not analytic in the box")
    return (w, used) if return_box else w


# ----------------------------------------------------------------------
# Newton

def _newton(fd, z0, tol, maxiter=50, multiplicity=1):
    z = complex(z0)
    hist = []
    for it in range(1, maxiter + 1):
        fv, dv = fd(np.array([z]))
        fv, dv = complex(fv[0]), complex(dv[0])
        if fv == 0:
            hist.append(0.0)
            return z, 0.0, it, hist
        if dv == 0:
            raise ConvergenceError(f"zero derivative at {z}")
        step = multiplicity * fv / dv
        res = abs(fv / dv) / max(1.0, abs(z))
        hist.append(res)
        z = z - step
        if abs(step) <= tol * max(1.0, abs(z)):
            fv, dv = fd(np.array([z]))
            res = abs(complex(fv[0]) / complex(dv[0])) / max(1.0, abs(z)) if dv[0] != 0 else 0.0
            hist.append(res)
            return z, res, it, hist
    raise ConvergenceError(f"Newton did not converge in {maxiter} iterations from {z0}")


def newton_refine(f, k0, tol=1e-13, df=None, derivative="auto", maxiter=50, multiplicity=1):
    """Polish a zero of ``f`` starting at ``k0``.

    Parameters
    ----------
    derivative : {"auto", "analytic", "complex-step"}
        ``"complex-step"`` uses :func:`contour_derivative`.
    """
    fd = _make_fd(f, df, derivative)
    z, res, it, hist = _newton(fd, k0, tol, maxiter, multiplicity)
    return RootRecord(z, multiplicity, res, None, False, it, hist)


# ----------------------------------------------------------------------
# subdivision

def find_roots(f, box, tol=1e-12, df=None, quadrature_tol=1e-6, min_size=None,
               return_certificate=False, max_boxes=20000):
    """All zeros of ``f`` in ``box``, sorted by real then imaginary part.

    The multiplicities sum to the top-level winding number.  Boxes that still
    hold several zeros at ``min_size`` are returned as one record with
    ``cluster=True``.

    Returns
    -------
    list of RootRecord, or ``(roots, certificate)`` where the certificate is a
    dict with the box actually used, its winding and every BoxCount.
    """
    fd = _make_fd(f, df)
    box = Box.coerce(box)
    top, mom, box = _count_inflating(fd, box, quadrature_tol)
    if min_size is None:
        min_size = 1e-7 * max(1.0, abs(box.center))
    certs = []
    roots = []
    stack = [(box, top, mom, 0)]
    while stack:
        if len(certs) > max_boxes:
            raise ConvergenceError("too many boxes in the subdivision")
        b, w, mom, depth = stack.pop()
        if w == 0:
            certs.append(BoxCount(b.as_tuple(), 0, "counted", complex(mom[0]), depth))
            continue
        if w == 1:
            rec = _isolated_root(fd, b, mom, tol)
            if rec is not None:
                certs.append(BoxCount(b.as_tuple(), 1, "refined", complex(mom[0]), depth))
                roots.append(rec)
                continue
        elif b.diameter <= min_size:
            certs.append(BoxCount(b.as_tuple(), w, "refined", complex(mom[0]), depth))
            roots.append(_cluster(fd, b, w, mom))
            continue
        children = _split_conserving(fd, b, w, quadrature_tol)
        certs.append(BoxCount(b.as_tuple(), w, "subdivided", complex(mom[0]), depth))
        for cb, cw, cm in reversed(children):
            stack.append((cb, cw, cm, depth + 1))
    roots.sort(key=lambda r: (r.location.real, r.location.imag))
    assert sum(r.multiplicity for r in roots) == top
    if return_certificate:
        return roots, {"box": box.as_tuple(), "winding": top, "boxes": certs}
    return roots


def _split_conserving(fd, b, w, quadrature_tol):
    for shift in SPLIT_SHIFTS:
        try:
            parts = []
            for cb in b.split(shift):
                cw, cm = _count(fd, cb, quadrature_tol)
                parts.append((cb, cw, cm))
        except BoundaryZeroError:
            continue
        if sum(p[1] for p in parts) == w and all(p[1] >= 0 for p in parts):
            return parts
        log.warning("winding not conserved on split of %s, shifting cut", b.as_tuple())
    raise ConvergenceError(f"could not split {b.as_tuple()} with conserved winding")


def _isolated_root(fd, b, mom, tol):
    rho = 0.5 * b.diameter
    z0 = b.center + rho * mom[1] / mom[0]
    try:
        z, res, it, hist = _newton(fd, z0, tol)
    except ConvergenceError:
        return None
    if not b.contains(z, slack=1e-9 * max(1.0, abs(z))):
        return None
    return RootRecord(z, 1, res, b.as_tuple(), False, it, hist)


def _cluster(fd, b, w, mom):
    rho = 0.5 * b.diameter
    z = b.center + rho * mom[1] / mom[0]
    try:
        zn, _, _, _ = _newton(fd, z, 1e-14, multiplicity=w)
        if b.contains(zn):
            z = zn
    except ConvergenceError:
        pass
    fz = abs(complex(fd(np.array([z]))[0][0]))
    fb = np.max(np.abs(fd(np.array(b.corners()))[0]))
    log.warning("unresolved cluster of %d zeros near %s", w, z)
    return RootRecord(z, w, float(fz / fb) if fb > 0 else 0.0, b.as_tuple(), True)
