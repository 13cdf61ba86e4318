"""Per-mode transmission determinants of a radially stratified ball.

For a mode ``(l, pol)`` the field inside is built from the regular solution
of the radial equation with local wavenumber ``k sqrt(n(r))`` and the field
outside (the background solution, also regular at the origin) from
``j_l(k r)``.  Matching both tangential traces on ``r = R`` gives a 2x2
determinant ``W(k)`` whose zeros are the transmission eigenvalues.

With ``s = sqrt(n)`` for a homogeneous ball,

    TE:  W(k) = j_l(k s R) psi_l'(k R) - j_l(k R) psi_l'(k s R)
    TM:  W(k) = j_l(k s R) psi_l'(k R) - j_l(k R) psi_l'(k s R) / n

where ``psi_l(x) = x j_l(x)``.  The sign of ``s`` only flips ``W`` by
``(-1)^l``, so ``W`` is analytic in ``k``.  Layered balls propagate the
Cauchy data ``(y, w)`` of ``y = r f`` through the layers, with ``w = y'``
(TE) or ``w = y' / n`` (TM); the same matching then reads
``W = (y(R) / R) psi_l'(kR) - j_l(kR) w(R)``.

The closed forms are certified by :func:`determinant_oracle_residual`, which
integrates the electric-field radial ODEs with a general-purpose adaptive
integrator and shares no code with the Bessel path.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import specfun as sf
from .exceptions import IntegrationError, UnsupportedProfileError
from .media import TE, TM, MediumProfile, ModeIndex

__all__ = [
    "MediumProfile",
    "ModeIndex",
    "DeterminantFunction",
    "build_determinant",
    "eval_determinant",
    "oracle_matching_matrix",
    "determinant_oracle_residual",
]


def _psi_derivs(l, x):
    """psi, psi', psi'' at x (psi'' = (L/x^2 - 1) psi)."""
    p, dp = sf.riccati_psi(l, x)
    return p, dp, (l * (l + 1) / (x * x) - 1.0) * p


def _chi_derivs(l, x):
    c, dc = sf.riccati_chi(l, x)
    return c, dc, (l * (l + 1) / (x * x) - 1.0) * c


@dataclass(frozen=True)
class DeterminantFunction:
    """Callable ``k -> W(k)`` for one mode of one medium.

    ``W(k)`` and ``dW/dk`` are available through :meth:`__call__`,
    :meth:`derivative` and :meth:`value_and_derivative`; all accept arrays.
    """

    mode: ModeIndex
    medium: MediumProfile

    def __call__(self, k):
        return self.value_and_derivative(k)[0]

    def derivative(self, k):
        return self.value_and_derivative(k)[1]

    def value_and_derivative(self, k):
        k = np.asarray(k, dtype=complex)
        if np.any(k == 0):
            raise ValueError("the determinant is not evaluated at k = 0")
        if self.medium.kind == "constant":
            return self._homogeneous(k)
        return self._layered(k)

    def _homogeneous(self, k):
        l = self.mode.l
        n = self.medium.n_boundary
        s = np.sqrt(n)
        R = self.medium.radius
        a, b = k * s * R, k * R
        ja, jpa = sf.sph_bessel_j(l, a), sf.sph_bessel_jp(l, a)
        jb, jpb = sf.sph_bessel_j(l, b), sf.sph_bessel_jp(l, b)
        _, dpa, ddpa = _psi_derivs(l, a)
        _, dpb, ddpb = _psi_derivs(l, b)
        c = 1.0 if self.mode.polarization == TE else 1.0 / n
        W = ja * dpb - c * jb * dpa
        dW = s * R * jpa * dpb + ja * R * ddpb - c * (R * jpb * dpa + jb * s * R * ddpa)
        return W, dW

    def _layered(self, k):
        l = self.mode.l
        tm = self.mode.polarization == TM
        layers = self.medium.layers
        # innermost layer: y = psi(kappa r) / kappa, y' = psi'(kappa r)
        r0, n0 = layers[0]
        s = np.sqrt(n0)
        kap = k * s
        p, dp, ddp = _psi_derivs(l, kap * r0)
        y, yp = p / kap, dp
        dy = dp * s * r0 / kap - p * s / (kap * kap)
        dyp = ddp * s * r0
        n_prev = n0
        for (ra, _), (rb, n) in zip(layers[:-1], layers[1:]):
            if tm:
                # y'/n is continuous
                yp, dyp = yp * n / n_prev, dyp * n / n_prev
            s = np.sqrt(n)
            kap = k * s
            pa, dpa, ddpa = _psi_derivs(l, kap * ra)
            ca, dca, ddca = _chi_derivs(l, kap * ra)
            A = dca * y - ca * yp / kap
            B = -dpa * y + pa * yp / kap
            dA = (ddca * s * ra) * y + dca * dy - (dca * s * ra) * yp / kap - ca * (dyp / kap - yp * s / kap**2)
            dB = -(ddpa * s * ra) * y - dpa * dy + (dpa * s * ra) * yp / kap + pa * (dyp / kap - yp * s / kap**2)
            pb, dpb, ddpb = _psi_derivs(l, kap * rb)
            cb, dcb, ddcb = _chi_derivs(l, kap * rb)
            y = A * pb + B * cb
            dy = dA * pb + A * dpb * s * rb + dB * cb + B * dcb * s * rb
            inner = A * dpb + B * dcb
            yp = kap * inner
            dyp = s * inner + kap * (dA * dpb + A * ddpb * s * rb + dB * dcb + B * ddcb * s * rb)
            n_prev = n
        R = self.medium.radius
        if tm:
            yp, dyp = yp / n_prev, dyp / n_prev
        b = k * R
        jb, jpb = sf.sph_bessel_j(l, b), sf.sph_bessel_jp(l, b)
        _, dpb, ddpb = _psi_derivs(l, b)
        W = (y / R) * dpb - jb * yp
        dW = (dy / R) * dpb + y * ddpb - R * jpb * yp - jb * dyp
        return W, dW


def build_determinant(mode, medium):
    """Matching determinant for ``mode`` in a homogeneous or layered ball.

    Raises
    ------
    UnsupportedProfileError
        For smooth interiors, which have no closed form.
    """
    if not isinstance(mode, ModeIndex):
        mode = ModeIndex(*mode)
    if not medium.is_piecewise_constant:
        raise UnsupportedProfileError(
            "no closed-form determinant for smooth interior profiles; use the operator path"
        )
    return DeterminantFunction(mode, medium)


def eval_determinant(W, k):
    return W(k)


# ----------------------------------------------------------------------
# independent radial ODE oracle (electric field formulation)
#
# TE: Y1 = r a, Y2 = (r a)',   Y1' = Y2,                     Y2' = (L/r^2 - k^2 n) Y1
# TM: Y1 = r E_t, Y2 = r w,    Y1' = Y2 (1 - L/(k^2 n r^2)), Y2' = -k^2 n Y1
# Both components are continuous across jumps of n.

def _series_start(pol, l, q, r, nterms=400):
    """Regular solution at small r for constant q = k^2 n, leading coefficient 1."""
    if pol == TE:
        c = 1.0 + 0j
        y1, y2 = r ** (l + 1), (l + 1) * r ** l
        for j in range(1, nterms):
            c = -q * c / (2 * j * (2 * j + 2 * l + 1))
            t1 = c * r ** (l + 1 + 2 * j)
            y1, y2 = y1 + t1, y2 + (l + 1 + 2 * j) * c * r ** (l + 2 * j)
            if abs(t1) < 1e-18 * abs(y1):
                break
        return np.array([y1, y2], dtype=complex)
    a = 1.0 + 0j
    b = -q * a / (l + 1)
    y1, y2 = r ** l, b * r ** (l + 1)
    for j in range(1, nterms):
        a = b * (l + 1 + 2 * j) / (2 * j * (2 * l + 2 * j + 1))
        b = -q * a / (l + 1 + 2 * j)
        t1 = a * r ** (l + 2 * j)
        y1, y2 = y1 + t1, y2 + b * r ** (l + 1 + 2 * j)
        if abs(t1) < 1e-18 * abs(y1):
            break
    return np.array([y1, y2], dtype=complex)


def _integrate(pol, l, k, nfun, breaks, y0, rtol):
    L = l * (l + 1)
    k2 = k * k

    if pol == TE:
        def rhs(r, y):
            return np.array([y[1], (L / (r * r) - k2 * nfun(r)) * y[0]])
    else:
        def rhs(r, y):
            nr = nfun(r)
            return np.array([y[1] * (1.0 - L / (k2 * nr * r * r)), -k2 * nr * y[0]])

    y = y0
    for a, b in zip(breaks[:-1], breaks[1:]):
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=rtol, atol=1e-14 * np.max(np.abs(y)))
        if sol.status != 0:
            raise IntegrationError(f"radial ODE integration failed on [{a}, {b}]: {sol.message}")
        y = sol.y[:, -1]
    return y


def oracle_matching_matrix(mode, medium, k, rtol=1e-12):
    """2x2 matrix of boundary traces ``[[Y1_in, Y1_out], [Y2_in/k, Y2_out/k]]``.

    Columns are the regular interior solution (index ``n``) and the regular
    background solution (index 1), each started from a series with leading
    coefficient 1 at a small radius and integrated to ``R``.
    """
    if not isinstance(mode, ModeIndex):
        mode = ModeIndex(*mode)
    k = complex(k)
    if k == 0:
        raise ValueError("the oracle is not evaluated at k = 0")
    l, pol = mode.l, mode.polarization
    R = medium.radius
    if medium.is_piecewise_constant:
        interfaces = [r for r, _ in medium.layers[:-1]]
        first = medium.layers[0][0]
        nvals = [n for _, n in medium.layers]
        radii = [r for r, _ in medium.layers]

        def nfun(r):
            for rr, nn in zip(radii, nvals):
                if r <= rr:
                    return nn
            return nvals[-1]
    else:
        core = R - medium.shell_width
        interfaces = [core]
        first = core

        def nfun(r):
            return complex(medium.n(r))

    n0 = complex(medium.n(0.0))
    cols = []
    for nf, q0, brk in ((nfun, k * k * n0, interfaces), (lambda r: 1.0, k * k, [])):
        scale = 1.0 / max(1.0, abs(np.sqrt(q0)))
        r0 = min(0.1 * R, 0.5 * scale, 0.5 * (first if brk else R))
        if not medium.is_piecewise_constant and brk:
            r0 = min(r0, 1e-3 * R)
        y0 = _series_start(pol, l, q0, r0)
        # scale out r0^l so the integrator starts from O(1) data
        fac = r0 ** l
        breaks = [r0] + [b for b in brk if r0 < b < R] + [R]
        y = _integrate(pol, l, k, nf, breaks, y0 / fac, rtol) * fac
        cols.append(y)
    Y = np.array(cols).T
    Y[1] /= k
    return Y


def determinant_oracle_residual(mode, medium, k, rtol=1e-12):
    """Normalized ``|det|`` of the oracle matching matrix.

    Each column is scaled to unit norm first, so the result is the sine of
    the angle between the interior and exterior trace vectors: 0 at a
    transmission eigenvalue and O(1) away from one.
    """
    Y = oracle_matching_matrix(mode, medium, k, rtol)
    Y = Y / np.linalg.norm(Y, axis=0, keepdims=True)
    return float(abs(Y[0, 0] * Y[1, 1] - Y[0, 1] * Y[1, 0]))


def determinant_normalization(mode, medium, k):
    """Factor ``c(k)`` with ``W(k) = c(k) * det(oracle_matching_matrix)`` for a homogeneous ball.

    Follows from the leading series coefficients; used to compare the two
    determinants directly rather than just their zero sets.
    """
    l = mode.l
    n = medium.n_boundary
    s = np.sqrt(n)
    R = medium.radius
    dfact = math.prod(range(1, 2 * l + 2, 2))
    if mode.polarization == TE:
        return (k / R) * (k * s) ** l * k ** l / dfact**2
    f_in = (l + 1) * (k * s) ** l / (dfact * 1j * k * n)
    f_out = (l + 1) * k ** l / (dfact * 1j * k)
    return -(k / R) * f_in * f_out
