"""Spherical Bessel and Riccati-Bessel functions of complex argument.

All routines accept scalars or arrays of complex arguments and work
element-wise.  ``j_l`` is produced by a downward (Miller) ratio recurrence
normalized against the closed forms of ``j_0``/``j_1``; an ascending power
series takes over when ``|z| < (l + 1) / 2``.  ``y_l`` uses the upward
recurrence, which is stable for it.
"""

import numpy as np

__all__ = [
    "sph_bessel_j",
    "sph_bessel_j_all",
    "sph_bessel_jp",
    "sph_bessel_y",
    "sph_bessel_y_all",
    "riccati_psi",
    "riccati_psi_all",
    "riccati_chi",
]

# sin/cos of z overflow beyond this imaginary part
_IM_LIMIT = 700.0
_TINY = 1e-300


def _as_complex(z):
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z.imag) > _IM_LIMIT):
        raise OverflowError(
            f"|Im z| exceeds {_IM_LIMIT}; spherical Bessel values leave the floating range"
        )
    return z


def _check_order(l):
    if int(l) != l or l < 0:
        raise ValueError(f"order must be a nonnegative integer, got {l!r}")
    return int(l)


def _series_j(l, z):
    """Ascending series z^l / (2l+1)!! * sum_k (-z^2/2)^k / (k! prod_{i<=k} (2l+2i+1))."""
    pref = np.ones_like(z)
    for k in range(1, l + 1):
        pref = pref * z / (2 * k + 1)
    w = -0.5 * z * z
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(1, 2000):
        term = term * w / (k * (2 * l + 2 * k + 1))
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return pref * total


def _start_index(l_max, zabs_max):
    big = max(l_max, zabs_max)
    return int(big + 20 + 4.0 * np.sqrt(big + 1.0)) + 1


def _miller_all(l_max, z):
    """j_0..j_{l_max} for nonzero z by backward ratio recurrence.

    The ratios r_l = j_l / j_{l-1} satisfy r_l = z / (2l + 1 - z r_{l+1}),
    which never overflows.  The chain is anchored on whichever of j_0, j_1
    is larger in modulus so a zero of one of them does not spoil the rest.
    """
    nmax = _start_index(l_max, float(np.max(np.abs(z))) if z.size else 0.0)
    ratios = np.empty((max(l_max, 1) + 1,) + z.shape, dtype=complex)
    r = np.zeros_like(z)
    for n in range(nmax, 0, -1):
        r = z / ((2 * n + 1) - z * r)
        if n <= max(l_max, 1):
            ratios[n] = r
    s, c = np.sin(z), np.cos(z)
    j0 = s / z
    j1 = s / (z * z) - c / z
    out = np.empty((l_max + 1,) + z.shape, dtype=complex)
    use1 = np.abs(j1) > np.abs(j0)
    # anchor on j_1 where j_0 is the smaller one
    out[0] = np.where(use1, j1 / np.where(use1, ratios[1], 1.0), j0)
    if l_max >= 1:
        out[1] = np.where(use1, j1, j0 * ratios[1])
    for n in range(2, l_max + 1):
        out[n] = out[n - 1] * ratios[n]
    return out


def sph_bessel_j_all(l_max, z, return_underflow=False):
    """Return ``[j_0(z), ..., j_{l_max}(z)]`` stacked along a new leading axis.

    Parameters
    ----------
    l_max : int
        Highest order, ``l_max >= 0``.
    z : complex or array_like
        Argument(s).  ``z = 0`` gives the exact limits ``j_l(0) = delta_{l0}``.
    return_underflow : bool
        Also return a boolean array flagging entries that underflowed to zero.

    Returns
    -------
    ndarray of shape ``(l_max + 1,) + np.shape(z)``
    """
    l_max = _check_order(l_max)
    z = _as_complex(z)
    shape = z.shape
    zf = z.ravel()
    out = np.empty((l_max + 1, zf.size), dtype=complex)
    za = np.abs(zf)
    nz = za > 0
    if np.any(nz):
        out[:, nz] = _miller_all(l_max, zf[nz])
    out[:, ~nz] = 0.0
    out[0, ~nz] = 1.0
    for l in range(l_max + 1):
        small = za < 0.5 * (l + 1)
        if np.any(small):
            out[l, small] = _series_j(l, zf[small])
    if not np.all(np.isfinite(out)):
        raise OverflowError("non-finite spherical Bessel value")
    out = out.reshape((l_max + 1,) + shape)
    if return_underflow:
        under = (out == 0) & (np.asarray(z) != 0)[None]
        return out, under
    return out


def sph_bessel_j(l, z):
    """Spherical Bessel function of the first kind ``j_l(z)``."""
    l = _check_order(l)
    return sph_bessel_j_all(l, z)[l]


def sph_bessel_jp(l, z):
    """Derivative ``j_l'(z)``, from ``j_l' = j_{l-1} - (l+1) j_l / z``."""
    l = _check_order(l)
    z = _as_complex(z)
    if l == 0:
        return -sph_bessel_j(1, z)
    j = sph_bessel_j_all(l, z)
    safe = np.where(z == 0, 1.0, z)
    d = j[l - 1] - (l + 1) * j[l] / safe
    return np.where(z == 0, 1.0 / 3.0 if l == 1 else 0.0, d)


def sph_bessel_y_all(l_max, z):
    """``[y_0(z), ..., y_{l_max}(z)]`` by upward recurrence (z must be nonzero)."""
    l_max = _check_order(l_max)
    z = _as_complex(z)
    if np.any(z == 0):
        raise ZeroDivisionError("y_l is singular at z = 0")
    s, c = np.sin(z), np.cos(z)
    out = np.empty((l_max + 1,) + z.shape, dtype=complex)
    out[0] = -c / z
    if l_max >= 1:
        out[1] = -c / (z * z) - s / z
    for n in range(1, l_max):
        out[n + 1] = (2 * n + 1) / z * out[n] - out[n - 1]
    return out


def sph_bessel_y(l, z):
    """Spherical Bessel function of the second kind ``y_l(z)``."""
    l = _check_order(l)
    return sph_bessel_y_all(l, z)[l]


def riccati_psi_all(l_max, z):
    """``psi_l(z) = z j_l(z)`` and ``psi_l'(z)`` for ``l = 0..l_max``."""
    l_max = _check_order(l_max)
    z = _as_complex(z)
    j = sph_bessel_j_all(l_max, z)
    psi = z[None] * j
    dpsi = np.empty_like(psi)
    dpsi[0] = np.cos(z)
    for l in range(1, l_max + 1):
        dpsi[l] = z * j[l - 1] - l * j[l]
    return psi, dpsi


def riccati_psi(l, z):
    """Riccati-Bessel ``psi_l(z) = z j_l(z)`` together with its derivative.

    Returns
    -------
    (value, derivative) : tuple of complex or arrays
    """
    l = _check_order(l)
    psi, dpsi = riccati_psi_all(l, z)
    return psi[l], dpsi[l]


def riccati_chi(l, z):
    """``chi_l(z) = z y_l(z)`` and its derivative; ``psi chi' - psi' chi = 1``."""
    l = _check_order(l)
    z = _as_complex(z)
    y = sph_bessel_y_all(max(l, 1), z)
    chi = z * y[l]
    if l == 0:
        dchi = np.sin(z)
    else:
        dchi = z * y[l - 1] - l * y[l]
    return chi, dchi
