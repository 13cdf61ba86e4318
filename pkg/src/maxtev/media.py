"""Radially stratified media and per-mode indices.

A medium is a ball of radius ``R`` with refractive index ``n(r)``.  The
index must be constant (and different from 1) on a shell ``[R - delta, R]``
next to the boundary; this is what makes the contrast ``m = n - 1``
constant and nonzero near the sphere.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import InvalidMediumError, UnsupportedModeError

__all__ = ["MediumProfile", "ModeIndex", "TE", "TM"]

TE = "TE"
TM = "TM"


@dataclass(frozen=True)
class ModeIndex:
    """Angular degree ``l >= 1`` and polarization (``"TE"`` or ``"TM"``)."""

    l: int
    polarization: str = TE

    def __post_init__(self):
        if int(self.l) != self.l or self.l < 1:
            raise UnsupportedModeError(
                f"angular degree must be an integer >= 1 (no l = 0 Maxwell mode), got {self.l!r}"
            )
        pol = str(self.polarization).upper()
        if pol not in (TE, TM):
            raise UnsupportedModeError(f"polarization must be TE or TM, got {self.polarization!r}")
        object.__setattr__(self, "l", int(self.l))
        object.__setattr__(self, "polarization", pol)

    @property
    def L(self):
        """Eigenvalue ``l (l + 1)`` of the surface Laplacian."""
        return self.l * (self.l + 1)

    @property
    def degeneracy(self):
        return 2 * self.l + 1

    def __str__(self):
        return f"{self.polarization}{self.l}"


def _bump(s):
    """C-infinity bump equal to 1 at s = 0 and flat-zero for s >= 1."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = s < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


@dataclass(frozen=True)
class MediumProfile:
    """Refractive index profile of a ball.

    Use the constructors :meth:`constant`, :meth:`layered`, :meth:`smooth`
    or :meth:`from_function` rather than the raw initializer.

    Attributes
    ----------
    radius : float
        Ball radius ``R``.
    kind : str
        ``"constant"``, ``"layered"`` or ``"smooth"``.
    layers : tuple of (outer_radius, n)
        Piecewise-constant description, innermost first.  For ``"constant"``
        this is ``((R, n0),)``.  Empty for ``"smooth"``.
    n_boundary : complex
        Index on the boundary shell.
    shell_width : float
        Width ``delta`` of the shell on which ``n = n_boundary``.
    """

    radius: float
    kind: str
    layers: tuple
    n_boundary: complex
    shell_width: float
    interior: Optional[Callable] = field(default=None, compare=False, repr=False)
    params: tuple = ()

    def __post_init__(self):
        self._validate()

    # constructors -----------------------------------------------------
    @classmethod
    def constant(cls, n0, radius=1.0):
        return cls(float(radius), "constant", ((float(radius), complex(n0)),), complex(n0), float(radius))

    @classmethod
    def layered(cls, layers):
        """``layers`` is a sequence of ``(outer_radius, n)`` pairs, innermost first."""
        lay = tuple((float(r), complex(n)) for r, n in layers)
        if not lay:
            raise InvalidMediumError("at least one layer is required")
        radii = [r for r, _ in lay]
        if any(b <= a for a, b in zip(radii, radii[1:])) or radii[0] <= 0:
            raise InvalidMediumError("layer radii must be positive and strictly increasing")
        R = radii[-1]
        inner = radii[-2] if len(radii) > 1 else 0.0
        if len(lay) == 1:
            return cls.constant(lay[0][1], R)
        return cls(R, "layered", lay, lay[-1][1], R - inner)

    @classmethod
    def smooth(cls, n_center, n_boundary, radius=1.0, shell_width=0.2):
        """Bump profile ``n(r) = n_b + (n_c - n_b) * bump(r / (R - delta))``.

        The bump is C-infinity and identically zero for ``r >= R - delta``.
        """
        n_c, n_b = complex(n_center), complex(n_boundary)
        core = float(radius) - float(shell_width)

        def interior(r):
            return n_b + (n_c - n_b) * _bump(np.asarray(r, dtype=float) / core)

        return cls(float(radius), "smooth", (), n_b, float(shell_width), interior,
                   params=(("n_center", n_c),))

    @classmethod
    def from_function(cls, func, n_boundary, radius=1.0, shell_width=0.2):
        """Arbitrary interior profile ``func(r)`` used on ``[0, R - delta)``."""
        return cls(float(radius), "smooth", (), complex(n_boundary), float(shell_width), func)

    # evaluation -------------------------------------------------------
    def n(self, r):
        """Refractive index at radius (or radii) ``r``."""
        r = np.asarray(r, dtype=float)
        if self.kind == "smooth":
            core = self.radius - self.shell_width
            inner = np.asarray(self.interior(np.minimum(r, core)), dtype=complex)
            return np.where(r >= core, self.n_boundary, inner)
        out = np.full(r.shape, self.layers[-1][1], dtype=complex)
        for r_out, n in reversed(self.layers):
            out = np.where(r <= r_out, n, out)
        return out

    def contrast(self, r):
        return self.n(r) - 1.0

    @property
    def n_center(self):
        return complex(self.n(0.0))

    @property
    def is_piecewise_constant(self):
        return self.kind in ("constant", "layered")

    @property
    def is_real(self):
        if self.is_piecewise_constant:
            return all(n.imag == 0 for _, n in self.layers)
        r = np.linspace(0.0, self.radius, 257)
        return bool(np.all(self.n(r).imag == 0))

    def sample(self, num=513):
        r = np.linspace(0.0, self.radius, num)
        return r, self.n(r)

    def _validate(self):
        if not self.radius > 0:
            raise InvalidMediumError("radius must be positive")
        if not self.shell_width > 0:
            raise InvalidMediumError("shell width delta must be strictly positive")
        if self.shell_width > self.radius:
            raise InvalidMediumError("shell width exceeds the radius")
        if self.n_boundary == 1:
            raise InvalidMediumError(
                "n = 1 on the boundary shell: the contrast must be constant and nonzero "
                "near the boundary (zero contrast makes every k an eigenvalue)"
            )
        if self.kind == "smooth" and self.interior is None:
            raise InvalidMediumError("smooth media need an interior profile")
        _, nv = self.sample(257) if self.kind == "smooth" else (None, np.array([n for _, n in self.layers]))
        if np.any(nv.real <= 0):
            raise InvalidMediumError("Re n(r) must be strictly positive everywhere")

    # serialization ----------------------------------------------------
    def to_dict(self):
        def c(x):
            return [x.real, x.imag] if x.imag else x.real

        if self.kind == "constant":
            return {"type": "constant", "n0": c(self.n_boundary), "radius": self.radius}
        if self.kind == "layered":
            return {"type": "layered", "layers": [[r, c(n)] for r, n in self.layers]}
        if not self.params:
            raise InvalidMediumError("media built from an arbitrary function cannot be serialized")
        return {
            "type": "smooth",
            "n_center": c(dict(self.params)["n_center"]),
            "n_boundary": c(self.n_boundary),
            "radius": self.radius,
            "shell_width": self.shell_width,
        }

    @classmethod
    def from_dict(cls, d):
        def c(x):
            if isinstance(x, (list, tuple)):
                return complex(x[0], x[1])
            return complex(x)

        kind = d.get("type", "constant")
        if kind == "constant":
            return cls.constant(c(d["n0"]), d.get("radius", 1.0))
        if kind == "layered":
            return cls.layered([(r, c(n)) for r, n in d["layers"]])
        if kind == "smooth":
            return cls.smooth(c(d["n_center"]), c(d["n_boundary"]), d.get("radius", 1.0),
                              d.get("shell_width", 0.2))
        raise InvalidMediumError(f"unknown medium type {kind!r}")
