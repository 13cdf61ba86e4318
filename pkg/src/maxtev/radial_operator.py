"""Discrete shifted pair operator, its inverse and the compact operator ``S_z``.

For one mode the unknowns are the radial profiles of ``u`` and ``v`` stacked
as ``x = [u, v]``: one toroidal profile each for TE, two poloidal profiles
``(F_r, F_t)`` each for TM.  With ``CC`` the discrete curl curl and ``n``
the index on the nodes, the pair operator is

    B(z) [u, v] = [CC u / n - z u - (m / n) v,  CC v - z v]

i.e. the first equation is divided by ``n`` so that ``B(z + t) = B(z) - t``
holds exactly.  The two trace conditions at ``r = R``

TE  ``a(R) = 0`` and ``(r a)'(R) = 0`` (tangential ``u`` and ``curl u``),
TM  ``F_t(R) = 0`` and ``w(R) = 0`` with ``w`` the toroidal profile of ``curl u``,

replace the boundary row of the ``u`` equation and the boundary row of the
``v`` equation (the tangential rows for TM).  ``v`` carries no condition of
its own, so one of its rows must give way.  Regularity at the origin is
carried by the parity of the grid derivatives.

Spaces.  Solutions live in ``Y``, the grid fields satisfying the trace
conditions.  Sources live on the remaining rows ``F``; a solution is read
as a source by dropping the two replaced entries (``J``), which loses
nothing on the ``u`` side because the dropped ``u`` entry is zero in ``Y``.
``H`` is the subspace of sources with ``div(n u) = 0`` and ``div v = 0`` at
the interior nodes; on TE both hold identically.  The weighted Helmholtz
projection solves ``div(n grad q) = div(n u)`` with ``q(R) = 0`` and
removes ``grad q`` from ``u``; it keeps ``v``.  In this setting the
inverse and resolvent identities of the continuous operators hold exactly
up to rounding.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .admissibility import contrast_cone
from .exceptions import SingularSystemError, UnsupportedModeError
from .fields import POLOIDAL, TOROIDAL, RadialField
from .grid import build_grid
from .media import TE, ModeIndex

__all__ = [
    "ModeDiscretization",
    "ModeOperatorBlocks",
    "SzOperator",
    "EigenPair",
    "EigenRecord",
    "ResolventScan",
    "assemble_Bz",
    "apply_Rz",
    "helmholtz_project",
    "build_Sz",
    "eigs_Sz",
    "map_to_wavenumber",
    "branch_tag",
    "transmission_eigenvalues_operator",
    "identity_residuals",
    "eigenvector_conditioning",
    "generalized_eigenvectors",
    "resolvent_norm_scan",
]

log = logging.getLogger(__name__)

RCOND_MIN = 1e-14
SOLVE_TOL = 1e-10
SPURIOUS_TOL = 1e-5
NUDGE, MAX_NUDGES = 1.01, 5
_SINGULAR_SENTINEL = -1e3


def _as_mode(mode):
    if isinstance(mode, ModeIndex):
        return mode
    try:
        return ModeIndex(*mode)
    except (TypeError, ValueError) as e:
        raise UnsupportedModeError(str(e)) from None


class ModeDiscretization:
    """Shift-independent matrices for one mode of one medium on one grid.

    Attributes
    ----------
    CC : ndarray
        Discrete curl curl on the ``u`` (or ``v``) block.
    bc : ndarray
        Two trace-condition rows acting on the full ``[u, v]`` vector.
    bc_idx : list of int
        Rows replaced by ``bc`` (boundary row of ``u`` and of ``v``).
    free : ndarray
        The remaining rows ``F``; sources are indexed by them.
    Q : ndarray
        Basis of ``H`` (on ``F``), orthonormal in the weighted inner product.
    wq : ndarray
        Quadrature weights of the ``L^2`` inner product on ``[u, v]``.
    """

    def __init__(self, mode, medium, grid):
        mode = _as_mode(mode)
        self.mode, self.medium, self.grid = mode, medium, grid
        N, r, L = grid.N, grid.r, mode.L
        self.N, self.L = N, L
        self.n = np.asarray(medium.n(r), dtype=complex) * np.ones(N)
        Ri, Rm, I = np.diag(1.0 / r), np.diag(r), np.eye(N)
        if mode.polarization == TE:
            pa = (-1) ** mode.l
            self.nf, self.parity, self.kind = 1, pa, TOROIDAL
            self.CC = -Ri @ grid.D(pa) @ grid.D(-pa) @ Rm + L * Ri @ Ri
            self.comp_w = np.full(N, float(L))
            bc = np.zeros((2, 2 * N), dtype=complex)
            bc[0, N - 1] = 1.0
            bc[1, :N] = (grid.D(-pa) @ Rm)[N - 1]
            self.bc_idx = [N - 1, 2 * N - 1]
        else:
            p = (-1) ** (mode.l - 1)
            self.nf, self.parity, self.kind = 2, p, POLOIDAL
            self.W = Ri @ np.hstack([-I, grid.D(-p) @ Rm])
            self.CC = np.vstack([-L * Ri @ self.W, -Ri @ grid.D(p) @ Rm @ self.W])
            self.div = np.hstack([Ri @ Ri @ grid.D(p) @ Rm @ Rm, -L * Ri])
            self.div_n = self.div * np.tile(self.n, 2)[None, :]
            self.grad = np.vstack([grid.D(-p), Ri])
            self.comp_w = np.concatenate([np.ones(N), np.full(N, float(L))])
            bc = np.zeros((2, 4 * N), dtype=complex)
            bc[0, 2 * N - 1] = 1.0
            bc[1, : 2 * N] = self.W[N - 1]
            self.bc_idx = [2 * N - 1, 4 * N - 1]
        nu = self.nf * N
        self.nu, self.size = nu, 2 * nu
        self.bc = bc
        nvec = np.tile(self.n, self.nf)
        mvec = nvec - 1.0
        B0 = np.zeros((2 * nu, 2 * nu), dtype=complex)
        B0[:nu, :nu] = self.CC / nvec[:, None]
        B0[:nu, nu:] = -np.diag(mvec / nvec)
        B0[nu:, nu:] = self.CC
        self.B0 = B0
        self.nvec, self.mvec = nvec, mvec
        wu = np.tile(grid.weights, self.nf) * self.comp_w
        self.wq = np.concatenate([wu, wu])
        self.free = np.setdiff1d(np.arange(2 * nu), self.bc_idx)
        self.wF = self.wq[self.free]
        self._build_projection()
        self._build_basis()

    # -- projection and constrained space ---------------------------------
    def _build_projection(self):
        if self.mode.polarization == TE:
            self.Pu = None
            return
        N = self.N
        Lq = self.div_n @ self.grad
        Lq[N - 1] = 0.0
        Lq[N - 1, N - 1] = 1.0
        rhs = self.div_n.copy()
        rhs[N - 1] = 0.0
        self.Pu = np.eye(2 * N) - self.grad @ np.linalg.solve(Lq, rhs)

    def constraint_rows(self):
        """Divergence constraints on full ``[u, v]`` vectors (interior nodes only).

        They never touch the dropped entries, so they act on sources as well.
        """
        if self.mode.polarization == TE:
            return np.zeros((0, self.size), dtype=complex)
        nu, N = self.nu, self.N
        C = np.zeros((2 * N - 2, self.size), dtype=complex)
        C[: N - 1, :nu] = self.div_n[: N - 1]
        C[N - 1:, nu:] = self.div[: N - 1]
        return C

    def _build_basis(self):
        C = self.constraint_rows()
        if C.shape[0]:
            Z = sla.null_space(C[:, self.free])
        else:
            Z = np.eye(len(self.free))
        s = np.sqrt(self.wF)
        q, _ = np.linalg.qr(s[:, None] * Z)
        self.Q = q / s[:, None]

    @property
    def dim(self):
        return self.Q.shape[1]

    def embed(self, s):
        """Source on ``F`` to a full vector (zeros in the dropped entries)."""
        s = np.asarray(s)
        x = np.zeros((self.size,) + s.shape[1:], dtype=complex)
        x[self.free] = s
        return x

    def restrict(self, x):
        return np.asarray(x)[self.free]

    def project(self, x):
        """Weighted Helmholtz projection of ``[u, v]`` (identity on TE)."""
        y = np.array(x, dtype=complex, copy=True)
        if self.Pu is not None:
            y[: self.nu] = self.Pu @ y[: self.nu]
        return y

    def coords(self, s):
        """Coefficients of a source in the orthonormal basis ``Q``."""
        s = np.asarray(s)
        w = self.wF.reshape((-1,) + (1,) * (s.ndim - 1))
        return self.Q.conj().T @ (w * s)

    def norm(self, x):
        """Weighted L2 norm of full vectors (length ``size``) or sources (length ``len(F)``)."""
        x = np.asarray(x)
        w = self.wq if x.shape[0] == self.size else self.wF
        return np.sqrt(np.sum(w.reshape((-1,) + (1,) * (x.ndim - 1)) * np.abs(x) ** 2, axis=0))

    def block_norm(self, x):
        """Weighted L2 norm of a single ``u`` or ``v`` block."""
        x = np.asarray(x)
        w = self.wq[: self.nu].reshape((-1,) + (1,) * (x.ndim - 1))
        return np.sqrt(np.sum(w * np.abs(x) ** 2, axis=0))

    def apply_B(self, x, z):
        """``B(z)`` collocated at every node (no trace rows)."""
        return self.B0 @ x - z * x

    def as_fields(self, x):
        """Split ``[u, v]`` into two :class:`RadialField` objects."""
        N, nf = self.N, self.nf
        u = np.reshape(x[: self.nu], (nf, N) + np.shape(x)[1:])
        v = np.reshape(x[self.nu:], (nf, N) + np.shape(x)[1:])
        return (RadialField(self.kind, u, self.parity, self.L),
                RadialField(self.kind, v, self.parity, self.L))


@dataclass
class ModeOperatorBlocks:
    """``B(z)`` with trace rows inserted, row-equilibrated and LU-factored."""

    disc: ModeDiscretization
    z: complex
    matrix: np.ndarray = field(repr=False)
    row_scale: np.ndarray = field(repr=False)
    lu: tuple = field(repr=False)
    rcond: float = 0.0

    @property
    def mode(self):
        return self.disc.mode

    def solve(self, rhs):
        """Solve with homogeneous trace data; ``rhs`` is a full ``[f, g]`` vector or matrix."""
        b = np.array(rhs, dtype=complex, copy=True)
        b[self.disc.bc_idx] = 0.0
        sb = self.row_scale.reshape((-1,) + (1,) * (b.ndim - 1)) * b
        x = sla.lu_solve(self.lu, sb)
        A = self.matrix
        res = np.linalg.norm(A @ x - sb, axis=0)
        scale = np.linalg.norm(A, np.inf) * np.linalg.norm(x, axis=0) + np.linalg.norm(sb, axis=0)
        bad = res > SOLVE_TOL * np.where(scale > 0, scale, 1.0)
        if np.any(bad):
            raise SingularSystemError(
                f"discrete residual {np.max(res / np.where(scale > 0, scale, 1.0)):.2e} exceeds {SOLVE_TOL}",
                z=self.z, condition=1.0 / self.rcond)
        return x


def _disc(mode, medium, grid, disc=None):
    if disc is not None:
        return disc
    return ModeDiscretization(mode, medium, grid)


def assemble_Bz(mode, medium, z, grid, disc=None):
    """Assemble and factor the shifted pair operator for one mode.

    Raises
    ------
    UnsupportedModeError
        For ``l < 1`` or an unknown polarization.
    SingularSystemError
        If the estimated reciprocal condition number is below ``1e-14``.
    """
    disc = _disc(mode, medium, grid, disc)
    z = complex(z)
    A = disc.B0 - z * np.eye(disc.size)
    A[disc.bc_idx] = disc.bc
    s = 1.0 / np.max(np.abs(A), axis=1)
    A = s[:, None] * A
    lu, piv = sla.lu_factor(A, check_finite=False)
    gecon = sla.get_lapack_funcs("gecon", (lu,))
    rcond, _ = gecon(lu, np.linalg.norm(A, 1), norm="1")
    if not rcond > RCOND_MIN:
        raise SingularSystemError(f"B(z) is numerically singular at z = {z} (rcond {rcond:.1e})",
                                  z=z, condition=np.inf if rcond == 0 else 1.0 / rcond)
    return ModeOperatorBlocks(disc, z, A, s, (lu, piv), float(rcond))


def apply_Rz(blocks, f, g):
    """Solve ``B(z)(u, v) = (f, g)``; ``f`` and ``g`` are flat ``u``/``v`` block arrays."""
    f, g = np.asarray(f, dtype=complex), np.asarray(g, dtype=complex)
    x = blocks.solve(np.concatenate([f, g]))
    nu = blocks.disc.nu
    return x[:nu], x[nu:]


def helmholtz_project(mode, medium, grid, u, disc=None):
    """Remove the weighted gradient part of a ``u``-block field (identity on TE)."""
    disc = _disc(mode, medium, grid, disc)
    u = np.asarray(u, dtype=complex)
    if disc.Pu is None:
        return u.copy()
    return disc.Pu @ u


@dataclass
class SzOperator:
    """Matrix of ``P R_z`` in the orthonormal basis of ``H``."""

    matrix: np.ndarray = field(repr=False)
    blocks: ModeOperatorBlocks = field(repr=False)
    z: complex = 0j

    @property
    def disc(self):
        return self.blocks.disc

    @property
    def shape(self):
        return self.matrix.shape


def build_Sz(mode, medium, z, grid, disc=None, blocks=None):
    """``S_z = P R_z`` restricted to ``H``, one basis field per column."""
    if blocks is None:
        blocks = assemble_Bz(mode, medium, z, grid, disc)
    d = blocks.disc
    X = d.project(blocks.solve(d.embed(d.Q)))
    return SzOperator(d.coords(d.restrict(X)), blocks, complex(z))


# -- eigenvalues -----------------------------------------------------------

@dataclass(frozen=True)
class EigenPair:
    """Eigenvalue of ``S_z`` with one eigenvector.

    ``multiplicity`` is the size of the numerical cluster it stands for and
    ``generalized_rank`` the longest possible Jordan chain (1 unless defective).
    """

    mu: complex
    vector: np.ndarray = field(repr=False)
    generalized_rank: int = 1
    multiplicity: int = 1


def _clusters(A, cluster_tol):
    """Eigen-decomposition grouped into numerical clusters.

    Returns ``(w, V, groups)`` with ``groups`` a list of
    ``(mu, member_indices, geometric_multiplicity, null_vectors)``, sorted by
    ``|mu|`` descending.
    """
    w, V = sla.eig(A)
    order = np.argsort(-np.abs(w), kind="stable")
    w, V = w[order], V[:, order]
    # relative closeness, with a rounding-level floor so zero eigenvalues cluster
    floor = 1e3 * np.finfo(float).eps * max(np.linalg.norm(A, 2), np.finfo(float).tiny)
    used = np.zeros(len(w), bool)
    groups = []
    for i in range(len(w)):
        if used[i]:
            continue
        members = [j for j in range(i, len(w))
                   if not used[j] and abs(w[j] - w[i]) <= cluster_tol * abs(w[i]) + floor]
        used[members] = True
        if len(members) == 1:
            groups.append((complex(w[i]), members, 1, None))
            continue
        mu = complex(np.mean(w[members]))
        tol = cluster_tol * abs(w[i]) + floor
        _, sv, Vh = np.linalg.svd(A - mu * np.eye(len(A)))
        geo = max(1, int(np.sum(sv <= tol)))
        groups.append((mu, members, geo, Vh[len(A) - geo:].conj().T))
    return w, V, groups


def eigs_Sz(matrix, cluster_tol=1e-7):
    """Full eigendecomposition sorted by ``|mu|`` descending.

    Eigenvalues within ``cluster_tol * |mu|`` of each other (plus a
    rounding-level floor) form a cluster.  A cluster whose geometric multiplicity (from the SVD of
    ``A - mu I``) is below its size is defective and is reported once with
    generalized rank ``size - geometric + 1``.
    """
    A = np.asarray(getattr(matrix, "matrix", matrix), dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("eigs_Sz needs a square matrix")
    if A.shape[0] == 0:
        return []
    w, V, groups = _clusters(A, cluster_tol)
    out = []
    for mu, members, geo, null in groups:
        if len(members) > 1 and geo < len(members):
            out.append(EigenPair(mu, null[:, -1], len(members) - geo + 1, len(members)))
        else:
            out += [EigenPair(complex(w[j]), V[:, j]) for j in members]
    return out


def generalized_eigenvectors(matrix, cluster_tol=1e-7):
    """Columns spanning every generalized eigenspace.

    Simple eigenvalues contribute their eigenvector; a defective cluster of
    size ``m`` contributes an orthonormal basis of ``ker (A - mu I)^m``.
    """
    A = np.asarray(getattr(matrix, "matrix", matrix), dtype=complex)
    w, V, groups = _clusters(A, cluster_tol)
    cols = []
    for mu, members, geo, _ in groups:
        m = len(members)
        if m > 1 and geo < m:
            P = np.linalg.matrix_power(A - mu * np.eye(len(A)), m)
            cols.append(np.linalg.svd(P)[2][len(A) - m:].conj().T)
        else:
            cols.append(V[:, members])
    return np.hstack(cols)


def eigenvector_conditioning(matrix, cluster_tol=1e-7):
    """Smallest singular value of the column-normalized generalized-eigenvector matrix."""
    V = generalized_eigenvectors(matrix, cluster_tol)
    V = V / np.linalg.norm(V, axis=0, keepdims=True)
    return float(np.linalg.svd(V, compute_uv=False)[-1])


def map_to_wavenumber(mu, z):
    """``k = sqrt(z + 1/mu)`` with ``Re k >= 0`` and ``Im k >= 0`` when ``Re k = 0``."""
    mu = complex(mu)
    if mu == 0:
        raise ValueError("mu = 0 has no wavenumber")
    k = np.sqrt(complex(z) + 1.0 / mu)
    if k.real < 0 or (k.real == 0 and k.imag < 0):
        k = -k
    return complex(k.real + 0.0, k.imag + 0.0)


def branch_tag(k):
    return "re>0" if k.real > 0 else "re=0,im>=0"


@dataclass(frozen=True)
class EigenRecord:
    """One operator-path eigenvalue with its PDE residual.

    ``spurious`` marks records whose residual exceeds the threshold; they are
    kept so exports can show them.
    """

    mode: ModeIndex
    mu: complex
    k: complex
    residual: float
    branch: str
    N: int
    scheme: str
    z: complex
    spurious: bool = False
    generalized_rank: int = 1

    def to_dict(self):
        return {
            "mode": str(self.mode), "l": self.mode.l, "polarization": self.mode.polarization,
            "mu": [self.mu.real, self.mu.imag], "k": [self.k.real, self.k.imag],
            "residual": self.residual, "branch": self.branch, "N": self.N, "scheme": self.scheme,
            "z": [self.z.real, self.z.imag], "spurious": self.spurious,
            "generalized_rank": self.generalized_rank,
        }


def reconstruct(Sz, pair):
    """Eigenvector of ``S_z`` to the pair ``(u, v)`` of the unshifted problem.

    With ``x = R_z Q c`` the solution is ``P x + (z / k^2)(x - P x)``; on TE
    it is ``x`` itself.
    """
    d = Sz.disc
    x = Sz.blocks.solve(d.embed(d.Q @ pair.vector))
    k2 = Sz.z + 1.0 / pair.mu
    px = d.project(x)
    return px + (Sz.z / k2) * (x - px), k2


def pde_residual(disc, x, k2, fine):
    """Normalized residual of the unshifted equations after interpolating to a finer grid.

    ``fine`` is a :class:`ModeDiscretization` on the finer grid.
    """
    g, G = disc.grid, fine.grid
    N, M = disc.N, fine.N
    nf = disc.nf
    xf = np.empty(fine.size, dtype=complex)
    for b in range(2 * nf):
        xf[b * M:(b + 1) * M] = g.interpolate(x[b * N:(b + 1) * N], disc.parity, G.r)
    nu = fine.nu
    u, v = xf[:nu], xf[nu:]
    CCu, CCv = fine.CC @ u, fine.CC @ v
    ru = CCu - k2 * fine.nvec * u - fine.mvec * v
    rv = CCv - k2 * v
    wn = fine.wq[:nu]

    def nrm(a):
        return math.sqrt(float(np.sum(wn * np.abs(a) ** 2)))

    scale = nrm(CCu) + abs(k2) * nrm(fine.nvec * u) + nrm(fine.mvec * v) + nrm(CCv) + abs(k2) * nrm(v)
    if scale == 0:
        return math.inf
    pde = math.hypot(nrm(ru), nrm(rv)) / scale
    # trace conditions, relative to the size of the quantity they constrain
    tr = fine.bc @ xf
    ref = (np.max(np.abs(u)), np.sum(np.abs(fine.bc[1, :nu]) * np.abs(u)))
    bc = max(abs(tr[0]) / max(ref[0], 1e-300), abs(tr[1]) / max(ref[1], 1e-300))
    return float(max(pde, bc))


_FINE_CACHE = {}


def _fine_disc(disc):
    g = disc.grid
    key = (id(disc), g.N)
    d = _FINE_CACHE.get(key)
    if d is None or d[0] is not disc:
        fine = ModeDiscretization(disc.mode, disc.medium, build_grid(2 * g.N, g.R, g.scheme))
        _FINE_CACHE.clear()
        _FINE_CACHE[key] = (disc, fine)
        return fine
    return d[1]


def _with_nudge(fn, z):
    """Call ``fn(z)``, multiplying ``z`` by 1.01 on singular systems (at most 5 times)."""
    for attempt in range(MAX_NUDGES + 1):
        try:
            return fn(z), z
        except SingularSystemError as e:
            if attempt == MAX_NUDGES:
                raise
            log.warning("singular system at z = %s (%s); nudging radius by %.2f", z, e, NUDGE)
            z = z * NUDGE
    raise AssertionError("unreachable")


def transmission_eigenvalues_operator(mode, medium, z, grid, box, residual_tol=SPURIOUS_TOL,
                                      disc=None):
    """Transmission eigenvalues of one mode in ``box`` from the spectrum of ``S_z``.

    Every eigenvalue of ``S_z`` is mapped to ``k``; those inside the box get
    a PDE residual and are flagged ``spurious`` above ``residual_tol``.
    Records are sorted by ``(Re k, Im k)``.
    """
    from .rootfinder import Box

    box = Box.coerce(box)
    mode = _as_mode(mode)
    if getattr(medium, "kind", None) == "layered":
        log.warning("%s: the radial grid does not resolve the index jumps of a layered medium; "
                    "eigenvalues converge only like 1/N and are likely to be flagged spurious", mode)
    disc = _disc(mode, medium, grid, disc)
    Sz, z = _with_nudge(lambda zz: build_Sz(mode, medium, zz, grid, disc), complex(z))
    pairs = eigs_Sz(Sz.matrix)
    fine = None
    out = []
    for p in pairs:
        if p.mu == 0:
            continue
        k = map_to_wavenumber(p.mu, z)
        if not box.contains(k):
            continue
        if fine is None:
            fine = _fine_disc(disc)
        x, k2 = reconstruct(Sz, p)
        res = pde_residual(disc, x, k2, fine)
        out.append(EigenRecord(mode, p.mu, k, res, branch_tag(k), grid.N, grid.scheme, z,
                               not res <= residual_tol, p.generalized_rank))
    nsp = sum(r.spurious for r in out)
    if nsp:
        log.info("%s: %d of %d eigenvalues in the box flagged spurious (residual > %.0e)",
                 mode, nsp, len(out), residual_tol)
    out.sort(key=lambda r: (r.k.real, r.k.imag))
    return out


# -- identities ---------------------------------------------------------------

def _random_coeffs(rng, dim, count):
    c = rng.standard_normal((dim, count)) + 1j * rng.standard_normal((dim, count))
    return c / np.linalg.norm(c, axis=0, keepdims=True)


def _admissible_shift(rng, medium, z, margin=0.05):
    forb = contrast_cone(medium)
    for _ in range(1000):
        z2 = z * rng.uniform(0.5, 2.0) * np.exp(1j * rng.uniform(-0.3, 0.3))
        if forb.distance(float(np.angle(z2))) >= margin:
            return complex(z2 - z)
    raise ValueError("no admissible shift found near z")


def identity_residuals(mode, medium, z, grid, probes=100, seed=0, disc=None):
    """Worst relative residuals of the inverse and resolvent identities.

    Returns
    -------
    dict
        ``inverse_left``: ``||P R P B w - w|| / ||w||``,
        ``inverse_right``: ``||P B P R w - w|| / ||w||``,
        ``resolvent``: ``||S (I - t S)^{-1} w - P R_{z+t} w|| / ||w||``
        over random ``w`` in ``H`` and random admissible ``z + t``.
    """
    rng = np.random.default_rng(seed)
    disc = _disc(mode, medium, grid, disc)
    blocks = assemble_Bz(mode, medium, z, grid, disc)
    Sz = build_Sz(mode, medium, z, grid, disc, blocks)
    z = blocks.z
    # left identity on solutions: fields in Y meeting the constraints
    Yb = sla.null_space(np.vstack([disc.bc, disc.constraint_rows()]))
    x = Yb @ _random_coeffs(rng, Yb.shape[1], probes)
    left = disc.project(blocks.solve(disc.project(disc.apply_B(x, z))))
    # right identity on sources in H
    C = _random_coeffs(rng, disc.dim, probes)
    w = disc.Q @ C
    wn = disc.norm(w)
    right = disc.restrict(disc.project(disc.apply_B(disc.project(blocks.solve(disc.embed(w))), z)))
    out = {
        "inverse_left": float(np.max(disc.norm(left - x) / disc.norm(x))),
        "inverse_right": float(np.max(disc.norm(right - w) / wn)),
    }
    worst = 0.0
    S = Sz.matrix
    nshift = 10
    per = int(math.ceil(probes / nshift))
    for i in range(nshift):
        cols = slice(i * per, min((i + 1) * per, probes))
        if cols.start >= probes:
            break
        t = _admissible_shift(rng, medium, z)
        b2 = assemble_Bz(mode, medium, z + t, grid, disc)
        lhs = disc.Q @ (S @ np.linalg.solve(np.eye(len(S)) - t * S, C[:, cols]))
        rhs = disc.restrict(disc.project(b2.solve(disc.embed(w[:, cols]))))
        worst = max(worst, float(np.max(disc.norm(lhs - rhs) / wn[cols])))
    out["resolvent"] = worst
    return out


# -- resolvent norms ------------------------------------------------------------

def _output_matrix(disc, h):
    """Rows whose squared norm is ``sum_{j<=2} h^{2j} ||D^j u||^2 + ||v||^2``."""
    nu, N = disc.nu, disc.N
    eye = np.eye(nu)
    u0 = RadialField(disc.kind, eye.reshape(disc.nf, N, nu), disc.parity, disc.L)
    rows = []
    level = [u0]
    grid = disc.grid
    for j in range(3):
        for f in level:
            for c, comp in zip(f.component_weights, f.values):
                rows.append(h**j * np.sqrt(c * grid.weights)[:, None] * comp)
        level = [g for f in level for g in f.derivatives(grid)]
    U = np.vstack(rows)
    V = np.sqrt(disc.wq[nu:])[:, None] * np.eye(nu)
    out = np.zeros((U.shape[0] + nu, 2 * nu), dtype=complex)
    out[: U.shape[0], :nu] = U
    out[U.shape[0]:, nu:] = V
    return out


@dataclass
class ResolventScan:
    """Resolvent norms along one ray.

    ``norms[i]`` is NaN where the system at ``radii[i]`` was singular.
    ``probe_ratios[i]`` is the largest ``||v|| / (|z|^{-1} ||g|| + ||f||)`` over
    random probes.  ``peaks`` holds ``(r, norm)`` for local maxima refined
    by a bounded scalar search (empty unless requested).
    """

    theta: float
    radii: np.ndarray
    norms: np.ndarray
    probe_ratios: np.ndarray
    singular: list
    N: int
    peaks: list = field(default_factory=list)

    def variation(self):
        ok = np.isfinite(self.norms)
        return float(np.max(self.norms[ok]) / np.min(self.norms[ok]))

    def max_norm(self):
        vals = [v for v in self.norms if np.isfinite(v)] + [v for _, v in self.peaks]
        return float(max(vals)) if vals else math.nan

    def onset(self, factor=3.0):
        """Smallest radius beyond which all norms stay within ``factor`` of each other."""
        ok = np.isfinite(self.norms)
        r, v = self.radii[ok], self.norms[ok]
        for i in range(len(r)):
            tail = v[i:]
            if tail.max() <= factor * tail.min():
                return float(r[i])
        return None

    def to_dict(self):
        def num(x):
            if np.isnan(x):
                return None
            return float(x) if np.isfinite(x) else "inf"
        return {"theta": self.theta, "N": self.N, "radii": self.radii.tolist(),
                "norms": [num(x) for x in self.norms],
                "probe_ratios": [num(x) for x in self.probe_ratios],
                "singular": list(self.singular),
                "peaks": [[float(r), num(v)] for r, v in self.peaks],
                "onset": self.onset()}


def resolvent_norm(blocks, out=None, basis=None):
    """Operator norm of ``R_z`` from ``L^2`` sources in ``H`` to the output norm.

    ``H`` constrains ``div(n f)`` at interior nodes only, so grid-scale
    sources keep a free divergence at ``r = R``.  On TM modes of even ``l``
    the solution's divergence there follows it, and the ``grad div u`` part
    of the output norm grows with ``N``; TE and odd-``l`` TM norms are
    grid-independent.
    """
    d = blocks.disc
    if out is None:
        out = _output_matrix(d, abs(blocks.z) ** -0.5)
    Q = d.Q if basis is None else basis
    return float(np.linalg.norm(out @ blocks.solve(d.embed(Q)), 2))


def resolvent_norm_scan(mode, medium, theta, radii, grid=None, N=96, probes=8, seed=0,
                        refine_peaks=False):
    """Resolvent norms at ``z = r e^{i theta}`` for each radius.

    Sources range over ``H`` with the ``L^2`` norm; the output norm is
    ``sum_{j<=2} h^{2j} ||D^j u||^2 + ||v||^2`` with ``h = |z|^{-1/2}``.
    Singular radii are recorded and the scan continues.  With
    ``refine_peaks`` every local maximum of the sampled norms is sharpened by
    a bounded search between its neighbours.
    """
    from scipy.optimize import minimize_scalar

    mode = _as_mode(mode)
    if grid is None:
        grid = build_grid(N, medium.radius)
    disc = ModeDiscretization(mode, medium, grid)
    radii = np.asarray(radii, dtype=float)
    rng = np.random.default_rng(seed)
    C = _random_coeffs(rng, disc.dim, probes)
    W = disc.embed(disc.Q @ C)
    norms = np.full(len(radii), np.nan)
    ratios = np.full(len(radii), np.nan)
    singular = []
    e = complex(math.cos(theta), math.sin(theta))
    nu = disc.nu
    for i, r in enumerate(radii):
        z = r * e
        try:
            blocks = assemble_Bz(mode, medium, z, grid, disc)
            norms[i] = resolvent_norm(blocks)
            X = blocks.solve(W)
        except SingularSystemError as exc:
            log.warning("singular system at r = %g: %s", r, exc)
            singular.append(float(r))
            continue
        nv = disc.block_norm(X[nu:])
        nf = disc.block_norm(W[:nu])
        ng = disc.block_norm(W[nu:])
        ratios[i] = float(np.max(nv / (ng / abs(z) + nf)))
    peaks = []
    if refine_peaks and len(radii) >= 3:
        hit = []

        def neg_log_norm(r):
            try:
                return -math.log(resolvent_norm(assemble_Bz(mode, medium, r * e, grid, disc)))
            except SingularSystemError:
                hit.append(float(r))
                return _SINGULAR_SENTINEL
        vals = np.where(np.isfinite(norms), norms, np.inf)
        for i in range(len(radii)):
            lo, hi = max(i - 1, 0), min(i + 1, len(radii) - 1)
            if vals[i] >= vals[lo] and vals[i] >= vals[hi]:
                res = minimize_scalar(neg_log_norm, bounds=(radii[lo], radii[hi]), method="bounded",
                                      options={"xatol": 1e-10 * radii[i]})
                peaks.append((float(res.x), math.inf if res.fun <= _SINGULAR_SENTINEL
                              else float(math.exp(-res.fun))))
        singular += sorted(set(hit))
    return ResolventScan(float(theta), radii, norms, ratios, singular, grid.N, peaks)
