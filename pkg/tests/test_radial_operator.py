import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxtev.ball_analytic import build_determinant
from maxtev.exceptions import SingularSystemError, UnsupportedModeError
from maxtev.grid import build_grid
from maxtev.media import MediumProfile, ModeIndex
from maxtev.radial_operator import (EigenRecord, ModeDiscretization, assemble_Bz, apply_Rz,
                                    build_Sz, eigenvector_conditioning, eigs_Sz,
                                    helmholtz_project, identity_residuals, map_to_wavenumber,
                                    resolvent_norm, transmission_eigenvalues_operator)
from maxtev.rootfinder import find_roots


# Laurent polynomials in r as {power: coefficient}

def _poly(terms):
    out = {}
    for p, c in terms:
        out[p] = out.get(p, 0) + c
    return out


def _shift(a, k):
    return {p + k: c for p, c in a.items()}


def _deriv(a):
    return {p - 1: p * c for p, c in a.items() if p != 0}


def _add(*polys):
    out = {}
    for a in polys:
        for p, c in a.items():
            out[p] = out.get(p, 0) + c
    return out


def _scale(a, s):
    return {p: s * c for p, c in a.items()}


def _eval(a, r):
    return sum(c * r**p for p, c in a.items())


def _cc_toroidal(a, L):
    """``-(r a)''/r + L a / r^2``."""
    return _add(_shift(_scale(_deriv(_deriv(_shift(a, 1))), -1), -1), _scale(_shift(a, -2), L))


def _cc_poloidal(Fr, Ft, L):
    w = _shift(_add(_scale(Fr, -1), _deriv(_shift(Ft, 1))), -1)
    return _scale(_shift(w, -1), -L), _scale(_shift(_deriv(_shift(w, 1)), -1), -1)


def _te_pair(l):
    u = _poly([(l, 1), (l + 2, -2), (l + 4, 1)])
    v = _poly([(l, 1), (l + 2, 1)])
    return u, v


def _tm_pair(l):
    p = l - 1
    Ft = _poly([(p, 1), (p + 2, -2), (p + 4, 1)])
    Fr = _poly([(p, 0.7), (p + 2, -0.7)])
    Vt = _poly([(p, 1)])
    Vr = _poly([(p, 1), (p + 2, 1)])
    return (Fr, Ft), (Vr, Vt)


@pytest.mark.parametrize("l", [1, 2, 3])
def test_te_manufactured_solution(l):
    n0, z = 4.0, 5.0 + 3.0j
    med, g = MediumProfile.constant(n0), build_grid(32)
    blocks = assemble_Bz(ModeIndex(l, "TE"), med, z, g)
    u, v = _te_pair(l)
    L = l * (l + 1)
    r = g.r
    us, vs = _eval(u, r), _eval(v, r)
    f = _eval(_cc_toroidal(u, L), r) / n0 - z * us - (n0 - 1) / n0 * vs
    gg = _eval(_cc_toroidal(v, L), r) - z * vs
    uh, vh = apply_Rz(blocks, f, gg)
    assert np.max(np.abs(uh - us)) <= 1e-9
    assert np.max(np.abs(vh - vs)) <= 1e-9


@pytest.mark.parametrize("l", [1, 2])
def test_tm_manufactured_solution(l):
    n0, z = 4.0, 5.0 + 3.0j
    med, g = MediumProfile.constant(n0), build_grid(32)
    blocks = assemble_Bz(ModeIndex(l, "TM"), med, z, g)
    L = l * (l + 1)
    (Fr, Ft), (Vr, Vt) = _tm_pair(l)
    r = g.r
    us = np.concatenate([_eval(Fr, r), _eval(Ft, r)])
    vs = np.concatenate([_eval(Vr, r), _eval(Vt, r)])
    cu = np.concatenate([_eval(c, r) for c in _cc_poloidal(Fr, Ft, L)])
    cv = np.concatenate([_eval(c, r) for c in _cc_poloidal(Vr, Vt, L)])
    f = cu / n0 - z * us - (n0 - 1) / n0 * vs
    gg = cv - z * vs
    uh, vh = apply_Rz(blocks, f, gg)
    assert np.max(np.abs(uh - us)) <= 1e-9
    assert np.max(np.abs(vh - vs)) <= 1e-9


def test_te_curl_curl_symmetric_on_dirichlet_profiles():
    l = 2
    d = ModeDiscretization(ModeIndex(l, "TE"), MediumProfile.constant(4.0), build_grid(32))
    r = d.grid.r
    a, b = r**l * (1 - r**2), r ** (l + 2) * (1 - r**2)
    w = d.grid.weights * d.L
    lhs, rhs = w @ ((d.CC @ a) * b), w @ (a * (d.CC @ b))
    assert abs(lhs - rhs) <= 1e-10 * abs(lhs)


class _VacuumLike:
    """Stand-in medium with ``n = 1`` everywhere, bypassing validation."""

    radius = 1.0

    def n(self, r):
        return np.ones_like(np.asarray(r, dtype=float))


@pytest.mark.parametrize("pol", ["TE", "TM"])
def test_zero_contrast_decouples(pol):
    d = ModeDiscretization(ModeIndex(2, pol), _VacuumLike(), build_grid(24))
    nu = d.nu
    assert np.all(d.B0[:nu, nu:] == 0)
    np.testing.assert_array_equal(d.B0[:nu, :nu], d.B0[nu:, nu:])
    rng = np.random.default_rng(0)
    x = np.concatenate([rng.standard_normal(nu), np.zeros(nu)])
    assert np.all(d.apply_B(x, 3.0)[nu:] == 0)


@pytest.mark.parametrize("pol", ["TE", "TM"])
def test_solve_linear(pol):
    med, g = MediumProfile.constant(4.0), build_grid(24)
    blocks = assemble_Bz(ModeIndex(1, pol), med, 10j, g)
    rng = np.random.default_rng(1)
    n = blocks.disc.size
    a, b = rng.standard_normal(n), rng.standard_normal(n) + 1j * rng.standard_normal(n)
    np.testing.assert_allclose(blocks.solve(2 * a - 3j * b),
                               2 * blocks.solve(a) - 3j * blocks.solve(b), atol=1e-10)
    assert np.all(blocks.solve(np.zeros(n)) == 0)


def test_unsupported_mode():
    with pytest.raises(UnsupportedModeError):
        assemble_Bz((0, "TE"), MediumProfile.constant(4.0), 10j, build_grid(16))


# -- projection --------------------------------------------------------------

@pytest.fixture(scope="module")
def tm_smooth():
    return ModeDiscretization(ModeIndex(1, "TM"), MediumProfile.smooth(6.0, 4.0), build_grid(40))


def test_projection_idempotent(tm_smooth):
    d = tm_smooth
    rng = np.random.default_rng(2)
    X = rng.standard_normal((2 * d.N, 100)) + 1j * rng.standard_normal((2 * d.N, 100))
    P = helmholtz_project(d.mode, d.medium, d.grid, X, disc=d)
    PP = helmholtz_project(d.mode, d.medium, d.grid, P, disc=d)
    assert np.max(np.abs(PP - P)) <= 1e-9 * np.max(np.abs(P))
    div = d.div_n[:-1] @ P
    assert np.max(np.abs(div)) <= 1e-8 * np.max(np.abs(d.div_n)) * np.max(np.abs(P))


def test_projection_kills_gradients(tm_smooth):
    d = tm_smooth
    r = d.grid.r
    q = r * (1 - r**2)
    gq = d.grad @ q
    assert np.max(np.abs(d.Pu @ gq)) <= 1e-9 * np.max(np.abs(gq))


def test_projection_fixes_solenoidal(tm_smooth):
    d = tm_smooth
    from scipy.linalg import null_space
    Z = null_space(d.div_n[:-1])
    x = Z @ np.arange(1, Z.shape[1] + 1)
    np.testing.assert_allclose(d.Pu @ x, x, atol=1e-10 * np.max(np.abs(x)))


def test_projection_identity_on_te():
    d = ModeDiscretization(ModeIndex(1, "TE"), MediumProfile.smooth(6.0, 4.0), build_grid(24))
    u = np.arange(24.0)
    np.testing.assert_array_equal(helmholtz_project(d.mode, d.medium, d.grid, u, disc=d), u)


# -- identities and norms ----------------------------------------------------

@pytest.mark.parametrize("pol", ["TE", "TM"])
def test_identity_residuals(pol):
    res = identity_residuals(ModeIndex(1, pol), MediumProfile.constant(4.0), 10j, build_grid(32),
                             probes=100, seed=0)
    assert res["inverse_left"] <= 1e-8
    assert res["inverse_right"] <= 1e-8
    assert res["resolvent"] <= 1e-7


def test_resolvent_norm_basis_invariant():
    blocks = assemble_Bz(ModeIndex(1, "TM"), MediumProfile.constant(4.0), 20j, build_grid(24))
    d = blocks.disc
    rng = np.random.default_rng(3)
    A = rng.standard_normal((d.dim, d.dim)) + 1j * rng.standard_normal((d.dim, d.dim))
    U, _ = np.linalg.qr(A)
    assert resolvent_norm(blocks, basis=d.Q @ U) == pytest.approx(resolvent_norm(blocks), rel=1e-10)


def test_singular_shift_detected():
    med, g, m = MediumProfile.constant(4.0), build_grid(48), ModeIndex(1, "TE")
    k = transmission_eigenvalues_operator(m, med, 10j, g, (0.5, 4, -0.1, 0.1))[0].k
    with pytest.raises(SingularSystemError):
        assemble_Bz(m, med, k * k, g)
    # the operator path nudges off the singular shift and still finds the eigenvalue
    recs = transmission_eigenvalues_operator(m, med, k * k, g, (0.5, 4, -0.1, 0.1))
    assert abs(recs[0].k - k) <= 1e-9


# -- eigen-decomposition -------------------------------------------------------

def test_eigs_diagonal_sorted():
    pairs = eigs_Sz(np.diag([1.0, 3.0, -2.0]))
    np.testing.assert_allclose([p.mu for p in pairs], [3.0, -2.0, 1.0])
    assert all(p.generalized_rank == 1 and p.multiplicity == 1 for p in pairs)


def test_eigs_jordan_block():
    pairs = eigs_Sz(np.array([[2.0, 1.0], [0.0, 2.0]]))
    assert len(pairs) == 1
    assert pairs[0].generalized_rank == 2 and pairs[0].multiplicity == 2
    assert pairs[0].mu == pytest.approx(2.0, abs=1e-7)
    np.testing.assert_allclose(np.abs(pairs[0].vector), [1.0, 0.0], atol=1e-7)


def test_eigs_companion_roots():
    roots = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    C = np.polynomial.polynomial.polycompanion(np.polynomial.polynomial.polyfromroots(roots))
    mus = sorted(p.mu.real for p in eigs_Sz(C))
    np.testing.assert_allclose(mus, roots, rtol=1e-8)


def test_eigs_rejects_non_square():
    with pytest.raises(ValueError):
        eigs_Sz(np.ones((2, 3)))
    assert eigs_Sz(np.zeros((0, 0))) == []


def test_conditioning_of_normal_matrix():
    assert eigenvector_conditioning(np.diag([1.0, 2.0, 3.0])) == pytest.approx(1.0)


# -- wavenumber map ----------------------------------------------------------

def test_map_to_wavenumber_examples():
    assert map_to_wavenumber(1 / (4 - 1j), 1j) == pytest.approx(2.0, abs=1e-14)
    assert map_to_wavenumber(1.0, 0.0) == pytest.approx(1.0)
    assert map_to_wavenumber(-1.0, 0.0) == pytest.approx(1j)
    with pytest.raises(ValueError):
        map_to_wavenumber(0.0, 1j)


@settings(max_examples=200, deadline=None)
@given(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
       st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False,
                          allow_infinity=False))
def test_map_to_wavenumber_branch_and_conjugation(z, mu):
    k = map_to_wavenumber(mu, z)
    assert k.real > 0 or (k.real == 0 and k.imag >= 0)
    assert abs(k * k - z - 1 / mu) <= 1e-12 * (abs(k * k) + abs(z) + abs(1 / mu))
    kc = map_to_wavenumber(np.conj(mu), np.conj(z))
    if k.real > 1e-6 * abs(k):
        assert abs(kc - np.conj(k)) <= 1e-12 * abs(k)


# -- operator path versus analytic determinant ---------------------------------

@pytest.fixture(scope="module")
def te_records():
    return transmission_eigenvalues_operator(ModeIndex(1, "TE"), MediumProfile.constant(4.0), 10j,
                                             build_grid(48), (0.5, 6, -1, 1))


def test_records_invariant(te_records):
    assert te_records
    for rec in te_records:
        assert isinstance(rec, EigenRecord)
        assert abs(rec.k**2 - rec.z - 1 / rec.mu) <= 1e-12 * (abs(rec.k**2) + abs(rec.z))


def test_operator_matches_determinant(te_records):
    W = build_determinant(ModeIndex(1, "TE"), MediumProfile.constant(4.0))
    roots = [r.location for r in find_roots(W, (0.5, 6, -1, 1))]
    ks = [r.k for r in te_records if not r.spurious]
    assert len(ks) == len(roots)
    for k, ref in zip(sorted(ks, key=lambda c: (c.real, c.imag)), sorted(roots, key=lambda c: (c.real, c.imag))):
        assert abs(k - ref) <= 1e-8 * abs(ref)


def test_real_medium_conjugate_symmetric():
    recs = transmission_eigenvalues_operator(ModeIndex(1, "TM"), MediumProfile.constant(4.0), 10j,
                                             build_grid(40), (0.5, 8, -3, 3))
    ks = [r.k for r in recs if not r.spurious and abs(r.k.imag) > 1e-6]
    for k in ks:
        assert min(abs(np.conj(k) - c) for c in ks) <= 1e-8 * abs(k)


def test_empty_box():
    recs = transmission_eigenvalues_operator(ModeIndex(1, "TE"), MediumProfile.constant(4.0), 10j,
                                             build_grid(32), (0.5, 1.0, -0.1, 0.1))
    assert recs == []


def test_sz_shape_matches_basis():
    Sz = build_Sz(ModeIndex(2, "TM"), MediumProfile.constant(4.0), 10j, build_grid(24))
    assert Sz.shape == (Sz.disc.dim, Sz.disc.dim)


@pytest.mark.parametrize("pol", ["TE", "TM"])
def test_resolvent_norm_grid_independent(pol):
    med = MediumProfile.constant(4.0)
    norms = [resolvent_norm(assemble_Bz(ModeIndex(1, pol), med, 20j, build_grid(N))) for N in (48, 96)]
    assert norms[1] == pytest.approx(norms[0], rel=0.1)
