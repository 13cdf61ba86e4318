from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxtev import specfun as sf

DATA = Path(__file__).parent / "data" / "bessel_oracle.npz"


@pytest.fixture(scope="module")
def oracle():
    d = np.load(DATA)
    return d["z"], d["j"], d["dpsi"]


def test_oracle_relative_accuracy(oracle):
    z, j_ref, dpsi_ref = oracle
    l_max = j_ref.shape[0] - 1
    j = sf.sph_bessel_j_all(l_max, z)
    psi, dpsi = sf.riccati_psi_all(l_max, z)
    assert np.max(np.abs(j - j_ref) / np.abs(j_ref)) <= 1e-12
    assert np.max(np.abs(dpsi - dpsi_ref) / np.abs(dpsi_ref)) <= 1e-12
    assert np.max(np.abs(psi - z * j_ref) / np.abs(z * j_ref)) <= 1e-12


@pytest.mark.parametrize("l,zval", [(5, 3 + 2j), (10, 8 - 0.5j)])
def test_named_oracle_points(oracle, l, zval):
    z, j_ref, dpsi_ref = oracle
    i = int(np.argmin(np.abs(z - zval)))
    assert abs(z[i] - zval) < 1e-14
    assert abs(sf.sph_bessel_j(l, zval) - j_ref[l, i]) <= 1e-12 * abs(j_ref[l, i])
    _, d = sf.riccati_psi(l, zval)
    assert abs(d - dpsi_ref[l, i]) <= 1e-12 * abs(dpsi_ref[l, i])


def test_vector_at_10i(oracle):
    z, j_ref, _ = oracle
    i = int(np.argmin(np.abs(z - 10j)))
    v = sf.sph_bessel_j_all(40, 10j)
    np.testing.assert_allclose(v, j_ref[:41, i], rtol=1e-12)


def test_closed_forms():
    assert sf.sph_bessel_j(0, 1.0) == pytest.approx(np.sin(1.0), rel=1e-15)
    assert sf.sph_bessel_j(2, 0.0) == 0
    assert sf.sph_bessel_j(0, 0.0) == 1
    p, d = sf.riccati_psi(0, np.pi)
    assert abs(p) < 1e-15 and d == pytest.approx(-1.0)
    p, d = sf.riccati_psi(1, 1.0)
    assert p == pytest.approx(np.sin(1) - np.cos(1), rel=1e-14)
    # psi_1' = sin z - psi_1 / z
    assert d == pytest.approx(np.sin(1) - (np.sin(1) - np.cos(1)), rel=1e-14)
    np.testing.assert_allclose(sf.sph_bessel_j_all(0, 1.0), [np.sin(1.0)])


def test_all_matches_single():
    z = np.array([0.3, 2 + 1j, 15 - 4j, 40j])
    allv = sf.sph_bessel_j_all(12, z)
    for l in range(13):
        np.testing.assert_array_equal(allv[l], sf.sph_bessel_j(l, z))


def test_errors():
    with pytest.raises(ValueError):
        sf.sph_bessel_j(-1, 1.0)
    with pytest.raises(OverflowError):
        sf.sph_bessel_j(1, 1000j)


def test_underflow_flag():
    v, under = sf.sph_bessel_j_all(60, 1e-6, return_underflow=True)
    assert under[60] and not under[0]


def _sample(rng, n, im_max=30.0):
    rho = np.exp(rng.uniform(np.log(0.1), np.log(200.0), n))
    phi = rng.uniform(-np.pi, np.pi, n)
    z = rho * np.exp(1j * phi)
    return z.real + 1j * np.clip(z.imag, -im_max, im_max)


def _wronskian_parts(z, l_max=61):
    j = sf.sph_bessel_j_all(l_max, z)
    y = sf.sph_bessel_y_all(l_max, z)
    for l in range(0, l_max):
        jp = j[l - 1] - (l + 1) / z * j[l] if l else -j[1]
        yp = y[l - 1] - (l + 1) / z * y[l] if l else -y[1]
        yield l, j[l] * yp - jp * y[l], np.abs(j[l] * yp) + np.abs(jp * y[l])


def test_wronskian():
    # |Im z| <= 5: the two products stay within e^10 of 1/z^2, so the
    # identity is checkable to 1e-10 relative in double precision
    z = _sample(np.random.default_rng(3), 400, im_max=5.0)
    for l, w, _ in _wronskian_parts(z):
        assert np.max(np.abs(w - 1 / z**2) * np.abs(z) ** 2) <= 1e-10, l


def test_wronskian_large_imaginary_part():
    # beyond that the products grow like e^{2|Im z|}; only the
    # cancellation-limited bound is meaningful; sin/cos of z set the size
    # of the intermediates even when the products themselves are small
    z = _sample(np.random.default_rng(6), 400, im_max=30.0)
    trig = np.exp(2 * np.abs(z.imag)) / np.abs(z) ** 2
    for l, w, scale in _wronskian_parts(z):
        scale = np.maximum(scale, trig)
        ok = scale < 1e250
        assert np.all(np.abs(w - 1 / z**2)[ok] <= 1e-10 * np.abs(1 / z**2)[ok] + 1e-13 * scale[ok]), l


def test_recurrence_residual():
    rng = np.random.default_rng(4)
    z = _sample(rng, 200)
    j = sf.sph_bessel_j_all(61, z)
    for l in range(1, 61):
        res = np.abs(j[l - 1] + j[l + 1] - (2 * l + 1) / z * j[l])
        assert np.all(res <= 1e-10 * np.max(np.abs(j), axis=0))


def test_conjugation_symmetry():
    rng = np.random.default_rng(5)
    z = _sample(rng, 300)
    a = sf.sph_bessel_j_all(30, z)
    b = sf.sph_bessel_j_all(30, np.conj(z))
    np.testing.assert_allclose(b, np.conj(a), rtol=1e-14, atol=0)
    p1, d1 = sf.riccati_psi_all(30, z)
    p2, d2 = sf.riccati_psi_all(30, np.conj(z))
    np.testing.assert_allclose(d2, np.conj(d1), rtol=1e-14, atol=0)


def test_chi_wronskian():
    z = np.array([0.5, 3 - 1j, 20 + 2j])
    for l in range(6):
        p, dp = sf.riccati_psi(l, z)
        c, dc = sf.riccati_chi(l, z)
        np.testing.assert_allclose(p * dc - dp * c, 1.0, rtol=1e-11)


@settings(max_examples=60, deadline=None)
@given(
    l=st.integers(0, 30),
    re=st.floats(0.2, 60.0),
    im=st.floats(-10.0, 10.0),
)
def test_dpsi_finite_difference(l, re, im):
    z = complex(re, im)
    h = 1e-3 * max(1.0, abs(z)) ** 0.5
    _, d = sf.riccati_psi(l, z)
    fd = (sf.riccati_psi(l, z + h)[0] - sf.riccati_psi(l, z - h)[0]) / (2 * h)
    psi_scale = abs(sf.riccati_psi(l, z)[0]) + abs(d)
    # central difference error ~ h^2 |psi'''| / 6, |psi'''| <~ (1 + L/|z|^2) psi_scale
    bound = h**2 * (1 + l * (l + 1) / abs(z) ** 2) ** 1.5 * psi_scale + 1e-12 * psi_scale
    assert abs(fd - d) <= bound


def test_agrees_with_scipy(oracle):
    from scipy.special import spherical_jn

    z, _, _ = oracle
    j = sf.sph_bessel_j_all(60, z)
    for l in (0, 1, 7, 30, 60):
        np.testing.assert_allclose(j[l], spherical_jn(l, z), rtol=1e-12)
