"""Generate frozen reference values for the spherical Bessel tests.

Evaluates j_l(z) by its ascending power series in mpmath at a working
precision that absorbs the cancellation (about 0.44 |z| digits), then
derives psi_l = z j_l and psi_l' = z j_{l-1} - l j_l (psi_0' = cos z).

    python tests/oracles/make_bessel_oracle.py

writes tests/data/bessel_oracle.npz.
"""

from pathlib import Path

import mpmath as mp
import numpy as np

L_MAX = 60
N_Z = 164
SEED = 20240611


def series_j(l, z):
    """j_l(z) = z^l sum_k (-z^2/2)^k / (k! (2l+2k+1)!!), in the current mp context."""
    w = -z * z / 2
    term = mp.mpf(1)
    for k in range(1, l + 1):
        term = term * z / (2 * k + 1)
    total = term
    k = 0
    while True:
        k += 1
        term = term * w / (k * (2 * l + 2 * k + 1))
        total += term
        if k > 5 and abs(term) < abs(total) * mp.mpf(10) ** (-40):
            break
    return total


def sample_points():
    rng = np.random.default_rng(SEED)
    rho = np.exp(rng.uniform(np.log(1e-2), np.log(200.0), N_Z - 4))
    phi = rng.uniform(-np.pi, np.pi, N_Z - 4)
    z = rho * np.exp(1j * phi)
    extra = np.array([1.0, 3 + 2j, 8 - 0.5j, 10j])
    return np.concatenate([extra, z])


def main():
    z_pts = sample_points()
    j = np.empty((L_MAX + 1, z_pts.size), dtype=complex)
    dpsi = np.empty_like(j)
    for i, zc in enumerate(z_pts):
        mp.mp.dps = 40 + int(0.45 * abs(zc))
        z = mp.mpc(zc.real, zc.imag)
        vals = [series_j(l, z) for l in range(L_MAX + 1)]
        mp.mp.dps = 30
        for l in range(L_MAX + 1):
            j[l, i] = complex(vals[l])
            if l == 0:
                dpsi[l, i] = complex(mp.cos(z))
            else:
                dpsi[l, i] = complex(z * vals[l - 1] - l * vals[l])
    out = Path(__file__).resolve().parents[1] / "data" / "bessel_oracle.npz"
    np.savez_compressed(out, z=z_pts, j=j, dpsi=dpsi, l_max=L_MAX)
    print(f"wrote {out} ({j.size} points)")


if __name__ == "__main__":
    main()
