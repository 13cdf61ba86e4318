import numpy as np
import pytest

from maxtev.exceptions import InvalidMediumError, UnsupportedModeError
from maxtev.media import MediumProfile, ModeIndex


def test_mode_index():
    m = ModeIndex(3, "tm")
    assert (m.l, m.polarization, m.L, m.degeneracy, str(m)) == (3, "TM", 12, 7, "TM3")
    with pytest.raises(UnsupportedModeError):
        ModeIndex(0, "TE")
    with pytest.raises(UnsupportedModeError):
        ModeIndex(1, "TX")


@pytest.mark.parametrize("bad", [
    lambda: MediumProfile.constant(1.0),
    lambda: MediumProfile.constant(-2.0),
    lambda: MediumProfile.layered([(0.5, 4.0), (1.0, 1.0)]),
    lambda: MediumProfile.layered([(0.5, -3.0), (1.0, 4.0)]),
    lambda: MediumProfile.smooth(4.0, 2.0, shell_width=0.0),
])
def test_invalid_media(bad):
    with pytest.raises(InvalidMediumError):
        bad()


def test_constant_near_boundary():
    med = MediumProfile.smooth(6.0, 4.0, radius=1.0, shell_width=0.2)
    r = np.linspace(0.8, 1.0, 11)
    np.testing.assert_allclose(med.n(r), 4.0)
    assert med.n(np.array([0.0]))[0] == pytest.approx(6.0)
    np.testing.assert_allclose(med.contrast(r), 3.0)


def test_layered_lookup():
    med = MediumProfile.layered([(0.5, 2.0), (1.0, 4.0)])
    np.testing.assert_allclose(med.n(np.array([0.1, 0.49, 0.51, 1.0])), [2, 2, 4, 4])
    assert med.is_piecewise_constant and med.is_real


@pytest.mark.parametrize("med", [
    MediumProfile.constant(4.0),
    MediumProfile.constant(2 + 0.5j, radius=2.0),
    MediumProfile.layered([(0.5, 2.0), (1.0, 4.0)]),
    MediumProfile.smooth(6.0, 4.0),
])
def test_dict_round_trip(med):
    back = MediumProfile.from_dict(med.to_dict())
    r = np.linspace(0, med.radius, 33)
    np.testing.assert_array_equal(back.n(r), med.n(r))
