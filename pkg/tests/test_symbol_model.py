import numpy as np
import pytest

from landaulab.exceptions import InvalidInputError
from landaulab.geometry import Sphere, Torus
from landaulab.symbol_model import (
    gap_constants,
    oscillator_levels,
    predict,
    predicted_cluster_energies,
    predicted_dimension,
)

TWO_PI = 2 * np.pi


def test_cluster_energies_constant_torus():
    lo, hi = predicted_cluster_energies(Torus(), 5, 1)[1]
    assert lo == pytest.approx(20 * np.pi) and hi == pytest.approx(20 * np.pi)


def test_cluster_energies_sphere_leading_order():
    # leading order 2 kappa nu k = 20; exact monopole value 26, offset nu(nu+1) = 6
    lo, hi = predicted_cluster_energies(Sphere(1), 10, 2)[2]
    assert lo == hi == pytest.approx(20.0)
    assert 2 * (10 + 2 + 1) - lo == pytest.approx(6.0)


def test_nu_zero_is_zero_and_nested():
    iv = predicted_cluster_energies(Torus(eps=0.3), 7, 3)
    assert iv[0] == (0.0, 0.0)
    assert all(a[1] <= b[1] and a[0] <= b[0] for a, b in zip(iv, iv[1:]))
    with pytest.raises(InvalidInputError):
        predicted_cluster_energies(Torus(), 1, -1)


def test_oscillator_levels():
    np.testing.assert_allclose(oscillator_levels(1.0, 1.0, 2), [0.5, 1.5, 2.5])
    np.testing.assert_allclose(oscillator_levels(TWO_PI, TWO_PI, 2), [np.pi, 3 * np.pi, 5 * np.pi])
    lv = oscillator_levels(TWO_PI, TWO_PI, 3)
    slopes = [2 * (v - TWO_PI / 2) for v in lv]
    np.testing.assert_allclose(slopes, [predicted_cluster_energies(Torus(), 1, 3)[n][0] for n in range(4)])
    with pytest.raises(InvalidInputError):
        oscillator_levels(0.0, 1.0, 1)


def test_predicted_dimension():
    assert predicted_dimension(Torus(), 7) == 7
    assert predicted_dimension(Sphere(1), 7) == 8
    assert predicted_dimension(Torus(eps=0.3), 7) == 7


def test_gap_constants():
    assert gap_constants(Torus())["M"] == pytest.approx(4 * np.pi)
    assert gap_constants(Sphere(1))["M"] == pytest.approx(1.0)
    assert gap_constants(Torus(eps=0.3))["M"] == pytest.approx(4 * np.pi * 0.7)


def test_predict_bundle():
    p = predict(Torus(), 4)
    assert p.dimension == 4 and p.M > 0
    assert p.to_dict()["intervals"][1] == [pytest.approx(16 * np.pi)] * 2
