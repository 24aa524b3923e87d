import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from landaulab.estimators import ChebyshevFilter, LowEnergySpectrum, SpectralProjector, check_sections
from landaulab.exceptions import InvalidInputError
from landaulab.geometry import Sphere, Torus


def test_get_params_and_clone():
    est = LowEnergySpectrum(k=5, grid=(32, 32))
    assert est.get_params() == {"k": 5, "grid": (32, 32), "tol": 1e-8, "seed": 20041210}
    est2 = clone(est).set_params(k=6)
    assert est2.k == 6 and est.k == 5


def test_spectrum_fit_sphere_dict():
    est = LowEnergySpectrum(k=6).fit({"model": "sphere", "N": 1})
    assert est.dimension_ == est.predicted_dimension_ == 7
    assert est.gap_ratio_ == pytest.approx(8 / 6)
    np.testing.assert_array_equal(est.predict([0.0, 8.0, 3.0]), [0, 1, -1])


def test_spectrum_fit_torus():
    est = LowEnergySpectrum(k=3, grid=(32, 32)).fit(Torus())
    assert est.dimension_ == 3
    assert est.epsilon_ < 0.05 * est.gap_ratio_ * 3


def test_validation():
    with pytest.raises(InvalidInputError):
        LowEnergySpectrum(k=0).fit(Sphere(1))
    with pytest.raises(InvalidInputError):
        LowEnergySpectrum(k=2.5).fit(Sphere(1))
    with pytest.raises(InvalidInputError):
        LowEnergySpectrum(k=2).fit("sphere")
    with pytest.raises(NotFittedError):
        LowEnergySpectrum().predict([0.0])
    with pytest.raises(InvalidInputError):
        check_sections(np.ones(3), 4)
    with pytest.raises(InvalidInputError):
        check_sections(np.array([np.nan, 1.0]), 2)
    with pytest.raises(InvalidInputError):
        check_sections(np.array(["a", "b"]), 2)


def test_projector_transform_idempotent(rng):
    est = SpectralProjector(k=4, grid=(32, 32)).fit(Torus())
    X = rng.standard_normal((3, 1024)) + 1j * rng.standard_normal((3, 1024))
    P = est.transform(X)
    np.testing.assert_allclose(est.transform(P), P, atol=1e-10)
    assert est.kernel_.trace() == pytest.approx(4.0, abs=1e-6)
    single = est.transform(X[0])
    assert single.shape == (1024,)
    np.testing.assert_allclose(single, P[0])
    with pytest.raises(NotFittedError):
        SpectralProjector().transform(X)


def test_projector_sphere():
    est = SpectralProjector(k=3).fit(Sphere(1))
    assert est.kernel_.dimension == 4
    x = np.zeros(est.n_features_in_)
    x[0] = 1.0
    x[-1] = 1.0
    np.testing.assert_allclose(est.transform(x)[:4], [1, 0, 0, 0])
    assert np.abs(est.transform(x)[4:]).max() == 0.0


def test_chebyshev_filter_matches_projector():
    flt = ChebyshevFilter(k=10, a=0.2, b=0.8, degree=200).fit(Sphere(1))
    proj = SpectralProjector(k=10).fit(Sphere(1))
    X = np.random.default_rng(0).standard_normal((2, flt.n_features_in_))
    assert np.abs(flt.transform(X) - proj.transform(X)).max() <= 1e-6 * np.abs(X).max() * 10
    assert flt.report_.distance_bound <= 1e-6
