import numpy as np
import pytest

from landaulab.exceptions import DegenerateFormError, InvalidInputError, NonIntegralFluxError
from landaulab.geometry import (
    Sphere,
    SphereGrid,
    Torus,
    TorusGrid,
    almost_complex,
    chern_flux,
    compute_K,
    distance,
    field_geometry,
    kappa_spectrum,
    model_from_dict,
    trace_plus,
)

TWO_PI = 2 * np.pi


def _rand_spd(rng):
    A = rng.standard_normal((2, 2))
    return A @ A.T + 0.5 * np.eye(2)


def _rand_w(rng):
    b = rng.uniform(0.2, 5.0) * rng.choice([-1, 1])
    return np.array([[0.0, b], [-b, 0.0]])


def test_compute_K_identity_metric():
    b = 3.0
    w = np.array([[0, b], [-b, 0]])
    np.testing.assert_array_equal(compute_K(np.eye(2), w), w)


def test_compute_K_scaled_metric():
    K = compute_K(np.diag([4.0, 4.0]), np.array([[0, 1], [-1, 0]]))
    np.testing.assert_allclose(K, [[0, 0.25], [-0.25, 0]], atol=1e-15)


def test_compute_K_skew_adjoint_random(rng):
    for _ in range(20):
        g, w = _rand_spd(rng), _rand_w(rng)
        K = compute_K(g, w)
        gK = g @ K
        assert np.abs(gK.T + gK).max() <= 1e-12
        assert np.abs(gK - w).max() <= 1e-12


def test_compute_K_rejects_non_spd():
    with pytest.raises(InvalidInputError):
        compute_K(np.diag([1.0, -1.0]), np.array([[0, 1], [-1, 0]]))
    with pytest.raises(InvalidInputError):
        compute_K(np.eye(2), np.eye(2))


def test_kappa_rotation_generator():
    b = TWO_PI
    np.testing.assert_allclose(kappa_spectrum(np.array([[0, b], [-b, 0]])), [TWO_PI])
    np.testing.assert_allclose(kappa_spectrum(np.array([[0, 0.25], [-0.25, 0]])), [0.25])


def test_kappa_perturbed_point_matches_field_and_eig():
    m = Torus(eps=0.3)
    x, y = 0.13, 0.71
    b = float(m.field(x, y))
    K = compute_K(np.eye(2), np.array([[0, b], [-b, 0]]))
    np.testing.assert_allclose(kappa_spectrum(K), [b], rtol=1e-14)
    np.testing.assert_allclose(kappa_spectrum(K, method="eig"), [b], rtol=1e-12)


def test_kappa_degenerate_raises():
    with pytest.raises(DegenerateFormError):
        kappa_spectrum(np.diag([1.0, -1.0]))
    with pytest.raises(DegenerateFormError):
        kappa_spectrum(np.diag([1.0, -1.0]), method="eig")


def test_trace_plus_and_J_rotation():
    b = 2.5
    K = np.array([[0, b], [-b, 0]])
    assert trace_plus(K) == pytest.approx(b)
    np.testing.assert_allclose(almost_complex(K), [[0, 1], [-1, 0]], atol=1e-15)


def test_J_properties_random(rng):
    for _ in range(20):
        g, w = _rand_spd(rng), _rand_w(rng)
        J = almost_complex(compute_K(g, w), g)
        assert np.abs(J @ J + np.eye(2)).max() <= 1e-12
        assert np.abs(J.T @ g @ J - g).max() <= 1e-12


def test_sphere_field_geometry():
    pts = SphereGrid(6, 8).points
    geo = field_geometry(Sphere(3), pts)
    np.testing.assert_allclose(geo.kappa[:, 0], 1.5)
    np.testing.assert_allclose(geo.trace_plus, 1.5)


def test_field_geometry_invariants_perturbed():
    grid = TorusGrid.for_model(Torus(eps=0.3), 32)
    geo = field_geometry(Torus(eps=0.3), grid.points)
    v = geo.max_violations()
    assert v["gK_minus_omega"] <= 1e-12
    assert v["gK_skew"] <= 1e-12
    assert v["trace_plus"] <= 1e-12
    assert v["J_squared"] <= 1e-10


def test_constant_torus_kappa_constant():
    grid = TorusGrid.for_model(Torus(), 16)
    geo = field_geometry(Torus(), grid.points)
    np.testing.assert_allclose(geo.kappa, TWO_PI, rtol=1e-15)


def test_chern_flux_examples():
    assert chern_flux(Torus()) == 1
    assert chern_flux(Torus(B0=TWO_PI * 3, eps=0.3)) == 3
    assert chern_flux(Sphere(5)) == 5


def test_chern_flux_perturbed_by_quadrature():
    m = Torus(B0=TWO_PI * 3, eps=0.3)
    n = 400
    x = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(x, x, indexing="ij")
    assert m.field(X, Y).sum() / n**2 / TWO_PI == pytest.approx(3.0, abs=1e-10)


def test_chern_flux_nonintegral():
    with pytest.raises(NonIntegralFluxError):
        chern_flux(Torus(B0=5.0))


def test_model_validation():
    with pytest.raises(InvalidInputError):
        Torus(eps=1.0)
    with pytest.raises(InvalidInputError):
        Torus(B0=-1.0)
    with pytest.raises(InvalidInputError):
        Sphere(0)
    assert model_from_dict({"model": "sphere", "N": 2}) == Sphere(2)
    assert model_from_dict(Torus(eps=0.1).to_dict()) == Torus(eps=0.1)
    with pytest.raises(InvalidInputError):
        model_from_dict({"model": "klein"})


def test_distance_examples():
    t = Torus()
    assert distance(t, [0, 0], [0.9, 0]) == pytest.approx(0.1)
    assert distance(t, [0, 0], [0.5, 0.5]) == pytest.approx(np.sqrt(2) / 2)
    assert distance(Sphere(1), [0, 0], [np.pi, 0]) == pytest.approx(np.pi)


def test_distance_metric_axioms(rng):
    for model, scale in ((Torus(), [1.0, 1.0]), (Sphere(1), [np.pi, TWO_PI])):
        P = rng.random((30, 3, 2)) * scale
        a, b, c = P[:, 0], P[:, 1], P[:, 2]
        dab, dba = distance(model, a, b), distance(model, b, a)
        np.testing.assert_allclose(dab, dba, atol=1e-14)
        assert np.all(dab <= distance(model, a, c) + distance(model, c, b) + 1e-12)


def test_sphere_grid_quadrature():
    g = SphereGrid(10, 20)
    assert g.weights.sum() == pytest.approx(4 * np.pi, rel=1e-14)
    th = g.points[:, 0]
    assert g.weights @ np.cos(th) ** 2 == pytest.approx(4 * np.pi / 3, rel=1e-13)


def test_torus_grid_indexing():
    g = TorusGrid(16, 20, 1.0, 2.0)
    assert g.size == 320
    assert g.index(16, -1) == g.index(0, 19)
    np.testing.assert_allclose(g.points[g.index(3, 5)], [3 / 16, 5 * 0.1])
    assert g.nearest_index([0.5, 1.0]) == g.index(8, 10)
    assert g.weights.sum() == pytest.approx(2.0)
