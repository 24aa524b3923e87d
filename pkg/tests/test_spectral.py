import numpy as np
import pytest

from landaulab.discretize import assemble_sphere
from landaulab.exceptions import ClusterUndetectedError, ConvergenceError, InvalidInputError
from landaulab.geometry import Sphere, Torus
from landaulab.spectral import detect_clusters, drift_scan, lowest_eigenpairs, richardson, solve

from conftest import torus_run

FOUR_PI = 4 * np.pi


def test_sphere_diagonal_exact():
    op = assemble_sphere(1, 4, 2)
    p = lowest_eigenpairs(op, 13)
    np.testing.assert_array_equal(p.values, [0.0] * 5 + [6.0] * 7 + [14.0])
    assert p.residuals.max() == 0.0


def test_torus_k4_64():
    op, pairs, part, _ = torus_run(64, 4)
    assert np.abs(pairs.values[:4]).max() < 0.05 * 4
    assert pairs.values[4] == pytest.approx(FOUR_PI * 4, rel=0.02)
    assert pairs.gram_deviation() <= 1e-8
    assert np.all(pairs.residuals <= 1e-8 * np.maximum(1, np.abs(pairs.values)))


def test_free_laplacian_simple_ground():
    op, p = solve(Torus(), 0, (16, 16), count=3)
    assert p.values[0] == pytest.approx(0.0, abs=1e-9)
    assert p.values[1] - p.values[0] > 1.0


def test_deterministic_seed():
    _, a = solve(Torus(eps=0.3), 2, (16, 16), count=4)
    _, b = solve(Torus(eps=0.3), 2, (16, 16), count=4)
    np.testing.assert_array_equal(a.values, b.values)


def test_count_limit():
    op, _ = solve(Torus(), 1, (16, 16), count=2)
    with pytest.raises(InvalidInputError):
        lowest_eigenpairs(op, 64)


def test_nonconvergence_carries_residuals():
    op, _ = solve(Torus(), 3, (32, 32), count=2)
    with pytest.raises(ConvergenceError) as info:
        lowest_eigenpairs(op, 8, maxiter=1)
    assert info.value.residuals is not None


def test_clusters_torus_k8():
    _, pairs, part, _ = torus_run(64, 8)
    assert [c.size for c in part.clusters[:2]] == [8, 8]
    assert part[1].center == pytest.approx(FOUR_PI * 8, rel=0.02)
    assert part[0].complete and part[1].complete and not part[-1].complete


def test_clusters_sphere_k6():
    op, p = solve(Sphere(1), 6, count=7 + 9 + 11 + 1)
    part = detect_clusters(p.values, 6, model=Sphere(1))
    assert [c.size for c in part.clusters[:3]] == [7, 9, 11]
    assert [c.center for c in part.clusters[:3]] == [0.0, 8.0, 18.0]


def test_single_cluster_input():
    part = detect_clusters(np.zeros(5), 3, gap_factor=1.0, require_gap=False)
    assert len(part) == 1 and part[0].interval == (0.0, 0.0)
    with pytest.raises(ClusterUndetectedError):
        detect_clusters(np.zeros(5), 3, gap_factor=1.0)


def test_detect_validation():
    with pytest.raises(InvalidInputError):
        detect_clusters(np.array([1.0, 0.0]), 1, gap_factor=1.0)
    with pytest.raises(InvalidInputError):
        detect_clusters(np.array([0.0, 1.0]), 1)


def test_drift_scan_sphere():
    rows = drift_scan(Sphere(1), range(4, 9))
    for r in rows:
        assert r.dimension == r.k + 1 == r.predicted_dimension
        assert r.epsilon == 0.0
        assert r.M_k == pytest.approx((r.k + 2) / r.k, abs=1e-12)


def test_drift_scan_torus_small():
    rows = drift_scan(Torus(), [4, 6], (64, 64), coarse_grid=(32, 32))
    for r in rows:
        assert r.dimension == r.k
        assert r.epsilon <= 0.05 * r.first_gap
        assert r.M_k_richardson == pytest.approx(FOUR_PI, rel=0.02)
    with pytest.raises(InvalidInputError):
        drift_scan(Torus(), [6, 4], (32, 32))


def test_drift_scan_perturbed_dimension():
    rows = drift_scan(Torus(eps=0.3), [4, 7], (64, 64))
    assert [r.dimension for r in rows] == [4, 7]


def test_richardson_exact_for_quadratic():
    f = lambda h: 3.0 + 5.0 * h**2  # noqa: E731
    assert richardson(f(0.1), f(0.05)) == pytest.approx(3.0)
