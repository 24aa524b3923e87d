import numpy as np
import pytest

from landaulab.exceptions import InvalidInputError
from landaulab.geometry import Sphere, SphereGrid, distance
from landaulab.oracle import (
    landau_levels,
    lll_kernel,
    monopole_lowest_harmonics,
    monopole_spectrum,
    monopole_spectrum_fd,
    sphere_kernel,
    sphere_kernel_bruteforce,
)

TWO_PI = 2 * np.pi


def test_landau_levels():
    lv = landau_levels(1, 3, TWO_PI, 2, area=1.0)
    assert lv[0] == (0.0, 3)
    assert lv[1][0] == pytest.approx(12 * np.pi)
    assert lv[1][1] == 3
    assert landau_levels(1, 6, TWO_PI, 1)[1][0] == pytest.approx(2 * lv[1][0])
    with pytest.raises(InvalidInputError):
        landau_levels(1, 1, TWO_PI, 1, area=2.0)


@pytest.mark.parametrize("N,k,nu,value,mult", [(1, 2, 0, 0, 3), (1, 2, 1, 4, 5), (3, 1, 0, 0, 4)])
def test_monopole_spectrum_examples(N, k, nu, value, mult):
    assert monopole_spectrum(N, k, 2)[nu] == (value, mult)


@pytest.mark.parametrize("N,k", [(1, 2), (3, 1), (1, 4), (2, 3)])
def test_monopole_spectrum_against_fd(N, k):
    fd = monopole_spectrum_fd(N, k, 2, n_theta=2000)
    exact = np.concatenate([[v] * m for v, m in monopole_spectrum(N, k, 2)])
    np.testing.assert_allclose(fd, exact, atol=5e-5)


def test_lll_kernel_values():
    B = 7.0
    x = np.array([0.2, -0.1])
    assert lll_kernel(B, x, x) == pytest.approx(B / TWO_PI)
    y = x + np.array([2 / np.sqrt(B), 0.0])
    assert abs(lll_kernel(B, x, y)) == pytest.approx(B / TWO_PI * np.exp(-1))


def test_lll_kernel_reproducing():
    # integral over z of K(x, z) K(z, y) = K(x, y)
    B = 4.0
    h = 0.05
    g = np.arange(-6, 6, h)
    Z = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    x, y = np.array([0.3, 0.1]), np.array([-0.2, 0.4])
    lhs = (lll_kernel(B, x, Z) * lll_kernel(B, Z, y)).sum() * h * h
    assert lhs == pytest.approx(lll_kernel(B, x, y), abs=1e-10)


def test_sphere_kernel_endpoints():
    assert sphere_kernel(1, 4, 0.0) == pytest.approx(5 / (4 * np.pi))
    assert sphere_kernel(1, 4, np.pi) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("Nk", [1, 2, 3, 4])
def test_sphere_kernel_matches_bruteforce(Nk, rng):
    x = np.column_stack([rng.uniform(0, np.pi, 40), rng.uniform(0, TWO_PI, 40)])
    y = np.column_stack([rng.uniform(0, np.pi, 40), rng.uniform(0, TWO_PI, 40)])
    brute = sphere_kernel_bruteforce(Nk, x, y)
    d = distance(Sphere(1), x, y)
    np.testing.assert_allclose(np.abs(brute), sphere_kernel(Nk, 1, d), atol=1e-10)


def test_lowest_harmonics_orthonormal():
    Nk = 6
    g = SphereGrid(Nk + 4, 2 * Nk + 4)
    Y = monopole_lowest_harmonics(Nk, g.points)
    G = (Y.conj().T * g.weights) @ Y
    np.testing.assert_allclose(G, np.eye(Nk + 1), atol=1e-12)
