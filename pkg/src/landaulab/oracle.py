"""Exact reference solutions.

* constant-field torus: Landau levels ``2 B k m``, each ``N k``-fold;
* plane lowest-Landau-level reproducing kernel (symmetric gauge);
* unit sphere: monopole levels ``nu (N k + nu + 1)``, ``(N k + 2 nu + 1)``-fold,
  and the lowest-level reproducing kernel ``(N k + 1)/(4 pi) cos^{N k}(d / 2)``.

Each closed form has an independent brute-force counterpart here
(sector-wise finite differences, explicit harmonic sums) so it can be
re-derived at small scale before being trusted.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

from .exceptions import InvalidInputError

__all__ = [
    "landau_levels",
    "monopole_spectrum",
    "monopole_spectrum_fd",
    "lll_kernel",
    "sphere_kernel",
    "monopole_lowest_harmonics",
    "sphere_kernel_bruteforce",
]


def landau_levels(N: int, k: int, B: float, m_max: int, area: float | None = None):
    """``[(2 B k m, N k) for m = 0..m_max]``.

    ``area``, when given, is checked against ``B * area = 2 pi N``.
    """
    if area is not None and not np.isclose(B * area, 2 * np.pi * N, rtol=1e-12):
        raise InvalidInputError("B * area must equal 2 pi N")
    return [(2.0 * B * k * m, N * k) for m in range(m_max + 1)]


def monopole_spectrum(N: int, k: int, nu_max: int):
    Nk = N * k
    return [(float(nu * (Nk + nu + 1)), Nk + 2 * nu + 1) for nu in range(nu_max + 1)]


def _sector_fd(q: float, m: float, n: int, count: int):
    # -(1/sin) d/dtheta sin d/dtheta + (m + q cos)^2 / sin^2 has spectrum l(l+1) - q^2
    h = np.pi / n
    theta = (np.arange(n) + 0.5) * h
    s = np.sin(theta)
    faces = np.sin(np.arange(n + 1) * h)
    faces[0] = faces[-1] = 0.0
    V = (m + q * np.cos(theta)) ** 2 / s ** 2
    d = (faces[1:] + faces[:-1]) / (s * h ** 2) + V
    e = -faces[1:-1] / (h ** 2 * np.sqrt(s[:-1] * s[1:]))
    w = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, count - 1))
    return w


def monopole_spectrum_fd(N: int, k: int, nu_max: int, n_theta: int = 4000):
    """Brute-force levels of the charge-``N k / 2`` monopole operator minus ``k N / 2``.

    Separates azimuthal sectors ``m`` (in the two-string gauge
    ``A_phi = -q cos(theta) / sin(theta)``) and diagonalizes each radial
    operator by finite differences.  Returns the sorted eigenvalues of all
    states with ``nu <= nu_max``.
    """
    q = 0.5 * N * k
    lmax = q + nu_max
    out = []
    for m in np.arange(-lmax, lmax + 0.5, 1.0):
        lmin = max(abs(m), q)
        count = int(round(lmax - lmin)) + 1
        if count <= 0:
            continue
        out.extend(_sector_fd(q, m, n_theta, count) - q)
    return np.sort(np.asarray(out))


def lll_kernel(B: float, x, y):
    """``(B / 2 pi) exp(i B (x ^ y) / 2) exp(-B |x - y|^2 / 4)``; ``B`` is the total field ``k B``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    wedge = x[..., 0] * y[..., 1] - x[..., 1] * y[..., 0]
    r2 = ((x - y) ** 2).sum(axis=-1)
    return (B / (2 * np.pi)) * np.exp(0.5j * B * wedge) * np.exp(-0.25 * B * r2)


def sphere_kernel(N: int, k: int, d):
    Nk = N * k
    return (Nk + 1) / (4 * np.pi) * np.cos(0.5 * np.asarray(d, dtype=float)) ** Nk


def monopole_lowest_harmonics(Nk: int, points) -> np.ndarray:
    """Orthonormal lowest-level sections at ``points = (theta, phi)``, shape ``(P, Nk + 1)``.

    Column ``a`` is ``sqrt((Nk + 1) C(Nk, a) / 4 pi) u^a v^(Nk - a)`` with the
    spinor coordinates ``u = cos(theta/2) e^{i phi/2}``, ``v = sin(theta/2) e^{-i phi/2}``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    theta, phi = points[:, 0], points[:, 1]
    u = np.cos(theta / 2) * np.exp(0.5j * phi)
    v = np.sin(theta / 2) * np.exp(-0.5j * phi)
    a = np.arange(Nk + 1)
    lognorm = 0.5 * (np.log(Nk + 1) - np.log(4 * np.pi) + gammaln(Nk + 1) - gammaln(a + 1) - gammaln(Nk - a + 1))
    return np.exp(lognorm)[None, :] * u[:, None] ** a[None, :] * v[:, None] ** (Nk - a)[None, :]


def sphere_kernel_bruteforce(Nk: int, x, y) -> np.ndarray:
    """``sum_a Y_a(x) conj(Y_a(y))`` over the lowest level, by explicit summation."""
    Yx = monopole_lowest_harmonics(Nk, x)
    Yy = monopole_lowest_harmonics(Nk, y)
    return (Yx * np.conj(Yy)).sum(axis=-1)
