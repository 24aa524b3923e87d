"""Link-phase encoding of the k-th tensor power of the prequantum bundle.

Link ``(i, j) -> (i + 1, j)`` carries ``Uh[i, j]``, link ``(i, j) -> (i, j + 1)``
carries ``Uv[i, j]``; traversing a link backwards contributes the conjugate.
The counterclockwise product around every plaquette equals
``exp(-i k Phi(p))`` where ``Phi(p)`` is the exact flux through it.

Construction (Landau gauge, seam on the last column)::

    F[i, j] = sum_{i' < i} Phi[i', j]           partial flux along row j
    Uv[i, j] = exp(-i k F[i, j])
    T[j]    = sum_{j' < j} F[n1, j']             cumulative strip flux
    Uh[n1 - 1, j] = exp(+i k T[j])               seam links; all others 1

The corner plaquette closes because ``k * T[n2] = 2 pi N k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError
from .geometry import Torus, TorusGrid, chern_flux

__all__ = [
    "GaugeData",
    "build_gauge",
    "holonomy",
    "rectangle_loop",
    "gauge_transform",
    "random_site_phases",
]

MIN_GRID = 16


@dataclass(frozen=True)
class GaugeData:
    k: int
    grid: TorusGrid
    Uh: np.ndarray
    Uv: np.ndarray
    flux: np.ndarray
    total_flux: int
    twist: int

    @property
    def shape(self):
        return self.Uh.shape

    def plaquette_phases(self) -> np.ndarray:
        """Counterclockwise product of link phases for every plaquette ``(i, j)``."""
        Uh, Uv = self.Uh, self.Uv
        return (
            Uh
            * np.roll(Uv, -1, axis=0)
            * np.conj(np.roll(Uh, -1, axis=1))
            * np.conj(Uv)
        )


def build_gauge(model: Torus, k: int, grid: TorusGrid) -> GaugeData:
    """Gauge data for ``L^k`` on ``grid``; requires integral flux and dims >= 16."""
    if not isinstance(model, Torus):
        raise InvalidInputError("gauge data are defined for the torus only")
    if int(k) != k or k < 0:
        raise InvalidInputError(f"tensor power must be a nonnegative integer, got {k}")
    k = int(k)
    if grid.n1 < MIN_GRID or grid.n2 < MIN_GRID:
        raise InvalidInputError(f"grid dims must be >= {MIN_GRID}, got {grid.n1}x{grid.n2}")
    if not (np.isclose(grid.L1, model.L1) and np.isclose(grid.L2, model.L2)):
        raise InvalidInputError("grid and model side lengths differ")
    N = chern_flux(model)

    n1, n2 = grid.n1, grid.n2
    xe = np.arange(n1 + 1) * grid.h1
    ye = np.arange(n2 + 1) * grid.h2
    phi = model.cell_flux(xe, ye)

    F = np.zeros((n1 + 1, n2))
    F[1:] = np.cumsum(phi, axis=0)
    strip = F[n1]
    T = np.concatenate([[0.0], np.cumsum(strip)])

    Uv = np.exp(-1j * k * F[:n1])
    Uh = np.ones((n1, n2), dtype=complex)
    Uh[n1 - 1, :] = np.exp(1j * k * T[:n2])
    return GaugeData(k=k, grid=grid, Uh=Uh, Uv=Uv, flux=phi, total_flux=N * k, twist=N * k)


def _link(gauge: GaugeData, a, b) -> complex:
    n1, n2 = gauge.shape
    (i, j), (i2, j2) = a, b
    di = (i2 - i) % n1
    dj = (j2 - j) % n2
    if di == 1 and dj == 0:
        return gauge.Uh[i % n1, j % n2]
    if di == n1 - 1 and dj == 0:
        return np.conj(gauge.Uh[i2 % n1, j2 % n2])
    if dj == 1 and di == 0:
        return gauge.Uv[i % n1, j % n2]
    if dj == n2 - 1 and di == 0:
        return np.conj(gauge.Uv[i2 % n1, j2 % n2])
    raise InvalidInputError(f"sites {a} and {b} are not nearest neighbours")


def holonomy(gauge: GaugeData, loop) -> complex:
    """Product of oriented link phases along a closed site path.

    ``loop`` is a sequence of integer sites ``(i, j)`` (indices wrap); the
    first and last entries must coincide.
    """
    loop = [tuple(int(c) for c in s) for s in loop]
    n1, n2 = gauge.shape
    if len(loop) < 2 or (loop[0][0] - loop[-1][0]) % n1 or (loop[0][1] - loop[-1][1]) % n2:
        raise InvalidInputError("loop is not closed")
    out = 1.0 + 0.0j
    for a, b in zip(loop[:-1], loop[1:]):
        out *= _link(gauge, a, b)
    return out


def rectangle_loop(i0: int, j0: int, width: int, height: int):
    """Counterclockwise boundary of the ``width x height`` block with corner ``(i0, j0)``."""
    path = [(i0 + s, j0) for s in range(width)]
    path += [(i0 + width, j0 + s) for s in range(height)]
    path += [(i0 + width - s, j0 + height) for s in range(width)]
    path += [(i0, j0 + height - s) for s in range(height + 1)]
    return path


def gauge_transform(gauge: GaugeData, chi) -> GaugeData:
    """Apply site phases: ``U(s -> s') -> chi(s) U conj(chi(s'))``."""
    chi = np.asarray(chi, dtype=complex).reshape(gauge.shape)
    Uh = chi * gauge.Uh * np.conj(np.roll(chi, -1, axis=0))
    Uv = chi * gauge.Uv * np.conj(np.roll(chi, -1, axis=1))
    return GaugeData(
        k=gauge.k,
        grid=gauge.grid,
        Uh=Uh,
        Uv=Uv,
        flux=gauge.flux,
        total_flux=gauge.total_flux,
        twist=gauge.twist,
    )


def random_site_phases(shape, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.exp(2j * np.pi * rng.random(shape))
