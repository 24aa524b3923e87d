"""Sparse matrices for the operators ``nabla^* nabla - k Tr^+ K``.

Torus: magnetic 5-point stencil with Peierls link phases from
:mod:`landaulab.prequantum`.  Sphere: the exact monopole-harmonic
eigenbasis, where the operator is diagonal with ``nu (N k + nu + 1)``
repeated ``N k + 2 nu + 1`` times.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.io
import scipy.sparse as sp

from .exceptions import GridTooCoarseError, InvalidInputError
from .geometry import Sphere, Torus, TorusGrid, field_geometry
from .prequantum import GaugeData

__all__ = [
    "DiscreteOperator",
    "assemble_torus",
    "assemble_sphere",
    "matvec",
    "export_matrix_market",
    "FLUX_GUARD",
]

FLUX_GUARD = np.pi / 4


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Hermitian sparse matrix plus the metadata needed to interpret vectors."""

    matrix: sp.csr_matrix
    basis: str
    k: int
    model: object
    grid: Optional[TorusGrid] = None
    gauge: Optional[GaugeData] = None
    labels: Optional[np.ndarray] = None
    nu_max: Optional[int] = None
    potential: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def M(self) -> int:
        return self.matrix.shape[0]

    @property
    def h1(self):
        return None if self.grid is None else self.grid.h1

    @property
    def h2(self):
        return None if self.grid is None else self.grid.h2

    @property
    def is_diagonal(self) -> bool:
        return self.basis == "sphere-monopole-diagonal"

    def matvec(self, x):
        return matvec(self, x)

    def gershgorin_bounds(self) -> tuple[float, float]:
        """Guaranteed enclosure ``[lo, hi]`` of the spectrum."""
        A = self.matrix
        d = A.diagonal().real
        off = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(d)
        return float((d - off).min()), float((d + off).max())


def assemble_torus(model: Torus, gauge: GaugeData, grid: TorusGrid | None = None) -> DiscreteOperator:
    """Magnetic 5-point Laplacian with link phases, minus ``k kappa(x)`` on the diagonal.

    Row ``s`` holds ``(2/h1^2 + 2/h2^2 - k kappa(s)) psi(s) - sum_s' U(s -> s')^* psi(s') / h^2``.
    """
    grid = gauge.grid if grid is None else grid
    if grid != gauge.grid:
        raise InvalidInputError("gauge was built for a different grid")
    k = gauge.k
    if k > 0:
        worst = float(np.abs(k * gauge.flux).max())
        if worst > FLUX_GUARD:
            raise GridTooCoarseError(
                f"flux per plaquette {worst:.3g} exceeds pi/4; refine the grid"
            )
    n1, n2 = grid.n1, grid.n2
    h1, h2 = grid.h1, grid.h2
    idx = np.arange(n1 * n2).reshape(n1, n2)
    right = np.roll(idx, -1, axis=0)
    up = np.roll(idx, -1, axis=1)

    geo = field_geometry(model, grid.points)
    potential = k * geo.trace_plus
    diag = np.full(n1 * n2, 2.0 / h1 ** 2 + 2.0 / h2 ** 2) - potential

    # transport from s' back to s along link s -> s' is conj(U(s -> s'))
    th = -np.conj(gauge.Uh).ravel() / h1 ** 2
    tv = -np.conj(gauge.Uv).ravel() / h2 ** 2
    s = idx.ravel()
    rows = np.concatenate([s, s, right.ravel(), s, up.ravel()])
    cols = np.concatenate([s, right.ravel(), s, up.ravel(), s])
    vals = np.concatenate([diag.astype(complex), th, np.conj(th), tv, np.conj(tv)])
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n1 * n2, n1 * n2))
    A.sort_indices()
    return DiscreteOperator(
        matrix=A,
        basis="torus-grid",
        k=k,
        model=model,
        grid=grid,
        gauge=gauge,
        potential=potential,
    )


def sphere_levels(N: int, k: int, nu_max: int):
    """``(value, multiplicity)`` for ``nu = 0..nu_max``."""
    Nk = N * k
    return [(nu * (Nk + nu + 1), Nk + 2 * nu + 1) for nu in range(nu_max + 1)]


def assemble_sphere(N: int, k: int, nu_max: int) -> DiscreteOperator:
    """Diagonal operator in the monopole-harmonic basis, levels ``nu = 0..nu_max``.

    ``labels[:, 0]`` is ``nu`` and ``labels[:, 1]`` the azimuthal number
    ``m`` in ``-(q + nu) .. q + nu`` with ``q = N k / 2``.
    """
    if N * k < 1:
        raise InvalidInputError("need N * k >= 1")
    if nu_max < 1:
        raise InvalidInputError("nu_max must be >= 1")
    q = 0.5 * N * k
    vals, labels = [], []
    for nu, (value, mult) in enumerate(sphere_levels(N, k, nu_max)):
        l = q + nu
        vals.extend([float(value)] * mult)
        labels.extend((nu, -l + i) for i in range(mult))
    vals = np.asarray(vals)
    A = sp.diags(vals.astype(complex), format="csr")
    return DiscreteOperator(
        matrix=A,
        basis="sphere-monopole-diagonal",
        k=int(k),
        model=Sphere(N),
        labels=np.asarray(labels, dtype=float),
        nu_max=int(nu_max),
    )


def matvec(op: DiscreteOperator, x):
    """``op @ x``; ``x`` may be a vector or an ``(M, p)`` block."""
    x = np.asarray(x)
    if x.shape[0] != op.M:
        raise InvalidInputError(f"vector length {x.shape[0]} does not match operator size {op.M}")
    return op.matrix @ x


def export_matrix_market(op: DiscreteOperator, path) -> None:
    scipy.io.mmwrite(
        str(path),
        op.matrix.tocoo(),
        comment=f"basis={op.basis} k={op.k}",
        field="complex",
        symmetry="hermitian",
    )
