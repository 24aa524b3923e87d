"""Low-lying eigenpairs and cluster detection.

``lowest_eigenpairs`` runs ARPACK in shift-invert mode with the shift
placed below a Gershgorin lower bound, so the eigenvalues nearest the
shift are the algebraically smallest ones.  The returned block is then
orthonormalized and Rayleigh-Ritz refined: ARPACK's complex driver does
not orthogonalize inside degenerate clusters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse.linalg as sla

from .discretize import DiscreteOperator, assemble_sphere, assemble_torus
from .exceptions import ClusterUndetectedError, ConvergenceError, InvalidInputError
from .geometry import Sphere, Torus, TorusGrid
from .prequantum import build_gauge
from .symbol_model import gap_constants, predicted_dimension

__all__ = [
    "DEFAULT_SEED",
    "RESIDUAL_TOL",
    "Eigenpairs",
    "SpectralCluster",
    "ClusterPartition",
    "lowest_eigenpairs",
    "detect_clusters",
    "solve",
    "assemble_operator",
    "sphere_nu_max",
    "drift_scan",
    "DriftRow",
    "richardson",
]

DEFAULT_SEED = 20041210
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Eigenpairs:
    """Ascending eigenvalues with Euclidean-orthonormal eigenvector columns.

    On the torus grid the quadrature-normalized sections are
    ``vectors / sqrt(h1 h2)``.
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray

    def __len__(self):
        return len(self.values)

    def gram_deviation(self) -> float:
        V = self.vectors
        return float(np.abs(V.conj().T @ V - np.eye(V.shape[1])).max())


@dataclass(frozen=True, eq=False)
class SpectralCluster:
    k: int
    nu: int
    eigenvalues: np.ndarray
    interval: tuple
    eigenvectors: Optional[np.ndarray] = None
    residuals: Optional[np.ndarray] = None
    complete: bool = True

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    @property
    def center(self) -> float:
        return float(np.mean(self.eigenvalues))


@dataclass(frozen=True, eq=False)
class ClusterPartition:
    clusters: list
    threshold: float
    epsilon: float
    gap: Optional[float]

    def __getitem__(self, i):
        return self.clusters[i]

    def __len__(self):
        return len(self.clusters)

    @property
    def dimension(self) -> int:
        return self.clusters[0].size


def _certify(matrix, values, vectors, tol):
    R = matrix @ vectors - vectors * values
    res = np.linalg.norm(R, axis=0)
    bad = res > tol * np.maximum(1.0, np.abs(values))
    return res, bad


def lowest_eigenpairs(
    op: DiscreteOperator, count: int, tol: float = RESIDUAL_TOL, seed: int = DEFAULT_SEED, maxiter: int | None = None
) -> Eigenpairs:
    """The ``count`` algebraically smallest eigenpairs, residual-certified.

    Raises :class:`ConvergenceError` (carrying the best residuals) if any
    pair misses ``||A v - lambda v|| <= tol * max(1, |lambda|)``.
    """
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    if op.is_diagonal:
        if count > op.M:
            raise InvalidInputError(f"count {count} exceeds operator size {op.M}")
        d = op.matrix.diagonal().real
        order = np.argsort(d, kind="stable")[:count]
        V = np.zeros((op.M, count), dtype=complex)
        V[order, np.arange(count)] = 1.0
        return Eigenpairs(values=d[order].copy(), vectors=V, residuals=np.zeros(count))
    if not count < op.M / 4:
        raise InvalidInputError(f"count must be < M/4 = {op.M / 4:g}, got {count}")

    A = op.matrix
    lo, hi = op.gershgorin_bounds()
    sigma = lo - max(1.0, 1e-3 * (hi - lo))
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(op.M) + 1j * rng.standard_normal(op.M)
    ncv = min(op.M - 1, max(2 * count + 1, count + 20))
    try:
        w, V = sla.eigsh(A, k=count, sigma=sigma, which="LM", v0=v0, ncv=ncv, tol=0, maxiter=maxiter)
    except sla.ArpackNoConvergence as exc:
        V = exc.eigenvectors
        res = np.linalg.norm(A @ V - V * exc.eigenvalues, axis=0) if V.size else np.array([])
        raise ConvergenceError("ARPACK did not converge", residuals=res) from exc

    Q, _ = np.linalg.qr(V)
    H = Q.conj().T @ (A @ Q)
    H = 0.5 * (H + H.conj().T)
    w, U = np.linalg.eigh(H)
    V = Q @ U
    res, bad = _certify(A, w, V, tol)
    if np.any(bad):
        raise ConvergenceError(
            f"{int(bad.sum())} eigenpairs above residual tolerance {tol:g}", residuals=res
        )
    return Eigenpairs(values=w, vectors=V, residuals=res)


def detect_clusters(
    eigenvalues,
    k: int,
    gap_factor: float | None = None,
    *,
    model=None,
    eigenvectors=None,
    residuals=None,
    require_gap: bool = True,
) -> ClusterPartition:
    """Split sorted eigenvalues at gaps larger than ``gap_factor * k``.

    ``gap_factor`` defaults to half the predicted gap constant ``2 min kappa``
    of ``model``.  Every cluster except the last is closed by a gap; the
    last is marked ``complete=False``.  With ``require_gap`` (default) a
    spectrum without any such gap raises :class:`ClusterUndetectedError`.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise InvalidInputError("need a nonempty 1-d array of eigenvalues")
    if np.any(np.diff(lam) < 0):
        raise InvalidInputError("eigenvalues must be sorted ascending")
    if gap_factor is None:
        if model is None:
            raise InvalidInputError("pass gap_factor or model")
        gap_factor = 0.5 * gap_constants(model)["M"]
    threshold = gap_factor * max(k, 1)
    cuts = np.flatnonzero(np.diff(lam) > threshold) + 1
    if require_gap and cuts.size == 0:
        raise ClusterUndetectedError(
            f"no gap > {threshold:.4g} among {lam.size} eigenvalues; request more eigenpairs"
        )
    bounds = np.concatenate([[0], cuts, [lam.size]])
    clusters = []
    for nu, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
        clusters.append(
            SpectralCluster(
                k=int(k),
                nu=nu,
                eigenvalues=lam[a:b].copy(),
                interval=(float(lam[a]), float(lam[b - 1])),
                eigenvectors=None if eigenvectors is None else eigenvectors[:, a:b],
                residuals=None if residuals is None else np.asarray(residuals)[a:b],
                complete=b < lam.size,
            )
        )
    eps = float(np.abs(clusters[0].eigenvalues).max())
    gap = float(lam[cuts[0]] - lam[cuts[0] - 1]) if cuts.size else None
    return ClusterPartition(clusters=clusters, threshold=threshold, epsilon=eps, gap=gap)


def sphere_nu_max(N: int, k: int, count: int) -> int:
    """Smallest ``nu_max >= 1`` whose diagonal block holds at least ``count`` states."""
    nu, total = 0, N * k + 1
    while total < count or nu < 1:
        nu += 1
        total += N * k + 2 * nu + 1
    return nu


def assemble_operator(model, k: int, grid=None, count: int | None = None) -> DiscreteOperator:
    """Operator for ``(model, k, grid)``; the sphere block is sized to hold ``count`` states."""
    if count is None:
        count = 2 * predicted_dimension(model, k) + 2
    if isinstance(model, Sphere):
        return assemble_sphere(model.N, k, sphere_nu_max(model.N, k, count))
    if isinstance(model, Torus):
        if grid is None:
            raise InvalidInputError("torus runs need grid dims")
        if not isinstance(grid, TorusGrid):
            grid = TorusGrid.for_model(model, *grid)
        return assemble_torus(model, build_gauge(model, k, grid))
    raise InvalidInputError(f"unsupported model {model!r}")


def solve(model, k: int, grid=None, count: int | None = None, tol: float = RESIDUAL_TOL, seed: int = DEFAULT_SEED):
    """Assemble the operator for ``(model, k, grid)`` and return ``(op, eigenpairs)``."""
    if count is None:
        count = 2 * predicted_dimension(model, k) + 2
    op = assemble_operator(model, k, grid, count)
    return op, lowest_eigenpairs(op, count, tol=tol, seed=seed)


def richardson(coarse: float, fine: float, ratio: float = 2.0, order: float = 2.0) -> float:
    """One Richardson step for an ``O(h^order)`` quantity."""
    r = ratio ** order
    return (r * fine - coarse) / (r - 1.0)


@dataclass(frozen=True)
class DriftRow:
    k: int
    dimension: int
    predicted_dimension: int
    epsilon: float
    M_k: float
    first_gap: float
    M_k_richardson: Optional[float] = None
    epsilon_richardson: Optional[float] = None
    rel_gap: float = field(default=0.0)

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def _cluster_run(model, k, grid, tol, seed, solver=None):
    """Solve and partition, growing the eigenpair count until a gap closes cluster 0."""
    count = 2 * predicted_dimension(model, k) + 2
    for _ in range(6):
        if solver is None:
            op, pairs = solve(model, k, grid, count=count, tol=tol, seed=seed)
        else:
            op, pairs = solver(model, k, grid, count)
        try:
            part = detect_clusters(pairs.values, k, model=model, eigenvectors=pairs.vectors, residuals=pairs.residuals)
        except ClusterUndetectedError:
            count *= 2
            continue
        return op, pairs, part
    raise ClusterUndetectedError(f"no spectral gap found for k={k} with up to {count} eigenpairs")


def drift_scan(model, ks, grid=None, coarse_grid=None, tol: float = RESIDUAL_TOL, seed: int = DEFAULT_SEED, solver=None):
    """Per ``k``: cluster-0 dimension, ``epsilon_k = max |lambda|``, ``M_k = lambda_{d_k + 1} / k``.

    With ``coarse_grid`` (torus, half the resolution of ``grid``) the fine
    values are also Richardson-extrapolated.  ``solver(model, k, grid, count)``
    may replace the default solve (used for cache reuse).
    """
    ks = list(ks)
    if any(b < a for a, b in zip(ks, ks[1:])):
        raise InvalidInputError("ks must be ascending")
    rows = []
    for k in ks:
        _, pairs, part = _cluster_run(model, k, grid, tol, seed, solver)
        d = part.dimension
        lam_next = float(pairs.values[d])
        Mk = lam_next / k
        M_r = eps_r = None
        if coarse_grid is not None:
            _, pc, partc = _cluster_run(model, k, coarse_grid, tol, seed, solver)
            if partc.dimension == d:
                ratio = grid[0] / coarse_grid[0]
                M_r = richardson(float(pc.values[d]) / k, Mk, ratio)
                eps_r = abs(richardson(float(np.mean(pc.values[:d])), float(np.mean(pairs.values[:d])), ratio))
        rows.append(
            DriftRow(
                k=int(k),
                dimension=d,
                predicted_dimension=predicted_dimension(model, k),
                epsilon=part.epsilon,
                M_k=Mk,
                first_gap=float(part.gap),
                M_k_richardson=M_r,
                epsilon_richardson=eps_r,
                rel_gap=part.epsilon / float(part.gap),
            )
        )
    return rows
