"""The ground-cluster projector and its asymptotic structure.

A :class:`ProjectorKernel` stores only the quadrature-normalized sections
``psi`` (``P x d``); rows ``Pi(x0, .)`` and the diagonal are formed on
demand, never the full ``P x P`` kernel.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.ndimage import map_coordinates

from .discretize import DiscreteOperator
from .exceptions import (
    GapViolationError,
    InsufficientDataError,
    InvalidInputError,
    PhaseUnwrapError,
)
from .geometry import Sphere, SphereGrid, Torus, TorusGrid, distance
from .oracle import monopole_lowest_harmonics
from .spectral import DEFAULT_SEED, RESIDUAL_TOL, SpectralCluster

__all__ = [
    "ProjectorKernel",
    "assemble_projector",
    "diagonal_density",
    "GaussianFit",
    "gaussian_fit",
    "PhaseForm",
    "phase_linearization",
    "CollapseResult",
    "scaling_collapse",
    "SmoothCutoff",
    "ChebyshevFunction",
    "FilterReport",
    "smoothed_filter",
]

NOISE_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class ProjectorKernel:
    k: int
    model: object
    grid: object
    points: np.ndarray
    weights: np.ndarray
    psi: np.ndarray
    evaluate: Optional[Callable] = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return self.psi.shape[1]

    def row(self, i: int) -> np.ndarray:
        """``Pi(x_i, y)`` for every grid point ``y``."""
        return (np.conj(self.psi) * self.psi[i]).sum(axis=1)

    def column(self, i: int) -> np.ndarray:
        """``Pi(y, x_i)`` for every grid point ``y``."""
        return (self.psi * np.conj(self.psi[i])).sum(axis=1)

    def diagonal(self) -> np.ndarray:
        return (np.abs(self.psi) ** 2).sum(axis=1)

    def trace(self) -> float:
        return float(self.weights @ self.diagonal())

    def gram(self) -> np.ndarray:
        return (self.psi.conj().T * self.weights) @ self.psi

    def idempotency_defect(self) -> float:
        """Upper bound on ``sup |(Pi o Pi - Pi)(x, y)|``.

        ``Pi o Pi - Pi = psi (G - I) psi^*`` with ``G`` the quadrature Gram
        matrix, so each entry is at most ``max_x |psi(x)|^2 ||G - I||_2``.
        """
        G = self.gram()
        return float(self.diagonal().max() * np.linalg.norm(G - np.eye(self.dimension), 2))

    def hermiticity_defect(self, indices) -> float:
        worst = 0.0
        for i in indices:
            worst = max(worst, float(np.abs(self.row(i) - np.conj(self.column(i))).max()))
        return worst

    def magnitude_at(self, i0: int, targets) -> np.ndarray:
        """``|Pi(x_{i0}, y)|`` at off-grid points ``y``.

        Sphere kernels evaluate the harmonics exactly; torus kernels
        interpolate the magnitude row with periodic cubic splines.
        """
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        if self.evaluate is not None:
            at = self.evaluate(targets)
            return np.abs(at @ np.conj(self.psi[i0]))
        g = self.grid
        mag = np.abs(self.row(i0)).reshape(g.n1, g.n2)
        coords = np.vstack([targets[:, 0] / g.h1, targets[:, 1] / g.h2])
        return map_coordinates(mag, coords, order=3, mode="grid-wrap")


def _sphere_evaluator(Nk: int, coeffs: np.ndarray):
    def evaluate(points):
        return monopole_lowest_harmonics(Nk, points) @ coeffs

    return evaluate


def assemble_projector(cluster0: SpectralCluster, grid, op: DiscreteOperator, tol: float = RESIDUAL_TOL) -> ProjectorKernel:
    """Kernel of the projector onto the span of ``cluster0``.

    ``grid`` is the torus grid of ``op`` or a :class:`SphereGrid`
    quadrature on which the sphere sections are sampled.
    """
    if cluster0.eigenvectors is None:
        raise InvalidInputError("cluster carries no eigenvectors")
    if cluster0.residuals is None:
        raise InvalidInputError("cluster carries no residuals; cannot certify")
    lam = np.asarray(cluster0.eigenvalues)
    if np.any(np.asarray(cluster0.residuals) > tol * np.maximum(1.0, np.abs(lam))):
        raise InvalidInputError("cluster residuals above tolerance; refusing to build the projector")
    V = np.asarray(cluster0.eigenvectors)
    if isinstance(op.model, Torus):
        if grid is None:
            grid = op.grid
        if grid != op.grid:
            raise InvalidInputError("grid differs from the operator grid")
        psi = V / np.sqrt(grid.h1 * grid.h2)
        return ProjectorKernel(
            k=op.k, model=op.model, grid=grid, points=grid.points, weights=grid.weights, psi=psi
        )
    if isinstance(op.model, Sphere):
        if not isinstance(grid, SphereGrid):
            raise InvalidInputError("sphere kernels need a SphereGrid quadrature")
        Nk = op.model.N * op.k
        lowest = np.flatnonzero(op.labels[:, 0] == 0)
        outside = np.setdiff1d(np.arange(op.M), lowest)
        if outside.size and np.abs(V[outside]).max() > 1e-12:
            raise InvalidInputError("cluster has weight outside the lowest level")
        # labels carry m = a - Nk/2, ordered by a
        a = np.rint(op.labels[lowest, 1] + 0.5 * Nk).astype(int)
        coeffs = np.zeros((Nk + 1, V.shape[1]), dtype=complex)
        coeffs[a] = V[lowest]
        evaluate = _sphere_evaluator(Nk, coeffs)
        pts = grid.points
        return ProjectorKernel(
            k=op.k, model=op.model, grid=grid, points=pts, weights=grid.weights, psi=evaluate(pts), evaluate=evaluate
        )
    raise InvalidInputError(f"unsupported model {op.model!r}")


def diagonal_density(kernel: ProjectorKernel) -> np.ndarray:
    """Samples of ``x -> Pi(x, x)`` (real, nonnegative)."""
    return kernel.diagonal()


@dataclass(frozen=True)
class GaussianFit:
    rate: float
    rate_over_k: float
    prefactor: float
    residual: float
    n_points: int
    half_k_ratio: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def gaussian_fit(kernel: ProjectorKernel, x0: int, radius: float, r_min: float = 0.0) -> GaussianFit:
    """Least-squares slope of ``-log |Pi(x0, y)|`` against ``d(x0, y)^2`` for ``r_min <= d <= radius``.

    ``half_k_ratio`` is ``rate / (k / 2)``, the fitted rate in units of the
    Gaussian constant quoted for unit frequency.
    """
    if radius >= kernel.model.injectivity_radius:
        raise InvalidInputError("fit window exceeds the injectivity radius")
    d = distance(kernel.model, kernel.points[x0], kernel.points)
    mag = np.abs(kernel.row(x0))
    sel = (d >= r_min) & (d <= radius)
    if np.any(mag[sel] < NOISE_FLOOR):
        raise InsufficientDataError("kernel below the noise floor inside the fit window")
    if sel.sum() < 3:
        raise InsufficientDataError(f"only {int(sel.sum())} points inside the fit window")
    A = np.column_stack([d[sel] ** 2, np.ones(sel.sum())])
    yv = -np.log(mag[sel])
    coef, *_ = np.linalg.lstsq(A, yv, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - yv) ** 2)))
    k = kernel.k
    return GaussianFit(
        rate=float(coef[0]),
        rate_over_k=float(coef[0]) / k,
        prefactor=float(np.exp(-coef[1])),
        residual=resid,
        n_points=int(sel.sum()),
        half_k_ratio=float(coef[0]) / (0.5 * k),
    )


@dataclass(frozen=True)
class PhaseForm:
    """Antisymmetric part of the mixed Hessian of ``arg Pi`` at ``(x0, x0)``, divided by ``k``."""

    form: np.ndarray
    raw: np.ndarray
    antisymmetry_defect: float
    proportionality: float

    def to_dict(self) -> dict:
        return {
            "form": self.form.tolist(),
            "raw": self.raw.tolist(),
            "antisymmetry_defect": self.antisymmetry_defect,
            "proportionality": self.proportionality,
        }


def phase_linearization(kernel: ProjectorKernel, x0: int, gauge=None, step: int = 1) -> PhaseForm:
    """Mixed second differences of ``arg Pi(x0 + u, x0 + v)`` at ``u = v = 0``.

    ``gauge`` optionally holds site phases ``chi`` of a comparison gauge,
    applied as ``chi(x) Pi(x, y) conj(chi(y))``.  Mixed differences are
    insensitive to such site phases, so the native Landau gauge is an
    admissible comparison gauge.  ``proportionality`` is ``form[0, 1] / kappa(x0)``.
    """
    grid = kernel.grid
    if not isinstance(grid, TorusGrid):
        raise InvalidInputError("phase linearization runs on the torus grid")
    i, j = divmod(int(x0), grid.n2)
    chi = None if gauge is None else np.asarray(gauge, dtype=complex).ravel()
    psi = kernel.psi
    floor = NOISE_FLOOR * kernel.diagonal()[x0]

    def value(a, b):
        xi = grid.index(i + a[0], j + a[1])
        yi = grid.index(i + b[0], j + b[1])
        z = (psi[xi] * np.conj(psi[yi])).sum()
        if chi is not None:
            z = chi[xi] * z * np.conj(chi[yi])
        if abs(z) < floor:
            raise PhaseUnwrapError("kernel vanishes on the difference stencil")
        return z

    e = [np.array([step, 0]), np.array([0, step])]
    h = [grid.h1 * step, grid.h2 * step]
    raw = np.zeros((2, 2))
    for a in range(2):
        for b in range(2):
            z = value(e[a], e[b]) * np.conj(value(e[a], -e[b])) * np.conj(value(-e[a], e[b])) * value(-e[a], -e[b])
            raw[a, b] = np.angle(z) / (4.0 * h[a] * h[b])
    anti = 0.5 * (raw - raw.T)
    sym = 0.5 * (raw + raw.T)
    scale = max(np.abs(anti).max(), 1e-300)
    x = kernel.points[x0]
    kappa = float(kernel.model.field(x[0], x[1]))
    form = anti / kernel.k
    return PhaseForm(
        form=form,
        raw=raw,
        antisymmetry_defect=float(np.abs(sym).max() / scale),
        proportionality=float(form[0, 1] / kappa),
    )


@dataclass(frozen=True, eq=False)
class CollapseResult:
    u: np.ndarray
    ks: list
    profiles: dict
    distances: dict
    u_max: float

    def distance(self, k1, k2) -> float:
        return self.distances[(k1, k2)] if (k1, k2) in self.distances else self.distances[(k2, k1)]


def _sphere_offsets(x0, u):
    """Points ``exp_{x0}(u)`` on the unit sphere; ``u`` in the ``(e_theta, e_phi)`` frame."""
    t0, p0 = x0
    X0 = np.array([np.sin(t0) * np.cos(p0), np.sin(t0) * np.sin(p0), np.cos(t0)])
    et = np.array([np.cos(t0) * np.cos(p0), np.cos(t0) * np.sin(p0), -np.sin(t0)])
    ep = np.array([-np.sin(p0), np.cos(p0), 0.0])
    r = np.linalg.norm(u, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        dirs = np.where(r[:, None] > 0, (u[:, :1] * et + u[:, 1:] * ep) / np.where(r > 0, r, 1)[:, None], 0.0)
    Y = np.cos(r)[:, None] * X0 + np.sin(r)[:, None] * dirs
    theta = np.arccos(np.clip(Y[:, 2], -1, 1))
    phi = np.arctan2(Y[:, 1], Y[:, 0])
    return np.column_stack([theta, phi])


def scaling_collapse(kernels, x0: int, u_max: float = 3.0, n_u: int = 41) -> CollapseResult:
    """Profiles ``u -> k^{-n} |Pi_k(x0, x0 + u / sqrt(k))|`` on a common ``u``-grid (disc ``|u| <= u_max``).

    ``kernels`` are for at least three values of ``k`` on the same model;
    ``x0`` indexes the same point in each kernel's grid.  ``u_max`` is cut
    back (with a warning) so every offset stays inside the injectivity radius.
    """
    kernels = list(kernels)
    if len(kernels) < 3:
        raise InvalidInputError("need ≥ 3 k values for a scaling collapse")
    model = kernels[0].model
    limit = 0.9 * model.injectivity_radius * min(np.sqrt(K.k) for K in kernels)
    if u_max > limit:
        warnings.warn(f"u-grid truncated from {u_max:g} to {limit:.3g} to stay inside the window", stacklevel=2)
        u_max = limit
    u1 = np.linspace(-u_max, u_max, n_u)
    U = np.array(np.meshgrid(u1, u1, indexing="ij")).reshape(2, -1).T
    U = U[np.hypot(U[:, 0], U[:, 1]) <= u_max * (1 + 1e-12)]
    profiles = {}
    for K in kernels:
        pt = K.points[x0]
        # n = 1: prefactor k^{-1}
        if isinstance(model, Sphere):
            targets = _sphere_offsets(pt, U / np.sqrt(K.k))
            prof = K.magnitude_at(x0, targets) / K.k
        else:
            prof = K.magnitude_at(x0, pt + U / np.sqrt(K.k)) / K.k
        profiles.setdefault(K.k, prof)
    ks = [K.k for K in kernels]
    distances = {}
    for a in range(len(kernels)):
        for b in range(a + 1, len(kernels)):
            pa, pb = profiles[ks[a]], profiles[ks[b]]
            distances[(ks[a], ks[b])] = float(np.abs(pa - pb).max())
    return CollapseResult(u=U, ks=ks, profiles=profiles, distances=distances, u_max=float(u_max))


def _smooth_step(s):
    # C-infinity 0 -> 1 transition on [0, 1]
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class SmoothCutoff:
    """Even ``C^infinity`` cutoff: 1 on ``[-a, a]``, 0 outside ``[-b, b]``.

    The transition is smooth in ``sqrt(|t|)``, which spreads it evenly in
    the Chebyshev angle near the bottom of a spectrum starting at 0.
    ``b = inf`` is the constant function 1.
    """

    a: float
    b: float

    def __post_init__(self):
        if not (0 < self.a < self.b):
            raise InvalidInputError(f"need 0 < a < b, got a={self.a}, b={self.b}")

    @property
    def is_constant(self) -> bool:
        return not np.isfinite(self.b)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.is_constant:
            return np.ones_like(t)
        r = np.sqrt(np.abs(t))
        return _smooth_step((np.sqrt(self.b) - r) / (np.sqrt(self.b) - np.sqrt(self.a)))


@dataclass(frozen=True, eq=False)
class ChebyshevFunction:
    """``p(A / scale)`` for a Chebyshev interpolant ``p`` of ``f`` on ``[lo, hi]``."""

    matrix: object
    scale: float
    lo: float
    hi: float
    coeffs: np.ndarray

    @classmethod
    def interpolate(cls, f, matrix, scale, lo, hi, degree):
        nodes = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))
        t = lo + 0.5 * (nodes + 1.0) * (hi - lo)
        coeffs = C.chebfit(nodes, f(t), degree)
        return cls(matrix=matrix, scale=scale, lo=lo, hi=hi, coeffs=coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def scalar(self, t):
        x = (2.0 * np.asarray(t, dtype=float) - (self.hi + self.lo)) / (self.hi - self.lo)
        return C.chebval(x, self.coeffs)

    def apply(self, v):
        """Clenshaw recurrence; one matvec per degree."""
        v = np.asarray(v)
        alpha = 2.0 / ((self.hi - self.lo) * self.scale)
        beta = -(self.hi + self.lo) / (self.hi - self.lo)

        def X(w):
            return alpha * (self.matrix @ w) + beta * w

        b1 = np.zeros_like(v, dtype=complex)
        b2 = np.zeros_like(v, dtype=complex)
        for c in self.coeffs[:0:-1]:
            b1, b2 = c * v + 2.0 * X(b1) - b2, b1
        return self.coeffs[0] * v + X(b1) - b2


@dataclass(frozen=True, eq=False)
class FilterReport:
    F: ChebyshevFunction
    distance_power: float
    distance_bound: float
    degree: int
    interval: tuple
    cutoff: SmoothCutoff
    observed_M: float

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "interval": list(self.interval),
            "a": self.cutoff.a,
            "b": self.cutoff.b,
            "observed_M": self.observed_M,
            "distance_power": self.distance_power,
            "distance_bound": self.distance_bound,
        }


def smoothed_filter(
    op: DiscreteOperator,
    k: int,
    f: SmoothCutoff,
    degree: int,
    cluster0: SpectralCluster,
    observed_M: float,
    *,
    enforce_gap: bool = True,
    power_iters: int = 80,
    seed: int = DEFAULT_SEED,
) -> FilterReport:
    """Chebyshev approximation of ``F = f(op / k)`` and its distance to the cluster projector.

    The expansion interval runs from just below the certified lowest
    eigenvalue to the Gershgorin upper bound.  ``distance_power`` is a
    power-iteration estimate of ``||F - Pi||_2``; ``distance_bound`` is the
    maximum of ``|p - 1|`` on the cluster eigenvalues and ``sup |p|`` over
    ``[observed_M, hi]``, which bounds the same norm from above.
    """
    if enforce_gap and not f.is_constant and f.b >= observed_M:
        raise GapViolationError(f"cutoff b={f.b:g} reaches the observed gap M={observed_M:g}")
    lam0 = np.asarray(cluster0.eigenvalues) / k
    g_lo, g_hi = op.gershgorin_bounds()
    lo = min(float(lam0.min()), 0.0) - 0.01 * f.a if not f.is_constant else g_lo / k
    hi = g_hi / k
    F = ChebyshevFunction.interpolate(f, op.matrix, float(k), lo, hi, degree)

    V = np.asarray(cluster0.eigenvectors)

    def D(w):
        return F.apply(w) - V @ (V.conj().T @ w)

    rng = np.random.default_rng(seed)
    w = rng.standard_normal(op.M) + 1j * rng.standard_normal(op.M)
    w /= np.linalg.norm(w)
    est = 0.0
    for _ in range(power_iters):
        z = D(w)
        est = float(np.linalg.norm(z))
        if est == 0.0:
            break
        w = z / est

    on_cluster = float(np.abs(F.scalar(lam0) - 1.0).max())
    if f.is_constant:
        off = float(np.abs(F.scalar(np.array([observed_M, hi]))).max())
    else:
        theta = np.linspace(0.0, np.pi, 50 * (degree + 1))
        t = lo + 0.5 * (np.cos(theta) + 1.0) * (hi - lo)
        t = t[t >= observed_M]
        off = float(np.abs(F.scalar(t)).max())
    return FilterReport(
        F=F,
        distance_power=est,
        distance_bound=max(on_cluster, off),
        degree=degree,
        interval=(lo, hi),
        cutoff=f,
        observed_M=float(observed_M),
    )
