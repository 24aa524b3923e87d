"""Manifold models and pointwise field geometry.

Two compact surfaces are supported: a flat torus carrying a field density
``B(x, y)`` and the unit round sphere carrying a monopole of charge ``N``.
The metric is Euclidean (torus) or round (sphere), so all field variation
enters through the symplectic form.

For every point the bundle map ``K`` is fixed by ``g(u, K v) = w(u, v)``;
its eigenvalues are ``+-i kappa_j`` and ``trace_plus = sum_j kappa_j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.special import roots_legendre

from .exceptions import DegenerateFormError, InvalidInputError, NonIntegralFluxError

__all__ = [
    "ManifoldModel",
    "Torus",
    "Sphere",
    "TorusGrid",
    "SphereGrid",
    "FieldGeometry",
    "compute_K",
    "kappa_spectrum",
    "trace_plus",
    "almost_complex",
    "chern_flux",
    "distance",
    "field_geometry",
    "model_from_dict",
]

TWO_PI = 2.0 * np.pi
FLUX_TOL = 1e-8


class ManifoldModel:
    """Common base of the torus and sphere scenarios."""

    kind: str = ""

    def to_dict(self) -> dict:
        raise NotImplementedError

    @property
    def volume(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Torus(ManifoldModel):
    """Flat torus ``[0, L1) x [0, L2)`` with field density

    ``B(x, y) = B0 * (1 + eps * cos(2 pi x / L1) * cos(2 pi y / L2))``.

    The perturbation has zero mean over full periods, so the total flux is
    ``B0 * L1 * L2`` for every admissible ``eps``.
    """

    L1: float = 1.0
    L2: float = 1.0
    B0: float = TWO_PI
    eps: float = 0.0
    kind: str = field(default="torus", init=False)

    def __post_init__(self):
        if not (self.L1 > 0 and self.L2 > 0):
            raise InvalidInputError(f"side lengths must be positive, got {self.L1}, {self.L2}")
        if not self.B0 > 0:
            raise InvalidInputError(f"B0 must be positive (nondegenerate form), got {self.B0}")
        if not abs(self.eps) < 1:
            raise InvalidInputError(f"|eps| must be < 1 to keep B positive, got {self.eps}")

    @property
    def volume(self) -> float:
        return self.L1 * self.L2

    @property
    def injectivity_radius(self) -> float:
        return 0.5 * min(self.L1, self.L2)

    def field(self, x, y):
        """Field density at ``(x, y)`` (broadcasts)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.B0 * (
            1.0 + self.eps * np.cos(TWO_PI * x / self.L1) * np.cos(TWO_PI * y / self.L2)
        )

    def cell_flux(self, x_edges, y_edges):
        """Exact flux of ``B`` through the rectangles of a tensor grid.

        Returns an array of shape ``(len(x_edges) - 1, len(y_edges) - 1)``.
        """
        x_edges = np.asarray(x_edges, dtype=float)
        y_edges = np.asarray(y_edges, dtype=float)
        dx = np.diff(x_edges)
        dy = np.diff(y_edges)
        sx = np.diff(np.sin(TWO_PI * x_edges / self.L1)) * (self.L1 / TWO_PI)
        sy = np.diff(np.sin(TWO_PI * y_edges / self.L2)) * (self.L2 / TWO_PI)
        return self.B0 * (np.outer(dx, dy) + self.eps * np.outer(sx, sy))

    def kappa_range(self) -> tuple[float, float]:
        """Exact ``(min, max)`` of ``kappa = B`` over the torus."""
        return self.B0 * (1.0 - abs(self.eps)), self.B0 * (1.0 + abs(self.eps))

    def to_dict(self) -> dict:
        return {"model": "torus", "L1": float(self.L1), "L2": float(self.L2), "B0": float(self.B0), "eps": float(self.eps)}


@dataclass(frozen=True)
class Sphere(ManifoldModel):
    """Unit round sphere with ``w = (N / 2) * dA``; total flux ``2 pi N``."""

    N: int = 1
    kind: str = field(default="sphere", init=False)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise InvalidInputError(f"monopole charge N must be a positive integer, got {self.N}")

    @property
    def volume(self) -> float:
        return 4.0 * np.pi

    @property
    def injectivity_radius(self) -> float:
        return np.pi

    def kappa_range(self) -> tuple[float, float]:
        return 0.5 * self.N, 0.5 * self.N

    def to_dict(self) -> dict:
        return {"model": "sphere", "N": int(self.N)}


Model = Union[Torus, Sphere]


def model_from_dict(block: dict) -> Model:
    """Build a model from the ``model`` block of a run configuration."""
    block = dict(block)
    kind = block.pop("model", None)
    if kind == "torus":
        return Torus(**block)
    if kind == "sphere":
        return Sphere(**block)
    raise InvalidInputError(f"unknown model kind {kind!r}")


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid; sites at ``(i h1, j h2)``, flattened row-major in ``i``."""

    n1: int
    n2: int
    L1: float = 1.0
    L2: float = 1.0

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2:
            raise InvalidInputError(f"grid dims must be >= 2, got {self.n1}x{self.n2}")

    @classmethod
    def for_model(cls, model: Torus, n1: int, n2: int | None = None) -> "TorusGrid":
        return cls(int(n1), int(n1 if n2 is None else n2), model.L1, model.L2)

    @property
    def h1(self) -> float:
        return self.L1 / self.n1

    @property
    def h2(self) -> float:
        return self.L2 / self.n2

    @property
    def size(self) -> int:
        return self.n1 * self.n2

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n1) * self.h1

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.n2) * self.h2

    @property
    def points(self) -> np.ndarray:
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.size, self.h1 * self.h2)

    def index(self, i: int, j: int) -> int:
        return (i % self.n1) * self.n2 + (j % self.n2)

    def nearest_index(self, point) -> int:
        i = int(np.rint(point[0] / self.h1))
        j = int(np.rint(point[1] / self.h2))
        return self.index(i, j)


@dataclass(frozen=True)
class SphereGrid:
    """Gauss-Legendre in ``cos(theta)`` times uniform ``phi``; points are ``(theta, phi)``.

    Exact for polynomials in ``cos(theta)`` of degree ``< 2 n_theta``
    times trigonometric polynomials in ``phi`` of degree ``< n_phi``.
    """

    n_theta: int
    n_phi: int

    @property
    def size(self) -> int:
        return self.n_theta * self.n_phi

    def _nodes(self):
        t, wt = roots_legendre(self.n_theta)
        theta = np.arccos(t[::-1])
        wt = wt[::-1]
        phi = np.arange(self.n_phi) * (TWO_PI / self.n_phi)
        return theta, wt, phi

    @property
    def points(self) -> np.ndarray:
        theta, _, phi = self._nodes()
        T, P = np.meshgrid(theta, phi, indexing="ij")
        return np.column_stack([T.ravel(), P.ravel()])

    @property
    def weights(self) -> np.ndarray:
        _, wt, _ = self._nodes()
        return np.repeat(wt * (TWO_PI / self.n_phi), self.n_phi)


def _check_spd(g):
    g = np.asarray(g, dtype=float)
    if g.shape[-1] != g.shape[-2] or not np.allclose(g, np.swapaxes(g, -1, -2), atol=1e-14):
        raise InvalidInputError("metric must be a symmetric square matrix")
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise InvalidInputError("metric is not positive definite") from exc
    return g


def compute_K(g, w):
    """Bundle map ``K = g^{-1} w`` defined by ``g(u, K v) = w(u, v)``.

    Both arguments may carry leading batch dimensions.
    """
    g = _check_spd(g)
    w = np.asarray(w, dtype=float)
    if not np.allclose(w, -np.swapaxes(w, -1, -2), atol=1e-14):
        raise InvalidInputError("symplectic matrix must be antisymmetric")
    return np.linalg.solve(g, w)


def kappa_spectrum(K, g=None, method: str = "closed"):
    """Positive frequencies ``kappa_j`` (ascending) with ``spec(K) = {+-i kappa_j}``.

    ``method="closed"`` uses ``kappa = sqrt(det K)`` for traceless 2x2
    blocks; ``method="eig"`` runs a generic eigensolve and is kept for
    cross-validation.  Returns shape ``(..., n)``.
    """
    K = np.asarray(K, dtype=float)
    dim = K.shape[-1]
    if dim % 2:
        raise InvalidInputError("K must act on an even-dimensional space")
    if method == "closed" and dim == 2:
        det = K[..., 0, 0] * K[..., 1, 1] - K[..., 0, 1] * K[..., 1, 0]
        tr = K[..., 0, 0] + K[..., 1, 1]
        scale = np.maximum(np.abs(K).max(axis=(-1, -2)), 1e-300)
        if np.any(det <= 0) or np.any(np.abs(tr) > 1e-10 * scale):
            raise DegenerateFormError("K has a real eigenvalue; the form is degenerate")
        return np.sqrt(det)[..., None]
    if method not in ("closed", "eig"):
        raise InvalidInputError(f"unknown method {method!r}")
    ev = np.linalg.eigvals(K)
    scale = np.maximum(np.abs(ev).max(axis=-1, keepdims=True), 1e-300)
    if np.any(np.abs(ev.real) > 1e-10 * scale) or np.any(np.abs(ev.imag) < 1e-12 * scale):
        raise DegenerateFormError("K has a real eigenvalue; the form is degenerate")
    im = np.sort(ev.imag, axis=-1)
    return im[..., dim // 2:]


def trace_plus(K, g=None):
    """``Tr^+ K = sum_j kappa_j``."""
    return kappa_spectrum(K, g).sum(axis=-1)


def _sym_sqrt(g, inverse=False):
    vals, vecs = np.linalg.eigh(g)
    p = -0.5 if inverse else 0.5
    return (vecs * vals[..., None, :] ** p) @ np.swapaxes(vecs, -1, -2)


def almost_complex(K, g=None):
    """``J = K (K^* K)^{-1/2}`` with ``K^*`` the ``g``-adjoint (``g = I`` by default)."""
    K = np.asarray(K, dtype=float)
    kappa_spectrum(K, method="eig" if K.shape[-1] > 2 else "closed")
    if g is None:
        g = np.broadcast_to(np.eye(K.shape[-1]), K.shape)
    g = _check_spd(g)
    # S = g^{1/2} K g^{-1/2} is antisymmetric; J_S = S (S^T S)^{-1/2}
    gh = _sym_sqrt(g)
    ghi = _sym_sqrt(g, inverse=True)
    S = gh @ K @ ghi
    StS = np.swapaxes(S, -1, -2) @ S
    StS = 0.5 * (StS + np.swapaxes(StS, -1, -2))
    JS = S @ _sym_sqrt(StS, inverse=True)
    return ghi @ JS @ gh


def chern_flux(model: Model) -> int:
    """``round(int w / 2 pi)``; raises if the flux is not integral to 1e-8."""
    if isinstance(model, Sphere):
        return int(model.N)
    if isinstance(model, Torus):
        total = float(model.cell_flux([0.0, model.L1], [0.0, model.L2])[0, 0])
        n = total / TWO_PI
        if abs(n - round(n)) > FLUX_TOL:
            raise NonIntegralFluxError(
                f"total flux / 2pi = {n!r} is not an integer; no prequantum bundle"
            )
        return int(round(n))
    raise InvalidInputError(f"unsupported model {model!r}")


def distance(model: Model, x, y):
    """Riemannian distance; points are ``(x, y)`` on the torus, ``(theta, phi)`` on the sphere.

    Broadcasts over leading dimensions of the point arrays.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if isinstance(model, Torus):
        d = np.abs(x - y)
        L = np.array([model.L1, model.L2])
        d = np.mod(d, L)
        d = np.minimum(d, L - d)
        return np.sqrt((d ** 2).sum(axis=-1))
    t1, p1 = x[..., 0], x[..., 1]
    t2, p2 = y[..., 0], y[..., 1]
    # haversine is accurate near d = 0, where the kernel fits live
    s = np.sin((t1 - t2) / 2) ** 2 + np.sin(t1) * np.sin(t2) * np.sin((p1 - p2) / 2) ** 2
    return 2.0 * np.arcsin(np.sqrt(np.clip(s, 0.0, 1.0)))


@dataclass(frozen=True)
class FieldGeometry:
    """Pointwise ``g, w, K, kappa, trace_plus, J`` on an array of points."""

    points: np.ndarray
    g: np.ndarray
    omega: np.ndarray
    K: np.ndarray
    kappa: np.ndarray
    trace_plus: np.ndarray
    J: np.ndarray

    def max_violations(self) -> dict:
        gK = self.g @ self.K
        I = np.eye(2)
        return {
            "gK_minus_omega": float(np.abs(gK - self.omega).max()),
            "gK_skew": float(np.abs(np.swapaxes(gK, -1, -2) + gK).max()),
            "trace_plus": float(np.abs(self.trace_plus - self.kappa.sum(axis=-1)).max()),
            "J_squared": float(np.abs(self.J @ self.J + I).max()),
        }


def field_geometry(model: Model, points) -> FieldGeometry:
    """Sample the field geometry at ``points`` (shape ``(P, 2)``)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    P = len(points)
    if isinstance(model, Torus):
        b = model.field(points[:, 0], points[:, 1])
        if np.any(b <= 0):
            raise DegenerateFormError("field density vanishes somewhere")
        g = np.broadcast_to(np.eye(2), (P, 2, 2)).copy()
    else:
        # orthonormal frame (e_theta, e_phi): round metric is the identity there
        b = np.full(P, 0.5 * model.N)
        g = np.broadcast_to(np.eye(2), (P, 2, 2)).copy()
    w = np.zeros((P, 2, 2))
    w[:, 0, 1] = b
    w[:, 1, 0] = -b
    K = compute_K(g, w)
    kappa = kappa_spectrum(K)
    return FieldGeometry(
        points=points,
        g=g,
        omega=w,
        K=K,
        kappa=kappa,
        trace_plus=kappa.sum(axis=-1),
        J=almost_complex(K, g),
    )
