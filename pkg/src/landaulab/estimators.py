"""Estimator-style wrappers around the spectral pipeline.

The "data" handed to ``fit`` is a manifold model (or its config dict);
hyperparameters such as ``k`` and the grid live in ``__init__`` so that
``get_params`` / ``set_params`` / ``clone`` behave as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import InvalidInputError
from .geometry import ManifoldModel, Sphere, SphereGrid, model_from_dict
from .projector import SmoothCutoff, assemble_projector, smoothed_filter
from .spectral import DEFAULT_SEED, RESIDUAL_TOL, _cluster_run
from .symbol_model import predicted_dimension

__all__ = [
    "check_model",
    "check_sections",
    "LowEnergySpectrum",
    "SpectralProjector",
    "ChebyshevFilter",
]


def check_model(model) -> ManifoldModel:
    """Accept a model instance or its config block."""
    if isinstance(model, ManifoldModel):
        return model
    if isinstance(model, dict):
        return model_from_dict(model)
    raise InvalidInputError(f"expected a Torus, Sphere or model dict, got {type(model).__name__}")


def check_sections(X, n_features: int) -> tuple[np.ndarray, bool]:
    """Validate a section or a batch of sections (rows) of length ``n_features``.

    Returns a 2-d complex array and whether the input was 1-d.
    """
    X = np.asarray(X)
    if X.dtype == object or not (np.issubdtype(X.dtype, np.number)):
        raise InvalidInputError("sections must be numeric")
    single = X.ndim == 1
    X = np.atleast_2d(X).astype(complex, copy=False)
    if X.ndim != 2:
        raise InvalidInputError(f"expected 1-d or 2-d input, got shape {X.shape}")
    if X.shape[1] != n_features:
        raise InvalidInputError(f"sections have length {X.shape[1]}, operator size is {n_features}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("sections contain NaN or inf")
    return X, single


def _check_k(k):
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool) or k < 1:
        raise InvalidInputError(f"k must be a positive integer, got {k!r}")
    return int(k)


class LowEnergySpectrum(BaseEstimator):
    """Low-lying spectrum and cluster partition of the operator at tensor power ``k``.

    Parameters
    ----------
    k : int
    grid : tuple of int or None
        Torus grid dims ``(n1, n2)``; ignored on the sphere.
    tol, seed : eigensolver residual tolerance and start-vector seed.

    Attributes
    ----------
    operator_, eigenvalues_, eigenvectors_, residuals_, clusters_,
    dimension_, epsilon_, gap_ratio_ (``lambda_{d+1} / k``).
    """

    def __init__(self, k=4, grid=(64, 64), tol=RESIDUAL_TOL, seed=DEFAULT_SEED):
        self.k = k
        self.grid = grid
        self.tol = tol
        self.seed = seed

    def fit(self, X, y=None):
        model = check_model(X)
        k = _check_k(self.k)
        if not self.tol > 0:
            raise InvalidInputError("tol must be positive")
        grid = None if isinstance(model, Sphere) else tuple(self.grid)
        op, pairs, part = _cluster_run(model, k, grid, self.tol, self.seed)
        self.model_ = model
        self.operator_ = op
        self.eigenvalues_ = pairs.values
        self.eigenvectors_ = pairs.vectors
        self.residuals_ = pairs.residuals
        self.clusters_ = part
        self.dimension_ = part.dimension
        self.predicted_dimension_ = predicted_dimension(model, k)
        self.epsilon_ = part.epsilon
        self.gap_ratio_ = float(pairs.values[part.dimension]) / k
        return self

    def predict(self, X):
        """Cluster index for each energy in ``X``; ``-1`` outside every computed cluster interval."""
        check_is_fitted(self, "clusters_")
        E = np.asarray(X, dtype=float).ravel()
        out = np.full(E.shape, -1, dtype=int)
        for c in self.clusters_.clusters:
            lo, hi = c.interval
            out[(E >= lo) & (E <= hi)] = c.nu
        return out


class SpectralProjector(TransformerMixin, BaseEstimator):
    """Projection onto the ground cluster.

    ``transform`` maps sections (rows, in the operator's basis) to their
    projections.  ``kernel_`` is the sampled :class:`ProjectorKernel`; on the
    sphere it is sampled on ``sphere_grid`` (default sized to integrate
    products of lowest-level sections exactly).
    """

    def __init__(self, k=4, grid=(64, 64), sphere_grid=None, tol=RESIDUAL_TOL, seed=DEFAULT_SEED):
        self.k = k
        self.grid = grid
        self.sphere_grid = sphere_grid
        self.tol = tol
        self.seed = seed

    def fit(self, X, y=None):
        spec = LowEnergySpectrum(k=self.k, grid=self.grid, tol=self.tol, seed=self.seed).fit(X)
        model = spec.model_
        if isinstance(model, Sphere):
            Nk = model.N * spec.k
            dims = self.sphere_grid or (Nk + 8, 2 * Nk + 8)
            qgrid = SphereGrid(*dims)
        else:
            qgrid = None
        self.spectrum_ = spec
        self.basis_ = np.asarray(spec.clusters_[0].eigenvectors)
        self.kernel_ = assemble_projector(spec.clusters_[0], qgrid, spec.operator_, tol=self.tol)
        self.n_features_in_ = spec.operator_.M
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        Xc, single = check_sections(X, self.n_features_in_)
        V = self.basis_
        out = (Xc @ V.conj()) @ V.T
        return out[0] if single else out


class ChebyshevFilter(TransformerMixin, BaseEstimator):
    """Polynomial approximation ``F = f(op / k)`` of a smooth cutoff.

    ``b = None`` places the cutoff edge at ``0.9`` of the observed gap ratio.
    Fitted ``report_`` holds the distance estimates to the cluster projector.
    """

    def __init__(self, k=8, grid=(32, 32), a=0.1, b=None, degree=400, tol=RESIDUAL_TOL, seed=DEFAULT_SEED):
        self.k = k
        self.grid = grid
        self.a = a
        self.b = b
        self.degree = degree
        self.tol = tol
        self.seed = seed

    def fit(self, X, y=None):
        spec = LowEnergySpectrum(k=self.k, grid=self.grid, tol=self.tol, seed=self.seed).fit(X)
        if not isinstance(self.degree, (int, np.integer)) or self.degree < 1:
            raise InvalidInputError("degree must be a positive integer")
        b = 0.9 * spec.gap_ratio_ if self.b is None else float(self.b)
        self.cutoff_ = SmoothCutoff(float(self.a), b)
        self.report_ = smoothed_filter(
            spec.operator_, spec.k, self.cutoff_, int(self.degree), spec.clusters_[0], spec.gap_ratio_, seed=self.seed
        )
        self.spectrum_ = spec
        self.n_features_in_ = spec.operator_.M
        return self

    def transform(self, X):
        check_is_fitted(self, "report_")
        Xc, single = check_sections(X, self.n_features_in_)
        out = self.report_.F.apply(Xc.T).T
        return out[0] if single else out
