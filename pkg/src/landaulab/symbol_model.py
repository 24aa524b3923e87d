"""Closed-form leading-order predictions used as expected values.

The low-lying cluster ``nu`` of ``nabla^* nabla - k Tr^+ K`` sits at
``2 k kappa . nu`` to leading order in ``k``.  For a field with varying
``kappa`` this is stated as the envelope ``[2 k nu min kappa, 2 k nu max kappa]``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .exceptions import InvalidInputError
from .geometry import Sphere, Torus, chern_flux

__all__ = [
    "Prediction",
    "predicted_cluster_energies",
    "oscillator_levels",
    "predicted_dimension",
    "gap_constants",
    "predict",
]


def predicted_cluster_energies(model, k: int, nu_max: int):
    """List of ``(lo, hi)`` energy intervals for ``nu = 0..nu_max``."""
    if nu_max < 0:
        raise InvalidInputError("nu_max must be >= 0")
    kmin, kmax = model.kappa_range()
    return [(2.0 * k * nu * kmin, 2.0 * k * nu * kmax) for nu in range(nu_max + 1)]


def oscillator_levels(kappa: float, trace_plus: float, nu_max: int):
    """Harmonic-oscillator levels ``kappa nu + Tr^+ K / 2``, ``nu = 0..nu_max`` (n = 1)."""
    if not kappa > 0:
        raise InvalidInputError("kappa must be positive")
    return [kappa * nu + 0.5 * trace_plus for nu in range(nu_max + 1)]


def predicted_dimension(model, k: int) -> int:
    """``N k`` on the torus; ``N k + 1`` on the sphere (oracle-derived offset)."""
    N = chern_flux(model)
    if isinstance(model, Sphere):
        return N * k + 1
    return N * k


def gap_constants(model) -> dict:
    """``M = 2 min kappa`` and a default cluster tolerance ``epsilon_slack = 0.05 M`` per unit ``k``."""
    kmin, _ = model.kappa_range()
    M = 2.0 * kmin
    return {"M": M, "epsilon_slack": 0.05 * M}


@dataclass(frozen=True)
class Prediction:
    k: int
    dimension: int
    intervals: list
    M: float
    oscillator: list

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "dimension": self.dimension,
            "intervals": [list(iv) for iv in self.intervals],
            "M": self.M,
            "oscillator": list(self.oscillator),
        }


def predict(model, k: int, nu_max: int = 3) -> Prediction:
    if isinstance(model, Torus):
        kappa_ref = model.B0
    else:
        kappa_ref = 0.5 * model.N
    return Prediction(
        k=int(k),
        dimension=predicted_dimension(model, k),
        intervals=predicted_cluster_energies(model, k, nu_max),
        M=gap_constants(model)["M"],
        oscillator=oscillator_levels(kappa_ref, kappa_ref, nu_max),
    )
