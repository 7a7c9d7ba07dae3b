"""
Probabilities for an intermediate measurement on a pre- and post-selected
ensemble (the ABL rule), and the retrodiction table Alice uses in the
protocol.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from qkd_backend.core.qmath import (
    COMPOSED_TOL,
    R_LABELS,
    VANISHING_TOL,
    Axis,
    ProjectiveObservable,
    StateVector,
    bell_phi_plus,
    pauli_observable,
    r_basis,
)
from qkd_backend.errors import DimensionMismatchError, PostSelectionError, RetrodictionError

logger = logging.getLogger(__name__)

CHANNEL_QUBIT = 1


@dataclass(frozen=True, eq=False)
class ABLQuery:
    pre: StateVector
    post: StateVector
    observable: ProjectiveObservable

    def __post_init__(self):
        if not self.pre.dim == self.post.dim == self.observable.dim:
            raise DimensionMismatchError(
                f"pre ({self.pre.dim}), post ({self.post.dim}) and observable "
                f"({self.observable.dim}) must share one dimension"
            )


@dataclass(frozen=True)
class RetrodictionRow:
    r_label: str
    x_bit: int
    y_bit: int
    z_bit: int

    def bit_for(self, axis: Axis) -> int:
        return {Axis.X: self.x_bit, Axis.Y: self.y_bit, Axis.Z: self.z_bit}[Axis(axis)]


def _weights(query: ABLQuery) -> np.ndarray:
    pre, post = query.pre.amplitudes, query.post.amplitudes
    return np.array([abs(np.vdot(pre, p.matrix @ post)) ** 2 for _, p in query.observable.outcomes])


def abl_distribution(query: ABLQuery) -> list[tuple[str, float]]:
    """prob(q_k) = |⟨pre|P_k|post⟩|² / Σ_i |⟨pre|P_i|post⟩|²"""
    weights = _weights(query)
    total = weights.sum()
    if total <= VANISHING_TOL:
        raise PostSelectionError(
            "Post-selected state is unreachable from the pre-selected state "
            "through any outcome of the intermediate measurement"
        )
    return [(label, float(w / total)) for label, w in zip(query.observable.labels, weights)]


def certain_value(query: ABLQuery, tol: float = COMPOSED_TOL) -> Optional[str]:
    """Label whose ABL probability is 1 within `tol`, or None."""
    for label, prob in abl_distribution(query):
        if abs(prob - 1.0) <= tol:
            return label
    return None


def forward_conditional(pre: StateVector, observable: ProjectiveObservable, post: StateVector) -> list[tuple[str, float]]:
    """P(q | f) by explicit forward branching: measure Q, then post-select on |post⟩.

    Independent of the ABL formula; the two must agree.
    """
    joint = []
    for label, proj in observable.outcomes:
        branch = proj.matrix @ pre.amplitudes
        joint.append((label, abs(np.vdot(post.amplitudes, branch)) ** 2))
    total = sum(p for _, p in joint)
    if total <= VANISHING_TOL:
        raise PostSelectionError("Post-selected outcome has probability zero")
    return [(label, float(p / total)) for label, p in joint]


@lru_cache(maxsize=1)
def retrodiction_table() -> tuple[RetrodictionRow, ...]:
    """Regenerate Alice's table: certain σx, σy, σz outcomes on the channel for each r_k."""
    pre = bell_phi_plus()
    observables = {axis: pauli_observable(axis, CHANNEL_QUBIT, 2) for axis in Axis}
    rows = []
    for label, post in zip(R_LABELS, r_basis()):
        bits = {}
        for axis, obs in observables.items():
            value = certain_value(ABLQuery(pre, post, obs))
            if value is None:
                raise RetrodictionError(f"No certain σ{axis.value.lower()} value for {label}")
            bits[axis] = int(value)
        rows.append(RetrodictionRow(label, bits[Axis.X], bits[Axis.Y], bits[Axis.Z]))
    logger.debug("Retrodiction table regenerated: %s", rows)
    return tuple(rows)
