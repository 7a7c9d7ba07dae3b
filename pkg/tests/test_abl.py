"""Tests for the ABL rule and the retrodiction table."""

import numpy as np
import pytest

from qkd_backend.core.abl import (
    ABLQuery,
    abl_distribution,
    certain_value,
    forward_conditional,
    retrodiction_table,
)
from qkd_backend.core.qmath import (
    Axis,
    StateVector,
    bell_phi_plus,
    pauli_observable,
    r_basis,
    spin_state,
)
from qkd_backend.errors import DimensionMismatchError, PostSelectionError
from tests.conftest import random_observable, random_state

INSTANCES = 1000


class TestRetrodictionTable:
    def test_matches_published_rows(self):
        rows = {row.r_label: (row.x_bit, row.y_bit, row.z_bit) for row in retrodiction_table()}
        assert rows == {"r1": (0, 0, 0), "r2": (1, 1, 0), "r3": (0, 1, 1), "r4": (1, 0, 1)}

    def test_every_cell_is_certain(self):
        for row, post in zip(retrodiction_table(), r_basis()):
            for axis in Axis:
                query = ABLQuery(bell_phi_plus(), post, pauli_observable(axis, 1, 2))
                probs = dict(abl_distribution(query))
                assert abs(probs[str(row.bit_for(axis))] - 1.0) < 1e-10

    def test_four_rows(self):
        assert [row.r_label for row in retrodiction_table()] == ["r1", "r2", "r3", "r4"]


class TestABLRule:
    def test_distribution_sums_to_one(self, rng):
        for _ in range(50):
            query = ABLQuery(random_state(rng), random_state(rng), random_observable(rng))
            assert abs(sum(p for _, p in abl_distribution(query)) - 1.0) < 1e-12

    def test_time_symmetry(self, rng):
        worst = 0.0
        for _ in range(INSTANCES):
            pre, post, obs = random_state(rng), random_state(rng), random_observable(rng)
            forward = abl_distribution(ABLQuery(pre, post, obs))
            backward = abl_distribution(ABLQuery(post, pre, obs))
            worst = max(worst, max(abs(a[1] - b[1]) for a, b in zip(forward, backward)))
        assert worst < 1e-10

    def test_agrees_with_forward_bayes(self, rng):
        worst = 0.0
        for _ in range(INSTANCES):
            pre, post, obs = random_state(rng), random_state(rng), random_observable(rng)
            abl = abl_distribution(ABLQuery(pre, post, obs))
            bayes = forward_conditional(pre, obs, post)
            worst = max(worst, max(abs(a[1] - b[1]) for a, b in zip(abl, bayes)))
        assert worst < 1e-10

    def test_unreachable_post_selection(self):
        query = ABLQuery(StateVector.basis(0, 2), StateVector.basis(3, 2), pauli_observable(Axis.Z, 0, 2))
        with pytest.raises(PostSelectionError):
            abl_distribution(query)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            ABLQuery(bell_phi_plus(), spin_state(Axis.Z, 0), pauli_observable(Axis.Z, 1, 2))

    def test_no_certain_value_for_unbiased_query(self):
        # Pre = post = |↑z⟩, intermediate σx: each outcome has probability 1/2
        up = spin_state(Axis.Z, 0)
        query = ABLQuery(up, up, pauli_observable(Axis.X, 0, 1))
        assert certain_value(query) is None
        assert np.allclose([p for _, p in abl_distribution(query)], [0.5, 0.5])

    def test_certain_value_when_pre_is_eigenstate(self):
        query = ABLQuery(spin_state(Axis.Z, 1), spin_state(Axis.X, 0), pauli_observable(Axis.Z, 0, 1))
        assert certain_value(query) == "1"
