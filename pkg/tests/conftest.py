"""Shared fixtures: seeded generators and random states/observables."""

import numpy as np
import pytest

from qkd_backend.core.qmath import ProjectiveObservable, StateVector


def random_state(rng: np.random.Generator, n_qubits: int = 2) -> StateVector:
    dim = 1 << n_qubits
    return StateVector.from_amplitudes(rng.normal(size=dim) + 1j * rng.normal(size=dim))


def random_observable(rng: np.random.Generator, n_qubits: int = 2) -> ProjectiveObservable:
    """Non-degenerate observable with a random orthonormal eigenbasis."""
    dim = 1 << n_qubits
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    return ProjectiveObservable.from_basis([(f"q{k}", StateVector(q[:, k])) for k in range(dim)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def state_factory(rng):
    return lambda n_qubits=2: random_state(rng, n_qubits)


@pytest.fixture
def observable_factory(rng):
    return lambda n_qubits=2: random_observable(rng, n_qubits)


def four_sigma(p: float, n: int) -> float:
    """Width of a 4σ binomial band for a rate estimated from n trials."""
    return 4.0 * np.sqrt(p * (1.0 - p) / n) if n else 0.0
