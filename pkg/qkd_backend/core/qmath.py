"""
Dense complex linear algebra for small qubit registers.

Qubit ordering: qubit 0 is the leftmost tensor factor and the most
significant bit of a basis index. In the two-qubit protocol states qubit 0
is Alice's ancilla A and qubit 1 the channel particle C. Spin-up is bit 0,
spin-down is bit 1.

Global phase is never removed automatically.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from functools import reduce
from math import sqrt
from typing import Iterable, Optional, Sequence

import numpy as np

from qkd_backend.errors import (
    DimensionMismatchError,
    InvalidQubitError,
    InvalidStateError,
    MalformedObservableError,
)

logger = logging.getLogger(__name__)

MAX_QUBITS = 5
ANALYTIC_TOL = 1e-12
COMPOSED_TOL = 1e-10
PRUNE_TOL = 1e-15
VANISHING_TOL = 1e-12

SQRT2_INV = 1 / sqrt(2)
PHASE_PLUS = np.exp(1j * np.pi / 4)
PHASE_MINUS = np.exp(-1j * np.pi / 4)

IDENTITY_2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * SQRT2_INV
PROJ_0 = np.array([[1, 0], [0, 0]], dtype=complex)
PROJ_1 = np.array([[0, 0], [0, 1]], dtype=complex)


class Axis(str, Enum):
    X = "X"
    Y = "Y"
    Z = "Z"


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


def _qubits_for(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise DimensionMismatchError(f"Dimension {dim} is not a power of two")
    if n > MAX_QUBITS:
        raise DimensionMismatchError(f"{n} qubits exceeds the supported maximum of {MAX_QUBITS}")
    return n


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized amplitude vector; index bit order follows the module docstring."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        _qubits_for(amps.size)
        if not np.all(np.isfinite(amps)):
            raise InvalidStateError("State amplitudes must be finite")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > ANALYTIC_TOL:
            raise InvalidStateError(f"State is not normalized (norm² = {norm!r})")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @classmethod
    def from_amplitudes(cls, amplitudes: Iterable[complex]) -> "StateVector":
        """Build a state, rescaling the amplitudes to unit norm."""
        amps = np.asarray(list(amplitudes), dtype=complex)
        norm = np.linalg.norm(amps)
        if norm <= VANISHING_TOL:
            raise InvalidStateError("Cannot normalize a zero vector")
        return cls(amps / norm)

    @classmethod
    def basis(cls, index: int, n_qubits: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    @property
    def n_qubits(self) -> int:
        return _qubits_for(self.amplitudes.size)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def inner(self, other: "StateVector") -> complex:
        """⟨self|other⟩"""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def allclose(self, other: "StateVector", atol: float = ANALYTIC_TOL) -> bool:
        return self.dim == other.dim and np.allclose(self.amplitudes, other.amplitudes, atol=atol, rtol=0)


@dataclass(frozen=True, eq=False)
class Operator:
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatchError(f"Operator must be square, got shape {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise MalformedObservableError("Operator entries must be finite")
        object.__setattr__(self, "matrix", _frozen(mat))

    @classmethod
    def identity(cls, n_qubits: int) -> "Operator":
        return cls(np.eye(1 << n_qubits, dtype=complex))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return _qubits_for(self.dim)

    def adjoint(self) -> "Operator":
        return Operator(self.matrix.conj().T)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            _check_dims(self.dim, other.dim)
            return Operator(self.matrix @ other.matrix)
        if isinstance(other, StateVector):
            return self.apply(other)
        return NotImplemented

    def apply(self, state: StateVector) -> StateVector:
        _check_dims(self.dim, state.dim)
        return StateVector(self.matrix @ state.amplitudes)

    def is_unitary(self, atol: float = COMPOSED_TOL) -> bool:
        return np.allclose(self.matrix.conj().T @ self.matrix, np.eye(self.dim), atol=atol, rtol=0)

    def is_hermitian(self, atol: float = ANALYTIC_TOL) -> bool:
        return np.allclose(self.matrix, self.matrix.conj().T, atol=atol, rtol=0)

    def allclose(self, other: "Operator", atol: float = COMPOSED_TOL) -> bool:
        return self.dim == other.dim and np.allclose(self.matrix, other.matrix, atol=atol, rtol=0)


@dataclass(frozen=True, eq=False)
class ProjectiveObservable:
    """Labelled complete set of orthogonal projectors."""

    outcomes: tuple[tuple[str, Operator], ...]

    def __post_init__(self):
        outcomes = tuple((str(label), proj) for label, proj in self.outcomes)
        if not outcomes:
            raise MalformedObservableError("Observable needs at least one outcome")
        labels = [label for label, _ in outcomes]
        if len(set(labels)) != len(labels):
            raise MalformedObservableError(f"Duplicate outcome labels: {labels}")
        dim = outcomes[0][1].dim
        total = np.zeros((dim, dim), dtype=complex)
        for label, proj in outcomes:
            _check_dims(dim, proj.dim)
            p = proj.matrix
            if not proj.is_hermitian(COMPOSED_TOL):
                raise MalformedObservableError(f"Projector {label!r} is not Hermitian")
            if not np.allclose(p @ p, p, atol=COMPOSED_TOL, rtol=0):
                raise MalformedObservableError(f"Projector {label!r} is not idempotent")
            total += p
        for i, (la, pa) in enumerate(outcomes):
            for lb, pb in outcomes[i + 1:]:
                if not np.allclose(pa.matrix @ pb.matrix, 0, atol=COMPOSED_TOL):
                    raise MalformedObservableError(f"Projectors {la!r} and {lb!r} overlap")
        if not np.allclose(total, np.eye(dim), atol=COMPOSED_TOL, rtol=0):
            raise MalformedObservableError("Projectors do not sum to the identity")
        object.__setattr__(self, "outcomes", outcomes)

    @classmethod
    def from_basis(cls, labelled_states: Sequence[tuple[str, StateVector]]) -> "ProjectiveObservable":
        """Non-degenerate observable whose eigenbasis is the given orthonormal states."""
        return cls(tuple((label, Operator(np.outer(s.amplitudes, s.amplitudes.conj())))
                         for label, s in labelled_states))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.outcomes)

    @property
    def dim(self) -> int:
        return self.outcomes[0][1].dim

    def projector(self, label: str) -> Operator:
        for name, proj in self.outcomes:
            if name == label:
                return proj
        raise MalformedObservableError(f"Unknown outcome label {label!r}")

    def padded(self, n_qubits: int) -> "ProjectiveObservable":
        """Extend to n_qubits by tensoring identities on the trailing qubits."""
        extra = n_qubits - _qubits_for(self.dim)
        if extra < 0:
            raise InvalidQubitError(f"Cannot shrink a {self.dim}-dim observable to {n_qubits} qubits")
        if extra == 0:
            return self
        eye = np.eye(1 << extra, dtype=complex)
        return ProjectiveObservable(tuple((label, Operator(np.kron(p.matrix, eye))) for label, p in self.outcomes))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatchError(f"Density matrix must be square, got shape {mat.shape}")
        _qubits_for(mat.shape[0])
        if not np.allclose(mat, mat.conj().T, atol=ANALYTIC_TOL, rtol=0):
            raise MalformedObservableError("Density matrix is not Hermitian")
        if abs(np.trace(mat).real - 1.0) > ANALYTIC_TOL:
            raise MalformedObservableError(f"Density matrix trace is {np.trace(mat).real!r}, expected 1")
        if np.linalg.eigvalsh(mat).min() < -COMPOSED_TOL:
            raise MalformedObservableError("Density matrix is not positive semidefinite")
        object.__setattr__(self, "matrix", _frozen(mat))

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityMatrix":
        return cls(np.outer(state.amplitudes, state.amplitudes.conj()))

    @classmethod
    def mixture(cls, weighted: Iterable[tuple[float, StateVector]]) -> "DensityMatrix":
        mats = [w * np.outer(s.amplitudes, s.amplitudes.conj()) for w, s in weighted]
        if not mats:
            raise DimensionMismatchError("Empty mixture")
        return cls(reduce(np.add, mats))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return _qubits_for(self.dim)

    def max_deviation(self, other: "DensityMatrix") -> float:
        _check_dims(self.dim, other.dim)
        return float(np.max(np.abs(self.matrix - other.matrix)))


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise DimensionMismatchError(f"Dimension mismatch: {a} vs {b}")


def kron(a, b):
    """Tensor product of two operators or two states; `a` is the leftmost factor."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, Operator) and isinstance(b, Operator):
        return Operator(np.kron(a.matrix, b.matrix))
    raise TypeError(f"kron needs two states or two operators, got {type(a).__name__} and {type(b).__name__}")


def lift(matrix: np.ndarray, target: int, n_qubits: int) -> Operator:
    """Embed a one-qubit matrix acting on `target` into an n-qubit operator."""
    if not 0 <= target < n_qubits:
        raise InvalidQubitError(f"Qubit {target} out of range for {n_qubits} qubits")
    factors = [matrix if q == target else IDENTITY_2 for q in range(n_qubits)]
    return Operator(reduce(np.kron, factors))


def spin_state(axis: Axis, bit: int) -> StateVector:
    """One-qubit σ_axis eigenstate: bit 0 is spin-up, bit 1 spin-down."""
    axis = Axis(axis)
    if bit not in (0, 1):
        raise ValueError(f"Spin bit must be 0 or 1, got {bit!r}")
    sign = 1 if bit == 0 else -1
    if axis is Axis.Z:
        return StateVector.basis(bit, 1)
    if axis is Axis.X:
        return StateVector([SQRT2_INV, sign * SQRT2_INV])
    return StateVector([SQRT2_INV, sign * 1j * SQRT2_INV])


def bell_phi_plus() -> StateVector:
    """(|↑↑⟩ + |↓↓⟩)/√2 on (ancilla A, channel C)."""
    return StateVector([SQRT2_INV, 0, 0, SQRT2_INV])


def r_basis() -> tuple[StateVector, ...]:
    """Eigenstates |r1⟩..|r4⟩ of Alice's observable R."""
    h = 0.5
    return (
        StateVector([SQRT2_INV, h * PHASE_PLUS, h * PHASE_MINUS, 0]),
        StateVector([SQRT2_INV, -h * PHASE_PLUS, -h * PHASE_MINUS, 0]),
        StateVector([0, h * PHASE_MINUS, h * PHASE_PLUS, SQRT2_INV]),
        StateVector([0, -h * PHASE_MINUS, -h * PHASE_PLUS, SQRT2_INV]),
    )


R_LABELS = ("r1", "r2", "r3", "r4")


def r_observable() -> ProjectiveObservable:
    return ProjectiveObservable.from_basis(list(zip(R_LABELS, r_basis())))


def pauli_observable(axis: Axis, target: int, n: int) -> ProjectiveObservable:
    """σ_axis on qubit `target` of n; outcomes "0" (↑) and "1" (↓)."""
    if not 0 <= target < n:
        raise InvalidQubitError(f"Qubit {target} out of range for {n} qubits")
    outcomes = []
    for bit in (0, 1):
        s = spin_state(axis, bit).amplitudes
        outcomes.append((str(bit), lift(np.outer(s, s.conj()), target, n)))
    return ProjectiveObservable(tuple(outcomes))


def born_probabilities(state: StateVector, obs: ProjectiveObservable) -> np.ndarray:
    _check_dims(state.dim, obs.dim)
    psi = state.amplitudes
    probs = np.array([np.vdot(psi, p.matrix @ psi).real for _, p in obs.outcomes])
    probs[probs < PRUNE_TOL] = 0.0
    return probs


def born_distribution(state: StateVector, obs: ProjectiveObservable) -> list[tuple[str, float]]:
    """Full Born-rule distribution of `obs` on `state`, without sampling."""
    probs = born_probabilities(state, obs)
    return [(label, float(p)) for label, p in zip(obs.labels, probs)]


def collapse(state: StateVector, obs: ProjectiveObservable, label: str) -> tuple[float, Optional[StateVector]]:
    """Probability of `label` and the renormalized post-measurement state (None if impossible)."""
    _check_dims(state.dim, obs.dim)
    projected = obs.projector(label).matrix @ state.amplitudes
    prob = float(np.vdot(projected, projected).real)
    if prob < PRUNE_TOL:
        return 0.0, None
    return prob, StateVector(projected / sqrt(prob))


@dataclass(frozen=True, eq=False)
class MeasurementResult:
    label: str
    probability: float
    state: StateVector


def measure(state: StateVector, obs: ProjectiveObservable, rng) -> MeasurementResult:
    """Sample one outcome by the Born rule and collapse.

    `rng` is anything with a ``random()`` method returning a float in [0, 1),
    normally a ``numpy.random.Generator``.
    """
    probs = born_probabilities(state, obs)
    total = probs.sum()
    if total < VANISHING_TOL:
        raise MalformedObservableError("Every outcome probability vanishes; observable is malformed")
    cumulative = np.cumsum(probs)
    index = int(np.searchsorted(cumulative, rng.random() * total, side="right"))
    if index >= len(probs):
        index = int(np.flatnonzero(probs)[-1])
    label = obs.labels[index]
    projected = obs.outcomes[index][1].matrix @ state.amplitudes
    collapsed = projected / np.linalg.norm(projected)
    return MeasurementResult(label, float(probs[index] / total), StateVector(collapsed))


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Trace out every qubit not in `keep`; kept qubits stay in ascending order."""
    n = rho.n_qubits
    keep = sorted(set(keep))
    if not keep:
        raise InvalidQubitError("partial_trace needs at least one qubit to keep")
    if keep[0] < 0 or keep[-1] >= n:
        raise InvalidQubitError(f"Qubits {keep} out of range for {n} qubits")
    if len(keep) == n:
        return rho
    tensor = rho.matrix.reshape([2] * (2 * n))
    rows = list(range(n))
    cols = [q if q not in keep else n + q for q in range(n)]
    out = keep + [n + q for q in keep]
    reduced = np.einsum(tensor, rows + cols, out)
    dim = 1 << len(keep)
    return DensityMatrix(reduced.reshape(dim, dim))
