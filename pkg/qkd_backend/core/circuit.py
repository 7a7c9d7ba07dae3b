"""
Gate-level circuits and a checker for circuits that realise Alice's R
measurement as "rotate, then measure both qubits in the computational
basis".

Text format, one gate per line (angles in radians, `#` starts a comment):

    QUBITS 2
    H q
    P q theta
    CP q1 q2 theta
    CNOT control target

ControlledPhase(θ) multiplies the |11⟩ component of (control, target) by
e^{iθ}; Phase(θ) multiplies the |1⟩ component of its target.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import reduce
from pathlib import Path
from typing import Optional, Union

import numpy as np

from qkd_backend.core.qmath import (
    HADAMARD,
    PAULI_X,
    PROJ_0,
    PROJ_1,
    R_LABELS,
    Operator,
    StateVector,
    born_distribution,
    lift,
    r_basis,
    r_observable,
)
from qkd_backend.errors import CircuitParseError, CircuitShapeError, InvalidQubitError

logger = logging.getLogger(__name__)

LABELLING_TOL = 1e-8
CIRCUITS_DIR = Path(__file__).resolve().parents[2] / "circuits"


@dataclass(frozen=True)
class Hadamard:
    target: int

    def qubits(self) -> tuple[int, ...]:
        return (self.target,)

    def operator(self, n: int) -> Operator:
        return lift(HADAMARD, self.target, n)

    def to_line(self) -> str:
        return f"H {self.target}"


@dataclass(frozen=True)
class Phase:
    target: int
    angle: float

    def qubits(self) -> tuple[int, ...]:
        return (self.target,)

    def operator(self, n: int) -> Operator:
        return lift(np.diag([1.0, np.exp(1j * self.angle)]), self.target, n)

    def to_line(self) -> str:
        return f"P {self.target} {self.angle!r}"


@dataclass(frozen=True)
class ControlledPhase:
    control: int
    target: int
    angle: float

    def qubits(self) -> tuple[int, ...]:
        return (self.control, self.target)

    def operator(self, n: int) -> Operator:
        phase = np.diag([1.0, np.exp(1j * self.angle)])
        return Operator(lift(PROJ_0, self.control, n).matrix
                        + lift(PROJ_1, self.control, n).matrix @ lift(phase, self.target, n).matrix)

    def to_line(self) -> str:
        return f"CP {self.control} {self.target} {self.angle!r}"


@dataclass(frozen=True)
class ControlledNot:
    control: int
    target: int

    def qubits(self) -> tuple[int, ...]:
        return (self.control, self.target)

    def operator(self, n: int) -> Operator:
        return Operator(lift(PROJ_0, self.control, n).matrix
                        + lift(PROJ_1, self.control, n).matrix @ lift(PAULI_X, self.target, n).matrix)

    def to_line(self) -> str:
        return f"CNOT {self.control} {self.target}"


Gate = Union[Hadamard, Phase, ControlledPhase, ControlledNot]


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.n_qubits < 1:
            raise CircuitShapeError(f"Circuit needs at least one qubit, got {self.n_qubits}")
        for gate in self.gates:
            _validate_gate(gate, self.n_qubits)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise CircuitShapeError(f"Cannot concatenate {self.n_qubits}- and {other.n_qubits}-qubit circuits")
        return Circuit(self.n_qubits, self.gates + other.gates)


def _validate_gate(gate: Gate, n: int) -> None:
    qubits = gate.qubits()
    for q in qubits:
        if not 0 <= q < n:
            raise InvalidQubitError(f"{gate.to_line()!r}: qubit {q} out of range for {n} qubits")
    if len(set(qubits)) != len(qubits):
        raise InvalidQubitError(f"{gate.to_line()!r}: control and target must differ")


def unitary_of(circuit: Circuit) -> Operator:
    """Product of gate unitaries in application order (first gate rightmost)."""
    dim = 1 << circuit.n_qubits
    matrix = reduce(lambda acc, gate: gate.operator(circuit.n_qubits).matrix @ acc,
                    circuit.gates, np.eye(dim, dtype=complex))
    return Operator(matrix)


def reference_r_rotation() -> Operator:
    """Σ_k |b_k⟩⟨r_k|: maps |r_k⟩ to the k-th computational basis state."""
    return Operator(np.array([r.amplitudes.conj() for r in r_basis()]))


def reference_r_circuit() -> Circuit:
    """Gate sequence equal to `reference_r_rotation()` (qubit 0 = ancilla, 1 = channel)."""
    return Circuit(2, (
        ControlledNot(1, 0),
        Hadamard(1),
        ControlledPhase(0, 1, -np.pi / 2),
        Hadamard(1),
        ControlledNot(1, 0),
        ControlledNot(0, 1),
        Hadamard(1),
    ))


def fig1_candidate() -> Circuit:
    """Transcription of the published figure's gates after Bob's box.

    Top wire is the channel (qubit 1), bottom wire the ancilla (qubit 0).
    The lone angle dots are read as single-qubit phases; the vertical
    line joining the top wire to the bottom H box has no gate of its own.
    """
    return Circuit(2, (
        Phase(1, np.pi),
        ControlledNot(0, 1),
        ControlledPhase(1, 0, np.pi / 2),
        Hadamard(0),
        ControlledPhase(1, 0, np.pi / 2),
        Phase(1, -3 * np.pi / 4),
        Hadamard(1),
    ))


def implements_r(circuit: Circuit) -> Optional[dict[str, int]]:
    """The labelling r_k → computational outcome if the circuit rotates R onto the computational basis."""
    if circuit.n_qubits != 2:
        return None
    unitary = unitary_of(circuit)
    labelling = {}
    for label, r in zip(R_LABELS, r_basis()):
        image = unitary.matrix @ r.amplitudes
        weights = np.abs(image)
        index = int(np.argmax(weights))
        if abs(weights[index] - 1.0) > LABELLING_TOL:
            return None
        labelling[label] = index
    if len(set(labelling.values())) != len(labelling):
        return None
    return labelling


def distribution_agreement(circuit: Circuit, labelling: dict[str, int], state: StateVector) -> float:
    """Max |P_R(r_k) − P_comp(labelling[r_k])| after applying the circuit to `state`."""
    direct = dict(born_distribution(state, r_observable()))
    rotated = unitary_of(circuit).apply(state).amplitudes
    computational = np.abs(rotated) ** 2
    return float(max(abs(direct[label] - computational[index]) for label, index in labelling.items()))


def _parse_angle(token: str, line_number: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise CircuitParseError(line_number, f"angle {token!r} is not a decimal number") from None
    if not np.isfinite(value):
        raise CircuitParseError(line_number, f"angle {token!r} is not finite")
    return value


def _parse_qubit(token: str, line_number: int) -> int:
    if not (token.isascii() and token.isdecimal()):
        raise CircuitParseError(line_number, f"qubit index {token!r} is not a non-negative integer")
    return int(token)


_ARITY = {"H": 1, "P": 2, "CP": 3, "CNOT": 2, "QUBITS": 1}


def parse_circuit(text: str, default_qubits: int = 2) -> Circuit:
    n_qubits = default_qubits
    gates: list[tuple[int, Gate]] = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        op, *args = line.split()
        op = op.upper()
        if op not in _ARITY:
            raise CircuitParseError(line_number, f"unknown gate {op!r}")
        if len(args) != _ARITY[op]:
            raise CircuitParseError(line_number, f"{op} takes {_ARITY[op]} argument(s), got {len(args)}")
        if op == "QUBITS":
            if gates:
                raise CircuitParseError(line_number, "QUBITS must precede every gate")
            n_qubits = _parse_qubit(args[0], line_number)
            continue
        if op == "H":
            gate = Hadamard(_parse_qubit(args[0], line_number))
        elif op == "P":
            gate = Phase(_parse_qubit(args[0], line_number), _parse_angle(args[1], line_number))
        elif op == "CP":
            gate = ControlledPhase(_parse_qubit(args[0], line_number), _parse_qubit(args[1], line_number),
                                   _parse_angle(args[2], line_number))
        else:
            gate = ControlledNot(_parse_qubit(args[0], line_number), _parse_qubit(args[1], line_number))
        gates.append((line_number, gate))

    if n_qubits < 1:
        raise CircuitShapeError(f"Circuit needs at least one qubit, got {n_qubits}")
    for line_number, gate in gates:
        try:
            _validate_gate(gate, n_qubits)
        except InvalidQubitError as e:
            raise CircuitParseError(line_number, str(e)) from None
    return Circuit(n_qubits, tuple(g for _, g in gates))


def format_circuit(circuit: Circuit) -> str:
    lines = [f"QUBITS {circuit.n_qubits}"] + [gate.to_line() for gate in circuit.gates]
    return "\n".join(lines) + "\n"


def load_circuit(path: Union[str, Path]) -> Circuit:
    path = Path(path)
    logger.info(f"Loading circuit from {path}")
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise CircuitParseError(raw.count(b"\n", 0, e.start) + 1, "file is not valid UTF-8 text") from None
    return parse_circuit(text)
