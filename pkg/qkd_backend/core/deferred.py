"""
Deferred-measurement variant: Bob keeps his basis choice and his spin
record at the quantum level, in a choice qubit and a pointer qubit, and
measures them only after Alice's announcement.

Register layout (qubit order): ancilla A, channel C, choice, pointer.
Choice |0⟩ = c_x, |1⟩ = c_z. Pointer |0⟩ = p_up, |1⟩ = p_down.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from qkd_backend.core import oracle
from qkd_backend.core.abl import retrodiction_table
from qkd_backend.core.protocol import (
    BOB_AXES,
    EveStrategy,
    EveTrace,
    RoundRecord,
    RunReport,
    alice_observable,
    build_report,
    channel_observable,
    eve_pass,
    simulate_rounds,
)
from qkd_backend.core.qmath import (
    COMPOSED_TOL,
    HADAMARD,
    PAULI_X,
    PROJ_0,
    PROJ_1,
    PRUNE_TOL,
    R_LABELS,
    Axis,
    DensityMatrix,
    Operator,
    ProjectiveObservable,
    StateVector,
    bell_phi_plus,
    collapse,
    kron,
    lift,
    measure,
    partial_trace,
    spin_state,
)
from qkd_backend.errors import InvariantViolation

logger = logging.getLogger(__name__)

N_QUBITS = 4
ANCILLA, CHANNEL, CHOICE, POINTER = range(N_QUBITS)

CHOICE_BASIS = {"c_x": Axis.X, "c_z": Axis.Z}
POINTER_BIT = {"p_up": 0, "p_down": 1}


# The joint register is a plain 4-qubit state vector.
JointState = StateVector


@dataclass(frozen=True, eq=False)
class ChoicePointerObservables:
    choice: ProjectiveObservable
    pointer: ProjectiveObservable


@lru_cache(maxsize=1)
def choice_pointer_observables() -> ChoicePointerObservables:
    """C (measured as D after the announcement) and P on Bob's ancillas."""
    choice = ProjectiveObservable((
        ("c_x", lift(PROJ_0, CHOICE, N_QUBITS)),
        ("c_z", lift(PROJ_1, CHOICE, N_QUBITS)),
    ))
    pointer = ProjectiveObservable((
        ("p_up", lift(PROJ_0, POINTER, N_QUBITS)),
        ("p_down", lift(PROJ_1, POINTER, N_QUBITS)),
    ))
    return ChoicePointerObservables(choice, pointer)


def prepare_deferred() -> JointState:
    """Φ⁺ on (A, C), choice in (|c_x⟩ + |c_z⟩)/√2, pointer in |p_up⟩."""
    return kron(kron(bell_phi_plus(), spin_state(Axis.X, 0)), spin_state(Axis.Z, 0))


@lru_cache(maxsize=1)
def bob_entangle_unitary() -> Operator:
    """Flip the pointer iff the channel is ↓ along the axis the choice qubit selects."""
    z_record = (lift(PROJ_0, CHANNEL, N_QUBITS).matrix
                + lift(PROJ_1, CHANNEL, N_QUBITS).matrix @ lift(PAULI_X, POINTER, N_QUBITS).matrix)
    h_channel = lift(HADAMARD, CHANNEL, N_QUBITS).matrix
    x_record = h_channel @ z_record @ h_channel
    unitary = Operator(lift(PROJ_0, CHOICE, N_QUBITS).matrix @ x_record
                       + lift(PROJ_1, CHOICE, N_QUBITS).matrix @ z_record)
    if not unitary.is_unitary(COMPOSED_TOL):
        raise InvariantViolation("Bob's entangling operator is not unitary")
    return unitary


def bob_entangle(state: JointState) -> JointState:
    return bob_entangle_unitary().apply(state)


@dataclass(frozen=True, eq=False)
class PendingRound:
    """A round after Alice's R measurement; Bob's ancillas are still unmeasured."""

    index: int
    alice_r: str
    state: JointState
    eve_trace: Optional[EveTrace] = None

    def resolve(self, rng) -> RoundRecord:
        """Measure D (choice) then P (pointer) and read them as Bob's basis and bit."""
        observables = choice_pointer_observables()
        choice = measure(self.state, observables.choice, rng)
        pointer = measure(choice.state, observables.pointer, rng)
        return RoundRecord(
            index=self.index,
            bob_basis=CHOICE_BASIS[choice.label],
            bob_bit=POINTER_BIT[pointer.label],
            alice_r=self.alice_r,
            eve_trace=self.eve_trace,
        )


def run_until_announcement(rng, index: int = 0, strategy: Optional[EveStrategy] = None) -> PendingRound:
    """Prepare, entangle and let Alice measure R; no Bob-derived data exists yet."""
    strategy = strategy or EveStrategy.none()
    state = prepare_deferred()
    eve_axis = strategy.draw_axis(rng)
    state, eve_first = eve_pass(state, eve_axis if strategy.measures_to_bob else None, rng, N_QUBITS)
    state = bob_entangle(state)
    state, eve_second = eve_pass(state, eve_axis if strategy.measures_to_alice else None, rng, N_QUBITS)
    alice = measure(state, alice_observable(N_QUBITS), rng)
    trace = EveTrace(eve_axis, eve_first, eve_second) if eve_axis is not None else None
    return PendingRound(index, alice.label, alice.state, trace)


def run_deferred_round(rng, index: int = 0, strategy: Optional[EveStrategy] = None) -> RoundRecord:
    return run_until_announcement(rng, index, strategy).resolve(rng)


def run_deferred_protocol(
    n: int,
    strategy: EveStrategy,
    seed: int,
    workers: int = 1,
    chunk_size: int = 4096,
) -> RunReport:
    start = time.perf_counter()
    logger.info(f"Running {n} deferred rounds, strategy={strategy.name}, passes={strategy.passes.value}, seed={seed}")
    records = simulate_rounds(n, seed, lambda rng, i: run_deferred_round(rng, i, strategy), workers, chunk_size)
    report = build_report(records, strategy, seed)
    logger.info(f"Deferred run finished in {time.perf_counter() - start:.2f}s")
    return report


def _branches(state: StateVector, obs: ProjectiveObservable):
    for label in obs.labels:
        prob, after = collapse(state, obs, label)
        if after is not None:
            yield label, prob, after


def deferred_joint_table(order: str = "alice-first") -> dict[tuple[str, int, str], float]:
    """Exact joint distribution over (basis, bit, r) in deferred mode.

    `order` is "alice-first" (R, then D and P) or "bob-first" (D and P, then R).
    """
    if order not in ("alice-first", "bob-first"):
        raise ValueError(f"Unknown measurement order {order!r}")
    observables = choice_pointer_observables()
    r_obs = alice_observable(N_QUBITS)
    sequence = ([r_obs, observables.choice, observables.pointer] if order == "alice-first"
                else [observables.choice, observables.pointer, r_obs])

    table = {(basis.value, bit, r): 0.0 for basis in BOB_AXES for bit in (0, 1) for r in R_LABELS}
    frontier = [((), 1.0, bob_entangle(prepare_deferred()))]
    for obs in sequence:
        frontier = [(labels + (label,), p * q, after)
                    for labels, p, state in frontier
                    for label, q, after in _branches(state, obs)
                    if p * q >= PRUNE_TOL]
    for labels, p, _ in frontier:
        if order == "alice-first":
            r, c, ptr = labels
        else:
            c, ptr, r = labels
        table[(CHOICE_BASIS[c].value, POINTER_BIT[ptr], r)] += p
    return table


def total_variation(a: dict, b: dict) -> float:
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)


def immediate_post_bob_state() -> DensityMatrix:
    """Alice's (A, C) state after Bob's actual random measurement, averaged over his outcomes."""
    weighted = []
    for basis in BOB_AXES:
        for label in ("0", "1"):
            prob, after = collapse(bell_phi_plus(), channel_observable(basis), label)
            if after is not None:
                weighted.append((0.5 * prob, after))
    return DensityMatrix.mixture(weighted)


def deferred_reduced_state() -> DensityMatrix:
    """Alice's (A, C) state after Bob's entangling step, before any measurement."""
    joint = DensityMatrix.from_state(bob_entangle(prepare_deferred()))
    return partial_trace(joint, {ANCILLA, CHANNEL})


@dataclass(frozen=True)
class Table1Check:
    r_label: str
    basis: str
    expected_bit: int
    probability: float
    passed: bool


@dataclass(frozen=True)
class EquivalenceReport:
    total_variation: float
    immediate_table: dict[tuple[str, int, str], float]
    deferred_table: dict[tuple[str, int, str], float]
    order_deviation: float
    reduced_state_deviation: float
    table1_checks: tuple[Table1Check, ...]
    tolerance: float = COMPOSED_TOL

    @property
    def passed(self) -> bool:
        return (self.total_variation < self.tolerance
                and self.order_deviation < self.tolerance
                and self.reduced_state_deviation < self.tolerance
                and all(c.passed for c in self.table1_checks))


def table1_checks(table: dict[tuple[str, int, str], float]) -> tuple[Table1Check, ...]:
    """Conditional on r and Bob's basis, his bit must be Alice's retrodicted bit."""
    checks = []
    for row in retrodiction_table():
        for basis in BOB_AXES:
            expected = row.bit_for(basis)
            joint = table[(basis.value, 0, row.r_label)] + table[(basis.value, 1, row.r_label)]
            prob = table[(basis.value, expected, row.r_label)] / joint if joint > 0 else 0.0
            checks.append(Table1Check(row.r_label, basis.value, expected, prob, abs(prob - 1.0) <= COMPOSED_TOL))
    return tuple(checks)


def equivalence_report() -> EquivalenceReport:
    """Compare deferred and immediate (no attack) statistics exactly."""
    immediate = oracle.exact_joint_table(EveStrategy.none())
    deferred = deferred_joint_table("alice-first")
    report = EquivalenceReport(
        total_variation=total_variation(immediate, deferred),
        immediate_table=immediate,
        deferred_table=deferred,
        order_deviation=total_variation(deferred, deferred_joint_table("bob-first")),
        reduced_state_deviation=immediate_post_bob_state().max_deviation(deferred_reduced_state()),
        table1_checks=table1_checks(deferred),
    )
    if not report.passed:
        logger.warning(f"Deferred/immediate equivalence failed: TV={report.total_variation:.3e}")
    return report
