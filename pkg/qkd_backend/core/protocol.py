"""
Immediate-measurement protocol: Alice, Bob and an optional intercept-resend
Eve acting on a stream of Bell pairs, followed by sifting, public
retrodiction, the eavesdropping check and raw-key extraction.

Every round draws from its own counter-based stream (`round_stream`), so a
run is bit-identical however its rounds are scheduled.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from qkd_backend.core.abl import CHANNEL_QUBIT, RetrodictionRow, retrodiction_table
from qkd_backend.core.qmath import (
    R_LABELS,
    Axis,
    ProjectiveObservable,
    StateVector,
    bell_phi_plus,
    measure,
    pauli_observable,
    r_observable,
)
from qkd_backend.errors import SiftingError, UnknownRoundError, UsageError

logger = logging.getLogger(__name__)

BOB_AXES = (Axis.X, Axis.Z)
S14_LABELS = frozenset({"r1", "r4"})
S23_LABELS = frozenset({"r2", "r3"})
KEY_BITS = {"r1": 0, "r4": 1}
MAX_SEED = 1 << 128


class AttackKind(str, Enum):
    NONE = "none"
    FIXED_AXIS = "fixed"
    RANDOM_XZ = "random-xz"


class PassModel(str, Enum):
    TO_BOB = "to-bob"
    TO_ALICE = "to-alice"
    BOTH = "both"


STRATEGY_NAMES = ("none", "fixed-x", "fixed-y", "fixed-z", "random-xz")


@dataclass(frozen=True)
class EveStrategy:
    kind: AttackKind = AttackKind.NONE
    axis: Optional[Axis] = None
    passes: PassModel = PassModel.BOTH

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        object.__setattr__(self, "passes", PassModel(self.passes))
        if self.kind is AttackKind.FIXED_AXIS:
            if self.axis is None:
                raise UsageError("A fixed-axis attack needs an axis")
            object.__setattr__(self, "axis", Axis(self.axis))
        elif self.axis is not None:
            raise UsageError(f"Attack kind {self.kind.value!r} takes no axis")

    @classmethod
    def none(cls) -> "EveStrategy":
        return cls()

    @classmethod
    def fixed(cls, axis: Axis, passes: PassModel = PassModel.BOTH) -> "EveStrategy":
        return cls(AttackKind.FIXED_AXIS, Axis(axis), PassModel(passes))

    @classmethod
    def random_xz(cls, passes: PassModel = PassModel.BOTH) -> "EveStrategy":
        return cls(AttackKind.RANDOM_XZ, None, PassModel(passes))

    @classmethod
    def from_names(cls, strategy: str, passes: str = "both") -> "EveStrategy":
        """Parse the command-line spelling, e.g. ("fixed-y", "to-bob")."""
        try:
            pass_model = PassModel(passes)
        except ValueError:
            raise UsageError(f"Unknown pass model {passes!r}; expected one of "
                             f"{[p.value for p in PassModel]}") from None
        if strategy == "none":
            return cls(AttackKind.NONE, None, pass_model)
        if strategy == "random-xz":
            return cls.random_xz(pass_model)
        if strategy in ("fixed-x", "fixed-y", "fixed-z"):
            return cls.fixed(Axis(strategy[-1].upper()), pass_model)
        raise UsageError(f"Unknown strategy {strategy!r}; expected one of {list(STRATEGY_NAMES)}")

    @property
    def name(self) -> str:
        if self.kind is AttackKind.FIXED_AXIS:
            return f"fixed-{self.axis.value.lower()}"
        return self.kind.value

    @property
    def attacks(self) -> bool:
        return self.kind is not AttackKind.NONE

    @property
    def measures_to_bob(self) -> bool:
        return self.attacks and self.passes in (PassModel.TO_BOB, PassModel.BOTH)

    @property
    def measures_to_alice(self) -> bool:
        return self.attacks and self.passes in (PassModel.TO_ALICE, PassModel.BOTH)

    def axis_choices(self) -> tuple[tuple[Optional[Axis], float], ...]:
        """Eve's per-particle axis distribution."""
        if self.kind is AttackKind.NONE:
            return ((None, 1.0),)
        if self.kind is AttackKind.FIXED_AXIS:
            return ((self.axis, 1.0),)
        return ((Axis.X, 0.5), (Axis.Z, 0.5))

    def draw_axis(self, rng) -> Optional[Axis]:
        if self.kind is AttackKind.RANDOM_XZ:
            return Axis.X if rng.random() < 0.5 else Axis.Z
        return self.axis


@dataclass(frozen=True)
class EveTrace:
    """What Eve did to one particle; analysis only, never read by Alice or Bob."""

    axis: Axis
    to_bob: Optional[int] = None
    to_alice: Optional[int] = None


@dataclass(frozen=True)
class RoundRecord:
    index: int
    bob_basis: Axis
    bob_bit: int
    alice_r: str
    eve_trace: Optional[EveTrace] = field(default=None, compare=False)

    def __post_init__(self):
        if self.bob_basis not in BOB_AXES:
            raise UsageError(f"Bob measures only σx or σz, got {self.bob_basis!r}")
        if self.bob_bit not in (0, 1):
            raise UsageError(f"Bob's bit must be 0 or 1, got {self.bob_bit!r}")
        if self.alice_r not in R_LABELS:
            raise UsageError(f"Unknown R outcome {self.alice_r!r}")


@dataclass(frozen=True)
class Retrodiction:
    index: int
    x_bit: int
    z_bit: int

    def bit_for(self, axis: Axis) -> int:
        return self.x_bit if Axis(axis) is Axis.X else self.z_bit


@dataclass(frozen=True)
class DetectionEvent:
    index: int
    bob_basis: Axis
    bob_bit: int
    retrodicted_bit: int


@dataclass(frozen=True)
class RunReport:
    n_rounds: int
    seed: int
    strategy: str
    passes: str
    s14_indices: tuple[int, ...]
    s23_indices: tuple[int, ...]
    detection_count: int
    detection_indices: tuple[int, ...]
    detection_rate_given_s23: float
    empty_s23: bool
    s23_fraction: float
    r_counts: dict[str, int]
    alice_key: tuple[int, ...]
    bob_key: tuple[int, ...]
    key_error_rate: float


@lru_cache(maxsize=None)
def channel_observable(axis: Axis, n_qubits: int = 2) -> ProjectiveObservable:
    return pauli_observable(Axis(axis), CHANNEL_QUBIT, n_qubits)


@lru_cache(maxsize=None)
def alice_observable(n_qubits: int = 2) -> ProjectiveObservable:
    return r_observable().padded(n_qubits)


@lru_cache(maxsize=1)
def _retrodictions_by_label() -> dict[str, RetrodictionRow]:
    return {row.r_label: row for row in retrodiction_table()}


def round_stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for round `index`: Philox keyed by the seed, index in counter word 1."""
    if not 0 <= seed < MAX_SEED:
        raise UsageError(f"Seed must be an unsigned integer below 2**128, got {seed!r}")
    if index < 0:
        raise UsageError(f"Round index must be non-negative, got {index!r}")
    return np.random.Generator(np.random.Philox(key=seed, counter=index << 64))


def eve_pass(state: StateVector, axis: Optional[Axis], rng, n_qubits: int = 2) -> tuple[StateVector, Optional[int]]:
    """Intercept-resend on the channel qubit: measure σ_axis, forward the eigenstate."""
    if axis is None:
        return state, None
    result = measure(state, channel_observable(axis, n_qubits), rng)
    return result.state, int(result.label)


def run_round(strategy: EveStrategy, rng, index: int = 0) -> RoundRecord:
    """One channel-particle round trip.

    Draw order: Eve's axis (random-xz only), Eve to-Bob outcome, Bob's
    basis, Bob's outcome, Eve to-Alice outcome, Alice's R outcome.
    """
    state = bell_phi_plus()
    eve_axis = strategy.draw_axis(rng)

    state, eve_first = eve_pass(state, eve_axis if strategy.measures_to_bob else None, rng)

    bob_basis = Axis.X if rng.random() < 0.5 else Axis.Z
    bob = measure(state, channel_observable(bob_basis), rng)
    state = bob.state

    state, eve_second = eve_pass(state, eve_axis if strategy.measures_to_alice else None, rng)

    alice = measure(state, alice_observable(), rng)

    trace = EveTrace(eve_axis, eve_first, eve_second) if eve_axis is not None else None
    return RoundRecord(index, bob_basis, int(bob.label), alice.label, trace)


def sift(records: Iterable[RoundRecord]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split round indices into (S14, S23) by Alice's R outcome, keeping order."""
    s14, s23 = [], []
    for record in records:
        (s14 if record.alice_r in S14_LABELS else s23).append(record.index)
    return tuple(s14), tuple(s23)


def retrodict(record: RoundRecord) -> Optional[Retrodiction]:
    """Alice's public statement for an S23 round; None for S14 rounds."""
    if record.alice_r not in S23_LABELS:
        return None
    row = _retrodictions_by_label()[record.alice_r]
    return Retrodiction(record.index, row.x_bit, row.z_bit)


def check(retrodictions: Iterable[Retrodiction], records: Iterable[RoundRecord]) -> list[DetectionEvent]:
    """Compare each retrodiction with Bob's record for the basis he actually used."""
    by_index = {record.index: record for record in records}
    events = []
    for retro in retrodictions:
        record = by_index.get(retro.index)
        if record is None:
            raise UnknownRoundError(f"Retrodiction for round {retro.index} has no matching record")
        expected = retro.bit_for(record.bob_basis)
        if expected != record.bob_bit:
            events.append(DetectionEvent(retro.index, record.bob_basis, record.bob_bit, expected))
    return events


def extract_keys(records: Iterable[RoundRecord]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Raw keys from S14 rounds: Alice reads r1 → 0, r4 → 1; Bob keeps his bit."""
    alice_key, bob_key = [], []
    for record in records:
        if record.alice_r not in S14_LABELS:
            raise SiftingError(f"Round {record.index} has outcome {record.alice_r}, not in S14")
        alice_key.append(KEY_BITS[record.alice_r])
        bob_key.append(record.bob_bit)
    return tuple(alice_key), tuple(bob_key)


def _chunks(n: int, size: int) -> list[range]:
    return [range(start, min(start + size, n)) for start in range(0, n, size)]


def simulate_rounds(
    n: int,
    seed: int,
    round_fn: Callable[[object, int], RoundRecord],
    workers: int = 1,
    chunk_size: int = 4096,
) -> list[RoundRecord]:
    """Run `round_fn(rng, index)` for every index, assembling results by index."""
    if n < 0:
        raise UsageError(f"Round count must be non-negative, got {n}")
    round_stream(seed, 0)

    def run_chunk(indices: range) -> list[RoundRecord]:
        out = [round_fn(round_stream(seed, i), i) for i in indices]
        logger.debug("Simulated rounds %d..%d", indices.start, indices.stop - 1)
        return out

    chunks = _chunks(n, max(1, chunk_size))
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_chunk, chunks))
    else:
        results = [run_chunk(c) for c in chunks]
    return [record for chunk in results for record in chunk]


def build_report(records: Sequence[RoundRecord], strategy: EveStrategy, seed: int) -> RunReport:
    """Sift, announce, check and extract keys for a finished list of rounds."""
    s14, s23 = sift(records)
    retrodictions = [r for r in (retrodict(rec) for rec in records) if r is not None]
    events = check(retrodictions, records)
    s14_set = set(s14)
    alice_key, bob_key = extract_keys(rec for rec in records if rec.index in s14_set)

    n = len(records)
    r_counts = {label: 0 for label in R_LABELS}
    for record in records:
        r_counts[record.alice_r] += 1
    mismatches = sum(a != b for a, b in zip(alice_key, bob_key))

    if not s23:
        logger.warning("Run has an empty S23 subsequence; detection rate reported as 0")
    return RunReport(
        n_rounds=n,
        seed=seed,
        strategy=strategy.name,
        passes=strategy.passes.value,
        s14_indices=s14,
        s23_indices=s23,
        detection_count=len(events),
        detection_indices=tuple(e.index for e in events),
        detection_rate_given_s23=len(events) / len(s23) if s23 else 0.0,
        empty_s23=not s23,
        s23_fraction=len(s23) / n if n else 0.0,
        r_counts=r_counts,
        alice_key=alice_key,
        bob_key=bob_key,
        key_error_rate=mismatches / len(alice_key) if alice_key else 0.0,
    )


def run_protocol(
    n: int,
    strategy: EveStrategy,
    seed: int,
    workers: int = 1,
    chunk_size: int = 4096,
) -> RunReport:
    """Simulate n rounds and aggregate them into a RunReport."""
    start = time.perf_counter()
    logger.info(f"Running {n} immediate rounds, strategy={strategy.name}, passes={strategy.passes.value}, seed={seed}")
    records = simulate_rounds(n, seed, lambda rng, i: run_round(strategy, rng, i), workers, chunk_size)
    report = build_report(records, strategy, seed)
    logger.info(f"Run finished in {time.perf_counter() - start:.2f}s: "
                f"{report.detection_count} detections in {len(report.s23_indices)} S23 rounds")
    return report
