"""Tests for the immediate-measurement protocol."""

import time

import numpy as np
import pytest

from qkd_backend.core.oracle import exact_detection_given_s23, exact_r_distribution, exact_s23_fraction
from qkd_backend.core.protocol import (
    STRATEGY_NAMES,
    EveStrategy,
    PassModel,
    Retrodiction,
    RoundRecord,
    check,
    extract_keys,
    retrodict,
    round_stream,
    run_protocol,
    run_round,
    sift,
)
from qkd_backend.core.qmath import Axis
from qkd_backend.errors import SiftingError, UnknownRoundError, UsageError
from tests.conftest import four_sigma


def record(index, basis, bit, r):
    return RoundRecord(index, basis, bit, r)


class TestEveStrategy:
    @pytest.mark.parametrize("name", ["none", "fixed-x", "fixed-y", "fixed-z", "random-xz"])
    def test_names_round_trip(self, name):
        assert EveStrategy.from_names(name, "to-bob").name == name

    def test_unknown_strategy(self):
        with pytest.raises(UsageError):
            EveStrategy.from_names("fixed-w")

    def test_unknown_pass_model(self):
        with pytest.raises(UsageError):
            EveStrategy.from_names("fixed-x", "sideways")

    def test_fixed_needs_axis(self):
        with pytest.raises(UsageError):
            EveStrategy(kind="fixed")

    def test_pass_flags(self):
        to_bob = EveStrategy.fixed(Axis.Z, PassModel.TO_BOB)
        assert to_bob.measures_to_bob and not to_bob.measures_to_alice
        assert not EveStrategy.none().measures_to_bob


class TestRoundRecord:
    def test_bob_never_uses_y(self):
        with pytest.raises(UsageError):
            record(0, Axis.Y, 0, "r1")

    def test_unknown_r(self):
        with pytest.raises(UsageError):
            record(0, Axis.X, 0, "r5")

    def test_eve_trace_not_compared(self, rng):
        strategy = EveStrategy.fixed(Axis.X)
        rec = run_round(strategy, round_stream(3, 0))
        assert rec == RoundRecord(rec.index, rec.bob_basis, rec.bob_bit, rec.alice_r)
        assert rec.eve_trace.axis is Axis.X


class TestRoundStream:
    def test_same_seed_and_index_repeat(self):
        assert round_stream(7, 11).random() == round_stream(7, 11).random()

    def test_indices_are_independent_streams(self):
        assert round_stream(7, 11).random() != round_stream(7, 12).random()

    @pytest.mark.parametrize("seed", [-1, 2**128])
    def test_seed_range(self, seed):
        with pytest.raises(UsageError):
            round_stream(seed, 0)


class TestClassicalPipeline:
    def test_sift_partitions_in_order(self):
        records = [record(0, Axis.X, 0, "r1"), record(1, Axis.Z, 0, "r2"),
                   record(2, Axis.Z, 1, "r4"), record(3, Axis.X, 0, "r3")]
        assert sift(records) == ((0, 2), (1, 3))

    def test_retrodict_only_s23(self):
        assert retrodict(record(0, Axis.X, 0, "r1")) is None
        assert retrodict(record(5, Axis.X, 1, "r2")) == Retrodiction(5, 1, 0)
        assert retrodict(record(6, Axis.Z, 1, "r3")) == Retrodiction(6, 0, 1)

    def test_check_flags_contradiction(self):
        # r2 retrodicts x=1, z=0
        records = [record(0, Axis.X, 1, "r2"), record(1, Axis.Z, 1, "r2"), record(2, Axis.X, 0, "r2")]
        events = check([retrodict(r) for r in records], records)
        assert [e.index for e in events] == [1, 2]
        assert events[0].retrodicted_bit == 0

    def test_check_unknown_round(self):
        with pytest.raises(UnknownRoundError):
            check([Retrodiction(9, 0, 0)], [record(0, Axis.X, 0, "r2")])

    def test_extract_keys(self):
        records = [record(0, Axis.X, 0, "r1"), record(1, Axis.Z, 1, "r4"), record(2, Axis.Z, 0, "r4")]
        assert extract_keys(records) == ((0, 1, 1), (0, 1, 0))

    def test_extract_keys_rejects_s23(self):
        with pytest.raises(SiftingError):
            extract_keys([record(0, Axis.X, 0, "r3")])


class TestRunProtocol:
    def test_zero_rounds(self):
        report = run_protocol(0, EveStrategy.none(), seed=1)
        assert report.n_rounds == 0
        assert report.alice_key == report.bob_key == ()
        assert report.detection_rate_given_s23 == 0.0
        assert report.empty_s23

    def test_negative_rounds(self):
        with pytest.raises(UsageError):
            run_protocol(-1, EveStrategy.none(), seed=1)

    def test_no_attack_soundness(self):
        n = 100_000
        report = run_protocol(n, EveStrategy.none(), seed=7)
        assert report.detection_count == 0
        assert report.alice_key == report.bob_key
        assert report.key_error_rate == 0.0
        assert abs(report.s23_fraction - 0.5) < four_sigma(0.5, n)
        for count in report.r_counts.values():
            assert abs(count / n - 0.25) < four_sigma(0.25, n)

    def test_same_seed_same_report(self):
        strategy = EveStrategy.random_xz()
        assert run_protocol(3000, strategy, seed=42) == run_protocol(3000, strategy, seed=42)

    def test_schedule_does_not_change_results(self):
        strategy = EveStrategy.fixed(Axis.Y, PassModel.TO_ALICE)
        sequential = run_protocol(2500, strategy, seed=99, workers=1, chunk_size=4096)
        threaded = run_protocol(2500, strategy, seed=99, workers=4, chunk_size=128)
        assert sequential == threaded

    def test_different_seed_different_rounds(self):
        a = run_protocol(500, EveStrategy.none(), seed=1)
        b = run_protocol(500, EveStrategy.none(), seed=2)
        assert a.s23_indices != b.s23_indices

    @pytest.mark.parametrize("passes", [p.value for p in PassModel])
    @pytest.mark.parametrize("name", STRATEGY_NAMES)
    def test_frequencies_match_exact_values(self, name, passes):
        n = 8000
        strategy = EveStrategy.from_names(name, passes)
        report = run_protocol(n, strategy, seed=2024)
        n23 = len(report.s23_indices)

        detection = exact_detection_given_s23(strategy)
        assert abs(report.detection_rate_given_s23 - detection) <= four_sigma(detection, n23)
        s23 = exact_s23_fraction(strategy)
        assert abs(report.s23_fraction - s23) <= four_sigma(s23, n)
        for label, p in exact_r_distribution(strategy).items():
            assert abs(report.r_counts[label] / n - p) <= four_sigma(p, n)

    def test_random_xz_both_passes_at_full_length(self):
        n = 100_000
        report = run_protocol(n, EveStrategy.random_xz(), seed=7)
        n23 = len(report.s23_indices)
        assert abs(report.detection_rate_given_s23 - 0.25) < four_sigma(0.25, n23)
        assert abs(report.s23_fraction - 0.5) < four_sigma(0.5, n)

    def test_full_length_run_is_fast(self):
        start = time.perf_counter()
        run_protocol(100_000, EveStrategy.none(), seed=7)
        assert time.perf_counter() - start < 10.0

    def test_detection_indices_are_s23(self):
        report = run_protocol(2000, EveStrategy.fixed(Axis.Y), seed=5)
        assert set(report.detection_indices) <= set(report.s23_indices)
        assert report.detection_count == len(report.detection_indices) > 0

    def test_attack_corrupts_key(self):
        report = run_protocol(5000, EveStrategy.fixed(Axis.Z), seed=8)
        assert 0.0 < report.key_error_rate < 0.5
        assert np.isclose(report.s23_fraction, len(report.s23_indices) / 5000)
