"""End-to-end tests of the command-line front end."""

import json

import pytest

from qkd_backend.cli import EXIT_INVARIANT, EXIT_OK, EXIT_USAGE, main
from qkd_backend.core.circuit import CIRCUITS_DIR
from qkd_backend.errors import InvariantViolation


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestSimulate:
    def test_no_attack(self, capsys):
        code, out, _ = run(capsys, "simulate", "--pairs", "3000", "--strategy", "none", "--seed", "7")
        report = json.loads(out)
        assert code == EXIT_OK
        assert report["detection_count"] == 0
        assert report["keys_identical"] is True
        assert report["config"] == {"pairs": 3000, "strategy": "none", "passes": "both",
                                    "mode": "immediate", "seed": 7, "format": "json"}
        assert report["oracle"]["detection_rate_given_s23"] == 0.0

    def test_zero_pairs(self, capsys):
        code, out, _ = run(capsys, "simulate", "--pairs", "0", "--seed", "1")
        report = json.loads(out)
        assert code == EXIT_OK
        assert report["alice_key"] == report["bob_key"] == ""
        assert report["detection_rate_given_s23"] == 0.0
        assert report["empty_s23"] is True

    def test_byte_identical_reruns(self, capsys):
        argv = ("simulate", "--pairs", "1500", "--strategy", "random-xz", "--seed", "99")
        _, first, _ = run(capsys, *argv)
        _, second, _ = run(capsys, *argv)
        assert first == second

    def test_attack_reported_next_to_exact_value(self, capsys):
        _, out, _ = run(capsys, "simulate", "--pairs", "8000", "--strategy", "fixed-y", "--seed", "3")
        report = json.loads(out)
        assert report["oracle"]["detection_rate_given_s23"] == 0.5
        assert report["detection_within_4_sigma"] is True

    def test_deferred_mode(self, capsys):
        code, out, _ = run(capsys, "simulate", "--pairs", "500", "--mode", "deferred", "--seed", "4")
        report = json.loads(out)
        assert code == EXIT_OK
        assert report["config"]["mode"] == "deferred"
        assert report["detection_count"] == 0

    def test_csv(self, capsys):
        _, out, _ = run(capsys, "simulate", "--pairs", "50", "--seed", "2", "--format", "csv")
        lines = out.splitlines()
        assert lines[0] == "field,value"
        fields = dict(line.split(",", 1) for line in lines[1:])
        assert fields["config.seed"] == "2"
        assert fields["config.format"] == "csv"
        assert "oracle.r_distribution.r1" in fields
        assert len(fields["s14_indices"].split()) + len(fields["s23_indices"].split()) == 50

    def test_seed_is_required(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--pairs", "10"])
        assert exc.value.code == EXIT_USAGE
        assert "--seed" in capsys.readouterr().err

    def test_pairs_is_required(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--seed", "1"])
        assert exc.value.code == EXIT_USAGE
        assert "--pairs" in capsys.readouterr().err

    def test_unknown_strategy(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--pairs", "10", "--seed", "1", "--strategy", "photon-splitting"])
        assert exc.value.code == EXIT_USAGE

    def test_negative_seed(self, capsys):
        code, out, err = run(capsys, "simulate", "--pairs", "10", "--seed", "-3")
        assert code == EXIT_USAGE
        assert out == ""
        assert "seed" in err


class TestExact:
    def test_no_attack(self, capsys):
        code, out, _ = run(capsys, "exact", "--strategy", "none")
        report = json.loads(out)
        assert code == EXIT_OK
        assert report["detection_given_s23"] == 0.0
        assert report["s23_fraction"] == 0.5
        assert report["r_distribution"] == {"r1": 0.25, "r2": 0.25, "r3": 0.25, "r4": 0.25}
        assert report["rounds_for_confidence"] is None

    def test_fixed_y_compared_with_claim(self, capsys):
        _, out, _ = run(capsys, "exact", "--strategy", "fixed-y", "--passes", "both")
        report = json.loads(out)
        assert report["detection_given_s23"] == 0.5
        assert report["published_claim"] == 0.375
        assert report["matches_published_claim"] is False
        assert "0.500000000000" in report["notes"]

    def test_rounds_for_confidence(self, capsys):
        _, out, _ = run(capsys, "exact", "--strategy", "random-xz", "--passes", "both")
        report = json.loads(out)
        assert report["confidence_target"] == 0.99
        assert report["rounds_for_confidence"] == 17


def test_table(capsys):
    code, out, _ = run(capsys, "table")
    report = json.loads(out)
    assert code == EXIT_OK
    assert len(report["rows"]) == 4
    assert report["rows"][2] == {"r": "r3", "x": 0, "y": 1, "z": 1}
    assert report["matches_published_table"] is True


def test_deferred(capsys):
    code, out, _ = run(capsys, "deferred")
    report = json.loads(out)
    assert code == EXIT_OK
    assert report["status"] == "PASS"
    assert report["total_variation"] < 1e-10
    assert report["immediate_sum"] == report["deferred_sum"] == 1.0
    assert all(check["status"] == "PASS" for check in report["table1_checks"])


def test_survey(capsys):
    _, out, _ = run(capsys, "survey")
    report = json.loads(out)
    assert len(report["rows"]) == 12
    assert report["reproducing"] == []
    needed = {(row["strategy"], row["passes"]): row["rounds_for_confidence"] for row in report["rows"]}
    assert needed[("fixed-z", "to-bob")] == 35
    assert needed[("fixed-x", "both")] == 17
    assert needed[("fixed-y", "both")] == 7


class TestCircuit:
    def test_reference_file_accepted(self, capsys):
        code, out, _ = run(capsys, "circuit", str(CIRCUITS_DIR / "r_measurement.circ"))
        report = json.loads(out)
        assert code == EXIT_OK
        assert report["verdict"] == "ACCEPT"
        assert report["identity_labelling"] is True
        assert report["max_distribution_deviation"] < 1e-10

    def test_fig1_candidate_rejected(self, capsys):
        code, out, _ = run(capsys, "circuit", str(CIRCUITS_DIR / "fig1_candidate.circ"))
        report = json.loads(out)
        assert code == EXIT_OK
        assert report["verdict"] == "REJECT"
        assert report["labelling"] is None

    def test_empty_file_rejected(self, capsys, tmp_path):
        path = tmp_path / "empty.circ"
        path.write_text("")
        code, out, _ = run(capsys, "circuit", str(path))
        assert code == EXIT_OK
        assert json.loads(out)["verdict"] == "REJECT"

    def test_malformed_line(self, capsys, tmp_path):
        path = tmp_path / "bad.circ"
        path.write_text("H 0\nH 1\nSWAP 0 1\n")
        code, out, err = run(capsys, "circuit", str(path))
        assert code == EXIT_USAGE
        assert out == ""
        assert "line 3" in err

    def test_wrong_qubit_count(self, capsys, tmp_path):
        path = tmp_path / "three.circ"
        path.write_text("QUBITS 3\nH 0\n")
        code, _, err = run(capsys, "circuit", str(path))
        assert code == EXIT_USAGE
        assert "2 qubits" in err

    def test_non_ascii_qubit_index(self, capsys, tmp_path):
        path = tmp_path / "sup.circ"
        path.write_text("H 0\nH ²\n", encoding="utf-8")
        code, out, err = run(capsys, "circuit", str(path))
        assert code == EXIT_USAGE
        assert out == ""
        assert "line 2" in err

    def test_binary_file(self, capsys, tmp_path):
        path = tmp_path / "binary.circ"
        path.write_bytes(b"\xff\xfe")
        code, out, err = run(capsys, "circuit", str(path))
        assert code == EXIT_USAGE
        assert out == ""
        assert "line 1" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "circuit", str(tmp_path / "nope.circ"))
        assert code == EXIT_USAGE
        assert "nope.circ" in err


def test_invariant_violation_exit_status(capsys, monkeypatch):
    def broken(self):
        raise InvariantViolation("table drifted")

    monkeypatch.setattr("qkd_backend.services.analysis.AnalysisService.table", broken)
    code, out, err = run(capsys, "table")
    assert code == EXIT_INVARIANT
    assert out == ""
    assert "table drifted" in err
