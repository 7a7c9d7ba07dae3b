import logging
from typing import Optional

from qkd_backend import __version__
from qkd_backend.core import deferred, oracle
from qkd_backend.core.abl import retrodiction_table
from qkd_backend.core.protocol import EveStrategy
from qkd_backend.errors import EmptySubsequenceError, InvariantViolation
from qkd_backend.models.schemas import (
    DeferredReport,
    ExactReport,
    JointRow,
    OracleValues,
    SurveyReport,
    SurveyRowModel,
    Table1CheckRow,
    TableReport,
    TableRow,
)

logger = logging.getLogger(__name__)

DECIMALS = 12
CONFIDENCE_TARGET = 0.99

# Alice's table as printed alongside the protocol description: (x, y, z) per r.
PUBLISHED_TABLE = {"r1": (0, 0, 0), "r2": (1, 1, 0), "r3": (0, 1, 1), "r4": (1, 0, 1)}


def _rounded(value: Optional[float]) -> Optional[float]:
    return None if value is None else round(value, DECIMALS)


def _optional(fn, strategy: EveStrategy) -> Optional[float]:
    try:
        return fn(strategy)
    except EmptySubsequenceError:
        return None


def _rounds_needed(detection: Optional[float]) -> Optional[int]:
    """S23 rounds to check before an attack is exposed with probability CONFIDENCE_TARGET."""
    if not detection:
        return None
    return oracle.rounds_for_confidence(detection, CONFIDENCE_TARGET)


class AnalysisService:
    """Exact analyses: oracle figures, Alice's table, deferred-mode equivalence."""

    def oracle_values(self, strategy: EveStrategy) -> OracleValues:
        return OracleValues(
            detection_rate_given_s23=_rounded(_optional(oracle.exact_detection_given_s23, strategy)),
            s23_fraction=_rounded(oracle.exact_s23_fraction(strategy)),
            key_agreement=_rounded(_optional(oracle.exact_key_agreement, strategy)),
            r_distribution={k: _rounded(v) for k, v in oracle.exact_r_distribution(strategy).items()},
        )

    def exact(self, strategy_name: str, passes: str) -> ExactReport:
        strategy = EveStrategy.from_names(strategy_name, passes)
        logger.info(f"Exact analysis for {strategy.name}/{strategy.passes.value}")
        values = self.oracle_values(strategy)
        detection = values.detection_rate_given_s23
        matches = detection is not None and abs(detection - oracle.PUBLISHED_DETECTION_CLAIM) <= 1e-12
        if not strategy.attacks:
            notes = "No eavesdropper: every retrodiction agrees with Bob's record."
        elif matches:
            notes = "Reproduces the published 3/8 detection probability."
        else:
            notes = (f"Published claim is 3/8 = 0.375; exact intercept-resend value under pass model "
                     f"{strategy.passes.value} is {detection:.12f}.")
        return ExactReport(
            version=__version__,
            strategy=strategy.name,
            passes=strategy.passes.value,
            detection_given_s23=detection,
            s23_fraction=values.s23_fraction,
            r_distribution=values.r_distribution,
            key_agreement=values.key_agreement,
            confidence_target=CONFIDENCE_TARGET,
            rounds_for_confidence=_rounds_needed(detection),
            published_claim=oracle.PUBLISHED_DETECTION_CLAIM,
            matches_published_claim=matches,
            notes=notes,
        )

    def table(self) -> TableReport:
        rows = [TableRow(r=row.r_label, x=row.x_bit, y=row.y_bit, z=row.z_bit) for row in retrodiction_table()]
        matches = all(PUBLISHED_TABLE[row.r] == (row.x, row.y, row.z) for row in rows)
        if not matches:
            raise InvariantViolation("Regenerated retrodiction table differs from the published one")
        return TableReport(version=__version__, rows=rows, all_cells_certain=True, matches_published_table=matches)

    def deferred(self) -> DeferredReport:
        report = deferred.equivalence_report()
        joint = [
            JointRow(basis=basis, bit=bit, r=r,
                     immediate=_rounded(report.immediate_table[(basis, bit, r)]),
                     deferred=_rounded(report.deferred_table[(basis, bit, r)]))
            for (basis, bit, r) in sorted(report.immediate_table)
        ]
        checks = [
            Table1CheckRow(r=c.r_label, basis=c.basis, expected_bit=c.expected_bit,
                           probability=_rounded(c.probability), status="PASS" if c.passed else "FAIL")
            for c in report.table1_checks
        ]
        return DeferredReport(
            version=__version__,
            total_variation=report.total_variation,
            tolerance=report.tolerance,
            status="PASS" if report.passed else "FAIL",
            order_deviation=report.order_deviation,
            reduced_state_deviation=report.reduced_state_deviation,
            immediate_sum=_rounded(sum(report.immediate_table.values())),
            deferred_sum=_rounded(sum(report.deferred_table.values())),
            joint_table=joint,
            table1_checks=checks,
        )

    def survey(self) -> SurveyReport:
        rows = [
            SurveyRowModel(
                strategy=row.strategy,
                passes=row.passes,
                detection_given_s23=_rounded(row.detection_given_s23),
                s23_fraction=_rounded(row.s23_fraction),
                key_agreement=_rounded(row.key_agreement),
                rounds_for_confidence=_rounds_needed(row.detection_given_s23),
                matches_published_claim=row.matches_published_claim,
            )
            for row in oracle.survey_pass_models()
        ]
        reproducing = [f"{row.strategy}/{row.passes}" for row in rows if row.matches_published_claim]
        notes = ("No pass model reproduces the published 3/8 under intercept-resend."
                 if not reproducing else f"3/8 reproduced by: {', '.join(reproducing)}.")
        return SurveyReport(version=__version__, published_claim=oracle.PUBLISHED_DETECTION_CLAIM,
                            confidence_target=CONFIDENCE_TARGET, rows=rows,
                            reproducing=reproducing, notes=notes)
