import logging
from math import sqrt
from typing import Optional

from qkd_backend import __version__
from qkd_backend.config import Settings, get_settings
from qkd_backend.core.deferred import run_deferred_protocol
from qkd_backend.core.protocol import EveStrategy, RunReport, run_protocol
from qkd_backend.models.schemas import RunConfig, SimulationReport
from qkd_backend.services.analysis import AnalysisService

logger = logging.getLogger(__name__)

SIGMA_BAND = 4.0


def _bits(key) -> str:
    return "".join(str(bit) for bit in key)


class SimulationService:
    """Monte Carlo runs, reported next to the exact figures for the same strategy."""

    def __init__(self, settings: Optional[Settings] = None, analysis: Optional[AnalysisService] = None):
        self.settings = settings or get_settings()
        self.analysis = analysis or AnalysisService()

    def run(self, config: RunConfig) -> RunReport:
        strategy = EveStrategy.from_names(config.strategy, config.passes)
        runner = run_deferred_protocol if config.mode == "deferred" else run_protocol
        return runner(config.pairs, strategy, config.seed,
                      workers=self.settings.workers, chunk_size=self.settings.chunk_size)

    def simulate(self, config: RunConfig) -> SimulationReport:
        strategy = EveStrategy.from_names(config.strategy, config.passes)
        report = self.run(config)
        oracle_values = self.analysis.oracle_values(strategy)

        # Binomial spread of the S23 detection rate around the exact value
        expected = oracle_values.detection_rate_given_s23 or 0.0
        n23 = len(report.s23_indices)
        sigma = sqrt(expected * (1.0 - expected) / n23) if n23 else 0.0
        within = abs(report.detection_rate_given_s23 - expected) <= SIGMA_BAND * sigma + 1e-12

        if not within:
            logger.warning(f"Detection rate {report.detection_rate_given_s23:.6f} is outside "
                           f"{SIGMA_BAND:.0f} sigma of the exact value {expected:.6f}")
        if not report.alice_key and config.pairs:
            logger.warning("Run produced an empty key")

        return SimulationReport(
            version=__version__,
            config=config,
            n_rounds=report.n_rounds,
            s14_indices=list(report.s14_indices),
            s23_indices=list(report.s23_indices),
            detection_count=report.detection_count,
            detection_indices=list(report.detection_indices),
            detection_rate_given_s23=report.detection_rate_given_s23,
            empty_s23=report.empty_s23,
            s23_fraction=report.s23_fraction,
            r_counts=report.r_counts,
            alice_key=_bits(report.alice_key),
            bob_key=_bits(report.bob_key),
            keys_identical=report.alice_key == report.bob_key,
            key_error_rate=report.key_error_rate,
            detection_rate_sigma=sigma,
            detection_within_4_sigma=within,
            oracle=oracle_values,
        )
