from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator

from qkd_backend.core.protocol import MAX_SEED

StrategyName = Literal["none", "fixed-x", "fixed-y", "fixed-z", "random-xz"]
PassName = Literal["to-bob", "to-alice", "both"]


class RunConfig(BaseModel):
    pairs: int = Field(..., ge=0)
    strategy: StrategyName = "none"
    passes: PassName = "both"
    mode: Literal["immediate", "deferred"] = "immediate"
    seed: int = Field(..., ge=0)
    format: Literal["json", "csv"] = "json"

    @field_validator("seed")
    @classmethod
    def seed_fits_philox_key(cls, value: int) -> int:
        if value >= MAX_SEED:
            raise ValueError("seed must be below 2**128")
        return value


class CircuitRequest(BaseModel):
    text: str = Field(..., max_length=100_000)
    source: Optional[str] = Field(None, max_length=255)


class OracleValues(BaseModel):
    detection_rate_given_s23: Optional[float]
    s23_fraction: float
    key_agreement: Optional[float]
    r_distribution: Dict[str, float]


class SimulationReport(BaseModel):
    command: Literal["simulate"] = "simulate"
    version: str
    config: RunConfig
    n_rounds: int
    s14_indices: List[int]
    s23_indices: List[int]
    detection_count: int
    detection_indices: List[int]
    detection_rate_given_s23: float
    empty_s23: bool
    s23_fraction: float
    r_counts: Dict[str, int]
    alice_key: str
    bob_key: str
    keys_identical: bool
    key_error_rate: float
    detection_rate_sigma: float
    detection_within_4_sigma: bool
    oracle: OracleValues


class ExactReport(BaseModel):
    command: Literal["exact"] = "exact"
    version: str
    strategy: StrategyName
    passes: PassName
    detection_given_s23: Optional[float]
    s23_fraction: float
    r_distribution: Dict[str, float]
    key_agreement: Optional[float]
    confidence_target: float
    rounds_for_confidence: Optional[int]
    published_claim: float
    matches_published_claim: bool
    notes: str


class TableRow(BaseModel):
    r: str
    x: int
    y: int
    z: int


class TableReport(BaseModel):
    command: Literal["table"] = "table"
    version: str
    rows: List[TableRow]
    all_cells_certain: bool
    matches_published_table: bool


class JointRow(BaseModel):
    basis: str
    bit: int
    r: str
    immediate: float
    deferred: float


class Table1CheckRow(BaseModel):
    r: str
    basis: str
    expected_bit: int
    probability: float
    status: Literal["PASS", "FAIL"]


class DeferredReport(BaseModel):
    command: Literal["deferred"] = "deferred"
    version: str
    total_variation: float
    tolerance: float
    status: Literal["PASS", "FAIL"]
    order_deviation: float
    reduced_state_deviation: float
    immediate_sum: float
    deferred_sum: float
    joint_table: List[JointRow]
    table1_checks: List[Table1CheckRow]


class CircuitReport(BaseModel):
    command: Literal["circuit"] = "circuit"
    version: str
    source: str
    n_qubits: int
    gate_count: int
    verdict: Literal["ACCEPT", "REJECT"]
    labelling: Optional[Dict[str, int]]
    identity_labelling: bool
    max_distribution_deviation: Optional[float]


class SurveyRowModel(BaseModel):
    strategy: StrategyName
    passes: PassName
    detection_given_s23: float
    s23_fraction: float
    key_agreement: float
    rounds_for_confidence: int
    matches_published_claim: bool


class SurveyReport(BaseModel):
    command: Literal["survey"] = "survey"
    version: str
    published_claim: float
    confidence_target: float
    rows: List[SurveyRowModel]
    reproducing: List[str]
    notes: str


class HealthResponse(BaseModel):
    success: bool
    message: str
    timestamp: str
    version: str
    features: Dict[str, bool]
