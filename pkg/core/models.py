"""Pydantic result records for the measurement-theory engine."""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, validator

from config.settings import settings

U64_MAX = 2**64 - 1

# Report column names of the uncertainty certificate
MARGIN_COLUMN = "margin_ishikawa"
IDENTITY_COLUMN = "identity9_residual"


class OutcomeDistribution(BaseModel):
    """Probabilities over an ordered outcome list (Born rule output)."""

    outcomes: List[Any]
    probabilities: List[float]

    class Config:
        frozen = True

    @validator("probabilities")
    def validate_probabilities(cls, v, values):
        outcomes = values.get("outcomes")
        if outcomes is not None and len(outcomes) != len(v):
            raise ValueError("Outcome and probability lists differ in length")
        if not v:
            raise ValueError("Distribution must have at least one outcome")
        floor = -settings.tolerance.negative_probability
        lowest = min(v)
        if lowest < floor:
            raise ValueError(f"Probability {lowest:.3e} below {floor:.1e}")
        total = sum(v)
        if abs(total - 1.0) > settings.tolerance.probability:
            raise ValueError(f"Probabilities sum to {total!r}, not 1")
        return v

    def probability(self, outcome: Any) -> float:
        """Probability of a single outcome label."""
        try:
            return self.probabilities[self.outcomes.index(outcome)]
        except ValueError:
            raise KeyError(outcome) from None

    def as_dict(self) -> Dict[Any, float]:
        """Outcome label to probability mapping."""
        return dict(zip(self.outcomes, self.probabilities))

    def marginal(self, position: int) -> Dict[Any, float]:
        """Marginal over one coordinate of tuple-valued outcomes."""
        result: Dict[Any, float] = {}
        for outcome, p in zip(self.outcomes, self.probabilities):
            key = outcome[position]
            result[key] = result.get(key, 0.0) + p
        return result


class CommutationCheck(BaseModel):
    """Outcome of a pairwise effect commutation test."""

    commutes: bool
    max_residual: float = Field(..., ge=0)

    class Config:
        frozen = True


def _centred(delta: Optional[float], delta_bar: float) -> float:
    if delta is not None and delta < delta_bar - settings.tolerance.negative_probability:
        raise ValueError("Noise norm below its centred counterpart")
    return delta_bar


class NoiseReport(BaseModel):
    """Noise statistics of an approximate joint measurement in one state."""

    delta1: float
    delta2: float
    delta_bar1: float
    delta_bar2: float
    sigma1: float
    sigma2: float
    commutator_bound: float
    identity_residual: float
    same_average: bool
    same_average_violation: float = Field(default=0.0, ge=0)

    @validator("delta1", "delta2", "delta_bar1", "delta_bar2", "sigma1", "sigma2",
               "commutator_bound", "identity_residual")
    def validate_non_negative(cls, v):
        if v < -settings.tolerance.negative_probability:
            raise ValueError(f"Noise statistic {v!r} is negative")
        return v

    @validator("delta_bar1")
    def validate_centred1(cls, v, values):
        return _centred(values.get("delta1"), v)

    @validator("delta_bar2")
    def validate_centred2(cls, v, values):
        return _centred(values.get("delta2"), v)

    @property
    def epsilon(self) -> float:
        """Error of the first observable, in error/disturbance naming."""
        return self.delta1

    @property
    def eta(self) -> float:
        """Disturbance of the second observable, in error/disturbance naming."""
        return self.delta2


class CertificationReport(BaseModel):
    """Inequality margins for one scenario and one system state."""

    state_index: Optional[int] = None
    noise: NoiseReport
    margin_robertson: float
    margin_same_average: Optional[float] = None
    margin_rough: float
    cross_term1: Optional[float] = None
    cross_term2: Optional[float] = None
    expectation_residual: Optional[float] = None

    def passed(self, tolerance: Optional[float] = None) -> bool:
        """True when every reported margin clears ``-tolerance``."""
        tolerance = settings.tolerance.margin if tolerance is None else tolerance
        margins = [self.margin_robertson, self.margin_rough]
        if self.margin_same_average is not None:
            margins.append(self.margin_same_average)
        return min(margins) >= -tolerance

    def csv_row(self) -> Dict[str, Any]:
        """Flat record with the report column layout."""
        noise = self.noise
        return {
            "state_index": self.state_index,
            "delta1": noise.delta1,
            "delta2": noise.delta2,
            "delta_bar1": noise.delta_bar1,
            "delta_bar2": noise.delta_bar2,
            "sigma1": noise.sigma1,
            "sigma2": noise.sigma2,
            "bound": noise.commutator_bound,
            MARGIN_COLUMN: self.margin_same_average,
            "margin_rough": self.margin_rough,
            IDENTITY_COLUMN: noise.identity_residual,
            "same_average": noise.same_average,
        }


class ZenoRow(BaseModel):
    """One point of a repeated-measurement sweep."""

    n: int = Field(..., ge=1)
    survival_probability: float = Field(..., ge=0, le=1)
    lower_bound: float = Field(..., ge=0, le=1)
    asymptotic_estimate: float
    bound_satisfied: bool


class NoncommutativityReport(BaseModel):
    """Evidence that the Zeno sequence is not a sequential causal observable."""

    commutator_residual: float = Field(..., ge=0)
    realize_node: Optional[str] = None
    realize_residual: float = Field(..., ge=0)


class RunManifest(BaseModel):
    """Everything that determines the bytes of one CLI report."""

    subcommand: Literal["uncertainty", "zeno", "causal"]
    config: str = Field(..., min_length=1)
    seed: int = Field(default=0, ge=0, le=U64_MAX)
    samples: int = Field(default=1, ge=1)
    output_format: Literal["csv", "json"] = "csv"
    output_path: Optional[str] = None
    point: Optional[int] = Field(default=None, ge=0)
    version: str

    @validator("config")
    def validate_config(cls, v):
        v = v.strip()
        if not v:
            raise ValueError("Config reference cannot be empty")
        return v


class UncertaintySummary(BaseModel):
    """Aggregate of a certification sweep; dumped by alias into reports."""

    samples: int
    min_margin_robertson: float
    min_margin_same_average: Optional[float] = Field(default=None, alias=f"min_{MARGIN_COLUMN}")
    min_margin_rough: float
    max_identity_residual: float = Field(..., alias=f"max_{IDENTITY_COLUMN}")
    same_average: bool
    passed: bool

    class Config:
        populate_by_name = True


class ZenoSummary(BaseModel):
    """Aggregate of a Zeno sweep."""

    rows: int
    min_survival_probability: float
    all_bounds_satisfied: bool


class CausalSummary(BaseModel):
    """Aggregate of a realized tree distribution."""

    outcomes: int
    node_order: List[str]
    total_probability: float
    brute_force_residual: Optional[float] = None
    passed: bool


class ExperimentResult(BaseModel):
    """Rows, summary and exit code of one CLI run, in report order."""

    manifest: RunManifest
    columns: List[str]
    rows: List[Dict[str, Any]]
    summary: Dict[str, Any]
    steps: List[Dict[str, Any]] = Field(default_factory=list)
    exit_code: int = Field(default=0, ge=0, le=3)
