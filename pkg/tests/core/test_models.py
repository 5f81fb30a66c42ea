"""Tests for result records, errors and settings."""

import pytest
from pydantic import ValidationError

from config.settings import Settings, validate_required_settings
from core.errors import (
    DomainError,
    IndexOutOfRangeError,
    MeasurementTheoryError,
    NonCommutingError,
    ResidualError,
)
from core.models import (
    U64_MAX,
    CertificationReport,
    NoiseReport,
    OutcomeDistribution,
    RunManifest,
    UncertaintySummary,
    ZenoRow,
)

NOISE = dict(
    delta1=1.0,
    delta2=1.0,
    delta_bar1=1.0,
    delta_bar2=1.0,
    sigma1=1.0,
    sigma2=0.0,
    commutator_bound=0.0,
    identity_residual=0.0,
    same_average=True,
)


class TestOutcomeDistribution:
    def test_lookup(self):
        distribution = OutcomeDistribution(outcomes=[("a", 1), ("b", 1)], probabilities=[0.25, 0.75])
        assert distribution.probability(("b", 1)) == 0.75
        assert distribution.marginal(1) == {1: 1.0}
        with pytest.raises(KeyError):
            distribution.probability("c")

    def test_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            OutcomeDistribution(outcomes=["a", "b"], probabilities=[0.5, 0.6])

    def test_negative_probability(self):
        with pytest.raises(ValidationError):
            OutcomeDistribution(outcomes=["a", "b"], probabilities=[-0.1, 1.1])

    def test_frozen(self):
        distribution = OutcomeDistribution(outcomes=["a"], probabilities=[1.0])
        with pytest.raises(ValidationError):
            distribution.probabilities = [0.5]


class TestNoiseReport:
    def test_centred_norm_cannot_exceed_raw_norm(self):
        with pytest.raises(ValidationError):
            NoiseReport(**dict(NOISE, delta_bar2=1.5))

    def test_negative_statistic(self):
        with pytest.raises(ValidationError):
            NoiseReport(**dict(NOISE, sigma2=-0.1))


class TestUncertaintyReports:
    def test_csv_row_columns(self):
        report = CertificationReport(
            state_index=3, noise=NoiseReport(**NOISE), margin_robertson=0.0, margin_same_average=1.0, margin_rough=2.0
        )
        row = report.csv_row()
        assert list(row) == [
            "state_index", "delta1", "delta2", "delta_bar1", "delta_bar2", "sigma1", "sigma2", "bound",
            "margin_ishikawa", "margin_rough", "identity9_residual", "same_average",
        ]
        assert row["margin_ishikawa"] == 1.0

    def test_summary_dumps_report_names(self):
        summary = UncertaintySummary(
            samples=2,
            min_margin_robertson=0.0,
            min_margin_same_average=0.5,
            min_margin_rough=1.0,
            max_identity_residual=0.0,
            same_average=True,
            passed=True,
        )
        dumped = summary.model_dump(by_alias=True)
        assert dumped["min_margin_ishikawa"] == 0.5
        assert dumped["max_identity9_residual"] == 0.0
        assert UncertaintySummary.model_validate(dumped).min_margin_same_average == 0.5


class TestRunManifest:
    def test_seed_range(self):
        RunManifest(subcommand="zeno", config="builtin:zeno-qubit", seed=U64_MAX, version="0")
        with pytest.raises(ValidationError):
            RunManifest(subcommand="zeno", config="builtin:zeno-qubit", seed=U64_MAX + 1, version="0")

    def test_blank_config(self):
        with pytest.raises(ValidationError):
            RunManifest(subcommand="zeno", config="   ", version="0")

    def test_unknown_subcommand(self):
        with pytest.raises(ValidationError):
            RunManifest(subcommand="other", config="x", version="0")


def test_zeno_row_probability_range():
    with pytest.raises(ValidationError):
        ZenoRow(n=1, survival_probability=1.5, lower_bound=0.5, asymptotic_estimate=1.0, bound_satisfied=True)


class TestErrors:
    def test_hierarchy(self):
        error = NonCommutingError("fails", 0.25, node="t0")
        assert isinstance(error, ResidualError)
        assert isinstance(error, DomainError)
        assert isinstance(error, MeasurementTheoryError)
        assert error.residual == 0.25
        assert error.node == "t0"

    def test_index_error_compatibility(self):
        assert issubclass(IndexOutOfRangeError, IndexError)


class TestSettings:
    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("MT_HBAR", "0.5")
        monkeypatch.setenv("MT_ZENO_KRAUS_CAP", "16")
        current = Settings()
        assert current.physics.hbar == 0.5
        assert current.zeno.kraus_cap == 16

    def test_hbar_must_be_positive(self, monkeypatch):
        monkeypatch.setenv("MT_HBAR", "0")
        with pytest.raises(ValidationError):
            Settings()

    def test_inconsistent_tolerances(self, monkeypatch):
        monkeypatch.setenv("MT_TOL_NEGATIVE_PROBABILITY", "1e-3")
        with pytest.raises(ValueError):
            validate_required_settings(Settings())

    def test_unknown_log_level(self, monkeypatch):
        monkeypatch.setenv("MT_LOG_LOG_LEVEL", "LOUD")
        with pytest.raises(ValueError):
            validate_required_settings(Settings())
