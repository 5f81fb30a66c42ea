"""Tests for the experiment coordinator."""

import json

import numpy as np
import pytest

from core.errors import ConfigError, IndexOutOfRangeError
from core.models import RunManifest
from workflows.experiment_workflow import (
    EXIT_FAILED,
    EXIT_OK,
    UNCERTAINTY_COLUMNS,
    ZENO_COLUMNS,
    ExperimentCoordinator,
    sample_rng,
)

CLASSICAL_TREE = {
    "nodes": [
        {"id": "t0", "kind": "classical", "size": 2, "observable": {"omega_size": 2, "outcomes": ["a", "b"], "effects": [[1, 0], [0, 1]]}},
        {"id": "t1", "kind": "classical", "size": 2, "observable": {"omega_size": 2, "effects": [[0.9, 0.2], [0.1, 0.8]]}},
    ],
    "edges": [{"parent": "t0", "child": "t1", "channel": {"kind": "classical", "stochastic": [[0.7, 0.3], [0.4, 0.6]]}}],
}


def manifest(subcommand: str, config: str, **overrides) -> RunManifest:
    return RunManifest(subcommand=subcommand, config=config, version="test", **overrides)


def tree_file(tmp_path, data=None) -> str:
    path = tmp_path / "tree.json"
    path.write_text(json.dumps(data or CLASSICAL_TREE), encoding="utf-8")
    return str(path)


class TestSampleRng:
    def test_same_index_same_stream(self):
        assert sample_rng(7, 3).random() == sample_rng(7, 3).random()

    def test_indices_are_independent(self):
        draws = {sample_rng(7, index).random() for index in range(5)}
        assert len(draws) == 5

    def test_master_seed_matters(self):
        assert sample_rng(1, 0).random() != sample_rng(2, 0).random()


class TestUncertaintyRun:
    @pytest.mark.asyncio
    async def test_builtin_passes(self):
        result = await ExperimentCoordinator(manifest("uncertainty", "builtin:qubit-xz", samples=8, seed=11)).run()
        assert result.exit_code == EXIT_OK
        assert result.columns == UNCERTAINTY_COLUMNS
        assert [row["state_index"] for row in result.rows] == list(range(8))
        assert result.summary["samples"] == 8
        assert result.summary["same_average"] is True
        assert result.summary["min_margin_ishikawa"] >= -1e-9
        for row in result.rows:
            assert row["delta1"] == pytest.approx(1.0)
            assert row["delta2"] == pytest.approx(1.0)

    @pytest.mark.asyncio
    async def test_a_thousand_haar_states(self):
        result = await ExperimentCoordinator(manifest("uncertainty", "builtin:qubit-xz", samples=1000, seed=1)).run()
        assert result.exit_code == EXIT_OK
        assert len(result.rows) == 1000
        assert result.summary["min_margin_ishikawa"] >= -1e-10
        assert result.summary["max_identity9_residual"] <= 1e-12

    @pytest.mark.asyncio
    async def test_deterministic_for_seed(self):
        first = await ExperimentCoordinator(manifest("uncertainty", "builtin:qubit-xz", samples=4, seed=3)).run()
        second = await ExperimentCoordinator(manifest("uncertainty", "builtin:qubit-xz", samples=4, seed=3)).run()
        assert first.rows == second.rows

    @pytest.mark.asyncio
    async def test_listed_states_come_first(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps({"builtin": "qubit-xz", "states": [[[1, 0], [0, 0]]]}), encoding="utf-8")
        result = await ExperimentCoordinator(manifest("uncertainty", str(path), samples=2)).run()
        assert result.rows[0]["margin_ishikawa"] == pytest.approx(1.0)
        assert result.rows[0]["margin_rough"] == pytest.approx(2.0)
        assert len(result.rows) == 2

    @pytest.mark.asyncio
    async def test_steps_are_recorded(self):
        coordinator = ExperimentCoordinator(manifest("uncertainty", "builtin:qubit-xz"))
        await coordinator.run()
        assert [step["step"] for step in coordinator.steps] == ["scenario", "certify"]


class TestZenoRun:
    @pytest.mark.asyncio
    async def test_builtin_sweep(self):
        result = await ExperimentCoordinator(manifest("zeno", "builtin:zeno-qubit")).run()
        assert result.exit_code == EXIT_OK
        assert result.columns == ZENO_COLUMNS
        assert [row["N"] for row in result.rows] == [1, 10, 100, 1000]
        survival = [row["survival_probability"] for row in result.rows]
        assert survival == sorted(survival)
        assert result.rows[1]["survival_probability"] == pytest.approx(0.908814, abs=5e-7)
        assert result.rows[1]["lower_bound"] == pytest.approx(0.904686, abs=5e-7)
        assert result.summary["all_bounds_satisfied"] is True


class TestCausalRun:
    @pytest.mark.asyncio
    async def test_point_state_matches_path_enumeration(self, tmp_path):
        result = await ExperimentCoordinator(manifest("causal", tree_file(tmp_path), point=0)).run()
        assert result.exit_code == EXIT_OK
        assert result.columns == ["t0", "t1", "probability"]
        probabilities = {(row["t0"], row["t1"]): row["probability"] for row in result.rows}
        assert probabilities[("a", "x1")] == pytest.approx(0.69)
        assert probabilities[("a", "x2")] == pytest.approx(0.31)
        assert probabilities[("b", "x1")] == pytest.approx(0.0, abs=1e-12)
        assert result.summary["brute_force_residual"] <= 1e-12
        assert result.summary["total_probability"] == pytest.approx(1.0)

    @pytest.mark.asyncio
    async def test_state_from_file(self, tmp_path):
        data = dict(CLASSICAL_TREE, state=[[0, 0], [1, 0]])
        result = await ExperimentCoordinator(manifest("causal", tree_file(tmp_path, data))).run()
        probabilities = {(row["t0"], row["t1"]): row["probability"] for row in result.rows}
        # row 1 of the stochastic matrix is (0.4, 0.6)
        assert probabilities[("b", "x1")] == pytest.approx(0.4 * 0.9 + 0.6 * 0.2)

    @pytest.mark.asyncio
    async def test_superposed_state_skips_path_enumeration(self, tmp_path):
        amplitude = 1 / np.sqrt(2)
        data = dict(CLASSICAL_TREE, state=[[amplitude, 0], [amplitude, 0]])
        result = await ExperimentCoordinator(manifest("causal", tree_file(tmp_path, data))).run()
        assert result.summary["brute_force_residual"] is None
        assert result.exit_code == EXIT_OK

    @pytest.mark.asyncio
    async def test_needs_a_state(self, tmp_path):
        with pytest.raises(ConfigError):
            await ExperimentCoordinator(manifest("causal", tree_file(tmp_path))).run()

    @pytest.mark.asyncio
    async def test_point_out_of_range(self, tmp_path):
        with pytest.raises(IndexOutOfRangeError):
            await ExperimentCoordinator(manifest("causal", tree_file(tmp_path), point=5)).run()


def test_exit_codes():
    assert (EXIT_OK, EXIT_FAILED) == (0, 1)
