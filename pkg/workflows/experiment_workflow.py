"""Experiment coordination: certification sweeps, Zeno scans and tree realization."""

import asyncio
import logging
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

import numpy as np

from config.settings import Settings, settings
from core.errors import ConfigError
from core.models import (
    IDENTITY_COLUMN,
    MARGIN_COLUMN,
    CausalSummary,
    CertificationReport,
    ExperimentResult,
    RunManifest,
    UncertaintySummary,
    ZenoRow,
    ZenoSummary,
)
from tools.causality import brute_force_tree_distribution, realize
from tools.measurement import State, born_distribution
from tools.operators import haar_random_state
from tools.serialization import load_scenario, load_tree, load_zeno
from tools.uncertainty import certify
from tools.zeno import zeno_row

logger = logging.getLogger(__name__)

T = TypeVar("T")

UNCERTAINTY_COLUMNS = [
    "state_index",
    "delta1",
    "delta2",
    "delta_bar1",
    "delta_bar2",
    "sigma1",
    "sigma2",
    "bound",
    MARGIN_COLUMN,
    "margin_rough",
    IDENTITY_COLUMN,
    "same_average",
]
ZENO_COLUMNS = ["N", "survival_probability", "lower_bound", "bound_satisfied"]

EXIT_OK = 0
EXIT_FAILED = 1


def sample_rng(master_seed: int, index: int) -> np.random.Generator:
    """Generator for sample ``index``; independent of evaluation order."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


class ExperimentCoordinator:
    """Runs one CLI subcommand as concurrent per-point tasks with ordered results."""

    def __init__(self, manifest: RunManifest, current: Optional[Settings] = None):
        self.manifest = manifest
        self.settings = current or settings
        self.steps: List[Dict[str, Any]] = []

    async def run(self) -> ExperimentResult:
        """Dispatch on the manifest subcommand."""
        runners = {
            "uncertainty": self.run_uncertainty,
            "zeno": self.run_zeno,
            "causal": self.run_causal,
        }
        return await runners[self.manifest.subcommand]()

    def _record(self, step: str, message: str, **metadata: Any) -> None:
        logger.info("%s: %s", step, message)
        self.steps.append({"step": step, "message": message, "metadata": metadata})

    async def _evaluate(self, func: Callable[..., T], calls: Sequence[tuple]) -> List[T]:
        """Evaluate ``func`` over ``calls`` in worker threads, results in call order."""
        return list(await asyncio.gather(*(asyncio.to_thread(func, *args) for args in calls)))

    def _result(self, columns: List[str], rows: List[Dict[str, Any]], summary: Any, passed: bool) -> ExperimentResult:
        return ExperimentResult(
            manifest=self.manifest,
            columns=columns,
            rows=rows,
            summary=summary.model_dump(by_alias=True),
            steps=self.steps,
            exit_code=EXIT_OK if passed else EXIT_FAILED,
        )

    async def run_uncertainty(self) -> ExperimentResult:
        """Certify the scenario at listed states, then at Haar-random ones."""
        loaded = load_scenario(self.manifest.config, hbar=self.settings.physics.hbar)
        scenario = loaded.scenario
        scenario.validate()
        self._record(
            "scenario",
            f"Loaded {scenario.dim_h}x{scenario.dim_k} scenario",
            listed_states=len(loaded.states),
        )

        calls = []
        for index in range(self.manifest.samples):
            if index < len(loaded.states):
                u = loaded.states[index]
            else:
                u = haar_random_state(scenario.dim_h, sample_rng(self.manifest.seed, index))
            calls.append((scenario, u, index))
        reports: List[CertificationReport] = await self._evaluate(certify, calls)

        tolerance = self.settings.tolerance.margin
        same_average = [r.margin_same_average for r in reports if r.margin_same_average is not None]
        passed = all(report.passed(tolerance) for report in reports)
        summary = UncertaintySummary(
            samples=len(reports),
            min_margin_robertson=min(r.margin_robertson for r in reports),
            min_margin_same_average=min(same_average) if same_average else None,
            min_margin_rough=min(r.margin_rough for r in reports),
            max_identity_residual=max(r.noise.identity_residual for r in reports),
            same_average=all(r.noise.same_average for r in reports),
            passed=passed,
        )
        self._record("certify", f"Certified {len(reports)} states", passed=passed)

        rows = []
        for report in reports:
            row = report.csv_row()
            row["margin_robertson"] = report.margin_robertson
            rows.append(row)
        return self._result(UNCERTAINTY_COLUMNS, rows, summary, passed)

    async def run_zeno(self) -> ExperimentResult:
        """One survival row per N of the sweep."""
        sweep = load_zeno(self.manifest.config, hbar=self.settings.physics.hbar)
        self._record("zeno", f"Scanning {len(sweep.n_values)} values of N", dim=sweep.config.dim)

        tolerance = self.settings.tolerance.margin
        calls = [(sweep.config.with_n(n), tolerance) for n in sweep.n_values]
        zeno_rows: List[ZenoRow] = await self._evaluate(zeno_row, calls)

        passed = all(row.bound_satisfied for row in zeno_rows)
        summary = ZenoSummary(
            rows=len(zeno_rows),
            min_survival_probability=min(row.survival_probability for row in zeno_rows),
            all_bounds_satisfied=passed,
        )
        rows = [
            {
                "N": row.n,
                "survival_probability": row.survival_probability,
                "lower_bound": row.lower_bound,
                "bound_satisfied": row.bound_satisfied,
                "asymptotic_estimate": row.asymptotic_estimate,
            }
            for row in zeno_rows
        ]
        return self._result(ZENO_COLUMNS, rows, summary, passed)

    async def run_causal(self) -> ExperimentResult:
        """Root distribution of a realized tree; classical trees are cross-checked by path enumeration."""
        loaded = load_tree(self.manifest.config)
        tree = loaded.tree
        root_size = tree.node(tree.root).space.size

        if self.manifest.point is not None:
            state = State.point(root_size, self.manifest.point)
        elif loaded.state is not None:
            state = State.pure(loaded.state)
        else:
            raise ConfigError("Causal run needs a 'state' in the tree file or --point")

        order = tree.depth_first_order()
        realized = await asyncio.to_thread(realize, tree)
        distribution = born_distribution(realized, state)
        self._record("realize", f"Realized {len(order)} nodes", outcomes=len(realized.outcomes))

        residual = None
        passed = True
        if tree.is_classical and state.point_index() is not None:
            reference = brute_force_tree_distribution(tree, state).as_dict()
            residual = max(
                abs(p - reference[outcome])
                for outcome, p in zip(distribution.outcomes, distribution.probabilities)
            )
            passed = residual <= self.settings.tolerance.probability
            self._record("brute_force", f"Path enumeration residual {residual:.3e}", passed=passed)

        rows = []
        for outcome, p in zip(distribution.outcomes, distribution.probabilities):
            row: Dict[str, Any] = dict(zip(order, outcome))
            row["probability"] = p
            rows.append(row)
        summary = CausalSummary(
            outcomes=len(rows),
            node_order=order,
            total_probability=float(sum(distribution.probabilities)),
            brute_force_residual=residual,
            passed=passed,
        )
        return self._result(order + ["probability"], rows, summary, passed)
