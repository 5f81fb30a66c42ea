"""Pytest configuration and fixtures for measurement-theory engine tests."""

from typing import Callable, List, Optional

import numpy as np
import pytest

from tools.causality import CausalTree, MarkovChannel, NodeSpace, TreeEdge, TreeNode
from tools.measurement import ClassicalObservable
from tools.operators import PAULI_X, PAULI_Z, HermitianOperator
from tools.uncertainty import JointScenario, builtin_qubit_scenario
from tools.zeno import ZenoConfig


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator; each test gets a fresh one."""
    return np.random.default_rng(20240607)


@pytest.fixture
def qubit_scenario() -> JointScenario:
    return builtin_qubit_scenario()


@pytest.fixture
def zeno_config() -> ZenoConfig:
    """sigma_x Hamiltonian, psi = |0>, hbar = 1, N = 10."""
    return ZenoConfig(
        hamiltonian=HermitianOperator(PAULI_X),
        psi=np.array([1.0, 0.0], dtype=complex),
        n=10,
        hbar=1.0,
        total_time=1.0,
    )


@pytest.fixture
def sigma_x() -> HermitianOperator:
    return HermitianOperator(PAULI_X)


@pytest.fixture
def sigma_z() -> HermitianOperator:
    return HermitianOperator(PAULI_Z)


def random_stochastic(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    matrix = rng.random((rows, cols)) + 0.05
    return matrix / matrix.sum(axis=1, keepdims=True)


def random_classical_observable(omega: int, outcomes: int, rng: np.random.Generator) -> ClassicalObservable:
    effects = rng.random((outcomes, omega)) + 0.05
    effects /= effects.sum(axis=0, keepdims=True)
    return ClassicalObservable(omega, tuple(f"o{k}" for k in range(outcomes)), effects)


def classical_tree_from_parents(
    parents: List[Optional[int]], rng: np.random.Generator, max_size: int = 3
) -> CausalTree:
    """Classical tree whose node k has parent ``parents[k]`` (None for the root)."""
    sizes = [int(rng.integers(1, max_size + 1)) for _ in parents]
    nodes = tuple(
        TreeNode(
            f"n{k}",
            NodeSpace("classical", sizes[k]),
            random_classical_observable(sizes[k], int(rng.integers(1, 4)), rng),
        )
        for k in range(len(parents))
    )
    edges = tuple(
        TreeEdge(
            f"n{parent}",
            f"n{k}",
            MarkovChannel.classical(random_stochastic(sizes[parent], sizes[k], rng)),
        )
        for k, parent in enumerate(parents)
        if parent is not None
    )
    return CausalTree(nodes=nodes, edges=edges)


@pytest.fixture
def classical_tree_factory() -> Callable[..., CausalTree]:
    return classical_tree_from_parents
