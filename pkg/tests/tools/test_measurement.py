"""Tests for states, observables, the Born rule and sampling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.errors import (
    DimensionMismatchError,
    IndexOutOfRangeError,
    InvalidObservableError,
    InvalidStateError,
    NonCommutingError,
)
from core.models import OutcomeDistribution
from tools.measurement import (
    ClassicalObservable,
    Observable,
    State,
    born_distribution,
    classical_born,
    commute_check,
    product_observable,
    pvm_from_hermitian,
    sample,
    trivial_observable,
)
from tools.operators import PAULI_I, PAULI_X, PAULI_Z, haar_random_state, random_hermitian

seeds = st.integers(min_value=0, max_value=2**32 - 1)

BELL = np.array([1, 0, 0, 1]) / np.sqrt(2)


def random_povm(dim: int, outcomes: int, rng: np.random.Generator) -> Observable:
    """Effects G_k^-1/2 A_k G^-1/2 with A_k random positive."""
    gaussians = rng.normal(size=(outcomes, dim, dim)) + 1j * rng.normal(size=(outcomes, dim, dim))
    raw = [a @ a.conj().T + 0.1 * np.eye(dim) for a in gaussians]
    total = sum(raw)
    values, vectors = np.linalg.eigh(total)
    inverse_root = vectors @ np.diag(values**-0.5) @ vectors.conj().T
    effects = [inverse_root @ a @ inverse_root for a in raw]
    effects = [0.5 * (e + e.conj().T) for e in effects]
    return Observable(tuple(range(outcomes)), tuple(effects))


class TestState:
    def test_pure_requires_unit_norm(self):
        with pytest.raises(InvalidStateError):
            State.pure([1.0, 1.0])

    def test_mixed_requires_unit_trace(self):
        with pytest.raises(InvalidStateError):
            State.mixed(np.eye(2))

    def test_mixed_requires_positivity(self):
        with pytest.raises(InvalidStateError):
            State.mixed(np.diag([1.5, -0.5]))

    def test_point_state(self):
        state = State.point(3, 2)
        assert state.point_index() == 2
        np.testing.assert_array_equal(state.density(), np.diag([0, 0, 1]))

    def test_point_out_of_range(self):
        with pytest.raises(IndexOutOfRangeError):
            State.point(3, 3)

    def test_superposition_is_not_a_point(self):
        assert State.pure(np.array([1, 1]) / np.sqrt(2)).point_index() is None


class TestObservable:
    def test_effects_must_sum_to_identity(self):
        with pytest.raises(InvalidObservableError):
            Observable(("a", "b"), (np.diag([1, 0]), np.diag([1, 0])))

    def test_effects_must_be_positive(self):
        with pytest.raises(InvalidObservableError):
            Observable(("a", "b"), (np.diag([1.5, 0]), np.diag([-0.5, 1])))

    def test_outcomes_must_be_distinct(self):
        with pytest.raises(InvalidObservableError):
            Observable(("a", "a"), (np.diag([1, 0]), np.diag([0, 1])))

    def test_effect_of_subset(self):
        observable = pvm_from_hermitian(np.diag([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(observable.effect_of([1.0, 3.0]), np.diag([1, 0, 1]), atol=1e-12)
        np.testing.assert_allclose(observable.effect_of([]), np.zeros((3, 3)))

    def test_trivial_observable(self):
        observable = trivial_observable(3)
        assert observable.outcomes == ("*",)
        np.testing.assert_array_equal(observable.effects[0], np.eye(3))


class TestPvmFromHermitian:
    def test_sigma_z(self):
        observable = pvm_from_hermitian(PAULI_Z)
        assert observable.outcomes == pytest.approx((-1.0, 1.0))
        np.testing.assert_allclose(observable.effects[0], np.diag([0, 1]), atol=1e-12)
        np.testing.assert_allclose(observable.effects[1], np.diag([1, 0]), atol=1e-12)

    def test_degenerate_identity(self):
        observable = pvm_from_hermitian(np.eye(3))
        assert observable.outcomes == pytest.approx((1.0,))

    def test_joint_sigma_x(self):
        observable = pvm_from_hermitian(np.sqrt(2) * np.kron(PAULI_X, PAULI_X))
        assert observable.outcomes == pytest.approx((-np.sqrt(2), np.sqrt(2)))
        assert [round(np.trace(e).real) for e in observable.effects] == [2, 2]
        assert observable.is_projective()

    @settings(deadline=None, max_examples=30)
    @given(seed=seeds, dim=st.integers(min_value=1, max_value=5))
    def test_effects_idempotent(self, seed, dim):
        rng = np.random.default_rng(seed)
        observable = pvm_from_hermitian(random_hermitian(dim, rng))
        assert observable.is_projective(tol=1e-10)


class TestBornDistribution:
    def test_eigenstate(self):
        distribution = born_distribution(pvm_from_hermitian(PAULI_Z), State.pure([1, 0]))
        assert distribution.probability(1.0) == pytest.approx(1.0)
        assert distribution.probability(-1.0) == pytest.approx(0.0, abs=1e-15)

    def test_cos_squared(self):
        u = [np.cos(np.pi / 6), np.sin(np.pi / 6)]
        distribution = born_distribution(pvm_from_hermitian(PAULI_Z), State.pure(u))
        assert distribution.probability(1.0) == pytest.approx(0.75)
        assert distribution.probability(-1.0) == pytest.approx(0.25)

    def test_maximally_mixed(self):
        distribution = born_distribution(pvm_from_hermitian(PAULI_Z), State.mixed(PAULI_I / 2))
        assert distribution.probabilities == pytest.approx([0.5, 0.5])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            born_distribution(pvm_from_hermitian(PAULI_Z), State.pure([1, 0, 0]))

    def test_unknown_outcome(self):
        distribution = born_distribution(pvm_from_hermitian(PAULI_Z), State.pure([1, 0]))
        with pytest.raises(KeyError):
            distribution.probability(7)

    def test_round_off_below_zero_is_clamped(self, caplog):
        observable = Observable(("a", "b"), (np.diag([1 + 5e-11, 0]), np.diag([-5e-11, 1])))
        with caplog.at_level("WARNING", logger="tools.measurement"):
            distribution = born_distribution(observable, State.pure([1, 0]))
        assert distribution.probabilities[1] == 0.0
        assert distribution.probability("a") == pytest.approx(1.0, abs=1e-10)
        assert "Clamped probability" in caplog.text

    def test_round_off_clamped_for_mixed_states(self):
        observable = Observable(("a", "b"), (np.diag([1 + 5e-11, 0]), np.diag([-5e-11, 1])))
        distribution = born_distribution(observable, State.mixed(np.diag([1, 0])))
        assert min(distribution.probabilities) == 0.0

    @settings(deadline=None, max_examples=40)
    @given(seed=seeds, dim=st.integers(min_value=1, max_value=4), outcomes=st.integers(min_value=1, max_value=4))
    def test_distribution_invariants(self, seed, dim, outcomes):
        rng = np.random.default_rng(seed)
        observable = random_povm(dim, outcomes, rng)
        u = haar_random_state(dim, rng)
        pure = born_distribution(observable, State.pure(u))
        mixed = born_distribution(observable, State.mixed(np.outer(u, u.conj())))
        assert sum(pure.probabilities) == pytest.approx(1.0, abs=1e-10)
        assert min(pure.probabilities) >= -1e-12
        np.testing.assert_allclose(pure.probabilities, mixed.probabilities, atol=1e-12)


class TestClassical:
    def test_crisp_partition(self):
        observable = ClassicalObservable.crisp(["a", "a", "b"])
        assert classical_born(observable, 1).as_dict() == {"a": 1.0, "b": 0.0}

    def test_fuzzy_read_off(self):
        observable = ClassicalObservable(2, ("x1", "x2"), np.array([[0.7, 0.2], [0.3, 0.8]]))
        assert classical_born(observable, 0).probabilities == pytest.approx([0.7, 0.3])

    def test_uniform(self):
        observable = ClassicalObservable(3, ("x1", "x2"), np.full((2, 3), 0.5))
        for omega in range(3):
            assert classical_born(observable, omega).probabilities == pytest.approx([0.5, 0.5])

    def test_index_out_of_range(self):
        observable = ClassicalObservable.crisp(["a", "b"])
        with pytest.raises(IndexOutOfRangeError):
            classical_born(observable, 2)

    def test_columns_must_sum_to_one(self):
        with pytest.raises(InvalidObservableError):
            ClassicalObservable(2, ("x1", "x2"), np.array([[0.7, 0.2], [0.2, 0.8]]))

    @settings(deadline=None, max_examples=30)
    @given(seed=seeds, omega=st.integers(min_value=1, max_value=5))
    def test_embedding_matches_point_measure(self, seed, omega):
        rng = np.random.default_rng(seed)
        effects = rng.random((3, omega))
        effects /= effects.sum(axis=0, keepdims=True)
        observable = ClassicalObservable(omega, ("a", "b", "c"), effects)
        embedded = observable.embed()
        for point in range(omega):
            quantum = born_distribution(embedded, State.point(omega, point))
            np.testing.assert_allclose(
                quantum.probabilities, classical_born(observable, point).probabilities, atol=1e-12
            )


class TestCommutation:
    def test_disjoint_factors(self):
        first = pvm_from_hermitian(np.kron(PAULI_Z, PAULI_I))
        second = pvm_from_hermitian(np.kron(PAULI_I, PAULI_Z))
        check = commute_check(first, second)
        assert check.commutes
        assert check.max_residual == pytest.approx(0.0, abs=1e-12)

    def test_sigma_x_sigma_z_effects(self):
        check = commute_check(pvm_from_hermitian(PAULI_X), pvm_from_hermitian(PAULI_Z))
        assert not check.commutes
        # effects are (I +- sigma)/2, so the residual is ||[sigma_x, sigma_z]|| / 4
        assert check.max_residual == pytest.approx(0.5)

    def test_self(self, rng):
        observable = random_povm(3, 3, rng)
        assert commute_check(observable, observable).commutes

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            commute_check(pvm_from_hermitian(PAULI_Z), trivial_observable(3))


class TestProductObservable:
    def test_bell_correlations(self):
        joint = product_observable(
            pvm_from_hermitian(np.kron(PAULI_Z, PAULI_I)), pvm_from_hermitian(np.kron(PAULI_I, PAULI_Z))
        )
        distribution = born_distribution(joint, State.pure(BELL)).as_dict()
        assert distribution[(1.0, 1.0)] == pytest.approx(0.5)
        assert distribution[(-1.0, -1.0)] == pytest.approx(0.5)
        assert distribution[(1.0, -1.0)] == pytest.approx(0.0, abs=1e-12)
        assert distribution[(-1.0, 1.0)] == pytest.approx(0.0, abs=1e-12)

    def test_trivial_factor(self):
        observable = pvm_from_hermitian(PAULI_Z)
        joint = product_observable(observable, trivial_observable(2))
        assert joint.outcomes == tuple((x, "*") for x in observable.outcomes)
        for e, g in zip(joint.effects, observable.effects):
            np.testing.assert_allclose(e, g, atol=1e-12)

    def test_non_commuting_raises_with_residual(self):
        with pytest.raises(NonCommutingError) as info:
            product_observable(pvm_from_hermitian(PAULI_X), pvm_from_hermitian(PAULI_Z))
        assert info.value.residual == pytest.approx(0.5)

    def test_joint_measurement_marginals(self, rng):
        first = pvm_from_hermitian(np.sqrt(2) * np.kron(PAULI_X, PAULI_X))
        second = pvm_from_hermitian(np.sqrt(2) * np.kron(PAULI_Z, PAULI_Z))
        joint = product_observable(first, second)
        assert len(joint.outcomes) == 4

        state = State.pure(haar_random_state(4, rng))
        distribution = born_distribution(joint, state)
        for position, factor in ((0, first), (1, second)):
            marginal = distribution.marginal(position)
            expected = born_distribution(factor, state).as_dict()
            for outcome, p in expected.items():
                assert marginal[outcome] == pytest.approx(p, abs=1e-10)


class TestSample:
    def test_certain_outcome(self):
        observable = pvm_from_hermitian(PAULI_Z)
        for seed in range(5):
            assert sample(observable, State.pure([1, 0]), np.random.default_rng(seed)) == 1.0

    def test_seeded_determinism(self):
        observable = pvm_from_hermitian(PAULI_Z)
        state = State.pure(np.array([1, 1]) / np.sqrt(2))
        first = sample(observable, state, np.random.default_rng(42), size=20)
        second = sample(observable, state, np.random.default_rng(42), size=20)
        assert first == second

    def test_empirical_frequency(self):
        observable = pvm_from_hermitian(PAULI_Z)
        state = State.pure([np.cos(np.pi / 6), np.sin(np.pi / 6)])
        draws = sample(observable, state, np.random.default_rng(3), size=100_000)
        frequency = draws.count(observable.outcomes[0]) / len(draws)
        assert abs(frequency - 0.25) <= 3 * np.sqrt(0.75 * 0.25 / 100_000)

    def test_classical_point(self):
        observable = ClassicalObservable.crisp(["a", "b"])
        assert sample(observable, 1, np.random.default_rng(0)) == "b"


class TestOutcomeDistribution:
    def test_rejects_bad_total(self):
        with pytest.raises(ValueError):
            OutcomeDistribution(outcomes=["a", "b"], probabilities=[0.5, 0.6])

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            OutcomeDistribution(outcomes=["a", "b"], probabilities=[1.1, -0.1])
