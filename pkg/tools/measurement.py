"""States, observables and the Born rule, quantum and classical.

Outcome sets are finite and carry the full power set as event field; each
observable stores one effect per singleton and ``effect_of`` sums them. In
finite dimension every effect is continuous at every state, so Born
probabilities need no continuity guard.
"""

import logging
from dataclasses import dataclass
from typing import Hashable, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
from pydantic import ValidationError

from config.settings import settings
from core.errors import (
    DimensionMismatchError,
    IndexOutOfRangeError,
    InvalidObservableError,
    InvalidStateError,
    NonCommutingError,
    NumericalFailureError,
)
from core.models import CommutationCheck, OutcomeDistribution
from tools.operators import (
    MatrixLike,
    frozen_array,
    as_complex_matrix,
    as_complex_vector,
    commutator,
    operator_norm,
    spectral_decomposition,
)

logger = logging.getLogger(__name__)

Outcome = Hashable


@dataclass(frozen=True, eq=False)
class State:
    """Pure (unit vector) or mixed (density matrix) state."""

    kind: Literal["pure", "mixed"]
    data: np.ndarray

    def __post_init__(self) -> None:
        tol = settings.tolerance
        if self.kind == "pure":
            vector = as_complex_vector(self.data)
            norm = float(np.linalg.norm(vector))
            if abs(norm - 1.0) > tol.state_norm:
                raise InvalidStateError(f"State vector has norm {norm!r}, expected 1")
            object.__setattr__(self, "data", frozen_array(vector))
        elif self.kind == "mixed":
            rho = as_complex_matrix(self.data)
            if rho.shape[0] != rho.shape[1]:
                raise InvalidStateError(f"Density matrix must be square, got {rho.shape}")
            if operator_norm(rho - rho.conj().T) > tol.hermitian:
                raise InvalidStateError("Density matrix is not Hermitian")
            trace = float(np.real(np.trace(rho)))
            if abs(trace - 1.0) > tol.mixed_eigen:
                raise InvalidStateError(f"Density matrix has trace {trace!r}, expected 1")
            lowest = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
            if lowest < -tol.mixed_eigen:
                raise InvalidStateError(f"Density matrix has eigenvalue {lowest:.3e}")
            object.__setattr__(self, "data", frozen_array(rho))
        else:
            raise InvalidStateError(f"Unknown state kind {self.kind!r}")

    @classmethod
    def pure(cls, vector: npt.ArrayLike) -> "State":
        return cls("pure", np.asarray(vector, dtype=complex))

    @classmethod
    def mixed(cls, density: npt.ArrayLike) -> "State":
        return cls("mixed", np.asarray(density, dtype=complex))

    @classmethod
    def point(cls, dim: int, index: int) -> "State":
        """Point measure at ``index``, embedded as a computational basis vector."""
        if not 0 <= index < dim:
            raise IndexOutOfRangeError(f"Point {index} outside a spectrum of size {dim}")
        vector = np.zeros(dim, dtype=complex)
        vector[index] = 1.0
        return cls("pure", vector)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def density(self) -> np.ndarray:
        if self.kind == "pure":
            return np.outer(self.data, self.data.conj())
        return np.array(self.data)

    def point_index(self) -> Optional[int]:
        """Index of the basis vector this state is, if it is one."""
        rho = self.density()
        diagonal = np.real(np.diag(rho))
        index = int(np.argmax(diagonal))
        if abs(diagonal[index] - 1.0) <= settings.tolerance.probability:
            return index
        return None


def _check_effects(effects: Sequence[np.ndarray], dim: int) -> None:
    tol = settings.tolerance
    total = np.zeros((dim, dim), dtype=complex)
    for index, effect in enumerate(effects):
        if effect.shape != (dim, dim):
            raise InvalidObservableError(
                f"Effect {index} has shape {effect.shape}, expected {(dim, dim)}"
            )
        if operator_norm(effect - effect.conj().T) > tol.hermitian * max(1.0, operator_norm(effect)):
            raise InvalidObservableError(f"Effect {index} is not Hermitian")
        spectrum = np.linalg.eigvalsh(0.5 * (effect + effect.conj().T))
        if spectrum[0] < -tol.probability or spectrum[-1] > 1.0 + tol.probability:
            raise InvalidObservableError(
                f"Effect {index} has spectrum outside [0, 1]: [{spectrum[0]:.3e}, {spectrum[-1]:.3e}]"
            )
        total += effect
    residual = operator_norm(total - np.eye(dim))
    if residual > tol.unitality:
        raise InvalidObservableError(f"Effects sum to identity only up to {residual:.3e}")


@dataclass(frozen=True, eq=False)
class Observable:
    """Finite-outcome observable: one positive effect per outcome, summing to I."""

    outcomes: Tuple[Outcome, ...]
    effects: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        outcomes = tuple(self.outcomes)
        effects = tuple(frozen_array(as_complex_matrix(effect)) for effect in self.effects)
        if not outcomes:
            raise InvalidObservableError("Observable needs at least one outcome")
        if len(outcomes) != len(effects):
            raise InvalidObservableError(
                f"{len(outcomes)} outcomes but {len(effects)} effects"
            )
        if len(set(outcomes)) != len(outcomes):
            raise InvalidObservableError("Outcome labels must be distinct")
        _check_effects(effects, effects[0].shape[0])
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "effects", effects)

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def effect(self, outcome: Outcome) -> np.ndarray:
        try:
            return self.effects[self.outcomes.index(outcome)]
        except ValueError:
            raise KeyError(outcome) from None

    def effect_of(self, subset: Iterable[Outcome]) -> np.ndarray:
        """F(subset), the sum of the singleton effects."""
        total = np.zeros((self.dim, self.dim), dtype=complex)
        for outcome in set(subset):
            total += self.effect(outcome)
        return total

    def is_projective(self, tol: Optional[float] = None) -> bool:
        tol = settings.tolerance.projection if tol is None else tol
        return all(operator_norm(e @ e - e) <= tol for e in self.effects)


def trivial_observable(dim: int, outcome: Outcome = "*") -> Observable:
    """Single-outcome observable with effect I."""
    return Observable((outcome,), (np.eye(dim, dtype=complex),))


@dataclass(frozen=True, eq=False)
class ClassicalObservable:
    """Fuzzy observable on a finite spectrum: effect vectors in [0,1]^Omega."""

    omega_size: int
    outcomes: Tuple[Outcome, ...]
    effects: np.ndarray

    def __post_init__(self) -> None:
        tol = settings.tolerance.stochastic
        effects = np.array(self.effects, dtype=float, copy=True)
        if effects.ndim != 2 or effects.shape != (len(self.outcomes), self.omega_size):
            raise InvalidObservableError(
                f"Effects shape {effects.shape} does not match "
                f"{len(self.outcomes)} outcomes on {self.omega_size} points"
            )
        if not len(self.outcomes):
            raise InvalidObservableError("Observable needs at least one outcome")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise InvalidObservableError("Outcome labels must be distinct")
        if np.any(effects < -tol) or np.any(effects > 1.0 + tol):
            raise InvalidObservableError("Classical effects must lie in [0, 1]")
        residual = float(np.max(np.abs(effects.sum(axis=0) - 1.0)))
        if residual > tol:
            raise InvalidObservableError(f"Effects sum to one only up to {residual:.3e}")
        effects.setflags(write=False)
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        object.__setattr__(self, "effects", effects)

    @classmethod
    def crisp(cls, labels: Sequence[Outcome]) -> "ClassicalObservable":
        """Partition observable: point omega reads out ``labels[omega]``."""
        outcomes = tuple(dict.fromkeys(labels))
        effects = np.zeros((len(outcomes), len(labels)))
        for omega, label in enumerate(labels):
            effects[outcomes.index(label), omega] = 1.0
        return cls(len(labels), outcomes, effects)

    def embed(self) -> Observable:
        """Diagonal-matrix observable with the same statistics at point states."""
        return Observable(self.outcomes, tuple(np.diag(row).astype(complex) for row in self.effects))


def pvm_from_hermitian(operator: MatrixLike, group_tol: Optional[float] = None) -> Observable:
    """Projection-valued observable of the distinct eigenvalues."""
    decomposition = spectral_decomposition(operator, group_tol)
    return Observable(decomposition.eigenvalues, decomposition.projectors)


def outcome_distribution(outcomes: Sequence[Outcome], probabilities: Sequence[float]) -> OutcomeDistribution:
    """Clamp the round-off band (-probability tol, 0) to zero and build the distribution."""
    tol = settings.tolerance
    clamped = []
    for p in probabilities:
        if -tol.probability <= p < 0.0:
            if p < -tol.negative_probability:
                logger.warning("Clamped probability %.3e to zero", p)
            p = 0.0
        clamped.append(p)
    try:
        return OutcomeDistribution(outcomes=list(outcomes), probabilities=clamped)
    except ValidationError as e:
        raise NumericalFailureError(f"Born probabilities do not form a distribution: {e}") from e


def born_distribution(observable: Observable, rho: State) -> OutcomeDistribution:
    """Born rule: P(x) = <u, E_x u> for pure states, tr(rho E_x) for mixed ones."""
    if observable.dim != rho.dim:
        raise DimensionMismatchError(
            f"Observable on dimension {observable.dim}, state on {rho.dim}"
        )
    if rho.kind == "pure":
        u = rho.data
        probabilities = [float(np.real(np.vdot(u, e @ u))) for e in observable.effects]
    else:
        probabilities = [float(np.real(np.trace(rho.data @ e))) for e in observable.effects]
    return outcome_distribution(observable.outcomes, probabilities)


def classical_born(observable: ClassicalObservable, omega_index: int) -> OutcomeDistribution:
    """Born rule at the point measure: P(x) = effect_x(omega)."""
    if not 0 <= omega_index < observable.omega_size:
        raise IndexOutOfRangeError(
            f"Point {omega_index} outside a spectrum of size {observable.omega_size}"
        )
    probabilities = [float(p) for p in observable.effects[:, omega_index]]
    return outcome_distribution(observable.outcomes, probabilities)


def commute_check(
    first: Observable, second: Observable, tol: Optional[float] = None
) -> CommutationCheck:
    """Pairwise effect commutation with the largest residual ||[E, G]||."""
    tol = settings.tolerance.commute if tol is None else tol
    if first.dim != second.dim:
        raise DimensionMismatchError(f"Observables on dimensions {first.dim} and {second.dim}")

    commutes = True
    max_residual = 0.0
    for e in first.effects:
        norm_e = operator_norm(e)
        for g in second.effects:
            residual = operator_norm(commutator(e, g))
            max_residual = max(max_residual, residual)
            if residual > tol * max(1.0, norm_e * operator_norm(g)):
                commutes = False
    return CommutationCheck(commutes=commutes, max_residual=max_residual)


def product_observable(
    first: Observable, second: Observable, tol: Optional[float] = None
) -> Observable:
    """Simultaneous measurement: outcome (x, y) has effect E_x G_y."""
    check = commute_check(first, second, tol)
    if not check.commutes:
        raise NonCommutingError("Effects do not commute", check.max_residual)

    outcomes = []
    effects = []
    for x, e in zip(first.outcomes, first.effects):
        for y, g in zip(second.outcomes, second.effects):
            product = e @ g
            outcomes.append((x, y))
            effects.append(0.5 * (product + product.conj().T))
    return Observable(tuple(outcomes), tuple(effects))


def _distribution_of(
    observable: Union[Observable, ClassicalObservable], rho: Union[State, int]
) -> OutcomeDistribution:
    if isinstance(observable, ClassicalObservable):
        if isinstance(rho, State):
            index = rho.point_index()
            if index is None:
                raise InvalidStateError("Classical sampling needs a point state")
            rho = index
        return classical_born(observable, int(rho))
    if not isinstance(rho, State):
        rho = State.point(observable.dim, int(rho))
    return born_distribution(observable, rho)


def _cumulative(distribution: OutcomeDistribution) -> np.ndarray:
    probabilities = np.array(distribution.probabilities, dtype=float)
    floor = -settings.tolerance.negative_probability
    if np.any(probabilities < 0):
        logger.debug("Clamping %d negative probabilities above %.1e", int(np.sum(probabilities < 0)), floor)
    probabilities = np.where(probabilities < 0, 0.0, probabilities)
    cdf = np.cumsum(probabilities)
    return cdf / cdf[-1]


def sample(
    observable: Union[Observable, ClassicalObservable],
    rho: Union[State, int],
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> Union[Outcome, List[Outcome]]:
    """Inverse-CDF draw(s) in stored outcome order; deterministic given ``rng``."""
    distribution = _distribution_of(observable, rho)
    cdf = _cumulative(distribution)
    last = len(cdf) - 1
    if size is None:
        index = min(int(np.searchsorted(cdf, rng.random(), side="right")), last)
        return distribution.outcomes[index]
    indices = np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), last)
    return [distribution.outcomes[i] for i in indices]
