"""Repeated projective measurement interleaved with unitary evolution.

Each of the N rounds over the interval [0, T] first applies the Lueders
channel of a spectral resolution and then evolves for dt = T / N. The
survival probability of the initial state is read off the Heisenberg
pullback of the two-outcome observable {|psi><psi|, I - |psi><psi|}.
"""

import logging
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Sequence

import numpy as np
import numpy.typing as npt

from config.settings import settings
from core.errors import (
    DimensionMismatchError,
    InvalidResolutionError,
    InvalidStateError,
    NonCommutingError,
    UnexpectedCommutationError,
)
from core.models import NoncommutativityReport, ZenoRow
from tools.causality import (
    CausalTree,
    MarkovChannel,
    NodeSpace,
    TreeEdge,
    TreeNode,
    compose,
    pullback,
    realize,
)
from tools.measurement import Observable, State, born_distribution
from tools.operators import (
    HermitianOperator,
    MatrixLike,
    as_complex_matrix,
    as_complex_vector,
    commutator,
    frozen_array,
    hermitian,
    operator_norm,
    unitary_evolution,
)

logger = logging.getLogger(__name__)

SURVIVE = "x1"
DECAY = "x2"


@dataclass(frozen=True, eq=False)
class SpectralResolution:
    """Orthogonal projections summing to the identity."""

    projections: tuple

    def __post_init__(self) -> None:
        projections = tuple(frozen_array(as_complex_matrix(p)) for p in self.projections)
        if not projections:
            raise InvalidResolutionError("Resolution needs at least one projection", float("inf"))
        dim = projections[0].shape[0]
        tol = settings.tolerance.projection
        total = np.zeros((dim, dim), dtype=complex)
        for index, p in enumerate(projections):
            if p.shape != (dim, dim):
                raise DimensionMismatchError(f"Projection {index} has shape {p.shape}, expected {(dim, dim)}")
            residual = max(operator_norm(p @ p - p), operator_norm(p - p.conj().T))
            if residual > tol:
                raise InvalidResolutionError(f"Projection {index} is not an orthogonal projection", residual)
            for other_index in range(index):
                overlap = operator_norm(projections[other_index] @ p)
                if overlap > tol:
                    raise InvalidResolutionError(
                        f"Projections {other_index} and {index} are not orthogonal", overlap
                    )
            total += p
        residual = operator_norm(total - np.eye(dim))
        if residual > tol:
            raise InvalidResolutionError("Projections do not sum to the identity", residual)
        object.__setattr__(self, "projections", projections)

    @classmethod
    def from_state(cls, psi: npt.ArrayLike) -> "SpectralResolution":
        """[|psi><psi|, I - |psi><psi|]."""
        vector = _normalized(psi)
        p1 = np.outer(vector, vector.conj())
        return cls((p1, np.eye(vector.size) - p1))

    @classmethod
    def trivial(cls, dim: int) -> "SpectralResolution":
        return cls((np.eye(dim, dtype=complex),))

    @property
    def dim(self) -> int:
        return self.projections[0].shape[0]


def _normalized(psi: npt.ArrayLike) -> np.ndarray:
    vector = as_complex_vector(psi)
    norm = float(np.linalg.norm(vector))
    if abs(norm - 1.0) > settings.tolerance.state_norm:
        raise InvalidStateError(f"psi has norm {norm!r}, expected 1")
    return vector


@dataclass(frozen=True, eq=False)
class ZenoConfig:
    hamiltonian: HermitianOperator
    psi: np.ndarray
    n: int = 1
    hbar: Optional[float] = None
    total_time: Optional[float] = None

    def __post_init__(self) -> None:
        hamiltonian = hermitian(self.hamiltonian)
        psi = _normalized(self.psi)
        if psi.size != hamiltonian.dim:
            raise DimensionMismatchError(
                f"psi has {psi.size} entries, Hamiltonian acts on dimension {hamiltonian.dim}"
            )
        if int(self.n) < 1:
            raise ValueError(f"N must be positive, got {self.n}")
        hbar = settings.physics.hbar if self.hbar is None else float(self.hbar)
        if hbar <= 0:
            raise ValueError("hbar must be positive")
        total_time = settings.zeno.total_time if self.total_time is None else float(self.total_time)
        if total_time < 0:
            raise ValueError("total_time must be non-negative")

        object.__setattr__(self, "hamiltonian", hamiltonian)
        object.__setattr__(self, "psi", frozen_array(psi))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "hbar", hbar)
        object.__setattr__(self, "total_time", total_time)

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim

    @property
    def dt(self) -> float:
        return self.total_time / self.n

    def with_n(self, n: int) -> "ZenoConfig":
        return replace(self, n=n)


def lueders_channel(resolution: SpectralResolution) -> MarkovChannel:
    """Kraus family {P_n}: rho -> sum_n P_n rho P_n."""
    return MarkovChannel.quantum(resolution.projections)


def schrodinger_channel(
    hamiltonian: MatrixLike, dt: float, hbar: Optional[float] = None
) -> MarkovChannel:
    """Single Kraus operator exp(-i H dt / hbar)."""
    return MarkovChannel.unitary(unitary_evolution(hamiltonian, dt, hbar))


def example_observable(psi: npt.ArrayLike) -> Observable:
    """Two-outcome observable: x1 on |psi><psi|, x2 on its complement."""
    resolution = SpectralResolution.from_state(psi)
    return Observable((SURVIVE, DECAY), resolution.projections)


def zeno_channel(
    config: ZenoConfig, resolution: Optional[SpectralResolution] = None
) -> MarkovChannel:
    """N rounds of projection followed by evolution, composed from the Kraus families.

    Once the Kraus family would outgrow ``kraus_cap`` the step superoperator
    is raised to the N-th power instead and converted back to Kraus form.
    """
    resolution = SpectralResolution.from_state(config.psi) if resolution is None else resolution
    if resolution.dim != config.dim:
        raise DimensionMismatchError(
            f"Resolution on dimension {resolution.dim}, Hamiltonian on {config.dim}"
        )
    step = compose(
        lueders_channel(resolution),
        schrodinger_channel(config.hamiltonian, config.dt, config.hbar),
    )

    family = len(step.kraus)
    if family ** config.n <= settings.zeno.kraus_cap:
        channel = step
        for _ in range(config.n - 1):
            channel = compose(channel, step)
        return channel

    logger.debug("Switching to superoperator powers for N=%d (family %d)", config.n, family)
    power = np.linalg.matrix_power(step.superoperator(), config.n)
    return MarkovChannel.from_superoperator(power, config.dim, config.dim)


def survival_probability(config: ZenoConfig) -> float:
    """Probability that the final measurement still finds psi."""
    pulled = pullback(zeno_channel(config), example_observable(config.psi))
    distribution = born_distribution(pulled, State.pure(config.psi))
    return float(np.clip(distribution.probability(SURVIVE), 0.0, 1.0))


def zeno_lower_bound(config: ZenoConfig) -> float:
    """|<psi, exp(-i H dt / hbar) psi>|^(2N), the all-survive path."""
    unitary = unitary_evolution(config.hamiltonian, config.dt, config.hbar)
    amplitude = abs(np.vdot(config.psi, unitary @ config.psi))
    return float(min(1.0, amplitude ** (2 * config.n)))


def asymptotic_estimate(config: ZenoConfig) -> float:
    """Second-order estimate (1 - dt^2 Var(H/hbar))^N of the lower bound."""
    image = config.hamiltonian.matrix @ config.psi / config.hbar
    variance = float(np.vdot(image, image).real) - float(np.vdot(config.psi, image).real) ** 2
    return float((1.0 - config.dt**2 * max(variance, 0.0)) ** config.n)


def zeno_row(config: ZenoConfig, tol: Optional[float] = None) -> ZenoRow:
    tol = settings.tolerance.margin if tol is None else tol
    survival = survival_probability(config)
    bound = zeno_lower_bound(config)
    return ZenoRow(
        n=config.n,
        survival_probability=survival,
        lower_bound=bound,
        asymptotic_estimate=asymptotic_estimate(config),
        bound_satisfied=survival >= bound - tol,
    )


def zeno_scan(config: ZenoConfig, n_values: Iterable[int]) -> List[ZenoRow]:
    """One row per N, in the order given."""
    return [zeno_row(config.with_n(n)) for n in n_values]


def _noncommutativity_tree(config: ZenoConfig) -> CausalTree:
    observable = example_observable(config.psi)
    space = NodeSpace("quantum", config.dim)
    return CausalTree(
        nodes=(TreeNode("t0", space, observable), TreeNode("t1", space, observable)),
        edges=(TreeEdge("t0", "t1", schrodinger_channel(config.hamiltonian, config.dt, config.hbar)),),
    )


def check_zeno_noncommutativity(
    config: ZenoConfig, threshold: Optional[float] = None
) -> NoncommutativityReport:
    """Confirm that projection and one evolution step do not form a causal observable.

    Reports ||[P1, U^dagger P1 U]|| and the failure of ``realize`` on the
    two-node tree carrying the example observable at both times.
    """
    threshold = settings.zeno.commutation_threshold if threshold is None else threshold
    projector = example_observable(config.psi).effect(SURVIVE)
    unitary = unitary_evolution(config.hamiltonian, config.dt, config.hbar)
    evolved = unitary.conj().T @ projector @ unitary
    residual = operator_norm(commutator(projector, evolved))
    if residual < threshold:
        raise UnexpectedCommutationError("Projector commutes with one evolution step", residual)

    try:
        realize(_noncommutativity_tree(config))
    except NonCommutingError as e:
        logger.debug("realize rejected the Zeno pair at node %r", e.node)
        return NoncommutativityReport(
            commutator_residual=residual,
            realize_node=None if e.node is None else str(e.node),
            realize_residual=e.residual,
        )
    raise UnexpectedCommutationError("realize accepted the Zeno pair", residual)


def default_n_values() -> Sequence[int]:
    return (1, 10, 100, 1000)
