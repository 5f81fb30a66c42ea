"""Approximate joint measurements on system (x) ancilla and their uncertainty bounds.

A scenario pairs two system observables A1, A2 on H with commuting
operators Ahat1, Ahat2 on H (x) K and an ancilla state s. The noise
operators N_i = Ahat_i - A_i (x) I measure how far the joint measurement is
from the targets; ``certify`` evaluates the Robertson bound on the noise, the
product bound that holds under the same-average condition, and the
three-term rough bound that holds without it.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt

from config.settings import settings
from core.errors import (
    ConstructionFailedError,
    DimensionMismatchError,
    InvalidStateError,
    ScenarioInvalidError,
)
from core.models import CertificationReport, NoiseReport
from tools.operators import (
    PAULI_X,
    PAULI_Z,
    HermitianOperator,
    MatrixLike,
    as_complex_vector,
    commutator,
    frozen_array,
    haar_random_state,
    hermitian,
    operator_norm,
    random_hermitian,
    random_unitary,
    scale,
    tensor,
)

logger = logging.getLogger(__name__)


def _unit_vector(vector: npt.ArrayLike, dim: int, name: str = "u") -> np.ndarray:
    u = as_complex_vector(vector)
    if u.size != dim:
        raise DimensionMismatchError(f"{name} has {u.size} entries, expected {dim}")
    norm = float(np.linalg.norm(u))
    if abs(norm - 1.0) > settings.tolerance.state_norm:
        raise InvalidStateError(f"{name} has norm {norm!r}, expected 1")
    return u


@dataclass(frozen=True, eq=False)
class JointScenario:
    """Targets A1, A2 on H, joint-measurement operators on H (x) K, ancilla s."""

    a1: HermitianOperator
    a2: HermitianOperator
    ahat1: HermitianOperator
    ahat2: HermitianOperator
    s: np.ndarray
    hbar: Optional[float] = None

    def __post_init__(self) -> None:
        a1, a2 = hermitian(self.a1), hermitian(self.a2)
        ahat1, ahat2 = hermitian(self.ahat1), hermitian(self.ahat2)
        if a1.dim != a2.dim:
            raise DimensionMismatchError(f"Targets act on dimensions {a1.dim} and {a2.dim}")

        s = as_complex_vector(self.s)
        norm = float(np.linalg.norm(s))
        if abs(norm - 1.0) > settings.tolerance.state_norm:
            raise ScenarioInvalidError("Ancilla state is not normalized", abs(norm - 1.0))
        joint_dim = a1.dim * s.size
        if ahat1.dim != joint_dim or ahat2.dim != joint_dim:
            raise DimensionMismatchError(
                f"Joint operators act on {ahat1.dim} and {ahat2.dim}, expected {joint_dim}"
            )
        hbar = settings.physics.hbar if self.hbar is None else float(self.hbar)
        if hbar <= 0:
            raise ValueError("hbar must be positive")

        object.__setattr__(self, "a1", a1)
        object.__setattr__(self, "a2", a2)
        object.__setattr__(self, "ahat1", ahat1)
        object.__setattr__(self, "ahat2", ahat2)
        object.__setattr__(self, "s", frozen_array(s))
        object.__setattr__(self, "hbar", hbar)

    @property
    def dim_h(self) -> int:
        return self.a1.dim

    @property
    def dim_k(self) -> int:
        return self.s.size

    def target(self, i: int) -> HermitianOperator:
        return {1: self.a1, 2: self.a2}[i]

    def joint(self, i: int) -> HermitianOperator:
        return {1: self.ahat1, 2: self.ahat2}[i]

    def lift(self, u: npt.ArrayLike) -> np.ndarray:
        """u (x) s."""
        return tensor(_unit_vector(u, self.dim_h), self.s)

    def extend(self, operator: MatrixLike) -> np.ndarray:
        """A (x) I_K."""
        return tensor(operator, np.eye(self.dim_k))

    def commutator_residual(self) -> float:
        return operator_norm(commutator(self.ahat1, self.ahat2))

    def validate(self, tol: Optional[float] = None) -> None:
        """Raise ``ScenarioInvalidError`` unless Ahat1 and Ahat2 commute."""
        tol = settings.tolerance.commute if tol is None else tol
        residual = self.commutator_residual()
        if residual > tol * scale(self.ahat1.matrix, self.ahat2.matrix):
            raise ScenarioInvalidError("Joint-measurement operators do not commute", residual)


def noise_operator(scenario: JointScenario, i: int) -> HermitianOperator:
    """N_i = Ahat_i - A_i (x) I."""
    return HermitianOperator(scenario.joint(i).matrix - scenario.extend(scenario.target(i)))


@dataclass(frozen=True)
class NoiseDeltas:
    """Noise norms and their mean-centred counterparts, indexed 1 and 2."""

    delta: Tuple[float, float]
    delta_bar: Tuple[float, float]


def _noise_norms(noise: np.ndarray, w: np.ndarray) -> Tuple[float, float]:
    image = noise @ w
    mean = np.vdot(w, image)
    return float(np.linalg.norm(image)), float(np.linalg.norm(image - mean * w))


def deltas(scenario: JointScenario, u: npt.ArrayLike) -> NoiseDeltas:
    """Delta = ||N_i (u (x) s)||, Delta_bar = ||(N_i - <N_i>)(u (x) s)||."""
    w = scenario.lift(u)
    first = _noise_norms(noise_operator(scenario, 1).matrix, w)
    second = _noise_norms(noise_operator(scenario, 2).matrix, w)
    return NoiseDeltas(delta=(first[0], second[0]), delta_bar=(first[1], second[1]))


@dataclass(frozen=True)
class SameAverageCheck:
    holds: bool
    max_violation: float


def check_same_average(scenario: JointScenario, tol: Optional[float] = None) -> SameAverageCheck:
    """Same-average condition via its polarized form on basis pairs.

    <e_j (x) s, N_i (e_k (x) s)> must vanish for every j, k and i; by
    sesquilinearity this is equivalent to <u (x) s, N_i (u (x) s)> = 0 for
    every unit u.
    """
    tol = settings.tolerance.same_average if tol is None else tol
    isometry = tensor(np.eye(scenario.dim_h), scenario.s.reshape(-1, 1))
    violation = 0.0
    for i in (1, 2):
        compressed = isometry.conj().T @ noise_operator(scenario, i).matrix @ isometry
        violation = max(violation, float(np.max(np.abs(compressed))))
    return SameAverageCheck(holds=violation <= tol, max_violation=violation)


def sigma(operator: MatrixLike, u: npt.ArrayLike) -> float:
    """Standard deviation ||(A - <u, A u>) u||."""
    op = hermitian(operator)
    vector = _unit_vector(u, op.dim)
    image = op.matrix @ vector
    return float(np.linalg.norm(image - np.vdot(vector, image) * vector))


def _expectation(matrix: np.ndarray, w: np.ndarray) -> complex:
    return complex(np.vdot(w, matrix @ w))


def robertson_margin(a: MatrixLike, b: MatrixLike, u: npt.ArrayLike) -> float:
    """2 sigma(A) sigma(B) - |<u, [A, B] u>|, non-negative for every state."""
    op_a, op_b = hermitian(a), hermitian(b)
    vector = _unit_vector(u, op_a.dim)
    return 2.0 * sigma(op_a, vector) * sigma(op_b, vector) - abs(
        _expectation(commutator(op_a, op_b), vector)
    )


def certify(
    scenario: JointScenario,
    u: npt.ArrayLike,
    state_index: Optional[int] = None,
    tol: Optional[float] = None,
) -> CertificationReport:
    """Noise statistics and inequality margins of one scenario in the state u."""
    scenario.validate()
    w = scenario.lift(u)
    vector = _unit_vector(u, scenario.dim_h)

    n1 = noise_operator(scenario, 1).matrix
    n2 = noise_operator(scenario, 2).matrix
    a1_ext = scenario.extend(scenario.a1)
    a2_ext = scenario.extend(scenario.a2)

    delta1, delta_bar1 = _noise_norms(n1, w)
    delta2, delta_bar2 = _noise_norms(n2, w)
    sigma1 = sigma(scenario.a1, vector)
    sigma2 = sigma(scenario.a2, vector)
    system_commutator = _expectation(commutator(scenario.a1, scenario.a2), vector)
    bound = 0.5 * abs(system_commutator)

    # [N1,N2] + [N1,A2 (x) I] + [A1 (x) I,N2] + [A1 (x) I,A2 (x) I] = [Ahat1,Ahat2] = 0
    identity_residual = operator_norm(
        commutator(n1, n2) + commutator(n1, a2_ext) + commutator(a1_ext, n2) + commutator(a1_ext, a2_ext)
    )

    same_average = check_same_average(scenario, tol)
    noise = NoiseReport(
        delta1=delta1,
        delta2=delta2,
        delta_bar1=delta_bar1,
        delta_bar2=delta_bar2,
        sigma1=sigma1,
        sigma2=sigma2,
        commutator_bound=bound,
        identity_residual=identity_residual,
        same_average=same_average.holds,
        same_average_violation=same_average.max_violation,
    )

    report = CertificationReport(
        state_index=state_index,
        noise=noise,
        margin_robertson=2.0 * delta_bar1 * delta_bar2 - abs(_expectation(commutator(n1, n2), w)),
        margin_rough=delta1 * delta2 + delta2 * sigma1 + delta1 * sigma2 - bound,
    )
    if same_average.holds:
        report.margin_same_average = delta1 * delta2 - bound
        report.cross_term1 = abs(_expectation(commutator(n1, a2_ext), w))
        report.cross_term2 = abs(_expectation(commutator(a1_ext, n2), w))
        report.expectation_residual = abs(
            _expectation(commutator(a1_ext, a2_ext), w) - system_commutator
        )
    return report


def builtin_qubit_scenario(hbar: Optional[float] = None) -> JointScenario:
    """Qubit witness: A1 = sigma_x, A2 = sigma_z, Ahat_i = sqrt(2) sigma (x) sigma.

    The ancilla sits at <s, sigma_x s> = <s, sigma_z s> = 1/sqrt(2), which
    makes both noise operators unbiased and both noise norms equal to one.
    """
    angle = np.pi / 8
    s = np.array([np.cos(angle), np.sin(angle)], dtype=complex)
    return JointScenario(
        a1=HermitianOperator(PAULI_X),
        a2=HermitianOperator(PAULI_Z),
        ahat1=HermitianOperator(np.sqrt(2) * np.kron(PAULI_X, PAULI_X)),
        ahat2=HermitianOperator(np.sqrt(2) * np.kron(PAULI_Z, PAULI_Z)),
        s=s,
        hbar=hbar,
    )


def _same_average_weights(
    compression: np.ndarray, targets: Tuple[np.ndarray, ...]
) -> Optional[Tuple[np.ndarray, ...]]:
    """Real weights d with sum_k d_k r_k r_k^dagger = A for each target A."""
    columns = [np.outer(r, r.conj()).reshape(-1) for r in compression.T]
    design = np.array([np.concatenate([c.real, c.imag]) for c in columns]).T
    weights = []
    for target in targets:
        rhs = np.concatenate([target.reshape(-1).real, target.reshape(-1).imag])
        solution, *_ = np.linalg.lstsq(design, rhs, rcond=None)
        if np.max(np.abs(design @ solution - rhs)) > settings.tolerance.reconstruction * scale(target):
            return None
        if np.max(np.abs(solution)) > settings.uncertainty.max_coefficient:
            return None
        weights.append(solution)
    return tuple(weights)


def random_scenario(
    dim_h: int,
    dim_k: int,
    rng: np.random.Generator,
    enforce_same_average: bool = False,
    max_retries: Optional[int] = None,
) -> JointScenario:
    """Random targets with joint operators diagonal in a shared random basis.

    With ``enforce_same_average`` the eigenvalue weights are solved so that
    the compression of Ahat_i to H (x) s equals A_i, which needs the rank-one
    effects r_k r_k^dagger induced on H to span the Hermitian matrices, hence
    dim_k >= dim_h.
    """
    if dim_h < 2 or dim_k < 2:
        raise ValueError("Scenario dimensions must be at least 2")
    if enforce_same_average and dim_k < dim_h:
        raise ConstructionFailedError(
            f"Same-average scenarios need dim_k >= dim_h, got {dim_k} < {dim_h}"
        )
    max_retries = settings.uncertainty.max_retries if max_retries is None else max_retries
    joint_dim = dim_h * dim_k

    for attempt in range(max_retries):
        a1 = random_hermitian(dim_h, rng)
        a2 = random_hermitian(dim_h, rng)
        s = haar_random_state(dim_k, rng)
        basis = random_unitary(joint_dim, rng)

        if enforce_same_average:
            isometry = tensor(np.eye(dim_h), s.reshape(-1, 1))
            weights = _same_average_weights(isometry.conj().T @ basis, (a1.matrix, a2.matrix))
            if weights is None:
                logger.debug("Same-average weights ill-conditioned on attempt %d", attempt + 1)
                continue
        else:
            weights = (rng.normal(size=joint_dim), rng.normal(size=joint_dim))

        joints = []
        for weight in weights:
            matrix = (basis * weight) @ basis.conj().T
            joints.append(HermitianOperator(0.5 * (matrix + matrix.conj().T)))

        scenario = JointScenario(a1=a1, a2=a2, ahat1=joints[0], ahat2=joints[1], s=s)
        try:
            scenario.validate()
        except ScenarioInvalidError:
            logger.debug("Generated joint operators failed to commute on attempt %d", attempt + 1)
            continue
        if enforce_same_average and not check_same_average(scenario).holds:
            logger.debug("Generated scenario failed the same-average check on attempt %d", attempt + 1)
            continue
        return scenario

    raise ConstructionFailedError(
        f"No valid {dim_h}x{dim_k} scenario after {max_retries} attempts"
    )
