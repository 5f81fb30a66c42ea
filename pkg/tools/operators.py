"""Complex-matrix foundation: Hermitian operators, spectra, tensors, evolution.

Every matrix exponential is computed from the Hermitian eigendecomposition,
never from a series. Kronecker products use the row index
``i_A * rows_B + i_B`` everywhere in the engine.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy import linalg

from config.settings import settings
from core.errors import (
    DimensionMismatchError,
    DomainError,
    NonHermitianError,
    NumericalFailureError,
)

logger = logging.getLogger(__name__)

ComplexMatrix = npt.NDArray[np.complex128]
ComplexVector = npt.NDArray[np.complex128]

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def frozen_array(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex, copy=True)
    array.setflags(write=False)
    return array


def as_complex_matrix(data: "MatrixLike") -> ComplexMatrix:
    """Coerce to a finite two-dimensional complex array."""
    if isinstance(data, HermitianOperator):
        return data.matrix
    matrix = np.asarray(data, dtype=complex)
    if matrix.ndim != 2 or 0 in matrix.shape:
        raise DimensionMismatchError(f"Expected a non-empty matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise DomainError("Matrix entries must be finite")
    return matrix


def as_complex_vector(data: npt.ArrayLike) -> ComplexVector:
    """Coerce to a finite one-dimensional complex array."""
    vector = np.asarray(data, dtype=complex)
    if vector.ndim == 2 and 1 in vector.shape:
        vector = vector.reshape(-1)
    if vector.ndim != 1 or vector.size == 0:
        raise DimensionMismatchError(f"Expected a non-empty vector, got shape {vector.shape}")
    if not np.all(np.isfinite(vector)):
        raise DomainError("Vector entries must be finite")
    return vector


def operator_norm(matrix: npt.ArrayLike) -> float:
    """Largest singular value."""
    return float(np.linalg.norm(np.asarray(matrix), 2))


def scale(*matrices: npt.ArrayLike) -> float:
    """Tolerance scale max(1, product of operator norms)."""
    product = 1.0
    for matrix in matrices:
        product *= operator_norm(matrix)
    return max(1.0, product)


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Self-adjoint operator on a finite-dimensional Hilbert space."""

    matrix: ComplexMatrix

    def __post_init__(self) -> None:
        matrix = as_complex_matrix(self.matrix)
        rows, cols = matrix.shape
        if rows != cols:
            raise DimensionMismatchError(f"Hermitian operator must be square, got {rows}x{cols}")
        residual = operator_norm(matrix - matrix.conj().T)
        limit = settings.tolerance.hermitian * scale(matrix)
        if residual > limit:
            raise NonHermitianError("Operator is not self-adjoint", residual)
        object.__setattr__(self, "matrix", frozen_array(matrix))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def norm(self) -> float:
        return operator_norm(self.matrix)

    def expectation(self, vector: npt.ArrayLike) -> float:
        """Real expectation value <u, A u>."""
        u = as_complex_vector(vector)
        if u.size != self.dim:
            raise DimensionMismatchError(f"Vector of size {u.size} on a {self.dim}-dimensional operator")
        return float(np.real(np.vdot(u, self.matrix @ u)))

    def __add__(self, other: "HermitianOperator") -> "HermitianOperator":
        return HermitianOperator(self.matrix + as_complex_matrix(other))

    def __sub__(self, other: "HermitianOperator") -> "HermitianOperator":
        return HermitianOperator(self.matrix - as_complex_matrix(other))

    def __mul__(self, factor: float) -> "HermitianOperator":
        return HermitianOperator(self.matrix * float(factor))

    __rmul__ = __mul__


MatrixLike = Union[HermitianOperator, npt.ArrayLike]


def hermitian(data: MatrixLike) -> HermitianOperator:
    """Wrap a matrix, checking self-adjointness."""
    if isinstance(data, HermitianOperator):
        return data
    return HermitianOperator(as_complex_matrix(data))


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Distinct eigenvalues (ascending) with their spectral projectors."""

    eigenvalues: Tuple[float, ...]
    projectors: Tuple[ComplexMatrix, ...]

    def reconstruct(self) -> ComplexMatrix:
        dim = self.projectors[0].shape[0]
        total = np.zeros((dim, dim), dtype=complex)
        for value, projector in zip(self.eigenvalues, self.projectors):
            total += value * projector
        return total

    def apply_function(self, func) -> ComplexMatrix:
        """f(A) = sum f(lambda) P."""
        dim = self.projectors[0].shape[0]
        total = np.zeros((dim, dim), dtype=complex)
        for value, projector in zip(self.eigenvalues, self.projectors):
            total += func(value) * projector
        return total


def _eigh(matrix: ComplexMatrix) -> Tuple[np.ndarray, np.ndarray]:
    try:
        return linalg.eigh(matrix)
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalFailureError(f"Hermitian eigensolver failed: {e}") from e


def spectral_decomposition(
    operator: MatrixLike, group_tol: Optional[float] = None
) -> SpectralDecomposition:
    """Spectral resolution with eigenvalues closer than ``group_tol`` merged."""
    op = hermitian(operator)
    group_tol = settings.tolerance.group if group_tol is None else group_tol
    if group_tol < 0:
        raise ValueError("group_tol must be non-negative")

    matrix = 0.5 * (op.matrix + op.matrix.conj().T)
    values, vectors = _eigh(matrix)
    threshold = group_tol * scale(matrix)

    groups: list[list[int]] = [[0]]
    for index in range(1, len(values)):
        if values[index] - values[groups[-1][0]] <= threshold:
            groups[-1].append(index)
        else:
            groups.append([index])

    eigenvalues = []
    projectors = []
    for group in groups:
        basis = vectors[:, group]
        eigenvalues.append(float(np.mean(values[group])))
        projectors.append(frozen_array(basis @ basis.conj().T))

    if len(groups) < len(values):
        logger.debug("Merged %d eigenvalues into %d groups", len(values), len(groups))

    decomposition = SpectralDecomposition(tuple(eigenvalues), tuple(projectors))
    residual = operator_norm(decomposition.reconstruct() - op.matrix)
    limit = max(settings.tolerance.reconstruction, group_tol) * scale(matrix)
    if residual > limit:
        raise NumericalFailureError(
            f"Spectral reconstruction residual {residual:.3e} exceeds {limit:.3e}"
        )
    return decomposition


def commutator(a: MatrixLike, b: MatrixLike) -> ComplexMatrix:
    """[A, B] = AB - BA."""
    ma = as_complex_matrix(a)
    mb = as_complex_matrix(b)
    if ma.shape != mb.shape or ma.shape[0] != ma.shape[1]:
        raise DimensionMismatchError(f"Cannot commute shapes {ma.shape} and {mb.shape}")
    return ma @ mb - mb @ ma


def tensor(a: MatrixLike, b: MatrixLike) -> np.ndarray:
    """Kronecker product; vectors stay vectors."""
    left = a.matrix if isinstance(a, HermitianOperator) else np.asarray(a, dtype=complex)
    right = b.matrix if isinstance(b, HermitianOperator) else np.asarray(b, dtype=complex)
    return np.kron(left, right)


def unitary_evolution(
    hamiltonian: MatrixLike, t: float, hbar: Optional[float] = None
) -> ComplexMatrix:
    """U = exp(-i H t / hbar) from the spectral decomposition of H."""
    hbar = settings.physics.hbar if hbar is None else hbar
    if hbar <= 0:
        raise ValueError("hbar must be positive")

    decomposition = spectral_decomposition(hamiltonian)
    unitary = decomposition.apply_function(lambda value: np.exp(-1j * value * t / hbar))

    dim = unitary.shape[0]
    residual = operator_norm(unitary.conj().T @ unitary - np.eye(dim))
    if residual > settings.tolerance.unitary:
        raise NumericalFailureError(f"Evolution is not unitary (residual {residual:.3e})")
    return unitary


def random_hermitian(dim: int, rng: np.random.Generator, spread: float = 1.0) -> HermitianOperator:
    """Gaussian Hermitian matrix (GUE-like)."""
    raw = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return HermitianOperator(spread * 0.5 * (raw + raw.conj().T))


def random_unitary(dim: int, rng: np.random.Generator) -> ComplexMatrix:
    """Haar-random unitary via QR with phase correction."""
    raw = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(raw)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def haar_random_state(dim: int, rng: np.random.Generator) -> ComplexVector:
    """Unit vector distributed uniformly on the complex sphere."""
    raw = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return raw / np.linalg.norm(raw)
