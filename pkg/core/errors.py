"""Error hierarchy for the measurement-theory engine.

``ConfigError`` covers unreadable input; every ``DomainError`` is a broken
numerical contract (non-Hermitian operator, non-commuting effects, ...).
"""

from typing import Any, Optional


class MeasurementTheoryError(Exception):
    """Base class for all engine errors."""


class ConfigError(MeasurementTheoryError):
    """Configuration could not be read or does not match its schema."""


class DomainError(MeasurementTheoryError):
    """A value violates a mathematical contract of the engine."""


class ResidualError(DomainError):
    """Domain error that carries the offending numerical residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = float(residual)


class NonHermitianError(ResidualError):
    """Operator differs from its adjoint beyond tolerance."""


class NumericalFailureError(DomainError):
    """Eigensolver did not converge or produced an inconsistent result."""


class DimensionMismatchError(DomainError):
    """Operands live on spaces of different dimension."""


class InvalidStateError(DomainError):
    """Vector or density matrix is not a state."""


class InvalidObservableError(DomainError):
    """Effects are not positive, bounded by the identity, or do not sum to it."""


class InvalidChannelError(ResidualError):
    """Kraus family is not unital or stochastic matrix is not row-stochastic."""


class KindMismatchError(DomainError):
    """Quantum and classical objects were combined."""


class IndexOutOfRangeError(DomainError, IndexError):
    """Point index outside the classical spectrum."""


class NotClassicalError(DomainError):
    """Operation requires classical nodes, channels or point states."""


class InvalidTreeError(DomainError):
    """Parent map is not a rooted tree or edge channels do not fit the nodes."""


class NonCommutingError(ResidualError):
    """Product observable does not exist because effects fail to commute."""

    def __init__(self, message: str, residual: float, node: Optional[Any] = None):
        if node is not None:
            message = f"{message} at node {node!r}"
        super().__init__(message, residual)
        self.node = node


class ScenarioInvalidError(ResidualError):
    """Joint-measurement operators do not commute."""


class ConstructionFailedError(DomainError):
    """Random scenario generation did not verify within the retry budget."""


class InvalidResolutionError(ResidualError):
    """Projections are not idempotent, orthogonal, or complete."""


class UnexpectedCommutationError(ResidualError):
    """The Zeno configuration is degenerate: the projector commutes with the evolution."""
