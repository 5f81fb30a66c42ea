"""Markov operators, their composition, and sequential causal observables.

Channels are exposed in the Heisenberg picture: a channel from time t1 to
time t2 maps effects at t2 to operators at t1. Quantum channels are kept in
Kraus form with each ``K_j`` mapping the t1 space into the t2 space, so the
Heisenberg action is ``F -> sum_j K_j^dagger F K_j`` and unitality reads
``sum_j K_j^dagger K_j = I``. Classical channels are row-stochastic matrices
with rows indexed by t1 points.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy import linalg

from config.settings import settings
from core.errors import (
    DimensionMismatchError,
    IndexOutOfRangeError,
    InvalidChannelError,
    InvalidTreeError,
    KindMismatchError,
    NonCommutingError,
    NotClassicalError,
    NumericalFailureError,
)
from core.models import OutcomeDistribution
from tools.measurement import (
    ClassicalObservable,
    Observable,
    State,
    outcome_distribution,
    product_observable,
)
from tools.operators import as_complex_matrix, operator_norm

logger = logging.getLogger(__name__)

ChannelKind = Literal["quantum", "classical"]
AnyObservable = Union[Observable, ClassicalObservable]


@dataclass(frozen=True, eq=False)
class MarkovChannel:
    """Unital positive map, quantum (Kraus family) or classical (stochastic matrix)."""

    kind: ChannelKind
    dim_in: int
    dim_out: int
    kraus: Optional[np.ndarray] = None
    stochastic: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.kind == "quantum":
            self._validate_kraus()
        elif self.kind == "classical":
            self._validate_stochastic()
        else:
            raise KindMismatchError(f"Unknown channel kind {self.kind!r}")

    def _validate_kraus(self) -> None:
        if self.kraus is None:
            raise InvalidChannelError("Quantum channel needs a Kraus family", float("inf"))
        kraus = np.array(self.kraus, dtype=complex, copy=True)
        if kraus.ndim != 3 or kraus.shape[1:] != (self.dim_out, self.dim_in) or not len(kraus):
            raise DimensionMismatchError(
                f"Kraus family of shape {kraus.shape} does not map "
                f"dimension {self.dim_in} into {self.dim_out}"
            )
        total = np.einsum("kji,kjl->il", kraus.conj(), kraus)
        residual = operator_norm(total - np.eye(self.dim_in))
        if residual > settings.tolerance.unitality:
            raise InvalidChannelError("Kraus family is not unital", residual)
        kraus.setflags(write=False)
        object.__setattr__(self, "kraus", kraus)

    def _validate_stochastic(self) -> None:
        if self.stochastic is None:
            raise InvalidChannelError("Classical channel needs a stochastic matrix", float("inf"))
        matrix = np.array(self.stochastic, dtype=float, copy=True)
        if matrix.shape != (self.dim_in, self.dim_out):
            raise DimensionMismatchError(
                f"Stochastic matrix of shape {matrix.shape}, expected {(self.dim_in, self.dim_out)}"
            )
        tol = settings.tolerance.stochastic
        if np.any(matrix < -tol):
            raise InvalidChannelError("Stochastic matrix has negative entries", float(-matrix.min()))
        residual = float(np.max(np.abs(matrix.sum(axis=1) - 1.0)))
        if residual > tol:
            raise InvalidChannelError("Stochastic matrix rows do not sum to one", residual)
        matrix.setflags(write=False)
        object.__setattr__(self, "stochastic", matrix)

    @classmethod
    def quantum(cls, kraus_ops: Sequence[npt.ArrayLike]) -> "MarkovChannel":
        """Kraus operators K_j: dim_in -> dim_out, acting as rho -> sum K rho K^dagger."""
        kraus = np.stack([as_complex_matrix(op) for op in kraus_ops])
        return cls("quantum", kraus.shape[2], kraus.shape[1], kraus=kraus)

    @classmethod
    def heisenberg_kraus(cls, kraus_ops: Sequence[npt.ArrayLike]) -> "MarkovChannel":
        """Channel F -> sum K F K^dagger from dim_in x dim_out operators with sum K K^dagger = I_in."""
        return cls.quantum([as_complex_matrix(op).conj().T for op in kraus_ops])

    @classmethod
    def classical(cls, matrix: npt.ArrayLike) -> "MarkovChannel":
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise DimensionMismatchError(f"Stochastic matrix must be 2-D, got shape {matrix.shape}")
        return cls("classical", matrix.shape[0], matrix.shape[1], stochastic=matrix)

    @classmethod
    def unitary(cls, unitary: npt.ArrayLike) -> "MarkovChannel":
        """Channel rho -> U rho U^dagger, Heisenberg action F -> U^dagger F U."""
        return cls.quantum([unitary])

    @classmethod
    def identity(cls, dim: int, kind: ChannelKind = "quantum") -> "MarkovChannel":
        if kind == "classical":
            return cls.classical(np.eye(dim))
        return cls.quantum([np.eye(dim, dtype=complex)])

    def apply(self, effect: npt.ArrayLike) -> np.ndarray:
        """Heisenberg action on an operator (or a function on the t2 spectrum)."""
        if self.kind == "quantum":
            matrix = as_complex_matrix(effect)
            if matrix.shape != (self.dim_out, self.dim_out):
                raise DimensionMismatchError(
                    f"Operator of shape {matrix.shape} on a channel into dimension {self.dim_out}"
                )
            return np.einsum("kji,jl,klm->im", self.kraus.conj(), matrix, self.kraus)

        values = np.asarray(effect)
        if values.ndim == 1:
            if values.size != self.dim_out:
                raise DimensionMismatchError(f"Function on {values.size} points, expected {self.dim_out}")
            return self.stochastic @ values
        matrix = as_complex_matrix(values)
        if matrix.shape != (self.dim_out, self.dim_out):
            raise DimensionMismatchError(
                f"Operator of shape {matrix.shape} on a channel into dimension {self.dim_out}"
            )
        off_diagonal = matrix - np.diag(np.diag(matrix))
        if np.max(np.abs(off_diagonal)) > settings.tolerance.commute:
            raise KindMismatchError("Classical channels act on diagonal operators only")
        return np.diag(self.stochastic @ np.diag(matrix)).astype(complex)

    def apply_to_state(self, rho: npt.ArrayLike) -> np.ndarray:
        """Predual (Schroedinger) action carrying a t1 state to t2."""
        if self.kind == "quantum":
            matrix = as_complex_matrix(rho)
            if matrix.shape != (self.dim_in, self.dim_in):
                raise DimensionMismatchError(
                    f"State of shape {matrix.shape} on a channel from dimension {self.dim_in}"
                )
            return np.einsum("kij,jl,kml->im", self.kraus, matrix, self.kraus.conj())

        values = np.asarray(rho)
        if values.ndim == 1:
            if values.size != self.dim_in:
                raise DimensionMismatchError(f"Distribution on {values.size} points, expected {self.dim_in}")
            return values @ self.stochastic
        return np.diag(np.real(np.diag(values)) @ self.stochastic).astype(complex)

    def superoperator(self) -> np.ndarray:
        """Heisenberg Liouville matrix acting on row-major vectorized operators."""
        self._require_quantum("superoperator")
        return sum(np.kron(k.conj().T, k.T) for k in self.kraus)

    @classmethod
    def from_superoperator(
        cls,
        superoperator: npt.ArrayLike,
        dim_in: int,
        dim_out: int,
        prune: Optional[float] = None,
    ) -> "MarkovChannel":
        """Canonical Kraus family of a Heisenberg Liouville matrix, via its Choi matrix."""
        prune = settings.zeno.prune_norm if prune is None else prune
        heisenberg = np.asarray(superoperator, dtype=complex)
        if heisenberg.shape != (dim_in**2, dim_out**2):
            raise DimensionMismatchError(
                f"Superoperator of shape {heisenberg.shape} does not map {dim_out} into {dim_in}"
            )
        schroedinger = heisenberg.conj().T
        choi = (
            schroedinger.reshape(dim_out, dim_out, dim_in, dim_in)
            .transpose(2, 0, 3, 1)
            .reshape(dim_in * dim_out, dim_in * dim_out)
        )
        try:
            values, vectors = linalg.eigh(0.5 * (choi + choi.conj().T))
        except linalg.LinAlgError as e:
            raise NumericalFailureError(f"Choi eigendecomposition failed: {e}") from e
        cutoff = prune * max(1.0, float(values[-1]))
        kraus = [
            np.sqrt(value) * vectors[:, index].reshape(dim_in, dim_out).T
            for index, value in enumerate(values)
            if value > cutoff
        ]
        if not kraus:
            raise InvalidChannelError("Superoperator has no positive Choi spectrum", float(values[-1]))
        return cls.quantum(kraus)

    def is_trace_preserving(self, tol: Optional[float] = None) -> bool:
        """True when the Heisenberg action preserves traces (the predual is unital)."""
        tol = settings.tolerance.unitality if tol is None else tol
        if self.kind == "classical":
            return self.dim_in == self.dim_out and bool(
                np.all(np.abs(self.stochastic.sum(axis=0) - 1.0) <= tol)
            )
        if self.dim_in != self.dim_out:
            return False
        total = np.einsum("kij,klj->il", self.kraus, self.kraus.conj())
        return operator_norm(total - np.eye(self.dim_out)) <= tol

    def _require_quantum(self, operation: str) -> None:
        if self.kind != "quantum":
            raise KindMismatchError(f"{operation} needs a quantum channel")


def compose(
    phi12: MarkovChannel, phi23: MarkovChannel, prune: Optional[float] = None
) -> MarkovChannel:
    """Chain rule Phi_13 = Phi_12 Phi_23 (first t1 -> t2, then t2 -> t3)."""
    if phi12.kind != phi23.kind:
        raise KindMismatchError(f"Cannot compose {phi12.kind} with {phi23.kind} channel")
    if phi12.dim_out != phi23.dim_in:
        raise DimensionMismatchError(
            f"Inner dimensions differ: {phi12.dim_out} vs {phi23.dim_in}"
        )
    if phi12.kind == "classical":
        return MarkovChannel.classical(phi12.stochastic @ phi23.stochastic)

    prune = settings.zeno.prune_norm if prune is None else prune
    products = np.einsum("mab,nbc->mnac", phi23.kraus, phi12.kraus).reshape(
        -1, phi23.dim_out, phi12.dim_in
    )
    norms = np.linalg.norm(products, axis=(1, 2))
    keep = norms >= prune
    if not np.any(keep):
        keep = norms == norms.max()
    if not np.all(keep):
        logger.debug("Pruned %d of %d Kraus operators", int(np.sum(~keep)), len(norms))
    return MarkovChannel("quantum", phi12.dim_in, phi23.dim_out, kraus=products[keep])


def pullback(phi: MarkovChannel, observable: AnyObservable) -> AnyObservable:
    """Observable at t1 whose effects are Phi(E_x)."""
    if isinstance(observable, ClassicalObservable):
        if phi.kind != "classical":
            raise KindMismatchError("Classical observables pull back through classical channels")
        if observable.omega_size != phi.dim_out:
            raise DimensionMismatchError(
                f"Observable on {observable.omega_size} points, channel into {phi.dim_out}"
            )
        return ClassicalObservable(
            phi.dim_in, observable.outcomes, observable.effects @ phi.stochastic.T
        )

    if observable.dim != phi.dim_out:
        raise DimensionMismatchError(
            f"Observable on dimension {observable.dim}, channel into {phi.dim_out}"
        )
    effects = []
    for effect in observable.effects:
        pulled = phi.apply(effect)
        effects.append(0.5 * (pulled + pulled.conj().T))
    return Observable(observable.outcomes, tuple(effects))


@dataclass(frozen=True)
class DeterminismCheck:
    """Whether a classical channel is a point map, and the map if so."""

    deterministic: bool
    point_map: Optional[Dict[int, int]] = None


def is_deterministic(phi: MarkovChannel, tol: Optional[float] = None) -> DeterminismCheck:
    """Classical determinism: every row is a 0/1 indicator within ``tol``."""
    if phi.kind != "classical":
        raise KindMismatchError("Determinism detection is implemented for classical channels")
    tol = settings.tolerance.stochastic if tol is None else tol

    point_map: Dict[int, int] = {}
    for row_index, row in enumerate(phi.stochastic):
        target = int(np.argmax(row))
        others = np.delete(row, target)
        if abs(row[target] - 1.0) > tol or np.any(np.abs(others) > tol):
            return DeterminismCheck(deterministic=False)
        point_map[row_index] = target
    return DeterminismCheck(deterministic=True, point_map=point_map)


@dataclass(frozen=True)
class NodeSpace:
    """Quantum dimension or classical spectrum size of a tree node."""

    kind: ChannelKind
    size: int

    def __post_init__(self) -> None:
        if self.kind not in ("quantum", "classical"):
            raise KindMismatchError(f"Unknown space kind {self.kind!r}")
        if self.size < 1:
            raise InvalidTreeError(f"Space size must be positive, got {self.size}")


@dataclass(frozen=True, eq=False)
class TreeNode:
    node_id: str
    space: NodeSpace
    observable: AnyObservable


@dataclass(frozen=True, eq=False)
class TreeEdge:
    parent: str
    child: str
    channel: MarkovChannel


@dataclass(frozen=True, eq=False)
class CausalTree:
    """Finite rooted tree of observables linked by Markov channels."""

    nodes: Tuple[TreeNode, ...]
    edges: Tuple[TreeEdge, ...] = ()
    _parents: Dict[str, str] = field(init=False, repr=False)
    _children: Dict[str, List[TreeEdge]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        nodes = tuple(self.nodes)
        edges = tuple(self.edges)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)

        by_id = {node.node_id: node for node in nodes}
        if len(by_id) != len(nodes):
            raise InvalidTreeError("Node ids must be unique")
        for node in nodes:
            self._check_node(node)

        parents: Dict[str, str] = {}
        children: Dict[str, List[TreeEdge]] = {node.node_id: [] for node in nodes}
        for edge in edges:
            if edge.parent not in by_id or edge.child not in by_id:
                raise InvalidTreeError(f"Edge {edge.parent!r} -> {edge.child!r} names an unknown node")
            if edge.child in parents:
                raise InvalidTreeError(f"Node {edge.child!r} has two parents")
            self._check_edge(edge, by_id[edge.parent].space, by_id[edge.child].space)
            parents[edge.child] = edge.parent
            children[edge.parent].append(edge)

        roots = [node.node_id for node in nodes if node.node_id not in parents]
        if len(roots) != 1:
            raise InvalidTreeError(f"Tree needs exactly one root, found {len(roots)}")
        for node in nodes:
            seen = {node.node_id}
            current = node.node_id
            while current in parents:
                current = parents[current]
                if current in seen:
                    raise InvalidTreeError(f"Parent map has a cycle through {current!r}")
                seen.add(current)

        object.__setattr__(self, "_parents", parents)
        object.__setattr__(self, "_children", children)

    @staticmethod
    def _check_node(node: TreeNode) -> None:
        space, observable = node.space, node.observable
        if space.kind == "classical":
            if not isinstance(observable, ClassicalObservable):
                raise KindMismatchError(f"Classical node {node.node_id!r} needs a classical observable")
            size = observable.omega_size
        else:
            if not isinstance(observable, Observable):
                raise KindMismatchError(f"Quantum node {node.node_id!r} needs a quantum observable")
            size = observable.dim
        if size != space.size:
            raise InvalidTreeError(
                f"Observable at {node.node_id!r} lives on size {size}, node space is {space.size}"
            )

    @staticmethod
    def _check_edge(edge: TreeEdge, parent: NodeSpace, child: NodeSpace) -> None:
        channel = edge.channel
        if channel.kind != parent.kind or channel.kind != child.kind:
            raise KindMismatchError(
                f"Edge {edge.parent!r} -> {edge.child!r}: {channel.kind} channel between "
                f"{parent.kind} and {child.kind} nodes"
            )
        if channel.dim_in != parent.size or channel.dim_out != child.size:
            raise InvalidTreeError(
                f"Edge {edge.parent!r} -> {edge.child!r} maps {channel.dim_in} -> {channel.dim_out}, "
                f"nodes are {parent.size} -> {child.size}"
            )

    @property
    def root(self) -> str:
        return next(node.node_id for node in self.nodes if node.node_id not in self._parents)

    def node(self, node_id: str) -> TreeNode:
        for node in self.nodes:
            if node.node_id == node_id:
                return node
        raise KeyError(node_id)

    def parent(self, node_id: str) -> Optional[str]:
        return self._parents.get(node_id)

    def children(self, node_id: str) -> List[str]:
        return [edge.child for edge in self._children[node_id]]

    def edge_to(self, node_id: str) -> TreeEdge:
        parent = self._parents[node_id]
        return next(edge for edge in self._children[parent] if edge.child == node_id)

    def depth_first_order(self) -> List[str]:
        """Pre-order from the root; the coordinate order of realized outcome tuples."""
        order: List[str] = []
        stack = [self.root]
        while stack:
            current = stack.pop()
            order.append(current)
            stack.extend(reversed(self.children(current)))
        return order

    @property
    def is_classical(self) -> bool:
        return all(node.space.kind == "classical" for node in self.nodes)


def _realize_subtree(tree: CausalTree, node_id: str, tol: Optional[float]) -> Observable:
    node = tree.node(node_id)
    own = node.observable.embed() if isinstance(node.observable, ClassicalObservable) else node.observable
    result = Observable(tuple((x,) for x in own.outcomes), own.effects)

    for edge in tree._children[node_id]:
        pulled = pullback(edge.channel, _realize_subtree(tree, edge.child, tol))
        try:
            joint = product_observable(result, pulled, tol)
        except NonCommutingError as e:
            raise NonCommutingError(
                "Commutativity condition fails for the product observable", e.residual, node=node_id
            ) from e
        result = Observable(tuple(a + b for a, b in joint.outcomes), joint.effects)
    return result


def realize(tree: CausalTree, tol: Optional[float] = None) -> Observable:
    """Root-time observable of a sequential causal observable.

    Outcome labels are tuples ordered by ``tree.depth_first_order()``.
    """
    realized = _realize_subtree(tree, tree.root, tol)
    logger.debug("Realized tree with %d nodes into %d outcomes", len(tree.nodes), len(realized.outcomes))
    return realized


def brute_force_tree_distribution(tree: CausalTree, rho: Union[State, int]) -> OutcomeDistribution:
    """Exact joint distribution of a classical tree by enumerating every point path."""
    if not tree.is_classical:
        raise NotClassicalError("Path enumeration needs every node to be classical")
    root_size = tree.node(tree.root).space.size
    if isinstance(rho, State):
        if rho.dim != root_size:
            raise DimensionMismatchError(f"State on dimension {rho.dim}, root spectrum has {root_size} points")
        start = rho.point_index()
        if start is None:
            raise NotClassicalError("Path enumeration needs a point state at the root")
    else:
        start = int(rho)
        if not 0 <= start < root_size:
            raise IndexOutOfRangeError(f"Point {start} outside a spectrum of size {root_size}")

    order = tree.depth_first_order()
    position = {node_id: index for index, node_id in enumerate(order)}
    observables = [tree.node(node_id).observable for node_id in order]
    edges = [tree.edge_to(node_id) for node_id in order[1:]]

    labels = list(itertools.product(*(obs.outcomes for obs in observables)))
    totals = np.zeros(len(labels))
    outcome_indices = list(itertools.product(*(range(len(obs.outcomes)) for obs in observables)))

    for tail in itertools.product(*(range(tree.node(n).space.size) for n in order[1:])):
        points = (start,) + tail
        weight = 1.0
        for edge in edges:
            weight *= edge.channel.stochastic[points[position[edge.parent]], points[position[edge.child]]]
        if weight == 0.0:
            continue
        for index, outcome in enumerate(outcome_indices):
            p = weight
            for obs, x, omega in zip(observables, outcome, points):
                p *= obs.effects[x, omega]
            totals[index] += p

    return outcome_distribution(labels, [float(p) for p in totals])
