"""Config file formats for matrices, observables, trees, scenarios and Zeno sweeps.

Files are JSON or YAML, chosen by extension. Complex numbers are always
written as two-element ``[re, im]`` arrays; matrices as
``{"rows": n, "cols": m, "entries": [[re, im], ...]}`` in row-major order.
Schema violations raise ``ConfigError``; well-formed files describing
invalid mathematics raise the corresponding ``DomainError``.

Tree nodes carry ``"space": {"quantum": d}`` or ``{"classical": m}``
(``"kind"``/``"size"`` are accepted instead). Edge channels carry either
``"kraus"`` or ``"stochastic"``; Kraus operators in files are dim_in x dim_out
with the Heisenberg action F -> sum K F K^dagger.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Type, TypeVar, Union

import numpy as np
import numpy.typing as npt
import yaml
from pydantic import BaseModel, Field, ValidationError, validator

from core.errors import ConfigError
from tools.causality import CausalTree, MarkovChannel, NodeSpace, TreeEdge, TreeNode
from tools.measurement import ClassicalObservable, Observable
from tools.operators import PAULI_X, HermitianOperator, as_complex_matrix, as_complex_vector
from tools.uncertainty import JointScenario, builtin_qubit_scenario
from tools.zeno import ZenoConfig, default_n_values

logger = logging.getLogger(__name__)

BUILTIN_PREFIX = "builtin:"
YAML_SUFFIXES = {".yaml", ".yml"}
SPACE_KINDS = ("quantum", "classical")

ComplexPair = Tuple[float, float]
Label = Union[int, float, str]
PayloadT = TypeVar("PayloadT", bound=BaseModel)


def _complex(pair: ComplexPair) -> complex:
    return complex(pair[0], pair[1])


def _pairs(values: npt.ArrayLike) -> List[ComplexPair]:
    return [(float(z.real), float(z.imag)) for z in np.asarray(values, dtype=complex).reshape(-1)]


class MatrixPayload(BaseModel):
    rows: int = Field(..., ge=1)
    cols: int = Field(..., ge=1)
    entries: List[ComplexPair]

    class Config:
        extra = "forbid"

    @validator("entries")
    def validate_entries(cls, v, values):
        rows, cols = values.get("rows"), values.get("cols")
        if rows is not None and cols is not None and len(v) != rows * cols:
            raise ValueError(f"{len(v)} entries for a {rows}x{cols} matrix")
        return v

    def to_array(self) -> np.ndarray:
        values = np.array([_complex(pair) for pair in self.entries], dtype=complex)
        return as_complex_matrix(values.reshape(self.rows, self.cols))

    @classmethod
    def from_array(cls, matrix: npt.ArrayLike) -> "MatrixPayload":
        array = as_complex_matrix(matrix)
        return cls(rows=array.shape[0], cols=array.shape[1], entries=_pairs(array))


class VectorPayload(BaseModel):
    """Wrapper so a bare ``[[re, im], ...]`` list validates like the other payloads."""

    entries: List[ComplexPair] = Field(..., min_length=1)

    def to_array(self) -> np.ndarray:
        return as_complex_vector([_complex(pair) for pair in self.entries])


def _vector(entries: Sequence[ComplexPair]) -> np.ndarray:
    return VectorPayload(entries=list(entries)).to_array()


class ObservablePayload(BaseModel):
    outcomes: List[Label] = Field(..., min_length=1)
    effects: List[MatrixPayload] = Field(..., min_length=1)

    class Config:
        extra = "forbid"

    def build(self) -> Observable:
        return Observable(tuple(self.outcomes), tuple(e.to_array() for e in self.effects))

    @classmethod
    def from_observable(cls, observable: Observable) -> "ObservablePayload":
        return cls(
            outcomes=list(observable.outcomes),
            effects=[MatrixPayload.from_array(e) for e in observable.effects],
        )


class ClassicalObservablePayload(BaseModel):
    omega_size: int = Field(..., ge=1)
    outcomes: Optional[List[Label]] = None
    effects: List[List[float]] = Field(..., min_length=1)

    class Config:
        extra = "forbid"

    def build(self) -> ClassicalObservable:
        outcomes = self.outcomes
        if outcomes is None:
            outcomes = [f"x{index + 1}" for index in range(len(self.effects))]
        return ClassicalObservable(self.omega_size, tuple(outcomes), np.array(self.effects, dtype=float))


class ChannelPayload(BaseModel):
    """Kraus family (dim_in x dim_out operators) or row-stochastic matrix."""

    kind: Optional[Literal["quantum", "classical"]] = None
    kraus: Optional[List[MatrixPayload]] = None
    stochastic: Optional[List[List[float]]] = None

    class Config:
        extra = "forbid"

    @validator("stochastic", always=True)
    def validate_representation(cls, v, values):
        kind, kraus = values.get("kind"), values.get("kraus")
        if kraus and v:
            raise ValueError("Channel carries both 'kraus' and 'stochastic'")
        if kind == "quantum" and not kraus:
            raise ValueError("Quantum channel needs a non-empty 'kraus' list")
        if kind == "classical" and not v:
            raise ValueError("Classical channel needs a 'stochastic' matrix")
        if kind is None and not kraus and not v and "kraus" in values:
            raise ValueError("Channel needs 'kraus' or 'stochastic'")
        return v

    def build(self) -> MarkovChannel:
        if self.kraus:
            return MarkovChannel.heisenberg_kraus([k.to_array() for k in self.kraus])
        return MarkovChannel.classical(np.array(self.stochastic, dtype=float))


class NodePayload(BaseModel):
    id: str = Field(..., min_length=1)
    space: Optional[Dict[str, int]] = None
    kind: Optional[Literal["quantum", "classical"]] = None
    size: Optional[int] = Field(default=None, ge=1)
    observable: Dict[str, Any]

    class Config:
        extra = "forbid"

    @validator("space")
    def validate_space(cls, v):
        if v is None:
            return v
        if len(v) != 1 or next(iter(v)) not in SPACE_KINDS:
            raise ValueError("'space' must be {\"quantum\": d} or {\"classical\": m}")
        if next(iter(v.values())) < 1:
            raise ValueError("Space size must be positive")
        return v

    @validator("observable")
    def validate_descriptor(cls, v, values):
        if "space" not in values:
            return v
        explicit = values.get("kind") is not None or values.get("size") is not None
        if values["space"] is not None and explicit:
            raise ValueError("Give either 'space' or 'kind'/'size', not both")
        if values["space"] is None and (values.get("kind") is None or values.get("size") is None):
            raise ValueError("Node needs a 'space' descriptor")
        return v

    def node_space(self) -> NodeSpace:
        if self.space is not None:
            (kind, size), = self.space.items()
            return NodeSpace(kind, size)
        return NodeSpace(self.kind, self.size)

    def build(self) -> TreeNode:
        space = self.node_space()
        payload_type: Type[BaseModel]
        payload_type = ClassicalObservablePayload if space.kind == "classical" else ObservablePayload
        observable = _validate(payload_type, self.observable, f"observable of node {self.id!r}")
        return TreeNode(self.id, space, observable.build())


class EdgePayload(BaseModel):
    parent: str
    child: str
    channel: ChannelPayload

    class Config:
        extra = "forbid"


class TreePayload(BaseModel):
    nodes: List[NodePayload] = Field(..., min_length=1)
    edges: List[EdgePayload] = Field(default_factory=list)
    state: Optional[List[ComplexPair]] = None

    class Config:
        extra = "forbid"

    def build(self) -> CausalTree:
        return CausalTree(
            nodes=tuple(node.build() for node in self.nodes),
            edges=tuple(TreeEdge(e.parent, e.child, e.channel.build()) for e in self.edges),
        )


class ScenarioPayload(BaseModel):
    """Joint-measurement scenario; operator keys are ``A1, A2, Ahat1, Ahat2``."""

    builtin: Optional[Literal["qubit-xz"]] = None
    a1: Optional[MatrixPayload] = Field(default=None, alias="A1")
    a2: Optional[MatrixPayload] = Field(default=None, alias="A2")
    ahat1: Optional[MatrixPayload] = Field(default=None, alias="Ahat1")
    ahat2: Optional[MatrixPayload] = Field(default=None, alias="Ahat2")
    s: Optional[List[ComplexPair]] = None
    hbar: Optional[float] = Field(default=None, gt=0)
    states: List[List[ComplexPair]] = Field(default_factory=list)

    class Config:
        extra = "forbid"
        populate_by_name = True

    @validator("states", always=True)
    def validate_operators(cls, v, values):
        names = ("a1", "a2", "ahat1", "ahat2", "s")
        if any(name not in values for name in names):
            return v
        explicit = [values[name] for name in names]
        if values.get("builtin") is None and any(item is None for item in explicit):
            raise ValueError("Scenario needs 'builtin' or all of A1, A2, Ahat1, Ahat2, s")
        if values.get("builtin") is not None and any(item is not None for item in explicit):
            raise ValueError("A builtin scenario cannot also carry explicit operators")
        return v

    def build(self) -> JointScenario:
        if self.builtin is not None:
            return builtin_qubit_scenario(hbar=self.hbar)
        return JointScenario(
            a1=HermitianOperator(self.a1.to_array()),
            a2=HermitianOperator(self.a2.to_array()),
            ahat1=HermitianOperator(self.ahat1.to_array()),
            ahat2=HermitianOperator(self.ahat2.to_array()),
            s=_vector(self.s),
            hbar=self.hbar,
        )


class ZenoPayload(BaseModel):
    hamiltonian: MatrixPayload
    psi: List[ComplexPair] = Field(..., min_length=1)
    hbar: Optional[float] = Field(default=None, gt=0)
    total_time: Optional[float] = Field(default=None, ge=0)
    n_values: List[int] = Field(default_factory=lambda: list(default_n_values()), min_length=1)

    class Config:
        extra = "forbid"

    @validator("n_values")
    def validate_n_values(cls, v):
        if any(n < 1 for n in v):
            raise ValueError("Every N must be a positive integer")
        return v

    def build(self) -> ZenoConfig:
        return ZenoConfig(
            hamiltonian=HermitianOperator(self.hamiltonian.to_array()),
            psi=_vector(self.psi),
            n=self.n_values[0],
            hbar=self.hbar,
            total_time=self.total_time,
        )


@dataclass(frozen=True, eq=False)
class LoadedScenario:
    """A scenario together with the states listed in its config."""

    scenario: JointScenario
    states: Tuple[np.ndarray, ...] = ()


@dataclass(frozen=True, eq=False)
class ZenoSweep:
    config: ZenoConfig
    n_values: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class LoadedTree:
    tree: CausalTree
    state: Optional[np.ndarray] = None


def _validate(model: Type[PayloadT], data: Any, source: str) -> PayloadT:
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid {source}: {e}") from e


def load_document(path: Union[str, Path]) -> Any:
    """Parse a JSON or YAML file; YAML when the suffix is .yaml or .yml."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    try:
        if path.suffix.lower() in YAML_SUFFIXES:
            return yaml.safe_load(text)
        return json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"Cannot parse config {path}: {e}") from e


def dump_document(data: Any, path: Union[str, Path]) -> None:
    """Write JSON or YAML by extension."""
    path = Path(path)
    if isinstance(data, BaseModel):
        data = data.model_dump(mode="json", exclude_none=True, by_alias=True)
    if path.suffix.lower() in YAML_SUFFIXES:
        text = yaml.safe_dump(data, sort_keys=False)
    else:
        text = json.dumps(data, indent=2)
    path.write_text(text, encoding="utf-8")


def _builtin_name(reference: str) -> Optional[str]:
    if reference.startswith(BUILTIN_PREFIX):
        return reference[len(BUILTIN_PREFIX):]
    return None


def load_matrix(path: Union[str, Path]) -> np.ndarray:
    return _validate(MatrixPayload, load_document(path), f"matrix file {path}").to_array()


def load_observable(path: Union[str, Path]) -> Union[Observable, ClassicalObservable]:
    """Quantum observable, or a classical one when the file carries ``omega_size``."""
    data = load_document(path)
    if isinstance(data, dict) and "omega_size" in data:
        return _validate(ClassicalObservablePayload, data, f"observable file {path}").build()
    return _validate(ObservablePayload, data, f"observable file {path}").build()


def load_tree(path: Union[str, Path]) -> LoadedTree:
    payload = _validate(TreePayload, load_document(path), f"tree file {path}")
    state = None if payload.state is None else _vector(payload.state)
    return LoadedTree(tree=payload.build(), state=state)


def load_scenario(reference: str, hbar: Optional[float] = None) -> LoadedScenario:
    """Scenario from a file or ``builtin:qubit-xz``; ``hbar`` fills a missing value."""
    name = _builtin_name(reference)
    if name is not None:
        data: Any = {"builtin": name}
    else:
        data = load_document(reference)
    payload = _validate(ScenarioPayload, data, f"scenario {reference}")
    if payload.hbar is None and hbar is not None:
        payload = payload.model_copy(update={"hbar": hbar})
    states = tuple(_vector(state) for state in payload.states)
    logger.debug("Loaded scenario %s with %d listed states", reference, len(states))
    return LoadedScenario(scenario=payload.build(), states=states)


def builtin_zeno_payload() -> Dict[str, Any]:
    """sigma_x Hamiltonian, psi = |0>, N in 1, 10, 100, 1000."""
    return {
        "hamiltonian": MatrixPayload.from_array(PAULI_X).model_dump(),
        "psi": [(1.0, 0.0), (0.0, 0.0)],
        "n_values": list(default_n_values()),
    }


def load_zeno(reference: str, hbar: Optional[float] = None) -> ZenoSweep:
    """Zeno sweep from a file or ``builtin:zeno-qubit``; ``hbar`` fills a missing value."""
    name = _builtin_name(reference)
    if name is not None:
        if name != "zeno-qubit":
            raise ConfigError(f"Unknown builtin Zeno config {name!r}")
        data: Any = builtin_zeno_payload()
    else:
        data = load_document(reference)
    payload = _validate(ZenoPayload, data, f"Zeno config {reference}")
    if payload.hbar is None and hbar is not None:
        payload = payload.model_copy(update={"hbar": hbar})
    return ZenoSweep(config=payload.build(), n_values=tuple(payload.n_values))


def scenario_payload(scenario: JointScenario, states: Sequence[npt.ArrayLike] = ()) -> ScenarioPayload:
    return ScenarioPayload(
        a1=MatrixPayload.from_array(scenario.a1.matrix),
        a2=MatrixPayload.from_array(scenario.a2.matrix),
        ahat1=MatrixPayload.from_array(scenario.ahat1.matrix),
        ahat2=MatrixPayload.from_array(scenario.ahat2.matrix),
        s=_pairs(scenario.s),
        hbar=scenario.hbar,
        states=[_pairs(state) for state in states],
    )
