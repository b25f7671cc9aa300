"""Binary quadratic models, their Ising form, and the operations on both.

Every pair coefficient stored here is the TOTAL weight of ``x_i * x_j`` in the
polynomial, so

    E(x) = offset + sum_i linear[i] x_i + sum_{i<j} quadratic[i, j] x_i x_j

with no factor of two anywhere. Encoders emit totals.
"""

import logging
import math
from collections import defaultdict
from typing import Any, Dict, List, Mapping, Sequence, Set, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from src.core.errors import ContractError, DimensionError, ModelSizeError, VariableIndexError
from src.core.samples import SampleSet

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]

DEFAULT_EXHAUSTIVE_CAP = 24
_SPECTRUM_CHUNK_BITS = 16


def _check_sparse_terms(
    num_vars: int, linear: Mapping[int, float], quadratic: Mapping[Pair, float]
) -> None:
    for i, v in linear.items():
        if not 0 <= i < num_vars:
            raise ValueError(f"linear index {i} outside [0, {num_vars})")
        if v == 0.0 or not math.isfinite(v):
            raise ValueError(f"linear coefficient for {i} must be finite and nonzero, got {v}")
    for (i, j), v in quadratic.items():
        if not i < j:
            raise ValueError(f"quadratic key ({i}, {j}) must satisfy i < j")
        if not (0 <= i and j < num_vars):
            raise ValueError(f"quadratic key ({i}, {j}) outside [0, {num_vars})")
        if v == 0.0 or not math.isfinite(v):
            raise ValueError(f"quadratic coefficient for ({i}, {j}) must be finite and nonzero, got {v}")


def _without_zeros(terms: Mapping[Any, float]) -> Dict[Any, float]:
    return {k: float(v) for k, v in terms.items() if v != 0.0}


class BinaryQuadraticModel(BaseModel):
    """Immutable sparse QUBO in canonical form."""

    model_config = ConfigDict(frozen=True)

    num_vars: int = Field(ge=0)
    linear: Dict[int, float] = Field(default_factory=dict)
    quadratic: Dict[Pair, float] = Field(default_factory=dict)
    offset: float = 0.0

    _adjacency: Dict[int, Dict[int, float]] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _canonical(self) -> "BinaryQuadraticModel":
        _check_sparse_terms(self.num_vars, self.linear, self.quadratic)
        return self

    def model_post_init(self, __context: Any) -> None:
        adjacency: Dict[int, Dict[int, float]] = {}
        for (i, j), v in self.quadratic.items():
            adjacency.setdefault(i, {})[j] = v
            adjacency.setdefault(j, {})[i] = v
        self._adjacency = adjacency

    def neighbors(self, i: int) -> Dict[int, float]:
        """Pair coefficients incident to variable ``i``, keyed by the other variable."""
        return self._adjacency.get(i, {})

    def variables_in_use(self) -> Set[int]:
        used = set(self.linear)
        used.update(self._adjacency)
        return used

    def dense_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """Linear vector and upper-triangular pair matrix (U[i, j] = q_ij for i < j)."""
        lin = np.zeros(self.num_vars)
        upper = np.zeros((self.num_vars, self.num_vars))
        for i, v in self.linear.items():
            lin[i] = v
        for (i, j), v in self.quadratic.items():
            upper[i, j] = v
        return lin, upper


class IsingModel(BaseModel):
    """Spin form ``H(z) = offset + sum h_i z_i + sum_{i<j} J_ij z_i z_j`` with z in {-1, +1}."""

    model_config = ConfigDict(frozen=True)

    num_vars: int = Field(ge=0)
    fields: Dict[int, float] = Field(default_factory=dict)
    couplings: Dict[Pair, float] = Field(default_factory=dict)
    offset: float = 0.0

    @model_validator(mode="after")
    def _canonical(self) -> "IsingModel":
        _check_sparse_terms(self.num_vars, self.fields, self.couplings)
        return self


class ResourceCounts(BaseModel):
    """Logical hardware footprint of a model."""

    model_config = ConfigDict(frozen=True)

    num_vars: int
    qubits: int
    connections: int


class QuboBuilder:
    """Single-owner accumulator that produces a frozen ``BinaryQuadraticModel``."""

    def __init__(self, num_vars: int = 0):
        self.num_vars = num_vars
        self._linear: Dict[int, float] = defaultdict(float)
        self._quadratic: Dict[Pair, float] = defaultdict(float)
        self._offset = 0.0

    @classmethod
    def from_model(cls, model: BinaryQuadraticModel) -> "QuboBuilder":
        builder = cls(model.num_vars)
        builder._linear.update(model.linear)
        builder._quadratic.update(model.quadratic)
        builder._offset = model.offset
        return builder

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.num_vars:
            raise VariableIndexError(f"variable {i} outside [0, {self.num_vars})")

    def add_variables(self, count: int) -> List[int]:
        """Append ``count`` fresh variables and return their indices."""
        start = self.num_vars
        self.num_vars += count
        return list(range(start, self.num_vars))

    def add_offset(self, value: float) -> None:
        self._offset += value

    def add_linear(self, i: int, value: float) -> None:
        self._check_index(i)
        self._linear[i] += value

    def add_quadratic(self, i: int, j: int, value: float) -> None:
        self._check_index(i)
        self._check_index(j)
        if i == j:
            # x_i * x_i == x_i
            self._linear[i] += value
            return
        key = (i, j) if i < j else (j, i)
        self._quadratic[key] += value

    def add_squared_form(self, terms: Mapping[int, float], constant: float, weight: float) -> None:
        """Add ``weight * (sum_i terms[i] x_i + constant)**2`` expanded with x_i**2 = x_i."""
        if weight == 0.0:
            return
        items = [(i, a) for i, a in sorted(terms.items()) if a != 0]
        self.add_offset(weight * constant * constant)
        for idx, (i, a) in enumerate(items):
            self.add_linear(i, weight * (a * a + 2.0 * a * constant))
            for j, b in items[idx + 1:]:
                self.add_quadratic(i, j, 2.0 * weight * a * b)

    def build(self) -> BinaryQuadraticModel:
        return BinaryQuadraticModel(
            num_vars=self.num_vars,
            linear=_without_zeros(self._linear),
            quadratic=_without_zeros(self._quadratic),
            offset=self._offset,
        )


def _check_length(num_vars: int, values: Sequence[int]) -> None:
    if len(values) != num_vars:
        raise DimensionError(f"expected {num_vars} values, got {len(values)}")


def evaluate(model: BinaryQuadraticModel, bits: Sequence[int]) -> float:
    """Energy of a single {0,1} assignment."""
    _check_length(model.num_vars, bits)
    energy = model.offset
    for i, v in model.linear.items():
        if bits[i]:
            energy += v
    for (i, j), v in model.quadratic.items():
        if bits[i] and bits[j]:
            energy += v
    return energy


def energies(model: BinaryQuadraticModel, bit_matrix: np.ndarray) -> np.ndarray:
    """Vectorised energies for each row of a (rows, num_vars) 0/1 matrix."""
    X = np.asarray(bit_matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.num_vars:
        raise DimensionError(f"expected shape (*, {model.num_vars}), got {X.shape}")
    lin, upper = model.dense_arrays()
    return model.offset + X @ lin + np.einsum("ri,ri->r", X @ upper, X)


def ising_evaluate(model: IsingModel, spins: Sequence[int]) -> float:
    _check_length(model.num_vars, spins)
    energy = model.offset
    for i, h in model.fields.items():
        energy += h * spins[i]
    for (i, j), J in model.couplings.items():
        energy += J * spins[i] * spins[j]
    return energy


def to_ising(model: BinaryQuadraticModel) -> IsingModel:
    """Substitute x_i = (1 - z_i) / 2, carrying the constant into ``offset``."""
    fields: Dict[int, float] = defaultdict(float)
    couplings: Dict[Pair, float] = {}
    offset = model.offset
    for i, a in model.linear.items():
        fields[i] -= a / 2.0
        offset += a / 2.0
    for (i, j), b in model.quadratic.items():
        couplings[(i, j)] = b / 4.0
        fields[i] -= b / 4.0
        fields[j] -= b / 4.0
        offset += b / 4.0
    return IsingModel(
        num_vars=model.num_vars,
        fields=_without_zeros(fields),
        couplings=_without_zeros(couplings),
        offset=offset,
    )


def from_ising(model: IsingModel) -> BinaryQuadraticModel:
    """Substitute z_i = 1 - 2 x_i."""
    linear: Dict[int, float] = defaultdict(float)
    quadratic: Dict[Pair, float] = {}
    offset = model.offset
    for i, h in model.fields.items():
        linear[i] -= 2.0 * h
        offset += h
    for (i, j), J in model.couplings.items():
        quadratic[(i, j)] = 4.0 * J
        linear[i] -= 2.0 * J
        linear[j] -= 2.0 * J
        offset += J
    return BinaryQuadraticModel(
        num_vars=model.num_vars,
        linear=_without_zeros(linear),
        quadratic=_without_zeros(quadratic),
        offset=offset,
    )


def resource_counts(model: BinaryQuadraticModel) -> ResourceCounts:
    return ResourceCounts(
        num_vars=model.num_vars,
        qubits=len(model.variables_in_use()),
        connections=len(model.quadratic),
    )


def energy_spectrum(model: BinaryQuadraticModel, cap: int = DEFAULT_EXHAUSTIVE_CAP) -> np.ndarray:
    """Energies of all 2**n assignments; entry k is the assignment with x_i = bit i of k."""
    n = model.num_vars
    if n > cap:
        raise ModelSizeError(f"exhaustive enumeration capped at {cap} variables, model has {n}")
    total = 1 << n
    lin, upper = model.dense_arrays()
    shifts = np.arange(n, dtype=np.int64)
    chunk = 1 << min(n, _SPECTRUM_CHUNK_BITS)
    spectrum = np.empty(total)
    for start in range(0, total, chunk):
        ks = np.arange(start, min(start + chunk, total), dtype=np.int64)
        X = ((ks[:, None] >> shifts) & 1).astype(np.float64)
        spectrum[start:start + ks.size] = model.offset + X @ lin + np.einsum("ri,ri->r", X @ upper, X)
    return spectrum


def ground_states_exhaustive(model: BinaryQuadraticModel, cap: int = DEFAULT_EXHAUSTIVE_CAP) -> SampleSet:
    """Every assignment with its exact energy, lowest first."""
    spectrum = energy_spectrum(model, cap)
    logger.debug(f"Enumerated {spectrum.size} assignments, ground energy {spectrum.min():.6f}")
    return SampleSet.from_spectrum(spectrum, model.num_vars, source="exhaustive")


def spectrum_rank(
    model: BinaryQuadraticModel,
    bits: Sequence[int],
    cap: int = DEFAULT_EXHAUSTIVE_CAP,
    tol: float = 1e-9,
) -> int:
    """1 + number of assignments with energy strictly below that of ``bits``."""
    target = evaluate(model, bits)
    spectrum = energy_spectrum(model, cap)
    return 1 + int(np.count_nonzero(spectrum < target - tol))


def model_to_json(model: BinaryQuadraticModel) -> Dict[str, Any]:
    return {
        "num_vars": model.num_vars,
        "linear": [[i, v] for i, v in sorted(model.linear.items())],
        "quadratic": [[i, j, v] for (i, j), v in sorted(model.quadratic.items())],
        "offset": model.offset,
    }


def model_from_json(data: Mapping[str, Any]) -> BinaryQuadraticModel:
    builder = QuboBuilder(int(data["num_vars"]))
    for i, v in data.get("linear", []):
        builder.add_linear(int(i), float(v))
    for i, j, v in data.get("quadratic", []):
        if not int(i) < int(j):
            raise ContractError(f"quadratic entry ({i}, {j}) must satisfy i < j")
        builder.add_quadratic(int(i), int(j), float(v))
    builder.add_offset(float(data.get("offset", 0.0)))
    return builder.build()


def ising_to_json(model: IsingModel) -> Dict[str, Any]:
    return {
        "num_vars": model.num_vars,
        "fields": [[i, v] for i, v in sorted(model.fields.items())],
        "couplings": [[i, j, v] for (i, j), v in sorted(model.couplings.items())],
        "offset": model.offset,
    }


def ising_from_json(data: Mapping[str, Any]) -> IsingModel:
    couplings: Dict[Pair, float] = defaultdict(float)
    for i, j, v in data.get("couplings", []):
        if not int(i) < int(j):
            raise ContractError(f"coupling entry ({i}, {j}) must satisfy i < j")
        couplings[(int(i), int(j))] += float(v)
    fields: Dict[int, float] = defaultdict(float)
    for i, v in data.get("fields", []):
        fields[int(i)] += float(v)
    return IsingModel(
        num_vars=int(data["num_vars"]),
        fields=_without_zeros(fields),
        couplings=_without_zeros(couplings),
        offset=float(data.get("offset", 0.0)),
    )
