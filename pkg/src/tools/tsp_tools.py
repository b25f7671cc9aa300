"""Symmetric Euclidean TSP: instances, edge-variable model, tour analysis, exact oracles."""

import itertools
import logging
import math
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from scipy.optimize import Bounds, milp
from scipy.optimize import LinearConstraint as MilpConstraint

from src.core.errors import ContractError, DimensionError, InfeasibleConstraintError, ModelSizeError
from src.core.qubo import BinaryQuadraticModel, QuboBuilder
from src.tools.penalty_tools import LinearConstraint, is_satisfied

logger = logging.getLogger(__name__)

DEFAULT_HELD_KARP_CAP = 18
DEFAULT_ENUMERATION_CAP = 10


class TspInstance(BaseModel):
    """Cities in the plane with their Euclidean distance table."""

    model_config = ConfigDict(frozen=True)

    num_cities: int = Field(ge=3)
    coords: List[Tuple[float, float]]
    distances: List[List[float]]

    @model_validator(mode="after")
    def _consistent(self) -> "TspInstance":
        n = self.num_cities
        if len(self.coords) != n or len(self.distances) != n:
            raise ValueError(f"expected {n} coordinates and distance rows")
        for i in range(n):
            row = self.distances[i]
            if len(row) != n:
                raise ValueError(f"distance row {i} has {len(row)} entries, expected {n}")
            if row[i] != 0.0:
                raise ValueError(f"distance ({i}, {i}) must be zero")
            for j in range(i + 1, n):
                if row[j] != self.distances[j][i] or row[j] < 0:
                    raise ValueError(f"distance ({i}, {j}) must be symmetric and nonnegative")
                (xi, yi), (xj, yj) = self.coords[i], self.coords[j]
                if abs(row[j] - math.hypot(xi - xj, yi - yj)) > 1e-12:
                    raise ValueError(f"distance ({i}, {j}) disagrees with coordinates")
        return self

    @classmethod
    def from_coords(cls, coords: Sequence[Sequence[float]]) -> "TspInstance":
        if len(coords) < 3:
            raise ModelSizeError(f"a TSP instance needs at least 3 cities, got {len(coords)}")
        points = [(float(x), float(y)) for x, y in coords]
        n = len(points)
        table = [[0.0] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                d = math.hypot(points[i][0] - points[j][0], points[i][1] - points[j][1])
                table[i][j] = table[j][i] = d
        return cls(num_cities=n, coords=points, distances=table)

    def distance_matrix(self) -> np.ndarray:
        return np.asarray(self.distances, dtype=np.float64)


class EdgeIndexer:
    """Lexicographic numbering of the undirected edges (i, j), i < j."""

    def __init__(self, n: int):
        self.n = n
        self.pairs: List[Tuple[int, int]] = [(i, j) for i in range(n) for j in range(i + 1, n)]
        self._index: Dict[Tuple[int, int], int] = {p: k for k, p in enumerate(self.pairs)}

    @property
    def num_edges(self) -> int:
        return len(self.pairs)

    def index(self, i: int, j: int) -> int:
        """Variable index of sort(ij)."""
        if i == j:
            raise ContractError(f"no edge variable for self-loop ({i}, {i})")
        return self._index[(i, j) if i < j else (j, i)]

    def pair(self, k: int) -> Tuple[int, int]:
        return self.pairs[k]

    def incident(self, city: int) -> List[int]:
        return [self.index(city, other) for other in range(self.n) if other != city]


class Subtour(BaseModel):
    """City set Q of a cycle that does not visit every city."""

    model_config = ConfigDict(frozen=True)

    cities: Tuple[int, ...]

    @field_validator("cities")
    @classmethod
    def _sorted_unique(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        ordered = tuple(sorted(set(v)))
        if len(ordered) != len(v):
            raise ValueError(f"sub-tour cities must be distinct, got {v}")
        if len(ordered) < 3:
            raise ValueError(f"a sub-tour has at least 3 cities, got {len(ordered)}")
        return ordered

    @property
    def size(self) -> int:
        return len(self.cities)


class TourAnalysis(BaseModel):
    """Degree check, cycle decomposition and length of an edge bitstring."""

    degree_feasible: bool
    cycles: List[List[int]] = Field(default_factory=list)
    total_distance: float
    num_cities: int

    @property
    def is_valid_tour(self) -> bool:
        return self.degree_feasible and len(self.cycles) == 1 and len(self.cycles[0]) == self.num_cities

    @property
    def subtours(self) -> List[List[int]]:
        if not self.degree_feasible:
            return []
        return [cycle for cycle in self.cycles if len(cycle) < self.num_cities]


def generate_instance(n: int, seed: Optional[int]) -> TspInstance:
    """Cities drawn i.i.d. uniform on [-1, 1]^2."""
    if n < 3:
        raise ModelSizeError(f"a TSP instance needs at least 3 cities, got {n}")
    rng = np.random.default_rng(seed)
    coords = rng.uniform(-1.0, 1.0, size=(n, 2))
    return TspInstance.from_coords(coords.tolist())


def build_degree_relaxation(inst: TspInstance, lambda0: float) -> BinaryQuadraticModel:
    """Edge lengths plus ``lambda0 * (sum of incident edges - 2)**2`` for every city."""
    idx = EdgeIndexer(inst.num_cities)
    builder = QuboBuilder(idx.num_edges)
    for k, (i, j) in enumerate(idx.pairs):
        builder.add_linear(k, inst.distances[i][j])
    for city in range(inst.num_cities):
        builder.add_squared_form({k: 1.0 for k in idx.incident(city)}, -2.0, lambda0)
    return builder.build()


def subtour_constraint(q: Subtour, idx: EdgeIndexer) -> LinearConstraint:
    """sum of the edges inside Q <= |Q| - 1."""
    if not 3 <= q.size < idx.n:
        raise ContractError(f"sub-tour size must lie in [3, {idx.n}), got {q.size}")
    terms = {idx.index(i, j): 1 for i, j in itertools.combinations(q.cities, 2)}
    return LinearConstraint.less_equal(terms, q.size - 1)


def subtour_is_satisfied(q: Subtour, bits: Sequence[int], idx: EdgeIndexer) -> bool:
    return is_satisfied(subtour_constraint(q, idx), bits)


def _walk_cycles(adjacency: List[List[int]]) -> List[List[int]]:
    seen = [False] * len(adjacency)
    cycles = []
    for start in range(len(adjacency)):
        if seen[start]:
            continue
        cycle = [start]
        seen[start] = True
        prev, cur = start, adjacency[start][0]
        while cur != start:
            cycle.append(cur)
            seen[cur] = True
            a, b = adjacency[cur]
            prev, cur = cur, (b if a == prev else a)
        cycles.append(cycle)
    return cycles


def analyze(bits: Sequence[int], inst: TspInstance, idx: EdgeIndexer) -> TourAnalysis:
    if len(bits) < idx.num_edges:
        raise DimensionError(f"expected at least {idx.num_edges} edge bits, got {len(bits)}")
    n = inst.num_cities
    adjacency: List[List[int]] = [[] for _ in range(n)]
    total = 0.0
    for k, (i, j) in enumerate(idx.pairs):
        if bits[k]:
            adjacency[i].append(j)
            adjacency[j].append(i)
            total += inst.distances[i][j]
    feasible = all(len(nbrs) == 2 for nbrs in adjacency)
    cycles = _walk_cycles(adjacency) if feasible else []
    return TourAnalysis(degree_feasible=feasible, cycles=cycles, total_distance=total, num_cities=n)


def smallest_subtour(analysis: TourAnalysis) -> Subtour:
    """Fewest cities first; equal sizes resolved by the lexicographically smallest city set."""
    candidates = [tuple(sorted(cycle)) for cycle in analysis.subtours]
    if not candidates:
        raise ContractError("analysis contains no sub-tour")
    return Subtour(cities=min(candidates, key=lambda c: (len(c), c)))


def canonical_tour(tour: Sequence[int]) -> List[int]:
    """Rotate to start at city 0 and orient so the second city is below the last."""
    start = list(tour).index(0)
    rotated = list(tour[start:]) + list(tour[:start])
    if len(rotated) > 2 and rotated[1] > rotated[-1]:
        rotated = [rotated[0]] + rotated[:0:-1]
    return rotated


def tour_length(tour: Sequence[int], inst: TspInstance) -> float:
    return sum(inst.distances[tour[k - 1]][tour[k]] for k in range(len(tour)))


def tour_to_bits(tour: Sequence[int], idx: EdgeIndexer) -> Tuple[int, ...]:
    bits = [0] * idx.num_edges
    for k in range(len(tour)):
        bits[idx.index(tour[k - 1], tour[k])] = 1
    return tuple(bits)


def enumerate_tours(inst: TspInstance, cap: int = DEFAULT_ENUMERATION_CAP) -> List[Tuple[List[int], float]]:
    """All (n-1)!/2 distinct tours with their lengths."""
    n = inst.num_cities
    if n > cap:
        raise ModelSizeError(f"tour enumeration capped at {cap} cities, instance has {n}")
    tours = []
    for perm in itertools.permutations(range(1, n)):
        if perm[0] < perm[-1]:
            tour = [0, *perm]
            tours.append((tour, tour_length(tour, inst)))
    return tours


def held_karp(inst: TspInstance, cap: int = DEFAULT_HELD_KARP_CAP) -> Tuple[List[int], float]:
    """Exact optimum by dynamic programming over subsets of the cities other than 0.

    ``cost[mask, j]`` is the shortest path leaving city 0, visiting exactly the
    cities in ``mask`` (bit b <-> city b + 1) and ending at city j + 1. At 18
    cities the tables hold 2**17 x 17 entries (about 20 MB).
    """
    n = inst.num_cities
    if n > cap:
        raise ModelSizeError(f"Held-Karp capped at {cap} cities, instance has {n}")
    m = n - 1
    dist = inst.distance_matrix()
    inner = dist[1:, 1:]
    full = (1 << m) - 1
    cost = np.full((1 << m, m), np.inf)
    parent = np.full((1 << m, m), -1, dtype=np.int16)
    for j in range(m):
        cost[1 << j, j] = dist[0, j + 1]

    masks = np.arange(1 << m, dtype=np.int64)
    popcount = np.zeros(1 << m, dtype=np.int64)
    for b in range(m):
        popcount += (masks >> b) & 1

    for size in range(2, m + 1):
        layer = masks[popcount == size]
        for j in range(m):
            sel = layer[((layer >> j) & 1) == 1]
            prev = sel ^ (1 << j)
            candidates = cost[prev] + inner[:, j][None, :]
            best = np.argmin(candidates, axis=1)
            cost[sel, j] = candidates[np.arange(sel.size), best]
            parent[sel, j] = best

    closing = cost[full] + dist[1:, 0]
    last = int(np.argmin(closing))
    best_cost = float(closing[last])

    order = []
    mask, j = full, last
    while j >= 0:
        order.append(j + 1)
        nxt = int(parent[mask, j])
        mask ^= 1 << j
        j = nxt
    tour = canonical_tour([0, *reversed(order)])
    logger.debug(f"Held-Karp optimum for {n} cities: {best_cost:.6f}")
    return tour, tour_length(tour, inst)


def exact_relaxation(
    inst: TspInstance, constraints: Sequence[Subtour] = ()
) -> Tuple[Tuple[int, ...], float]:
    """Shortest degree-feasible edge set that satisfies every sub-tour constraint.

    Solved as a 0/1 integer program over the edge variables, so the result is
    the exact optimum of the degree relaxation (a tour once enough sub-tours
    are cut).
    """
    idx = EdgeIndexer(inst.num_cities)
    cost = np.array([inst.distances[i][j] for i, j in idx.pairs])
    degree = np.zeros((inst.num_cities, idx.num_edges))
    for city in range(inst.num_cities):
        degree[city, idx.incident(city)] = 1.0
    rows = [MilpConstraint(degree, 2.0, 2.0)]
    if constraints:
        cuts = np.zeros((len(constraints), idx.num_edges))
        rhs = np.empty(len(constraints))
        for r, q in enumerate(constraints):
            c = subtour_constraint(q, idx)
            for k, w in c.terms.items():
                cuts[r, k] = w
            rhs[r] = c.rhs
        rows.append(MilpConstraint(cuts, -np.inf, rhs))

    result = milp(cost, constraints=rows, integrality=np.ones(idx.num_edges), bounds=Bounds(0.0, 1.0))
    if result.status != 0 or result.x is None:
        raise InfeasibleConstraintError(f"no degree-feasible edge set: {result.message}")
    bits = tuple(int(round(v)) for v in result.x)
    return bits, float(sum(cost[k] for k, b in enumerate(bits) if b))


def instance_to_json(inst: TspInstance) -> Dict[str, Any]:
    return {"n": inst.num_cities, "coords": [[x, y] for x, y in inst.coords]}


def instance_from_json(data: Mapping[str, Any]) -> TspInstance:
    coords = data["coords"]
    if int(data.get("n", len(coords))) != len(coords):
        raise ContractError(f"instance declares n={data['n']} but lists {len(coords)} coordinates")
    return TspInstance.from_coords(coords)
