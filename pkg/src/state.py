"""State definitions for the sub-tour elimination pipeline (Pydantic)."""

import math
import operator
from typing import Annotated, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_serializer, model_validator

from src.core.qubo import BinaryQuadraticModel
from src.core.samples import SampleSet
from src.tools.penalty_tools import Encoding, PenaltyConfig
from src.tools.tsp_tools import Subtour, TspInstance


class TourRecord(BaseModel):
    """A sampled bitstring that decodes to a single cycle through every city."""

    tour: List[int]
    bits: Tuple[int, ...]
    distance: float
    multiplicity: int = Field(default=1, ge=1)
    iteration: int


class RelaxationRecord(BaseModel):
    """A degree-feasible bitstring that still contains sub-tours."""

    bits: Tuple[int, ...]
    distance: float
    smallest_subtour: Subtour
    iteration: int


def merge_relaxation_solutions(
    left: List[RelaxationRecord], right: List[RelaxationRecord]
) -> List[RelaxationRecord]:
    """Append new relaxation solutions, keeping the first record of each edge bitstring."""
    res = list(left) if left else []
    seen = {rec.bits for rec in res}
    for rec in right or []:
        if rec.bits not in seen:
            seen.add(rec.bits)
            res.append(rec)
    return res


class IterationStats(BaseModel):
    iteration: int
    num_vars: int
    qubits: int
    connections: int
    num_constraints: int
    valid_count: int = 0
    relaxation_count: int = 0
    infeasible_count: int = 0
    total_count: int = 0
    min_distance: float = math.inf


class RunReport(BaseModel):
    """Metrics of one elimination run; non-finite distances serialise as null."""

    encoding: Encoding
    n: int
    valid_probability: float = Field(ge=0.0, le=1.0)
    mean_distance: Optional[float] = None
    std_distance: Optional[float] = None
    min_distance: float = math.inf
    optimum_reference: Optional[float] = None
    num_vars: int = 0
    qubits: int = 0
    connections: int = 0
    num_constraints: int = 0
    iterations_used: int = 0
    wall_time_ms: Optional[float] = None

    @model_validator(mode="after")
    def _not_below_optimum(self) -> "RunReport":
        if self.optimum_reference is not None and math.isfinite(self.min_distance):
            if self.min_distance < self.optimum_reference - 1e-9 * max(1.0, abs(self.optimum_reference)):
                raise ValueError(
                    f"min_distance {self.min_distance} is below the exact optimum {self.optimum_reference}"
                )
        return self

    @field_serializer("min_distance", "mean_distance", "std_distance", "optimum_reference")
    def _finite_or_null(self, v: Optional[float]) -> Optional[float]:
        if v is None or not math.isfinite(v):
            return None
        return v

    @property
    def found_valid(self) -> bool:
        return math.isfinite(self.min_distance)


class EliminationState(BaseModel):
    """Shared state flowing through the elimination graph."""

    # Inputs
    instance: TspInstance
    encoding: Encoding = "unbalanced"
    lambdas: PenaltyConfig = Field(default_factory=PenaltyConfig)
    max_iterations: int = Field(default=10, ge=1)
    cumulative: bool = False

    # Loop bookkeeping
    iteration: int = 0
    min_distance: float = math.inf
    subtour_constraints: List[Subtour] = Field(default_factory=list)
    new_constraints: int = 0

    solutions: Annotated[List[TourRecord], operator.add] = Field(default_factory=list)
    relaxation_solutions: Annotated[List[RelaxationRecord], merge_relaxation_solutions] = Field(
        default_factory=list
    )

    # Per-iteration artifacts
    current_model: Optional[BinaryQuadraticModel] = None
    current_samples: Optional[SampleSet] = None
    sample_history: Annotated[List[SampleSet], operator.add] = Field(default_factory=list)
    iteration_stats: Annotated[List[IterationStats], operator.add] = Field(default_factory=list)
    reasoning_trace: Annotated[List[str], operator.add] = Field(default_factory=list)

    model_config = ConfigDict(arbitrary_types_allowed=True)

    def get_valid_count(self) -> int:
        return sum(rec.multiplicity for rec in self.solutions)

    def get_total_count(self) -> int:
        return sum(ss.total_multiplicity for ss in self.sample_history)

    def best_solution(self) -> Optional[TourRecord]:
        if not self.solutions:
            return None
        return min(self.solutions, key=lambda rec: (rec.distance, rec.iteration))
