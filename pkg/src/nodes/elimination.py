"""Graph nodes of the iterative sub-tour elimination loop."""

import logging
import math
from typing import Any, Dict, List, Sequence

from src.core.qubo import BinaryQuadraticModel, resource_counts
from src.state import EliminationState, Encoding, IterationStats, RelaxationRecord, TourRecord
from src.tools.penalty_tools import PenaltyConfig, encode_constraint
from src.tools.sampler_tools import Sampler
from src.tools.tsp_tools import (
    EdgeIndexer,
    Subtour,
    TspInstance,
    analyze,
    build_degree_relaxation,
    canonical_tour,
    smallest_subtour,
    subtour_constraint,
)

logger = logging.getLogger(__name__)


def build_iteration_model(
    inst: TspInstance,
    constraints: Sequence[Subtour],
    encoding: Encoding,
    lambdas: PenaltyConfig,
) -> BinaryQuadraticModel:
    """Degree relaxation plus one encoded inequality per sub-tour constraint.

    The ``relaxation`` encoding ignores ``constraints``.
    """
    model = build_degree_relaxation(inst, lambdas.lambda0)
    if encoding == "relaxation":
        return model
    idx = EdgeIndexer(inst.num_cities)
    for q in constraints:
        model = encode_constraint(model, subtour_constraint(q, idx), encoding, lambdas)
    return model


def within_bound(distance: float, bound: float) -> bool:
    """distance <= bound up to a relative tolerance of 1e-9."""
    if math.isinf(bound):
        return bound > 0
    return distance <= bound + 1e-9 * max(1.0, abs(bound))


class ModelBuilderNode:
    """Rebuilds the model from scratch for the current constraint set."""

    def __call__(self, state: EliminationState) -> Dict[str, Any]:
        model = build_iteration_model(
            state.instance, state.subtour_constraints, state.encoding, state.lambdas
        )
        counts = resource_counts(model)
        logger.info(
            f"🧱 Iteration {state.iteration + 1}: {len(state.subtour_constraints)} sub-tour constraints, "
            f"{counts.num_vars} vars, {counts.connections} connections"
        )
        return {"current_model": model}


class SamplerNode:
    """Draws a sample set from the current model; sampler errors propagate."""

    def __init__(self, sampler: Sampler):
        self.sampler = sampler

    def __call__(self, state: EliminationState) -> Dict[str, Any]:
        samples = self.sampler.sample(state.current_model)
        lowest = f", lowest energy {samples.first.energy:.6f}" if samples else ""
        logger.info(
            f"🎲 {self.sampler.name}: {len(samples)} distinct states "
            f"({samples.total_multiplicity} reads){lowest}"
        )
        return {"current_samples": samples, "sample_history": [samples]}


class ClassifierNode:
    """Splits samples into valid tours, sub-tour relaxations and degree-infeasible states."""

    def __call__(self, state: EliminationState) -> Dict[str, Any]:
        inst = state.instance
        idx = EdgeIndexer(inst.num_cities)
        num_edges = idx.num_edges
        iteration = state.iteration + 1

        # Slack bits do not change the tour, so samples are grouped per edge pattern.
        solutions: List[TourRecord] = []
        relaxations: List[RelaxationRecord] = []
        valid = relaxed = infeasible = 0
        min_distance = state.min_distance

        for group in state.current_samples.group_by_prefix(num_edges):
            edge_bits = group.bits
            analysis = analyze(edge_bits, inst, idx)

            if not analysis.degree_feasible:
                infeasible += group.count
            elif analysis.is_valid_tour:
                valid += group.count
                solutions.append(
                    TourRecord(
                        tour=canonical_tour(analysis.cycles[0]),
                        bits=edge_bits,
                        distance=analysis.total_distance,
                        multiplicity=group.count,
                        iteration=iteration,
                    )
                )
                min_distance = min(min_distance, analysis.total_distance)
            else:
                relaxed += group.count
                relaxations.append(
                    RelaxationRecord(
                        bits=edge_bits,
                        distance=analysis.total_distance,
                        smallest_subtour=smallest_subtour(analysis),
                        iteration=iteration,
                    )
                )

        counts = resource_counts(state.current_model)
        stats = IterationStats(
            iteration=iteration,
            num_vars=counts.num_vars,
            qubits=counts.qubits,
            connections=counts.connections,
            num_constraints=len(state.subtour_constraints),
            valid_count=valid,
            relaxation_count=relaxed,
            infeasible_count=infeasible,
            total_count=state.current_samples.total_multiplicity,
            min_distance=min_distance,
        )
        logger.info(
            f"🔎 Iteration {iteration}: {valid} valid, {relaxed} with sub-tours, "
            f"{infeasible} degree-infeasible; best tour {min_distance:.6f}"
        )
        return {
            "solutions": solutions,
            "relaxation_solutions": relaxations,
            "min_distance": min_distance,
            "iteration_stats": [stats],
        }


class ConstraintUpdateNode:
    """Collects the smallest sub-tour of every relaxation no longer than the best tour.

    The constraint set is rebuilt from scratch each iteration unless the state
    asks for cumulative constraints.
    """

    def __call__(self, state: EliminationState) -> Dict[str, Any]:
        iteration = state.iteration + 1
        previous = set(state.subtour_constraints)
        selected = {
            rec.smallest_subtour
            for rec in state.relaxation_solutions
            if within_bound(rec.distance, state.min_distance)
        }
        if state.cumulative:
            selected |= previous
        ordered = sorted(selected, key=lambda q: (q.size, q.cities))
        added = [q for q in ordered if q not in previous]

        if added:
            msg = f"Iteration {iteration}: added {[list(q.cities) for q in added]}"
        else:
            msg = f"Iteration {iteration}: no new sub-tour constraints"
        logger.info(f"📐 {msg}")
        return {
            "subtour_constraints": ordered,
            "new_constraints": len(added),
            "iteration": iteration,
            "reasoning_trace": [msg],
        }
