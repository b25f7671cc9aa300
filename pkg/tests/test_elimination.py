"""Tests for the elimination nodes, the LangGraph loop and run reports."""

import json
import math

import pytest

from src.core.qubo import resource_counts
from src.core.samples import SampleSet
from src.graph import eliminate_subtours
from src.nodes.elimination import (
    ClassifierNode,
    ConstraintUpdateNode,
    build_iteration_model,
    within_bound,
)
from src.state import EliminationState, RelaxationRecord, TourRecord
from src.tools.penalty_tools import PenaltyConfig
from src.tools.report_tools import compute_report, generate_markdown_report
from src.tools.sampler_tools import ExhaustiveSampler
from src.tools.tsp_tools import (
    EdgeIndexer,
    Subtour,
    build_degree_relaxation,
    generate_instance,
    held_karp,
    tour_length,
    tour_to_bits,
)


class FailingSampler:
    name = "broken"

    def sample(self, model):
        raise RuntimeError("sampler backend unavailable")


def _triangle_pair_bits(idx: EdgeIndexer):
    a = tour_to_bits([0, 1, 2], idx)
    b = tour_to_bits([3, 4, 5], idx)
    return tuple(x | y for x, y in zip(a, b))


def test_build_iteration_model_counts(two_clusters):
    q = [Subtour(cities=(0, 1, 2))]
    assert build_iteration_model(two_clusters, q, "slack", PenaltyConfig()).num_vars == 17
    assert build_iteration_model(two_clusters, q, "unbalanced", PenaltyConfig()).num_vars == 15
    relaxed = build_iteration_model(two_clusters, q, "relaxation", PenaltyConfig())
    assert relaxed == build_degree_relaxation(two_clusters, 0.88)


def test_within_bound():
    assert within_bound(1e9, math.inf)
    assert within_bound(3.0, 3.0)
    assert within_bound(3.0 + 1e-12, 3.0)
    assert not within_bound(3.1, 3.0)


@pytest.mark.parametrize(
    "encoding, top_k",
    [("unbalanced", None), ("slack", 2**16)],
)
def test_two_clusters_pipeline_exact(two_clusters, encoding, top_k):
    state, report = eliminate_subtours(
        two_clusters, encoding, None, ExhaustiveSampler(top_k=top_k), max_iterations=5
    )
    _, optimum = held_karp(two_clusters)

    assert [q.cities for q in state.subtour_constraints] == [(0, 1, 2)]
    assert report.iterations_used == 2
    assert report.min_distance == pytest.approx(optimum)
    assert report.optimum_reference == pytest.approx(optimum)
    assert report.num_constraints == 1

    per_constraint = 2 if encoding == "slack" else 0
    for stats in state.iteration_stats:
        assert stats.num_vars == 15 + per_constraint * stats.num_constraints

    best = [s.min_distance for s in state.iteration_stats]
    assert all(later <= earlier for earlier, later in zip(best, best[1:]))


def test_hexagon_needs_no_constraints(hexagon):
    state, report = eliminate_subtours(hexagon, "unbalanced", None, ExhaustiveSampler())
    assert report.iterations_used == 1
    assert state.subtour_constraints == []
    assert report.min_distance == pytest.approx(6.0)
    assert "no new sub-tour constraints" in state.reasoning_trace[-1]


def test_five_cities_single_iteration():
    inst = generate_instance(5, seed=2)
    state, report = eliminate_subtours(inst, "slack", None, ExhaustiveSampler())
    assert report.iterations_used == 1
    assert state.relaxation_solutions == []
    assert report.min_distance == pytest.approx(held_karp(inst)[1])


def test_relaxation_encoding_stops_after_one_iteration(two_clusters):
    state, report = eliminate_subtours(two_clusters, "relaxation", None, ExhaustiveSampler(), max_iterations=5)
    assert report.iterations_used == 1
    assert len(state.iteration_stats) == 1
    assert report.num_vars == 15


def test_sampler_failure_propagates(two_clusters):
    with pytest.raises(RuntimeError, match="unavailable"):
        eliminate_subtours(two_clusters, "unbalanced", None, FailingSampler())


def test_classifier_splits_samples(two_clusters):
    idx = EdgeIndexer(6)
    tour = [0, 1, 3, 4, 5, 2]
    samples = SampleSet.from_records(
        [
            (tour_to_bits(tour, idx), 1.0, 3),
            (_triangle_pair_bits(idx), 2.0, 2),
            ((0,) * idx.num_edges, 3.0, 5),
        ],
        source="test",
    )
    state = EliminationState(
        instance=two_clusters,
        current_model=build_degree_relaxation(two_clusters, 0.88),
        current_samples=samples,
    )

    update = ClassifierNode()(state)

    stats = update["iteration_stats"][0]
    assert (stats.valid_count, stats.relaxation_count, stats.infeasible_count) == (3, 2, 5)
    assert stats.total_count == 10
    assert stats.iteration == 1
    assert update["solutions"][0].tour == [0, 1, 3, 4, 5, 2]
    assert update["solutions"][0].multiplicity == 3
    assert update["relaxation_solutions"][0].smallest_subtour.cities == (0, 1, 2)
    assert update["min_distance"] == pytest.approx(tour_length(tour, two_clusters))


def test_classifier_ignores_slack_bits(two_clusters):
    idx = EdgeIndexer(6)
    tour_bits = tour_to_bits([0, 1, 2, 3, 4, 5], idx)
    samples = SampleSet.from_records(
        [((*tour_bits, 0, 1), 1.0, 1), ((*tour_bits, 1, 0), 1.5, 1)], source="test"
    )
    model = build_iteration_model(two_clusters, [Subtour(cities=(0, 1, 2))], "slack", PenaltyConfig())
    state = EliminationState(instance=two_clusters, current_model=model, current_samples=samples)

    update = ClassifierNode()(state)

    assert [rec.bits for rec in update["solutions"]] == [tour_bits]
    assert update["solutions"][0].multiplicity == 2
    assert update["iteration_stats"][0].valid_count == 2
    assert update["iteration_stats"][0].num_vars == 17


def _update_state(two_clusters, cumulative: bool) -> EliminationState:
    return EliminationState(
        instance=two_clusters,
        cumulative=cumulative,
        min_distance=5.0,
        subtour_constraints=[Subtour(cities=(3, 4, 5))],
        relaxation_solutions=[
            RelaxationRecord(bits=(1,), distance=4.0, smallest_subtour=Subtour(cities=(0, 1, 2)), iteration=1),
            RelaxationRecord(bits=(0,), distance=6.0, smallest_subtour=Subtour(cities=(1, 2, 3)), iteration=1),
        ],
    )


def test_constraint_update_resets_by_default(two_clusters):
    update = ConstraintUpdateNode()(_update_state(two_clusters, cumulative=False))
    assert [q.cities for q in update["subtour_constraints"]] == [(0, 1, 2)]
    assert update["new_constraints"] == 1
    assert update["iteration"] == 1
    assert "added [[0, 1, 2]]" in update["reasoning_trace"][0]


def test_constraint_update_cumulative(two_clusters):
    update = ConstraintUpdateNode()(_update_state(two_clusters, cumulative=True))
    assert [q.cities for q in update["subtour_constraints"]] == [(0, 1, 2), (3, 4, 5)]
    assert update["new_constraints"] == 1


def _report_state(two_clusters, solutions, total):
    history = [SampleSet.from_records([((0,) * 15, 0.0, total)], source="test")] if total else []
    return EliminationState(
        instance=two_clusters,
        solutions=solutions,
        sample_history=history,
        min_distance=min((rec.distance for rec in solutions), default=math.inf),
        iteration=1,
    )


def test_compute_report_probability_and_moments(two_clusters):
    solutions = [
        TourRecord(tour=[0, 1, 2, 3, 4, 5], bits=(0,) * 15, distance=4.0, multiplicity=1, iteration=1),
        TourRecord(tour=[0, 1, 2, 3, 5, 4], bits=(1,) * 15, distance=6.0, multiplicity=2, iteration=1),
    ]
    report = compute_report(_report_state(two_clusters, solutions, 10), held_karp_cap=0)

    assert report.valid_probability == pytest.approx(0.3)
    assert report.mean_distance == pytest.approx(16.0 / 3.0)
    assert report.std_distance == pytest.approx(math.sqrt(8.0 / 9.0))
    assert report.min_distance == 4.0
    assert report.optimum_reference is None
    assert report.num_vars == 0


def test_compute_report_identical_tours_have_zero_spread(two_clusters):
    solutions = [TourRecord(tour=[0, 1, 2, 3, 4, 5], bits=(0,) * 15, distance=4.0, multiplicity=5, iteration=1)]
    report = compute_report(_report_state(two_clusters, solutions, 5), held_karp_cap=0)
    assert report.valid_probability == 1.0
    assert report.std_distance == 0.0


def test_compute_report_without_valid_tours(two_clusters):
    report = compute_report(_report_state(two_clusters, [], 10), held_karp_cap=0)
    data = json.loads(report.model_dump_json())
    assert report.valid_probability == 0.0
    assert data["min_distance"] is None
    assert data["mean_distance"] is None
    assert "No valid tour was sampled." in generate_markdown_report(report)


def test_markdown_report_for_pipeline_run(two_clusters):
    state, report = eliminate_subtours(two_clusters, "unbalanced", None, ExhaustiveSampler())
    md = generate_markdown_report(report, state)

    assert md.startswith("# Sub-tour Elimination Report")
    assert "[!NOTE]" in md
    assert "## Iterations" in md
    assert "- [0, 1, 2]" in md
    assert "**Unbalanced penalty of the smallest constraint (W = 2):**" in md
    assert "| -1 | 1.0000 |" in md
    assert "| 1 | 0.0800 |" in md
    assert "**Reasoning Trace:**" in md
    assert resource_counts(state.current_model).num_vars == report.num_vars
