"""Tests for TSP instances, the edge-variable model and tour analysis."""

import itertools
import math

import pytest
from pydantic import ValidationError

from src.core.errors import ContractError, ModelSizeError
from src.core.qubo import evaluate, resource_counts
from src.tools.tsp_tools import (
    EdgeIndexer,
    Subtour,
    TspInstance,
    analyze,
    build_degree_relaxation,
    canonical_tour,
    enumerate_tours,
    exact_relaxation,
    generate_instance,
    held_karp,
    instance_from_json,
    instance_to_json,
    smallest_subtour,
    subtour_constraint,
    subtour_is_satisfied,
    tour_length,
    tour_to_bits,
)


def _bits_for_cycles(cycles, idx: EdgeIndexer):
    bits = [0] * idx.num_edges
    for cycle in cycles:
        for k, b in enumerate(tour_to_bits(cycle, idx)):
            bits[k] |= b
    return tuple(bits)


@pytest.mark.parametrize("n", [6, 8, 10, 12, 15])
def test_degree_relaxation_resource_counts(n):
    inst = generate_instance(n, seed=n)
    counts = resource_counts(build_degree_relaxation(inst, 0.88))
    assert counts.num_vars == n * (n - 1) // 2
    assert counts.qubits == n * (n - 1) // 2
    assert counts.connections == n * (n - 1) * (n - 2) // 2


def test_edge_indexer_order():
    idx = EdgeIndexer(4)
    assert idx.pairs == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    assert idx.index(3, 1) == idx.index(1, 3) == 4
    assert sorted(idx.incident(0)) == [0, 1, 2]
    with pytest.raises(ContractError):
        idx.index(2, 2)


def test_tour_energy_equals_length():
    inst = generate_instance(7, seed=4)
    idx = EdgeIndexer(7)
    model = build_degree_relaxation(inst, 0.88)
    tour = [0, 3, 1, 6, 2, 5, 4]
    assert evaluate(model, tour_to_bits(tour, idx)) == pytest.approx(tour_length(tour, inst))
    # no edges: every city misses both of its degree units
    assert evaluate(model, (0,) * idx.num_edges) == pytest.approx(7 * 4 * 0.88)


def test_subtour_constraint_terms():
    idx = EdgeIndexer(10)
    c = subtour_constraint(Subtour(cities=(7, 2, 5)), idx)
    assert sorted(c.terms) == sorted([idx.index(2, 5), idx.index(2, 7), idx.index(5, 7)])
    assert set(c.terms.values()) == {1}
    assert (c.sense, c.rhs) == ("le", 2)

    c4 = subtour_constraint(Subtour(cities=(0, 1, 2, 3)), idx)
    assert len(c4.terms) == 6
    assert c4.rhs == 3


def test_subtour_validation():
    assert Subtour(cities=(5, 2, 7)).cities == (2, 5, 7)
    with pytest.raises(ValidationError):
        Subtour(cities=(1, 1, 2))
    with pytest.raises(ValidationError):
        Subtour(cities=(0, 1))
    with pytest.raises(ContractError):
        subtour_constraint(Subtour(cities=(0, 1, 2)), EdgeIndexer(3))


def test_analyze_valid_tour(hexagon):
    idx = EdgeIndexer(6)
    analysis = analyze(tour_to_bits([0, 1, 2, 3, 4, 5], idx), hexagon, idx)
    assert analysis.is_valid_tour
    assert analysis.subtours == []
    assert analysis.total_distance == pytest.approx(6.0)


def test_analyze_two_triangles(hexagon):
    idx = EdgeIndexer(6)
    bits = _bits_for_cycles([[0, 2, 4], [1, 3, 5]], idx)
    analysis = analyze(bits, hexagon, idx)
    assert analysis.degree_feasible
    assert not analysis.is_valid_tour
    assert sorted(sorted(c) for c in analysis.subtours) == [[0, 2, 4], [1, 3, 5]]
    assert analysis.total_distance == pytest.approx(6 * math.sqrt(3))
    assert smallest_subtour(analysis).cities == (0, 2, 4)
    assert not subtour_is_satisfied(Subtour(cities=(0, 2, 4)), bits, idx)
    assert subtour_is_satisfied(Subtour(cities=(0, 1, 2)), bits, idx)


def test_analyze_degree_infeasible(hexagon):
    idx = EdgeIndexer(6)
    analysis = analyze((0,) * idx.num_edges, hexagon, idx)
    assert not analysis.degree_feasible
    assert not analysis.is_valid_tour
    assert analysis.subtours == []
    with pytest.raises(ContractError):
        smallest_subtour(analysis)


def test_smallest_subtour_prefers_fewest_cities():
    inst = generate_instance(11, seed=1)
    idx = EdgeIndexer(11)
    bits = _bits_for_cycles([list(range(8)), [8, 9, 10]], idx)
    assert smallest_subtour(analyze(bits, inst, idx)).cities == (8, 9, 10)


def test_smallest_subtour_rejects_full_tour(hexagon):
    idx = EdgeIndexer(6)
    with pytest.raises(ContractError):
        smallest_subtour(analyze(tour_to_bits([0, 1, 2, 3, 4, 5], idx), hexagon, idx))


def test_canonical_tour():
    assert canonical_tour([2, 3, 0, 1]) == [0, 1, 2, 3]
    assert canonical_tour([0, 3, 2, 1]) == [0, 1, 2, 3]
    assert canonical_tour([1, 0, 4, 2, 3]) == [0, 1, 3, 2, 4]


def test_held_karp_small_shapes():
    triangle = TspInstance.from_coords([(0, 0), (1, 0), (0, 1)])
    assert held_karp(triangle)[1] == pytest.approx(2 + math.sqrt(2))

    square = TspInstance.from_coords([(0, 0), (2, 2), (2, 0), (0, 2)])
    tour, length = held_karp(square)
    assert length == pytest.approx(8.0)
    assert tour == [0, 2, 1, 3]


@pytest.mark.parametrize("n", [3, 4, 5, 6, 7, 8])
def test_enumerated_tour_count(n):
    tours = enumerate_tours(generate_instance(n, seed=n))
    assert len(tours) == math.factorial(n - 1) // 2
    assert len({tuple(canonical_tour(t)) for t, _ in tours}) == len(tours)


@pytest.mark.parametrize("n", [4, 5, 6, 7])
def test_every_tour_satisfies_every_subtour_constraint(n):
    inst = generate_instance(n, seed=n)
    idx = EdgeIndexer(n)
    subtours = [
        Subtour(cities=q) for size in range(3, n) for q in itertools.combinations(range(n), size)
    ]
    for tour, _ in enumerate_tours(inst):
        bits = tour_to_bits(tour, idx)
        assert all(subtour_is_satisfied(q, bits, idx) for q in subtours)


def test_held_karp_matches_enumeration():
    inst = generate_instance(8, seed=21)
    tours = enumerate_tours(inst)
    assert len(tours) == 2520
    tour, length = held_karp(inst)
    assert length == pytest.approx(min(t[1] for t in tours))
    assert sorted(tour) == list(range(8))
    assert tour == canonical_tour(tour)
    assert tour_length(tour, inst) == pytest.approx(length)


def test_exact_oracles_enforce_caps():
    inst = generate_instance(11, seed=0)
    with pytest.raises(ModelSizeError):
        enumerate_tours(inst)
    with pytest.raises(ModelSizeError):
        held_karp(inst, cap=10)


def test_generate_instance_is_deterministic():
    a = generate_instance(6, seed=3)
    assert a == generate_instance(6, seed=3)
    assert a != generate_instance(6, seed=4)
    assert all(-1.0 <= v <= 1.0 for point in a.coords for v in point)
    with pytest.raises(ModelSizeError):
        generate_instance(2, seed=0)


def test_instance_validation():
    with pytest.raises(ValidationError):
        TspInstance(
            num_cities=3,
            coords=[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)],
            distances=[[0.0, 1.0, 1.0], [2.0, 0.0, 1.0], [1.0, 1.0, 0.0]],
        )


def test_instance_json(two_clusters):
    data = instance_to_json(two_clusters)
    assert data["n"] == 6
    assert instance_from_json(data) == two_clusters
    with pytest.raises(ContractError):
        instance_from_json({"n": 4, "coords": [[0, 0], [1, 0], [0, 1]]})


def test_exact_relaxation_two_clusters(two_clusters):
    idx = EdgeIndexer(6)
    bits, length = exact_relaxation(two_clusters)
    analysis = analyze(bits, two_clusters, idx)

    assert sorted(len(c) for c in analysis.cycles) == [3, 3]
    assert length == pytest.approx(analysis.total_distance)
    assert length < held_karp(two_clusters)[1]

    bits, length = exact_relaxation(two_clusters, [Subtour(cities=(0, 1, 2))])
    assert analyze(bits, two_clusters, idx).is_valid_tour
    assert length == pytest.approx(held_karp(two_clusters)[1])


def test_single_cut_closes_the_eleven_city_relaxation(triangle_beside_octagon):
    inst = triangle_beside_octagon
    idx = EdgeIndexer(11)
    _, optimum = held_karp(inst)

    bits, relaxed_length = exact_relaxation(inst)
    analysis = analyze(bits, inst, idx)
    assert sorted(len(c) for c in analysis.cycles) == [3, 8]
    assert smallest_subtour(analysis) == Subtour(cities=(2, 5, 7))
    assert relaxed_length < optimum - 1e-6

    bits, length = exact_relaxation(inst, [Subtour(cities=(2, 5, 7))])
    assert analyze(bits, inst, idx).is_valid_tour
    assert length == pytest.approx(optimum, abs=1e-9)
