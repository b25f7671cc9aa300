"""Shared instances for the test suite."""

import math

import pytest

from src.tools.tsp_tools import TspInstance


@pytest.fixture
def hexagon() -> TspInstance:
    """Regular hexagon of radius 1: its perimeter tour beats every pair of triangles."""
    return TspInstance.from_coords(
        [(math.cos(k * math.pi / 3), math.sin(k * math.pi / 3)) for k in range(6)]
    )


@pytest.fixture
def two_clusters() -> TspInstance:
    """Two tight triangles far apart: the relaxation optimum is the sub-tour pair {0,1,2} | {3,4,5}."""
    return TspInstance.from_coords(
        [(0.0, 0.0), (0.1, 0.0), (0.0, 0.1), (1.0, 1.0), (1.1, 1.0), (1.0, 1.1)]
    )


@pytest.fixture
def triangle_beside_octagon() -> TspInstance:
    """Eleven cities: a tight triangle {2, 5, 7} just outside one side of a regular octagon.

    The relaxation optimum is the triangle plus the octagon perimeter; cutting the
    triangle leaves the optimal tour, which enters the triangle across that side.
    """
    octagon = [
        (0.3 * math.cos(math.pi / 8 + k * math.pi / 4), 0.3 * math.sin(math.pi / 8 + k * math.pi / 4))
        for k in range(8)
    ]
    triangle = [(0.40, 0.015), (0.40, -0.015), (0.426, 0.0)]
    coords = []
    for city in range(11):
        coords.append(triangle.pop(0) if city in (2, 5, 7) else octagon.pop(0))
    return TspInstance.from_coords(coords)
