"""Pytest configuration and fixtures."""

from pathlib import Path

import pytest
from wlident.config import DEFAULT_CONFIG
from wlident.generators import cfi, complete_graph, cycle_graph
from wlident.structures import Structure, serialize


@pytest.fixture
def triangle():
    """Create K3 without colors."""
    return Structure.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def hexagon():
    """Create C6 without colors."""
    return Structure.from_edges(6, [(i, (i + 1) % 6) for i in range(6)])


@pytest.fixture
def two_triangles():
    """Create two disjoint triangles (WL[1]-equivalent to C6)."""
    return Structure.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])


@pytest.fixture
def path3():
    """Create the path on three vertices."""
    return Structure.from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def directed_triangle():
    """Create the directed 3-cycle."""
    return Structure.from_edges(3, [(0, 1), (1, 2), (2, 0)], directed=True)


@pytest.fixture
def matching():
    """Create a perfect matching between two color classes of size 2."""
    return Structure.from_edges(4, [(0, 2), (1, 3)], colors=[0, 0, 1, 1])


@pytest.fixture
def cfi_c5():
    """Create the untwisted and twisted CFI graphs over C5."""
    base = cycle_graph(5)
    return cfi(base, 0).structure, cfi(base, 1).structure


@pytest.fixture
def cfi_k4():
    """Create the untwisted and twisted CFI graphs over K4."""
    base = complete_graph(4)
    return cfi(base, 0).structure, cfi(base, 1).structure


@pytest.fixture
def debug_config():
    """Create an engine config with exhaustive checks."""
    return DEFAULT_CONFIG.with_overrides(debug_checks=True)


@pytest.fixture
def write_structure(tmp_path):
    """Write structures to files under tmp_path."""

    def write(structure: Structure, name: str = "graph.txt") -> str:
        path = Path(tmp_path) / name
        path.write_bytes(serialize(structure))
        return str(path)

    return write
