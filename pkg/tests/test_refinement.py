"""Tests for WL[k] refinement and equivalence."""

import random

import numpy as np
import pytest
from wlident.config import DEFAULT_CONFIG
from wlident.errors import (
    ArityExceedsK,
    MemoryBudgetExceeded,
    OracleSizeExceeded,
    ValidationError,
)
from wlident.generators import random_bounded_graph
from wlident.refinement import (
    canonical_ids,
    check_k,
    check_memory,
    equivalent,
    initial_coloring,
    intersection_number,
    naive_stable_coloring,
    same_partition,
    stable_coloring,
    substitution_colors,
)
from wlident.structures import Relation, Structure


class TestStableColoring:
    """Test cases for stable colorings of small graphs."""

    def test_cycle_color_refinement(self, hexagon):
        """Test that color refinement keeps a regular graph monochromatic."""
        coloring = stable_coloring(hexagon, 1)

        assert coloring.color_count == 1
        assert coloring.table.shape == (6,)

    def test_path_color_refinement(self, path3):
        """Test that color refinement separates ends from the middle."""
        coloring = stable_coloring(path3, 1)

        assert coloring.color_count == 2
        assert coloring.table[0] == coloring.table[2] != coloring.table[1]

    def test_triangle_pairs(self, triangle):
        """Test that WL[2] on K3 has diagonal and off-diagonal classes."""
        coloring = stable_coloring(triangle, 2)

        assert coloring.color_count == 2
        assert coloring.color([0, 1]) == coloring.color([2, 1])
        assert coloring.color([0]) != coloring.color([0, 1])

    def test_directed_triangle(self, directed_triangle):
        """Test that arc directions give three pair classes."""
        coloring = stable_coloring(directed_triangle, 2)

        assert coloring.color_count == 3
        assert coloring.color([0, 1]) == coloring.color([1, 2])
        assert coloring.color([0, 1]) != coloring.color([1, 0])

    def test_history_and_rounds(self, path3):
        """Test the recorded per-round color counts."""
        coloring = stable_coloring(path3, 2)

        assert coloring.history[0] == initial_coloring(path3, 2).color_count
        assert coloring.history[-1] == coloring.color_count
        assert len(coloring.history) == coloring.round_count + 1

    def test_vertex_partition(self, path3):
        """Test the fibers read off the diagonal."""
        partition = stable_coloring(path3, 3).vertex_partition()

        assert partition[0] == partition[2] != partition[1]

    def test_pad(self, triangle):
        """Test padding short tuples by repeating the last entry."""
        coloring = stable_coloring(triangle, 3)

        assert coloring.pad([0, 1]) == (0, 1, 1)
        with pytest.raises(ValueError):
            coloring.pad([])

    def test_class_sizes(self, triangle):
        """Test that class sizes add up to n^k."""
        coloring = stable_coloring(triangle, 2)

        assert sorted(coloring.class_sizes().tolist()) == [3, 6]

    def test_threads_do_not_change_result(self, cfi_c5):
        """Test that parallel descriptor filling gives the same table."""
        structure = cfi_c5[0]
        single = stable_coloring(structure, 2)
        threaded = stable_coloring(structure, 2, DEFAULT_CONFIG.with_overrides(threads=4))

        assert np.array_equal(single.table, threaded.table)

    def test_permutation_invariance(self, cfi_c5):
        """Test that relabelling vertices permutes the coloring."""
        structure = cfi_c5[0]
        perm = list(range(structure.vertex_count))
        random.Random(7).shuffle(perm)
        moved = structure.permuted(perm)

        original = stable_coloring(structure, 2).as_array()
        relabelled = stable_coloring(moved, 2).as_array()
        inverse = np.argsort(perm)

        assert same_partition(original, relabelled[np.ix_(perm, perm)])
        assert same_partition(relabelled, original[np.ix_(inverse, inverse)])


class TestErrors:
    """Test cases for refinement preconditions."""

    def test_arity_exceeds_k(self):
        """Test that a ternary relation needs k >= 3."""
        relation = Relation("R", 3, frozenset({(0, 1, 2)}))
        structure = Structure(3, (0, 0, 0), (relation,))

        with pytest.raises(ArityExceedsK):
            stable_coloring(structure, 2)
        assert stable_coloring(structure, 3).color_count > 1

    def test_k_range(self, triangle):
        """Test the supported range of k."""
        with pytest.raises(ValidationError):
            check_k(triangle, 5)
        with pytest.raises(ValidationError):
            check_k(triangle, 0)

    def test_memory_budget(self, hexagon):
        """Test that oversized tables are refused."""
        config = DEFAULT_CONFIG.with_overrides(memory_budget_bytes=1024)

        with pytest.raises(MemoryBudgetExceeded) as info:
            stable_coloring(hexagon, 3, config)
        assert info.value.budget == 1024

    @pytest.mark.parametrize(
        ("n", "k", "estimate"), [(10, 1, 2480), (10, 2, 8800), (4, 3, 2560)]
    )
    def test_memory_estimate(self, n, k, estimate):
        """Test that the estimate matches the tables a round allocates."""
        check_memory(n, k, DEFAULT_CONFIG.with_overrides(memory_budget_bytes=estimate))

        with pytest.raises(MemoryBudgetExceeded) as info:
            check_memory(n, k, DEFAULT_CONFIG.with_overrides(memory_budget_bytes=estimate - 1))
        assert info.value.estimate == estimate

    def test_oracle_limit(self, hexagon):
        """Test that the naive oracle refuses large inputs."""
        config = DEFAULT_CONFIG.with_overrides(oracle_tuple_limit=100)

        with pytest.raises(OracleSizeExceeded):
            naive_stable_coloring(hexagon, 3, config)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_matches_naive_oracle(k):
    """Test the optimized refinement against the definition."""
    rng = random.Random(1000 + k)
    for _ in range(12):
        structure = random_bounded_graph(rng, rng.randint(1, 6), rng.randint(1, 3))
        fast = stable_coloring(structure, k)
        slow = naive_stable_coloring(structure, k)

        assert fast.color_count == slow.color_count
        assert same_partition(fast.table, slow.table)


def test_matches_naive_oracle_directed():
    """Test directed graphs and unary relations against the definition."""
    relation = Relation("U", 1, frozenset({(0,), (3,)}))
    structure = Structure.from_edges(
        5, [(0, 1), (1, 2), (2, 0), (3, 4)], directed=True, extra_relations=[relation]
    )
    for k in (1, 2, 3):
        assert same_partition(
            stable_coloring(structure, k).table, naive_stable_coloring(structure, k).table
        )


@pytest.mark.slow
def test_matches_naive_oracle_corpus():
    """Test a larger random corpus against the definition."""
    rng = random.Random(42)
    for _ in range(250):
        k = rng.choice([2, 3])
        structure = random_bounded_graph(rng, rng.randint(1, 8), rng.randint(1, 4))
        assert same_partition(
            stable_coloring(structure, k).table, naive_stable_coloring(structure, k).table
        )


class TestEquivalence:
    """Test cases for WL[k]-equivalence."""

    def test_identical(self, triangle):
        """Test that a structure is equivalent to itself."""
        assert equivalent(triangle, triangle, 2).equivalent

    def test_cycle_versus_triangles(self, hexagon, two_triangles):
        """Test the classic pair separated by WL[2] but not WL[1]."""
        assert equivalent(hexagon, two_triangles, 1).equivalent
        assert not equivalent(hexagon, two_triangles, 2).equivalent

    def test_sizes_differ(self, triangle, hexagon):
        """Test that structures of different sizes are not equivalent."""
        result = equivalent(triangle, hexagon, 1)

        assert not result
        assert result.counts == {}

    def test_sizes_differ_before_union(self, triangle, hexagon, mocker):
        """Test that a size mismatch is answered without building the union."""
        union = mocker.patch("wlident.refinement.disjoint_union")

        assert not equivalent(triangle, hexagon, 2)
        union.assert_not_called()

    def test_cfi_cycle(self, cfi_c5):
        """Test that WL[2] separates the CFI pair over C5 and WL[1] does not."""
        untwisted, twisted = cfi_c5

        assert equivalent(untwisted, twisted, 1).equivalent
        assert not equivalent(untwisted, twisted, 2).equivalent

    def test_cfi_complete(self, cfi_k4):
        """Test that WL[2] does not separate the CFI pair over K4."""
        untwisted, twisted = cfi_k4

        assert equivalent(untwisted, twisted, 2).equivalent

    @pytest.mark.slow
    def test_cfi_complete_three(self, cfi_k4):
        """Test that WL[3] separates the CFI pair over K4."""
        untwisted, twisted = cfi_k4

        assert not equivalent(untwisted, twisted, 3).equivalent

    def test_counts_balance(self, hexagon, two_triangles):
        """Test that per-color counts sum to n^k on both sides."""
        result = equivalent(hexagon, two_triangles, 2)

        assert sum(left for left, _ in result.counts.values()) == 36
        assert sum(right for _, right in result.counts.values()) == 36


def test_canonical_ids():
    """Test ranking rows lexicographically."""
    ids, count = canonical_ids(np.array([[2, 1], [0, 5], [2, 1]]))

    assert count == 2
    assert ids.tolist() == [1, 0, 1]


def test_same_partition():
    """Test partition equality up to renaming."""
    assert same_partition(np.array([0, 0, 1]), np.array([5, 5, 2]))
    assert not same_partition(np.array([0, 0, 1]), np.array([0, 1, 1]))
    assert not same_partition(np.array([0, 0]), np.array([0, 0, 0]))


def test_intersection_numbers(triangle, debug_config):
    """Test one-entry substitutions on K3."""
    coloring = stable_coloring(triangle, 2)
    diagonal, off = coloring.color([0, 0]), coloring.color([0, 1])

    rows = substitution_colors(coloring, [0, 1])
    assert rows.shape == (3, 2)
    assert intersection_number(coloring, [0, 1], [off, off], debug_config) == 1
    assert intersection_number(coloring, [0, 1], [diagonal, off], debug_config) == 1
    assert intersection_number(coloring, [0, 0], [off, off], debug_config) == 2
