"""Tests for permutation groups and the isomorphism engine."""

import itertools
import random

import networkx as nx
import pytest
from wlident.config import DEFAULT_CONFIG
from wlident.errors import SearchBudgetExceeded, SignatureMismatch
from wlident.generators import random_bounded_graph
from wlident.groups import (
    ColoredDigraph,
    GeneratorSet,
    Permutation,
    StabilizerChain,
    automorphism_generators,
    digraph_isomorphism,
    encode_kary_as_colored_graph,
    group_order,
    is_abelian,
    isomorphic,
    membership,
    orbits,
    structure_digraph,
)
from wlident.structures import Relation, Structure


def _symmetric(degree: int) -> GeneratorSet:
    swap = Permutation((1, 0, *range(2, degree)))
    shift = Permutation((*range(1, degree), 0))
    return GeneratorSet(degree, (swap, shift))


class TestPermutation:
    """Test cases for Permutation."""

    def test_product_applies_left_first(self):
        """Test the composition order."""
        p = Permutation((1, 2, 0))
        q = Permutation((0, 2, 1))

        assert (p * q).images == (2, 1, 0)
        assert (p * q)(0) == q(p(0))

    def test_inverse(self):
        """Test that a permutation times its inverse is the identity."""
        p = Permutation((3, 0, 2, 1))

        assert (p * p.inverse()).is_identity
        assert p.inverse().images == (1, 3, 2, 0)

    def test_cycles(self):
        """Test cycle notation."""
        p = Permutation((1, 2, 0, 3, 5, 4))

        assert p.cycles() == [(0, 1, 2), (4, 5)]
        assert str(p) == "(0 1 2)(4 5)"
        assert str(Permutation.identity(3)) == "()"

    def test_rejects_non_bijection(self):
        """Test that repeated images are refused."""
        with pytest.raises(ValueError):
            Permutation((0, 0, 1))

    def test_restricted(self):
        """Test restricting to an invariant prefix."""
        assert Permutation((1, 0, 3, 2)).restricted(2).images == (1, 0)


class TestGroups:
    """Test cases for generator sets and stabilizer chains."""

    def test_generator_set_cleanup(self):
        """Test that identities and repeats are dropped."""
        p = Permutation((1, 0, 2))
        gens = GeneratorSet(3, (Permutation.identity(3), p, p))

        assert len(gens) == 1
        with pytest.raises(ValueError):
            GeneratorSet(4, (p,))

    def test_orbits(self):
        """Test orbits of a group with fixed points."""
        gens = GeneratorSet(6, (Permutation((1, 0, 2, 4, 3, 5)),))

        assert orbits(gens) == [[0, 1], [2], [3, 4], [5]]

    @pytest.mark.parametrize(("degree", "order"), [(1, 1), (2, 2), (3, 6), (4, 24), (5, 120)])
    def test_symmetric_orders(self, degree, order):
        """Test orders of symmetric groups."""
        gens = (
            _symmetric(degree) if degree > 1 else GeneratorSet(1, ())
        )

        assert group_order(gens) == order

    def test_cyclic(self):
        """Test a cyclic group and membership."""
        gens = GeneratorSet(5, (Permutation((1, 2, 3, 4, 0)),))

        assert group_order(gens) == 5
        assert is_abelian(gens)
        assert membership(gens, Permutation((2, 3, 4, 0, 1)))
        assert not membership(gens, Permutation((1, 0, 2, 3, 4)))

    def test_chain_base(self):
        """Test that the base points determine the group elements."""
        chain = StabilizerChain(_symmetric(4))

        assert chain.order() == 24
        assert len(chain.base) == 3
        assert chain.contains(Permutation((3, 2, 1, 0)))
        assert not chain.contains(Permutation((1, 0, 2)))

    def test_non_abelian(self):
        """Test that S3 is not abelian."""
        assert not is_abelian(_symmetric(3))

    def test_random_products(self):
        """Test that products of generators are members."""
        gens = GeneratorSet(
            7, (Permutation((1, 2, 0, 3, 4, 5, 6)), Permutation((0, 1, 2, 4, 5, 6, 3)))
        )
        rng = random.Random(3)
        element = Permutation.identity(7)
        for _ in range(20):
            element = element * rng.choice(gens.generators)

        assert group_order(gens) == 12
        assert membership(gens, element)


class TestAutomorphisms:
    """Test cases for automorphism generators."""

    def test_cycle(self, hexagon):
        """Test that Aut(C6) is the dihedral group of order 12."""
        gens = automorphism_generators(hexagon)

        assert group_order(gens) == 12
        assert not is_abelian(gens)

    def test_complete(self):
        """Test that Aut(K4) is S4."""
        structure = Structure.from_edges(4, [(u, v) for u in range(4) for v in range(u + 1, 4)])

        assert group_order(automorphism_generators(structure)) == 24

    def test_petersen(self):
        """Test that the Petersen graph has 120 automorphisms."""
        graph = nx.petersen_graph()
        structure = Structure.from_edges(10, list(graph.edges()))

        assert group_order(automorphism_generators(structure)) == 120

    def test_generators_are_automorphisms(self, cfi_c5):
        """Test every returned generator against the structure."""
        structure = cfi_c5[0]
        for g in automorphism_generators(structure):
            assert structure.permuted(g.images) == structure

    def test_colors_restrict_group(self, hexagon):
        """Test that a colored vertex leaves only the reflection through it."""
        assert group_order(automorphism_generators(hexagon.with_vertex_color(0))) == 2

    def test_budget(self, hexagon):
        """Test that an exhausted node budget raises."""
        config = DEFAULT_CONFIG.with_overrides(search_node_budget=0)

        with pytest.raises(SearchBudgetExceeded) as info:
            automorphism_generators(hexagon, config)
        assert info.value.exit_code == 3


class TestIsomorphism:
    """Test cases for structure isomorphism."""

    def test_relabelled(self, cfi_c5):
        """Test recovering a random relabelling."""
        structure = cfi_c5[0]
        perm = list(range(structure.vertex_count))
        random.Random(11).shuffle(perm)
        moved = structure.permuted(perm)

        phi = isomorphic(structure, moved)
        assert phi is not None
        assert structure.permuted(phi.images) == moved

    def test_cfi_pair_not_isomorphic(self, cfi_c5):
        """Test that the twisted CFI graph is not isomorphic to the untwisted one."""
        assert isomorphic(*cfi_c5) is None

    def test_equivalent_but_not_isomorphic(self, hexagon, two_triangles):
        """Test C6 against two triangles."""
        assert isomorphic(hexagon, two_triangles) is None

    def test_color_multisets_differ(self, triangle):
        """Test that different color multisets short-circuit."""
        assert isomorphic(triangle, triangle.with_vertex_color(0)) is None

    def test_ternary_relation(self):
        """Test structures of arity three through the tuple encoding."""
        first = Structure(3, (0, 0, 0), (Relation("R", 3, frozenset({(0, 1, 2)})),))
        second = Structure(3, (0, 0, 0), (Relation("R", 3, frozenset({(2, 0, 1)})),))

        phi = isomorphic(first, second)
        assert phi is not None
        assert first.permuted(phi.images) == second

    def test_directed_mismatch(self, triangle, directed_triangle):
        """Test that directed and undirected structures are incomparable."""
        with pytest.raises(SignatureMismatch):
            isomorphic(triangle, directed_triangle)

    def test_arity_mismatch(self):
        """Test that a relation name must have one arity."""
        first = Structure(2, (0, 0), (Relation("R", 1, frozenset({(0,)})),))
        second = Structure(2, (0, 0), (Relation("R", 2, frozenset({(0, 1)})),))

        with pytest.raises(SignatureMismatch):
            isomorphic(first, second)


def _toggled(structure: Structure, a: int, b: int) -> Structure:
    edges = {(u, v) for u, v, _ in structure.edges() if u < v}
    edges ^= {(min(a, b), max(a, b))}
    return Structure.from_edges(structure.vertex_count, sorted(edges), structure.vertex_color)


class TestBruteForce:
    """Test cases comparing the search against all permutations."""

    @staticmethod
    def _check(rng: random.Random, n: int):
        structure = random_bounded_graph(rng, n, 3)
        perms = list(itertools.permutations(range(n)))
        automorphisms = sum(structure.permuted(p) == structure for p in perms)
        assert group_order(automorphism_generators(structure)) == automorphisms

        a, b = rng.sample(range(n), 2)
        other = _toggled(structure, a, b).permuted(rng.choice(perms))
        expected = any(structure.permuted(p) == other for p in perms)
        phi = isomorphic(structure, other)
        assert (phi is not None) is expected
        if phi is not None:
            assert structure.permuted(phi.images) == other

    def test_small(self):
        """Test random structures with at most six vertices."""
        rng = random.Random(41)
        for _ in range(20):
            self._check(rng, rng.randint(2, 6))

    @pytest.mark.slow
    def test_eight_vertices(self):
        """Test random structures with eight vertices."""
        rng = random.Random(43)
        for _ in range(4):
            self._check(rng, 8)


def test_kary_encoding():
    """Test that every tuple becomes a vertex of the encoding."""
    structure = Structure(
        3, (0, 0, 0), (Relation("R", 3, frozenset({(0, 1, 2), (1, 2, 0)})),)
    )
    encoding = encode_kary_as_colored_graph(structure)

    assert encoding.structure.vertex_count == 5
    assert encoding.tuple_of == (("R", (0, 1, 2)), ("R", (1, 2, 0)))
    assert encoding.back_map(1) == 1
    assert encoding.back_map(4) is None
    with pytest.raises(ValueError):
        structure_digraph(structure)


def test_digraph_isomorphism_verified():
    """Test that found isomorphisms preserve labels."""
    first = ColoredDigraph(["a", "a", "b"], {(0, 1): "x", (1, 2): "y"})
    second = ColoredDigraph(["b", "a", "a"], {(2, 1): "x", (1, 0): "y"})

    phi = digraph_isomorphism(first, second)
    assert phi is not None
    assert phi.images == (2, 1, 0)
    assert first.is_isomorphism(second, phi.images)
    assert digraph_isomorphism(first, ColoredDigraph(["a", "a", "b"], {})) is None
