"""Permutations, stabilizer chains and an individualization-refinement engine."""

import logging
from collections import Counter, defaultdict, deque
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

from wlident.config import DEFAULT_CONFIG, EngineConfig
from wlident.errors import SearchBudgetExceeded, SignatureMismatch
from wlident.structures import Relation, Structure, edge_relation_name

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Permutation:
    """A bijection of 0..n-1 given by its image table.

    Products apply the left factor first: ``(p * q)(x) == q(p(x))``.
    """

    images: tuple[int, ...]

    def __post_init__(self) -> None:
        if set(self.images) != set(range(len(self.images))):
            raise ValueError("not a permutation")

    @classmethod
    def identity(cls, degree: int) -> "Permutation":
        return cls(tuple(range(degree)))

    @property
    def degree(self) -> int:
        return len(self.images)

    @property
    def is_identity(self) -> bool:
        return all(i == x for i, x in enumerate(self.images))

    def __call__(self, point: int) -> int:
        return self.images[point]

    def __mul__(self, other: "Permutation") -> "Permutation":
        return Permutation(tuple(other.images[x] for x in self.images))

    def inverse(self) -> "Permutation":
        inverse = [0] * self.degree
        for i, x in enumerate(self.images):
            inverse[x] = i
        return Permutation(tuple(inverse))

    def restricted(self, count: int) -> "Permutation":
        """Action on the first ``count`` points, which must be invariant."""
        return Permutation(self.images[:count])

    def cycles(self) -> list[tuple[int, ...]]:
        """Non-trivial cycles, each starting at its smallest point."""
        seen: set[int] = set()
        found = []
        for start in range(self.degree):
            if start in seen or self.images[start] == start:
                continue
            cycle = [start]
            seen.add(start)
            point = self.images[start]
            while point != start:
                seen.add(point)
                cycle.append(point)
                point = self.images[point]
            found.append(tuple(cycle))
        return found

    def __str__(self) -> str:
        return "".join(f"({' '.join(map(str, c))})" for c in self.cycles()) or "()"


@dataclass(frozen=True)
class GeneratorSet:
    """Generators of a permutation group; identities and repeats are dropped."""

    degree: int
    generators: tuple[Permutation, ...] = ()

    def __post_init__(self) -> None:
        kept: list[Permutation] = []
        for g in self.generators:
            if g.degree != self.degree:
                raise ValueError(f"generator of degree {g.degree} in a set of degree {self.degree}")
            if not g.is_identity and g not in kept:
                kept.append(g)
        object.__setattr__(self, "generators", tuple(kept))

    def __iter__(self) -> Iterator[Permutation]:
        return iter(self.generators)

    def __len__(self) -> int:
        return len(self.generators)


def orbits(gens: GeneratorSet) -> list[list[int]]:
    """Orbits of the generated group, ordered by smallest point."""
    parent = list(range(gens.degree))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for g in gens:
        for x, y in enumerate(g.images):
            a, b = find(x), find(y)
            if a != b:
                parent[max(a, b)] = min(a, b)
    grouped: dict[int, list[int]] = {}
    for x in range(gens.degree):
        grouped.setdefault(find(x), []).append(x)
    return [grouped[root] for root in sorted(grouped)]


def is_abelian(gens: GeneratorSet) -> bool:
    """Generators commute pairwise exactly when the group is abelian."""
    items = gens.generators
    return all(
        items[i] * items[j] == items[j] * items[i]
        for i in range(len(items))
        for j in range(i + 1, len(items))
    )


@dataclass
class _Level:
    point: int
    transversal: dict[int, Permutation] = field(default_factory=dict)


class StabilizerChain:
    """Deterministic Schreier-Sims: a base with transversals for every stabilizer."""

    def __init__(self, gens: GeneratorSet) -> None:
        self.degree = gens.degree
        self.strong: list[Permutation] = list(gens)
        self.levels: list[_Level] = []
        for g in self.strong:
            if all(g(level.point) == level.point for level in self.levels):
                self.levels.append(_Level(_first_moved(g)))
        self._build()

    def _stabilizer_gens(self, depth: int) -> list[Permutation]:
        points = [level.point for level in self.levels[:depth]]
        return [g for g in self.strong if all(g(p) == p for p in points)]

    def _orbit(self, depth: int) -> None:
        level = self.levels[depth]
        gens = self._stabilizer_gens(depth)
        level.transversal = {level.point: Permutation.identity(self.degree)}
        pending = deque([level.point])
        while pending:
            point = pending.popleft()
            for g in gens:
                image = g(point)
                if image not in level.transversal:
                    level.transversal[image] = level.transversal[point] * g
                    pending.append(image)

    def _build(self) -> None:
        depth = len(self.levels) - 1
        while depth >= 0:
            self._orbit(depth)
            level = self.levels[depth]
            restart = None
            for point, u in list(level.transversal.items()):
                for g in self._stabilizer_gens(depth):
                    h = u * g * level.transversal[g(point)].inverse()
                    if h.is_identity:
                        continue
                    residue, reached = self.sift(h, depth + 1)
                    if residue.is_identity:
                        continue
                    if reached == len(self.levels):
                        self.levels.append(_Level(_first_moved(residue)))
                    self.strong.append(residue)
                    restart = reached
                    break
                if restart is not None:
                    break
            if restart is not None:
                depth = restart
                continue
            depth -= 1

    def sift(self, g: Permutation, start: int = 0) -> tuple[Permutation, int]:
        """Strip g through the levels; returns the residue and where it stopped."""
        for depth in range(start, len(self.levels)):
            level = self.levels[depth]
            image = g(level.point)
            if image not in level.transversal:
                return g, depth
            g = g * level.transversal[image].inverse()
        return g, len(self.levels)

    @property
    def base(self) -> list[int]:
        return [level.point for level in self.levels]

    def order(self) -> int:
        size = 1
        for level in self.levels:
            size *= len(level.transversal)
        return size

    def contains(self, g: Permutation) -> bool:
        if g.degree != self.degree:
            return False
        residue, _ = self.sift(g)
        return residue.is_identity


def _first_moved(g: Permutation) -> int:
    return next(i for i, x in enumerate(g.images) if i != x)


def group_order(gens: GeneratorSet) -> int:
    return StabilizerChain(gens).order()


def membership(gens: GeneratorSet, g: Permutation) -> bool:
    return StabilizerChain(gens).contains(g)


class ColoredDigraph:
    """A vertex-colored digraph with one label per arc.

    Colors and labels may be any hashable values; ``interned`` maps them to
    ints consistently for a pair of graphs before searching.
    """

    def __init__(
        self,
        colors: Sequence[Any],
        arcs: Mapping[tuple[int, int], Any],
    ) -> None:
        self.vertex_count = len(colors)
        self.colors = list(colors)
        self.out: list[dict[int, Any]] = [{} for _ in colors]
        self.inn: list[dict[int, Any]] = [{} for _ in colors]
        for (u, v), label in arcs.items():
            self.out[u][v] = label
            self.inn[v][u] = label

    def arcs(self) -> dict[tuple[int, int], Any]:
        return {(u, v): label for u in range(self.vertex_count) for v, label in self.out[u].items()}

    def is_isomorphism(self, other: "ColoredDigraph", mapping: Sequence[int]) -> bool:
        """Whether ``mapping`` preserves colors and labelled arcs."""
        if self.vertex_count != other.vertex_count:
            return False
        for v in range(self.vertex_count):
            w = mapping[v]
            if self.colors[v] != other.colors[w]:
                return False
            if len(self.out[v]) != len(other.out[w]):
                return False
            for x, label in self.out[v].items():
                if other.out[w].get(mapping[x]) != label:
                    return False
        return True


def interned(*graphs: ColoredDigraph) -> list[ColoredDigraph]:
    """Replace colors and labels by ints, ranked jointly over all graphs."""
    colors = sorted({c for g in graphs for c in g.colors}, key=repr)
    labels = sorted({lab for g in graphs for lab in g.arcs().values()}, key=repr)
    color_id = {c: i for i, c in enumerate(colors)}
    label_id = {lab: i for i, lab in enumerate(labels)}
    return [
        ColoredDigraph(
            [color_id[c] for c in g.colors],
            {arc: label_id[lab] for arc, lab in g.arcs().items()},
        )
        for g in graphs
    ]


class _Partition:
    __slots__ = ("cells", "cell_of")

    def __init__(self, cells: list[list[int]], cell_of: list[int]) -> None:
        self.cells = cells
        self.cell_of = cell_of

    @classmethod
    def by_color(cls, graph: ColoredDigraph) -> "_Partition":
        grouped: dict[Any, list[int]] = defaultdict(list)
        for v, color in enumerate(graph.colors):
            grouped[color].append(v)
        cells = [grouped[color] for color in sorted(grouped)]
        cell_of = [0] * graph.vertex_count
        for index, cell in enumerate(cells):
            for v in cell:
                cell_of[v] = index
        return cls(cells, cell_of)

    def copy(self) -> "_Partition":
        return _Partition([list(cell) for cell in self.cells], list(self.cell_of))

    def target_cell(self) -> int | None:
        """Smallest non-singleton cell, lowest index first."""
        best = None
        for index, cell in enumerate(self.cells):
            if len(cell) > 1 and (best is None or len(cell) < len(self.cells[best])):
                best = index
        return best


Trace = list[tuple[object, ...]]


def _refine(
    graph: ColoredDigraph,
    partition: _Partition,
    queue: Iterable[int],
    expected: Trace | None = None,
) -> Trace | None:
    """Equitable refinement with a FIFO splitter queue.

    Returns the trace of split events, or None as soon as it departs from
    ``expected``.
    """
    trace: Trace = []
    pending = deque(queue)
    queued = set(pending)
    cells, cell_of = partition.cells, partition.cell_of
    while pending:
        splitter = pending.popleft()
        queued.discard(splitter)
        counts: dict[int, Counter[tuple[int, Any]]] = defaultdict(Counter)
        for w in cells[splitter]:
            for v, label in graph.inn[w].items():
                counts[v][(0, label)] += 1
            for v, label in graph.out[w].items():
                counts[v][(1, label)] += 1
        for c in sorted({cell_of[v] for v in counts}):
            members = cells[c]
            if len(members) == 1:
                continue
            groups: dict[tuple[object, ...], list[int]] = {}
            for v in members:
                key = tuple(sorted(counts[v].items())) if v in counts else ()
                groups.setdefault(key, []).append(v)
            if len(groups) == 1:
                continue
            keys = sorted(groups)
            event = (splitter, c, tuple((key, len(groups[key])) for key in keys))
            if expected is not None and (
                len(trace) >= len(expected) or expected[len(trace)] != event
            ):
                return None
            trace.append(event)
            cells[c] = groups[keys[0]]
            fragments = [c]
            for key in keys[1:]:
                cells.append(groups[key])
                fragments.append(len(cells) - 1)
                for v in groups[key]:
                    cell_of[v] = len(cells) - 1
            for fragment in fragments:
                if fragment not in queued:
                    pending.append(fragment)
                    queued.add(fragment)
    if expected is not None and len(trace) != len(expected):
        return None
    return trace


@dataclass
class _PathNode:
    partition: _Partition
    trace: Trace
    target: int | None
    chosen: int | None


class _Search:
    """Backtracking over individualizations, counted against a node budget."""

    def __init__(self, first: ColoredDigraph, second: ColoredDigraph, budget: int) -> None:
        self.first = first
        self.second = second
        self.budget = budget
        self.nodes = 0

    def _tick(self) -> None:
        self.nodes += 1
        if self.nodes > self.budget:
            raise SearchBudgetExceeded(self.budget)

    def root(self, graph: ColoredDigraph, expected: Trace | None = None) -> tuple[_Partition, Trace] | None:
        self._tick()
        partition = _Partition.by_color(graph)
        head: tuple[object, ...] = (
            "init",
            tuple((graph.colors[cell[0]], len(cell)) for cell in partition.cells),
        )
        if expected is not None and expected[:1] != [head]:
            return None
        trace = _refine(
            graph,
            partition,
            range(len(partition.cells)),
            expected[1:] if expected is not None else None,
        )
        if trace is None:
            return None
        return partition, [head, *trace]

    def individualize(
        self,
        graph: ColoredDigraph,
        partition: _Partition,
        v: int,
        expected: Trace | None = None,
    ) -> tuple[_Partition, Trace] | None:
        self._tick()
        child = partition.copy()
        cell = child.cell_of[v]
        child.cells[cell] = [w for w in child.cells[cell] if w != v]
        child.cells.append([v])
        child.cell_of[v] = len(child.cells) - 1
        head: tuple[object, ...] = ("individualize", cell)
        if expected is not None and expected[:1] != [head]:
            return None
        trace = _refine(
            graph,
            child,
            [len(child.cells) - 1],
            expected[1:] if expected is not None else None,
        )
        if trace is None:
            return None
        return child, [head, *trace]

    def first_path(self, partition: _Partition, trace: Trace) -> list[_PathNode]:
        """Leftmost branch: always individualize the smallest vertex of the target cell."""
        path = []
        while True:
            target = partition.target_cell()
            chosen = None if target is None else partition.cells[target][0]
            path.append(_PathNode(partition, trace, target, chosen))
            if target is None or chosen is None:
                return path
            step = self.individualize(self.first, partition, chosen)
            assert step is not None
            partition, trace = step

    def match(self, path: list[_PathNode], level: int, partition: _Partition) -> Permutation | None:
        """Find a leaf below ``partition`` (in the second graph) matching the path leaf."""
        node = path[level]
        if node.target is None:
            mapping = [0] * self.first.vertex_count
            for first_cell, second_cell in zip(node.partition.cells, partition.cells, strict=True):
                mapping[first_cell[0]] = second_cell[0]
            if self.first.is_isomorphism(self.second, mapping):
                return Permutation(tuple(mapping))
            return None
        for v in list(partition.cells[node.target]):
            step = self.individualize(self.second, partition, v, path[level + 1].trace)
            if step is None:
                continue
            found = self.match(path, level + 1, step[0])
            if found is not None:
                return found
        return None


def digraph_isomorphism(
    first: ColoredDigraph, second: ColoredDigraph, config: EngineConfig | None = None
) -> Permutation | None:
    """An isomorphism from ``first`` to ``second``, or None.

    Raises:
        SearchBudgetExceeded: The search tree exceeds the node budget.
    """
    config = config or DEFAULT_CONFIG
    if first.vertex_count != second.vertex_count:
        return None
    if first.vertex_count == 0:
        return Permutation(())
    first, second = interned(first, second)
    search = _Search(first, second, config.search_node_budget)
    start = search.root(first)
    assert start is not None
    other = search.root(second, start[1])
    if other is None:
        return None
    path = search.first_path(*start)
    found = search.match(path, 0, other[0])
    logger.debug(f"isomorphism search: {search.nodes} nodes, found={found is not None}")
    return found


def digraph_automorphisms(
    graph: ColoredDigraph, config: EngineConfig | None = None
) -> GeneratorSet:
    """Generators of the automorphism group, with orbit pruning.

    Raises:
        SearchBudgetExceeded: The search tree exceeds the node budget.
    """
    config = config or DEFAULT_CONFIG
    n = graph.vertex_count
    if n == 0:
        return GeneratorSet(0)
    (graph,) = interned(graph)
    search = _Search(graph, graph, config.search_node_budget)
    start = search.root(graph)
    assert start is not None
    path = search.first_path(*start)
    found: list[Permutation] = []
    orbit_of = list(range(n))
    for level in reversed(range(len(path) - 1)):
        node = path[level]
        assert node.target is not None and node.chosen is not None
        for v in node.partition.cells[node.target]:
            if orbit_of[v] == orbit_of[node.chosen]:
                continue
            step = search.individualize(graph, node.partition, v, path[level + 1].trace)
            if step is None:
                continue
            automorphism = search.match(path, level + 1, step[0])
            if automorphism is not None:
                found.append(automorphism)
                for orbit in orbits(GeneratorSet(n, tuple(found))):
                    for point in orbit:
                        orbit_of[point] = orbit[0]
    logger.debug(f"automorphism search: {search.nodes} nodes, {len(found)} generators")
    return GeneratorSet(n, tuple(found))


@dataclass(frozen=True)
class KaryEncoding:
    """Tuple-incidence encoding of a structure as an edge-colored graph.

    Vertices 0..n-1 are the original vertices; every relation tuple gets one
    further vertex, colored by its relation and joined to its i-th entry by an
    edge of color i.
    """

    structure: Structure
    original_count: int
    tuple_of: tuple[tuple[str, tuple[int, ...]], ...]

    def back_map(self, v: int) -> int | None:
        return v if v < self.original_count else None


def encode_kary_as_colored_graph(structure: Structure) -> KaryEncoding:
    n = structure.vertex_count
    names = [relation.name for relation in structure.relations]
    base = structure.color_count
    colors = list(structure.vertex_color)
    tuple_of: list[tuple[str, tuple[int, ...]]] = []
    position_edges: dict[int, set[tuple[int, int]]] = defaultdict(set)
    for rank, relation in enumerate(structure.relations):
        for entry in relation.sorted_tuples():
            t = n + len(tuple_of)
            tuple_of.append((relation.name, entry))
            colors.append(base + rank)
            for i, v in enumerate(entry):
                position_edges[i].add((t, v))
    encoded = Structure(
        vertex_count=len(colors),
        vertex_color=tuple(colors),
        relations=tuple(
            Relation(edge_relation_name(i), 2, frozenset(pairs))
            for i, pairs in sorted(position_edges.items())
        ),
        directed=True,
    )
    logger.debug(f"encoded {len(tuple_of)} tuples of {names} as graph vertices")
    return KaryEncoding(encoded, n, tuple(tuple_of))


def structure_digraph(structure: Structure) -> ColoredDigraph:
    """A colored digraph with the same isomorphisms as a structure of arity <= 2.

    Unary relations and binary loops fold into vertex colors; every pair
    is labelled by the names of the binary relations containing it.
    """
    if structure.max_arity > 2:
        raise ValueError("use encode_kary_as_colored_graph for arities above 2")
    marks: list[list[str]] = [[] for _ in range(structure.vertex_count)]
    labels: dict[tuple[int, int], list[str]] = defaultdict(list)
    for relation in structure.relations:
        for entry in relation.sorted_tuples():
            if relation.arity == 1:
                marks[entry[0]].append(relation.name)
            elif entry[0] == entry[1]:
                marks[entry[0]].append(f"{relation.name}@loop")
            else:
                labels[entry].append(relation.name)
    colors = [
        (color, tuple(marks[v])) for v, color in enumerate(structure.vertex_color)
    ]
    return ColoredDigraph(colors, {pair: tuple(names) for pair, names in labels.items()})


def _as_digraph(structure: Structure) -> ColoredDigraph:
    if structure.max_arity <= 2:
        return structure_digraph(structure)
    return structure_digraph(encode_kary_as_colored_graph(structure).structure)


def _check_comparable(first: Structure, second: Structure) -> None:
    if first.directed != second.directed:
        raise SignatureMismatch("cannot compare a directed and an undirected structure")
    left, right = first.signature(), second.signature()
    for name in left.keys() & right.keys():
        if left[name] != right[name]:
            raise SignatureMismatch(f"relation {name} has arity {left[name]} and {right[name]}")


def isomorphic(
    first: Structure, second: Structure, config: EngineConfig | None = None
) -> Permutation | None:
    """A color- and relation-preserving bijection, or None.

    Every returned permutation has been verified arc by arc.

    Raises:
        SignatureMismatch: A relation name has different arities.
        SearchBudgetExceeded: The search tree exceeds the node budget.
    """
    _check_comparable(first, second)
    n = first.vertex_count
    if n != second.vertex_count or sorted(first.vertex_color) != sorted(second.vertex_color):
        return None
    if _used_relations(first) != _used_relations(second):
        return None
    if max(first.max_arity, second.max_arity) > 2:
        # tuple vertices must be colored from the same relation ranks on both sides
        signature = first.signature() | second.signature()
        first = _pad_signature(first, signature)
        second = _pad_signature(second, signature)
    found = digraph_isomorphism(_as_digraph(first), _as_digraph(second), config)
    return None if found is None else found.restricted(n)


def _used_relations(structure: Structure) -> set[tuple[str, int]]:
    return {(r.name, r.arity) for r in structure.relations if r.tuples}


def _pad_signature(structure: Structure, signature: Mapping[str, int]) -> Structure:
    arities = structure.signature()
    missing = [
        Relation(name, arity, frozenset())
        for name, arity in signature.items()
        if name not in arities
    ]
    return Structure(
        structure.vertex_count,
        structure.vertex_color,
        structure.relations + tuple(missing),
        structure.directed,
    )


def automorphism_generators(
    structure: Structure, config: EngineConfig | None = None
) -> GeneratorSet:
    """Generators of Aut(structure), each verified as an automorphism."""
    n = structure.vertex_count
    gens = digraph_automorphisms(_as_digraph(structure), config)
    return GeneratorSet(n, tuple(g.restricted(n) for g in gens))
