"""Instance generators: CFI graphs, walls, one-way switches, gates and circuit reductions."""

import itertools
import logging
import random
import re
from collections.abc import Mapping
from dataclasses import dataclass, field

import networkx as nx
from networkx.algorithms.approximation import treewidth_min_degree

from wlident.circuits import MonotoneCircuit, NodeKind
from wlident.config import DEFAULT_CONFIG, EngineConfig
from wlident.errors import DegreeTooLarge, TooLarge, ValidationError
from wlident.structures import Structure, compact_colors

logger = logging.getLogger(__name__)

Pair = tuple[int, int]
Twist = int | Mapping[tuple[int, int], int]
"""A parity bit applied to the first base edge, or one bit per base edge."""


@dataclass(frozen=True)
class Gadget:
    """A generated structure together with its named vertex pairs.

    Attributes:
        structure: The generated structure.
        pairs: Registry of named pairs, e.g. ``"3/1"`` for the outer pair of
            base vertex 3 on the edge towards 1, or ``"3/port0"`` for a free pair.
        inputs: Designated input pairs (switches and gates).
        output: Designated output pair (switches and gates).
    """

    structure: Structure
    pairs: Mapping[str, Pair] = field(default_factory=dict)
    inputs: tuple[Pair, ...] = ()
    output: Pair | None = None

    def registry(self) -> list[str]:
        """Registry lines in the ``pair <node> <v1> <v2>`` comment format."""
        return [f"pair {name} {a} {b}" for name, (a, b) in self.pairs.items()]


@dataclass(frozen=True)
class McvpInstance:
    """The graphs built from a monotone circuit.

    ``plain`` has one pair per circuit node; ``starred`` additionally carries a
    switch from the output pair whose own output pair is split.
    """

    plain: Structure
    starred: Structure
    pairs: Mapping[str, Pair]
    output: Pair

    def registry(self) -> list[str]:
        return [f"pair {name} {a} {b}" for name, (a, b) in self.pairs.items()]


# Base graphs


def cycle_graph(n: int) -> nx.Graph:
    return nx.cycle_graph(n)


def complete_graph(n: int) -> nx.Graph:
    return nx.complete_graph(n)


def path_graph(n: int) -> nx.Graph:
    return nx.path_graph(n)


def grid_graph(rows: int, columns: int) -> nx.Graph:
    return nx.convert_node_labels_to_integers(
        nx.grid_2d_graph(rows, columns), ordering="sorted"
    )


_BASE_PATTERNS: tuple[tuple[str, str], ...] = (
    (r"k(\d+)", "complete"),
    (r"c(\d+)", "cycle"),
    (r"p(\d+)", "path"),
    (r"grid(\d+)x(\d+)", "grid"),
    (r"wall(\d+)", "wall"),
)


def base_graph(name: str) -> nx.Graph:
    """Resolve a base graph name such as ``k4``, ``c5``, ``p3``, ``grid3x3`` or ``wall2``."""
    for pattern, family in _BASE_PATTERNS:
        match = re.fullmatch(pattern, name.lower())
        if not match:
            continue
        sizes = [int(group) for group in match.groups()]
        if family == "complete":
            return complete_graph(sizes[0])
        if family == "cycle":
            if sizes[0] < 3:
                raise ValidationError("a cycle needs at least 3 vertices")
            return cycle_graph(sizes[0])
        if family == "path":
            return path_graph(sizes[0])
        if family == "grid":
            return grid_graph(sizes[0], sizes[1])
        return wall_base(sizes[0])[0]
    raise ValidationError(f"unknown base graph {name!r}")


def _check_base(base: nx.Graph) -> None:
    if base.number_of_nodes() == 0:
        raise ValidationError("base graph is empty")
    if nx.number_of_selfloops(base):
        raise ValidationError("base graph has self-loops")
    if not nx.is_connected(base):
        raise ValidationError("base graph is not connected")


def _edge_key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u <= v else (v, u)


def _twist_bits(base: nx.Graph, twist: Twist) -> dict[tuple[int, int], int]:
    edges = sorted(_edge_key(u, v) for u, v in base.edges)
    bits = dict.fromkeys(edges, 0)
    if isinstance(twist, int):
        if twist % 2 and edges:
            bits[edges[0]] = 1
        return bits
    for (u, v), bit in twist.items():
        key = _edge_key(u, v)
        if key not in bits:
            raise ValidationError(f"twist names {u}-{v}, which is not a base edge")
        bits[key] = bit % 2
    return bits


def twist_parity(base: nx.Graph, twist: Twist) -> int:
    """Sum of the twist bits modulo 2; CFI graphs are isomorphic iff these agree."""
    return sum(_twist_bits(base, twist).values()) % 2


# CFI


def cfi(
    base: nx.Graph,
    twist: Twist = 0,
    abelianize: bool = False,
    open_ports: Mapping[int, int] | None = None,
    config: EngineConfig | None = None,
) -> Gadget:
    """Build the CFI graph over ``base``.

    Every base vertex v of degree d (counting open ports) becomes one inner
    class of the 2^(d-1) even 0/1 vectors over its edges, plus one outer pair
    per edge; inner vector x is adjacent to outer vertex ``x_e`` of edge e.
    The outer pairs of an edge {u, v} are joined by the identity matching,
    or by the crossed one when the edge is twisted.

    Args:
        base: Connected simple graph with sortable vertex labels.
        twist: Parity bit or per-edge bits.
        abelianize: Join inner vertices sharing exactly one outer neighbor with
            an edge colored by that neighbor's class, which makes the
            automorphism group of every color class abelian.
        open_ports: Extra free outer pairs per base vertex.
        config: Supplies ``cfi_inner_class_cap``.

    Raises:
        ValidationError: The base graph is empty, disconnected or has loops.
        DegreeTooLarge: An inner class would exceed the cap.
    """
    config = config or DEFAULT_CONFIG
    _check_base(base)
    ports = dict(open_ports or {})
    bits = _twist_bits(base, twist)
    colors: list[int] = []
    edges: dict[Pair, int] = {}
    pairs: dict[str, Pair] = {}
    towards: dict[tuple[int, int], Pair] = {}
    color = 0

    for v in sorted(base.nodes):
        neighbors = sorted(base.neighbors(v))
        degree = len(neighbors) + ports.get(v, 0)
        inner_size = 2 ** (degree - 1) if degree else 1
        if inner_size > config.cfi_inner_class_cap:
            raise DegreeTooLarge(
                f"vertex {v} of degree {degree} needs {inner_size} inner vertices, "
                f"cap is {config.cfi_inner_class_cap}"
            )
        vectors = [x for x in itertools.product((0, 1), repeat=degree) if sum(x) % 2 == 0]
        start = len(colors)
        colors.extend([color] * len(vectors))
        color += 1

        slots: list[Pair] = []
        for slot in range(degree):
            pair = (len(colors), len(colors) + 1)
            colors.extend([color, color])
            color += 1
            slots.append(pair)
            if slot < len(neighbors):
                pairs[f"{v}/{neighbors[slot]}"] = pair
                towards[(v, neighbors[slot])] = pair
            else:
                pairs[f"{v}/port{slot - len(neighbors)}"] = pair

        for offset, x in enumerate(vectors):
            for slot, bit in enumerate(x):
                edges[(start + offset, slots[slot][bit])] = 0
        if abelianize:
            for (i, x), (j, y) in itertools.combinations(enumerate(vectors), 2):
                common = [slot for slot in range(degree) if x[slot] == y[slot]]
                if len(common) == 1:
                    edges[(start + i, start + j)] = 1 + colors[slots[common[0]][0]]

    for (u, v), bit in bits.items():
        left, right = towards[(u, v)], towards[(v, u)]
        for i, j in itertools.product((0, 1), repeat=2):
            if (i + j) % 2 == bit:
                edges[(left[i], right[j])] = 0

    structure = Structure.from_edges(len(colors), edges, colors)
    logger.info(
        f"CFI graph over {base.number_of_nodes()} base vertices: "
        f"{structure.vertex_count} vertices, parity {sum(bits.values()) % 2}"
    )
    return Gadget(structure, pairs)


# Walls and switches


def wall_base(k: int) -> tuple[nx.Graph, int]:
    """The wall with k rows of vertices and an apex on top.

    Row y (1..k) lives on columns 1..2k+2; a rung joins rows y-1 and y at every
    column x with x + y even, each row spans its outermost rung endpoints, and
    the apex is joined to both ends of the top row.

    Returns:
        The graph with integer vertices and the apex (the largest id).
    """
    if k < 2:
        raise ValidationError("wall graphs need k >= 2")
    grid = nx.Graph()
    rungs = {
        y: [x for x in range(1, 2 * k + 3) if (x + y) % 2 == 0] for y in range(2, k + 1)
    }
    for y, columns in rungs.items():
        for x in columns:
            grid.add_edge((x, y - 1), (x, y))
    for y in range(1, k + 1):
        ends = rungs.get(y, []) + rungs.get(y + 1, [])
        nx.add_path(grid, [(x, y) for x in range(min(ends), max(ends) + 1)])

    index = {node: i for i, node in enumerate(sorted(grid.nodes, key=lambda n: (n[1], n[0])))}
    graph = nx.relabel_nodes(grid, index)
    apex = len(index)
    top = sorted(x for x, y in grid.nodes if y == k)
    graph.add_edge(apex, index[(top[0], k)])
    graph.add_edge(apex, index[(top[-1], k)])
    return graph, apex


def one_way_switch(k: int, config: EngineConfig | None = None) -> Gadget:
    """The untwisted CFI graph over the wall with a free pair at the apex.

    The free pair is the output; the apex pair towards its smaller neighbor
    is the input.
    """
    base, apex = wall_base(k)
    gadget = cfi(base, 0, open_ports={apex: 1}, config=config)
    towards = min(base.neighbors(apex))
    return Gadget(
        gadget.structure,
        gadget.pairs,
        inputs=(gadget.pairs[f"{apex}/{towards}"],),
        output=gadget.pairs[f"{apex}/port0"],
    )


def gate_gadget(kind: NodeKind) -> Gadget:
    """Gadget passing splits of its input pairs to the output pair.

    AND splits its output when either input is split; OR only when both are.
    """
    if kind is NodeKind.AND:
        colors = [0, 0, 1, 1, 2, 2]
        edges = [(0, 4), (4, 2), (1, 5), (5, 3)]
    elif kind is NodeKind.OR:
        colors = [0, 0, 1, 1, 2, 2, 3, 3, 3, 3]
        k0, k1, k2, k3 = 6, 7, 8, 9
        edges = [
            (4, k0), (4, k1), (5, k2), (5, k3),
            (0, k0), (0, k2), (1, k1), (1, k3),
            (2, k0), (2, k3), (3, k1), (3, k2),
        ]  # fmt: skip
    else:
        raise ValidationError(f"no gate gadget for {kind.value}")
    structure = Structure.from_edges(len(colors), edges, colors)
    return Gadget(
        structure,
        {"in0": (0, 1), "in1": (2, 3), "out": (4, 5)},
        inputs=((0, 1), (2, 3)),
        output=(4, 5),
    )


# Circuit reduction


class _Builder:
    """Glues gadget copies together; every copy gets its own block of colors."""

    def __init__(self) -> None:
        self.colors: list[int] = []
        self.edges: dict[Pair, int] = {}
        self._next_color = 0

    def fresh_color(self) -> int:
        color = self._next_color
        self._next_color += 1
        return color

    def add_vertex(self, color: int) -> int:
        self.colors.append(color)
        return len(self.colors) - 1

    def attach(self, structure: Structure, merges: Mapping[int, int]) -> list[int]:
        """Copy ``structure`` in; vertices in ``merges`` are identified with existing ones."""
        offset = self._next_color
        self._next_color += structure.color_count
        ids = [
            merges[g] if g in merges else self.add_vertex(offset + structure.vertex_color[g])
            for g in range(structure.vertex_count)
        ]
        for u, v, color in structure.edges():
            a, b = ids[u], ids[v]
            if a != b:
                self.edges[_edge_key(a, b)] = color
        return ids

    def structure(self) -> Structure:
        return Structure.from_edges(len(self.colors), self.edges, compact_colors(self.colors))


def _merge(gadget_pair: Pair, target: Pair) -> dict[int, int]:
    return {gadget_pair[0]: target[0], gadget_pair[1]: target[1]}


def mcvp_graph(
    circuit: MonotoneCircuit, k: int, config: EngineConfig | None = None
) -> McvpInstance:
    """Encode a monotone circuit so that WL[k] splits exactly the false pairs.

    Every node gets a pair; FALSE inputs are split from the start. Gate inputs
    are fed through fresh one-way switches, and switches from the output pair
    lead back to every TRUE input other than the output node itself.
    """
    if k < 2:
        raise ValidationError("circuit graphs need k >= 2")
    switch = one_way_switch(k, config)
    switch_in, switch_out = switch.inputs[0], switch.output
    assert switch_out is not None
    gates = {kind: gate_gadget(kind) for kind in (NodeKind.AND, NodeKind.OR)}

    builder = _Builder()
    pairs: dict[str, Pair] = {}
    for node in circuit.nodes:
        if node.kind is NodeKind.INPUT:
            if node.value:
                color = builder.fresh_color()
                pair = (builder.add_vertex(color), builder.add_vertex(color))
            else:
                pair = (
                    builder.add_vertex(builder.fresh_color()),
                    builder.add_vertex(builder.fresh_color()),
                )
        else:
            gate = gates[node.kind]
            merges: dict[int, int] = {}
            for source, gate_input in zip(node.inputs, gate.inputs, strict=True):
                ids = builder.attach(switch.structure, _merge(switch_in, pairs[source]))
                merges.update(_merge(gate_input, (ids[switch_out[0]], ids[switch_out[1]])))
            ids = builder.attach(gate.structure, merges)
            assert gate.output is not None
            pair = (ids[gate.output[0]], ids[gate.output[1]])
        pairs[node.name] = pair

    output = pairs[circuit.output]
    for node in circuit.inputs():
        # an output that is itself a TRUE input needs no switch back to itself
        if node.value and pairs[node.name] != output:
            merges = _merge(switch_in, output)
            merges.update(_merge(switch_out, pairs[node.name]))
            builder.attach(switch.structure, merges)
    plain = builder.structure()

    ids = builder.attach(switch.structure, _merge(switch_in, output))
    builder.colors[ids[switch_out[0]]] = builder.fresh_color()
    starred = builder.structure()
    logger.info(
        f"circuit graph with {plain.vertex_count} vertices "
        f"({starred.vertex_count} with the extra switch) at k={k}"
    )
    return McvpInstance(plain, starred, pairs, output)


# Color erasure


def erase_colors(structure: Structure) -> Structure:
    """Replace vertex colors by an uncolored scaffold.

    Adds a vertex u joined to every original vertex, a path p_0 ... p_{m-1}
    over the m colors with a pendant vertex hanging off p_0, and an edge from
    every vertex to the path vertex of its color. Color refinement recovers
    the original partition as long as u is the unique vertex of largest degree.

    Raises:
        ValidationError: The input is directed, empty, or not a simple graph.
    """
    if structure.directed or structure.vertex_count == 0:
        raise ValidationError("color erasure needs a non-empty undirected graph")
    if len(structure.relations) > 1 or any(
        not relation.is_edge_relation for relation in structure.relations
    ):
        raise ValidationError("color erasure needs a graph with a single edge color")
    n, m = structure.vertex_count, structure.color_count
    universal = n
    path = list(range(n + 1, n + 1 + m))
    pendant = n + 1 + m
    edges = {(u, v) for u, v, _ in structure.edges() if u < v}
    edges.update((x, universal) for x in range(n))
    edges.update(itertools.pairwise(path))
    edges.add((path[0], pendant))
    edges.update((x, path[color]) for x, color in enumerate(structure.vertex_color))
    logger.debug(f"erased {m} colors with {m + 2} scaffold vertices")
    return Structure.from_edges(n + m + 2, edges)


# Tree-width


def as_networkx(graph: nx.Graph | Structure) -> nx.Graph:
    """Underlying undirected simple graph."""
    if isinstance(graph, nx.Graph):
        return graph
    result = nx.Graph()
    result.add_nodes_from(range(graph.vertex_count))
    result.add_edges_from((u, v) for u, v, _ in graph.edges() if u != v)
    return result


def _reach(adjacency: list[int], inside: int, v: int) -> int:
    """Vertices outside ``inside`` reachable from v through ``inside``."""
    seen = 1 << v
    frontier = [v]
    reached = 0
    while frontier:
        x = frontier.pop()
        new = adjacency[x] & ~seen
        seen |= new
        reached |= new & ~inside
        through = new & inside
        while through:
            low = through & -through
            frontier.append(low.bit_length() - 1)
            through ^= low
    return reached.bit_count()


def treewidth_exact(graph: nx.Graph | Structure, config: EngineConfig | None = None) -> int:
    """Exact tree-width by dynamic programming over elimination prefixes.

    TW(S) is the best width of eliminating the set S first; eliminating v after
    S costs the number of vertices outside S reachable from v through S.

    Raises:
        TooLarge: The graph has more than ``treewidth_vertex_limit`` vertices.
    """
    config = config or DEFAULT_CONFIG
    g = as_networkx(graph)
    n = g.number_of_nodes()
    if n > config.treewidth_vertex_limit:
        raise TooLarge(
            f"tree-width oracle accepts at most {config.treewidth_vertex_limit} vertices, got {n}"
        )
    if n == 0:
        return 0
    index = {v: i for i, v in enumerate(sorted(g.nodes))}
    adjacency = [0] * n
    for u, v in g.edges:
        if u != v:
            adjacency[index[u]] |= 1 << index[v]
            adjacency[index[v]] |= 1 << index[u]

    best = [0] * (1 << n)
    best[0] = -1
    for mask in range(1, 1 << n):
        value = n
        rest = mask
        while rest:
            low = rest & -rest
            rest ^= low
            prefix = mask ^ low
            cost = max(best[prefix], _reach(adjacency, prefix, low.bit_length() - 1))
            value = min(value, cost)
        best[mask] = value
    width = max(best[-1], 0)
    if config.debug_checks:
        upper, _ = treewidth_min_degree(g)
        if width > upper:
            raise AssertionError(f"exact tree-width {width} above heuristic bound {upper}")
    logger.debug(f"tree-width {width} on {n} vertices")
    return width


# Random instances


def random_bounded_graph(
    rng: random.Random, n: int, bound: int, edge_probability: float = 0.4
) -> Structure:
    """A random graph whose color classes have at most ``bound`` vertices."""
    if bound < 1:
        raise ValidationError("class bound must be positive")
    colors: list[int] = []
    color = 0
    while len(colors) < n:
        size = rng.randint(1, min(bound, n - len(colors)))
        colors.extend([color] * size)
        color += 1
    rng.shuffle(colors)
    edges = [
        (u, v) for u, v in itertools.combinations(range(n), 2) if rng.random() < edge_probability
    ]
    return Structure.from_edges(n, edges, compact_colors(colors))
