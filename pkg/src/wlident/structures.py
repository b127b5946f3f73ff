"""Vertex- and edge-colored structures: data model, text format and combinators."""

import logging
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, field
from typing import Any

from wlident.config import K_MAX
from wlident.errors import SignatureMismatch, StructureSyntaxError, ValidationError

logger = logging.getLogger(__name__)

EDGE_PREFIX = "e:"
"""Edge colors live in binary relations named ``e:<color>``."""


def edge_relation_name(color: int) -> str:
    """Name of the binary relation holding edges of the given color."""
    return f"{EDGE_PREFIX}{color}"


@dataclass(frozen=True)
class Relation:
    """A named relation of fixed arity."""

    name: str
    arity: int
    tuples: frozenset[tuple[int, ...]]

    @property
    def is_edge_relation(self) -> bool:
        return self.name.startswith(EDGE_PREFIX)

    @property
    def edge_color(self) -> int:
        return int(self.name[len(EDGE_PREFIX) :])

    def sorted_tuples(self) -> list[tuple[int, ...]]:
        return sorted(self.tuples)


@dataclass(frozen=True)
class Structure:
    """A vertex-colored relational structure; graphs use ``e:<color>`` relations.

    Undirected graphs keep their edge relations symmetric. Relations are kept
    sorted by name so that two structures with the same relations compare equal.
    """

    vertex_count: int
    vertex_color: tuple[int, ...]
    relations: tuple[Relation, ...] = ()
    directed: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "relations", tuple(sorted(self.relations, key=lambda r: r.name))
        )
        self._validate()

    def _validate(self) -> None:
        n = self.vertex_count
        if n < 0:
            raise ValidationError("vertex count must be non-negative")
        if len(self.vertex_color) != n:
            raise ValidationError(
                f"expected {n} vertex colors, got {len(self.vertex_color)}"
            )
        palette = set(self.vertex_color)
        if palette != set(range(len(palette))):
            raise ValidationError(
                f"vertex colors must be dense 0..m-1, got {sorted(palette)}"
            )
        names = [relation.name for relation in self.relations]
        if len(set(names)) != len(names):
            raise ValidationError("relation names must be unique")
        for relation in self.relations:
            if not 1 <= relation.arity <= K_MAX:
                raise ValidationError(
                    f"relation {relation.name} has arity {relation.arity}, "
                    f"supported arities are 1..{K_MAX}"
                )
            if relation.is_edge_relation and relation.arity != 2:
                raise ValidationError(f"edge relation {relation.name} must be binary")
            for entry in relation.tuples:
                if len(entry) != relation.arity:
                    raise ValidationError(
                        f"tuple {entry} does not match arity {relation.arity} "
                        f"of {relation.name}"
                    )
                if any(not 0 <= v < n for v in entry):
                    raise ValidationError(f"tuple {entry} has an out-of-range vertex")
                if relation.is_edge_relation and entry[0] == entry[1]:
                    raise ValidationError(f"self-loop edge {entry}")
                if (
                    relation.is_edge_relation
                    and not self.directed
                    and (entry[1], entry[0]) not in relation.tuples
                ):
                    raise ValidationError(
                        f"undirected edge {entry} is missing its reverse"
                    )

    # Factories

    @classmethod
    def from_edges(
        cls,
        vertex_count: int,
        edges: Iterable[tuple[int, int]] | Mapping[tuple[int, int], int],
        colors: Sequence[int] | None = None,
        directed: bool = False,
        extra_relations: Iterable[Relation] = (),
    ) -> "Structure":
        """Build a graph; ``edges`` may map each edge to its edge color.

        Undirected edges are symmetrized.
        """
        colored = (
            dict(edges)
            if isinstance(edges, Mapping)
            else dict.fromkeys(edges, 0)
        )
        by_color: dict[int, set[tuple[int, int]]] = {}
        for (u, v), color in colored.items():
            by_color.setdefault(color, set()).add((u, v))
            if not directed:
                by_color[color].add((v, u))
        relations = [
            Relation(edge_relation_name(color), 2, frozenset(pairs))
            for color, pairs in by_color.items()
        ]
        relations.extend(extra_relations)
        return cls(
            vertex_count=vertex_count,
            vertex_color=tuple(colors) if colors is not None else (0,) * vertex_count,
            relations=tuple(relations),
            directed=directed,
        )

    # Accessors

    def relation(self, name: str) -> Relation | None:
        for relation in self.relations:
            if relation.name == name:
                return relation
        return None

    def signature(self) -> dict[str, int]:
        """Relation name to arity."""
        return {relation.name: relation.arity for relation in self.relations}

    @property
    def max_arity(self) -> int:
        return max((relation.arity for relation in self.relations), default=1)

    @property
    def is_graph(self) -> bool:
        return self.max_arity <= 2

    @property
    def color_count(self) -> int:
        return len(set(self.vertex_color))

    def color_classes(self) -> list[list[int]]:
        """Vertices of every color, indexed by color id."""
        classes: list[list[int]] = [[] for _ in range(self.color_count)]
        for v, color in enumerate(self.vertex_color):
            classes[color].append(v)
        return classes

    def edges(self) -> list[tuple[int, int, int]]:
        """All edges as ``(u, v, edge_color)`` triples, lexicographically sorted."""
        return sorted(
            (u, v, relation.edge_color)
            for relation in self.relations
            if relation.is_edge_relation
            for (u, v) in relation.tuples
        )

    def edge_color(self) -> dict[tuple[int, int], tuple[int, ...]]:
        """Edge colors of every edge (a pair may carry several colors)."""
        colors: dict[tuple[int, int], list[int]] = {}
        for u, v, color in self.edges():
            colors.setdefault((u, v), []).append(color)
        return {pair: tuple(values) for pair, values in colors.items()}

    # Combinators

    def recolored(self, colors: Sequence[int]) -> "Structure":
        """Same relations, new vertex colors (compacted to dense ids)."""
        return Structure(
            vertex_count=self.vertex_count,
            vertex_color=compact_colors(colors),
            relations=self.relations,
            directed=self.directed,
        )

    def with_vertex_color(self, v: int) -> "Structure":
        """Give ``v`` a fresh color of its own (individualize it)."""
        colors = list(self.vertex_color)
        colors[v] = max(colors, default=-1) + 1
        return self.recolored(colors)

    def split_pair(self, a: int, b: int) -> "Structure":
        """Give ``a`` and ``b`` two distinct fresh colors."""
        colors = list(self.vertex_color)
        fresh = max(colors, default=-1) + 1
        colors[a] = fresh
        colors[b] = fresh + 1
        return self.recolored(colors)

    def marked(self, v: int, name: str = "mark") -> "Structure":
        """Individualize ``v`` through a unary relation, keeping every color id.

        Unlike ``with_vertex_color`` the result stays comparable with the same
        structure marked at another vertex.
        """
        if self.relation(name) is not None:
            raise ValidationError(f"relation {name} already exists")
        marker = Relation(name, 1, frozenset({(v,)}))
        return Structure(
            self.vertex_count, self.vertex_color, self.relations + (marker,), self.directed
        )

    def permuted(self, perm: Sequence[int]) -> "Structure":
        """Image of the structure under the vertex map ``v -> perm[v]``."""
        colors = [0] * self.vertex_count
        for v, color in enumerate(self.vertex_color):
            colors[perm[v]] = color
        relations = tuple(
            Relation(
                relation.name,
                relation.arity,
                frozenset(tuple(perm[v] for v in entry) for entry in relation.tuples),
            )
            for relation in self.relations
        )
        return Structure(self.vertex_count, tuple(colors), relations, self.directed)

    def induced(self, vertices: Iterable[int]) -> "Structure":
        """Substructure induced on ``vertices``, relabelled in ascending order."""
        kept = sorted(set(vertices))
        index = {v: i for i, v in enumerate(kept)}
        relations = tuple(
            Relation(
                relation.name,
                relation.arity,
                frozenset(
                    tuple(index[v] for v in entry)
                    for entry in relation.tuples
                    if all(v in index for v in entry)
                ),
            )
            for relation in self.relations
        )
        colors = compact_colors([self.vertex_color[v] for v in kept])
        return Structure(len(kept), colors, relations, self.directed)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def compact_colors(colors: Sequence[int]) -> tuple[int, ...]:
    """Renumber colors densely, keeping their relative order."""
    ranks = {color: rank for rank, color in enumerate(sorted(set(colors)))}
    return tuple(ranks[color] for color in colors)


@dataclass(frozen=True)
class ColorClassReport:
    """Sizes and automorphism-group shape of the color classes of a structure."""

    class_sizes: tuple[int, ...]
    max_class_size: int
    abelian_flags: tuple[bool, ...] = field(default=())

    @property
    def all_abelian(self) -> bool:
        return all(self.abelian_flags)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def decode_text(text: bytes | str) -> str:
    """Decode file contents as UTF-8.

    Raises:
        StructureSyntaxError: The bytes are not UTF-8; the line holds the first bad byte.
    """
    if isinstance(text, str):
        return text
    try:
        return text.decode("utf-8")
    except UnicodeDecodeError as e:
        line = text.count(b"\n", 0, e.start) + 1
        raise StructureSyntaxError(line, f"invalid UTF-8 byte 0x{text[e.start]:02x}") from e


def parse(text: bytes | str) -> Structure:
    """Parse the line-oriented structure format.

    Args:
        text: File contents; ``#`` starts a comment.

    Returns:
        The validated structure.

    Raises:
        StructureSyntaxError: A line is malformed.
        ValidationError: The lines are well-formed but describe an invalid structure.
    """
    text = decode_text(text)

    header: tuple[int, bool] | None = None
    colors: dict[int, int] = {}
    edges: dict[int, set[tuple[int, int]]] = {}
    tuples: dict[str, tuple[int, set[tuple[int, ...]]]] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind = tokens[0]
        if header is None:
            if kind != "p":
                raise StructureSyntaxError(lineno, "the first line must be the 'p' header")
            header = _parse_header(lineno, tokens)
            continue
        n = header[0]
        if kind == "p":
            raise StructureSyntaxError(lineno, "duplicate 'p' header")
        if kind == "v":
            v, color = _ints(lineno, tokens[1:], 2)
            _check_vertex(v, n)
            if color < 0:
                raise ValidationError(f"line {lineno}: negative color {color}")
            if v in colors:
                raise ValidationError(f"line {lineno}: duplicate vertex {v}")
            colors[v] = color
        elif kind == "e":
            if len(tokens) not in (3, 4):
                raise StructureSyntaxError(lineno, "expected 'e <u> <v> [<color>]'")
            values = _ints(lineno, tokens[1:], len(tokens) - 1)
            u, v = values[0], values[1]
            color = values[2] if len(values) == 3 else 0
            _check_vertex(u, n)
            _check_vertex(v, n)
            if u == v:
                raise ValidationError(f"line {lineno}: self-loop on vertex {u}")
            if color < 0:
                raise ValidationError(f"line {lineno}: negative edge color {color}")
            pairs = edges.setdefault(color, set())
            pairs.add((u, v))
            if not header[1]:
                pairs.add((v, u))
        elif kind == "r":
            if len(tokens) < 4:
                raise StructureSyntaxError(lineno, "expected 'r <name> <arity> <v1> ...'")
            name = tokens[1]
            if name.startswith(EDGE_PREFIX) or ":" in name:
                raise StructureSyntaxError(lineno, f"invalid relation name {name!r}")
            arity = _ints(lineno, tokens[2:3], 1)[0]
            entry = tuple(_ints(lineno, tokens[3:], arity))
            for v in entry:
                _check_vertex(v, n)
            known_arity, members = tuples.setdefault(name, (arity, set()))
            if known_arity != arity:
                raise ValidationError(
                    f"line {lineno}: relation {name} used with arities "
                    f"{known_arity} and {arity}"
                )
            members.add(entry)
        else:
            raise StructureSyntaxError(lineno, f"unknown line type {kind!r}")

    if header is None:
        raise StructureSyntaxError(1, "missing 'p' header")
    n, directed = header
    relations = [
        Relation(edge_relation_name(color), 2, frozenset(pairs))
        for color, pairs in edges.items()
    ]
    relations.extend(
        Relation(name, arity, frozenset(members))
        for name, (arity, members) in tuples.items()
    )
    return Structure(
        vertex_count=n,
        vertex_color=tuple(colors.get(v, 0) for v in range(n)),
        relations=tuple(relations),
        directed=directed,
    )


def _parse_header(lineno: int, tokens: list[str]) -> tuple[int, bool]:
    if len(tokens) != 4 or tokens[1] not in ("struct", "graph"):
        raise StructureSyntaxError(lineno, "expected 'p struct <n> <directed|undirected>'")
    if tokens[3] not in ("directed", "undirected"):
        raise StructureSyntaxError(lineno, f"unknown orientation {tokens[3]!r}")
    n = _ints(lineno, tokens[2:3], 1)[0]
    if n < 0:
        raise ValidationError(f"line {lineno}: negative vertex count")
    return n, tokens[3] == "directed"


def _ints(lineno: int, tokens: list[str], count: int) -> list[int]:
    if len(tokens) != count:
        raise StructureSyntaxError(lineno, f"expected {count} integers, got {len(tokens)}")
    try:
        return [int(token) for token in tokens]
    except ValueError as e:
        raise StructureSyntaxError(lineno, f"not an integer: {e}") from e


def _check_vertex(v: int, n: int) -> None:
    if not 0 <= v < n:
        raise ValidationError(f"vertex {v} out of range 0..{n - 1}")


def serialize(structure: Structure, comments: Iterable[str] = ()) -> bytes:
    """Render a structure in canonical order (vertices ascending, tuples sorted).

    Args:
        structure: The structure to render.
        comments: Extra lines emitted as ``#`` comments after the header.
    """
    orientation = "directed" if structure.directed else "undirected"
    lines = [f"p struct {structure.vertex_count} {orientation}"]
    lines.extend(f"# {comment}" for comment in comments)
    lines.extend(f"v {v} {color}" for v, color in enumerate(structure.vertex_color))
    for u, v, color in structure.edges():
        if not structure.directed and u > v:
            continue
        lines.append(f"e {u} {v}" if color == 0 else f"e {u} {v} {color}")
    for relation in structure.relations:
        if relation.is_edge_relation:
            continue
        for entry in relation.sorted_tuples():
            values = " ".join(str(v) for v in entry)
            lines.append(f"r {relation.name} {relation.arity} {values}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def disjoint_union(first: Structure, second: Structure) -> tuple[Structure, int]:
    """Place ``second`` after ``first``; colors are shared, not offset.

    Returns:
        The union and the vertex-id offset of ``second``.

    Raises:
        SignatureMismatch: A relation name is used with two arities, or the
            orientations differ.
    """
    if first.directed != second.directed:
        raise SignatureMismatch("cannot join a directed and an undirected structure")
    left, right = first.signature(), second.signature()
    for name in left.keys() & right.keys():
        if left[name] != right[name]:
            raise SignatureMismatch(
                f"relation {name} has arity {left[name]} and {right[name]}"
            )
    offset = first.vertex_count
    merged: dict[str, tuple[int, set[tuple[int, ...]]]] = {}
    for relation in first.relations:
        merged[relation.name] = (relation.arity, set(relation.tuples))
    for relation in second.relations:
        _, members = merged.setdefault(relation.name, (relation.arity, set()))
        members.update(tuple(v + offset for v in entry) for entry in relation.tuples)
    union = Structure(
        vertex_count=first.vertex_count + second.vertex_count,
        vertex_color=compact_colors(first.vertex_color + second.vertex_color),
        relations=tuple(
            Relation(name, arity, frozenset(members))
            for name, (arity, members) in merged.items()
        ),
        directed=first.directed,
    )
    return union, offset


def bound_report(structure: Structure, check_abelian: bool = True) -> ColorClassReport:
    """Report color class sizes and whether every class has an abelian group."""
    sizes = Counter(structure.vertex_color)
    class_sizes = tuple(sizes[color] for color in range(structure.color_count))
    flags: tuple[bool, ...] = ()
    if check_abelian:
        from wlident.groups import automorphism_generators, is_abelian

        flags = tuple(
            is_abelian(automorphism_generators(structure.induced(members)))
            for members in structure.color_classes()
        )
        logger.debug(f"abelian flags per class: {flags}")
    return ColorClassReport(
        class_sizes=class_sizes,
        max_class_size=max(class_sizes, default=0),
        abelian_flags=flags,
    )
