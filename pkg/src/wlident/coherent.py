"""k-ary coherent configurations: construction, axioms, skeletons and stars."""

import itertools
import logging
import math
import random
import threading
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum

import networkx as nx
import numpy as np

from wlident.config import DEFAULT_CONFIG, EngineConfig
from wlident.errors import (
    CoherenceViolation,
    FiberTooLarge,
    NotAnEquivalence,
    NotARainbow,
    NotAStar,
    NotFunctional,
    UnknownFiberType,
)
from wlident.refinement import (
    StableColoring,
    _refine_round,
    canonical_ids,
    refine,
    stable_coloring,
)
from wlident.structures import Structure

logger = logging.getLogger(__name__)


class Configuration:
    """A partition of V^k into basis relations with derived structure.

    Vertices are addressed by local indices 0..n-1; ``vertices`` maps them to
    the labels of the structure the configuration came from, so that
    configurations on vertex subsets stay comparable.
    """

    def __init__(
        self,
        k: int,
        vertices: Sequence[int],
        table: np.ndarray,
        relation_count: int,
        representatives: np.ndarray,
    ) -> None:
        """Initialize from a dense relation table.

        Args:
            k: Arity of the configuration.
            vertices: Ascending vertex labels, one per local index.
            table: Relation id of every k-tuple, flat base-n index.
            relation_count: Number of basis relations; ids are 0..count-1.
            representatives: Flat index of one tuple per relation.
        """
        self.k = k
        self.vertices = tuple(vertices)
        self.vertex_count = len(self.vertices)
        self.table = table
        self.relation_count = relation_count
        self.representatives = representatives
        self._profiles: dict[int, Counter[tuple[int, ...]]] = {}
        self._pairs: np.ndarray | None = None
        self._lock = threading.Lock()

        n = self.vertex_count
        diagonal = table[np.arange(n, dtype=np.int64) * sum(n**i for i in range(k))]
        fiber_ids, self.fiber_count = canonical_ids(diagonal)
        self.fiber_of_vertex = fiber_ids
        self.fibers = [np.flatnonzero(fiber_ids == f) for f in range(self.fiber_count)]
        self.label_index = {label: i for i, label in enumerate(self.vertices)}

    @classmethod
    def from_table(
        cls, table: np.ndarray, k: int, vertices: Sequence[int]
    ) -> "Configuration":
        """Renumber an arbitrary id table densely (keeping id order)."""
        uniques, first, inverse = np.unique(
            table, return_index=True, return_inverse=True
        )
        return cls(
            k=k,
            vertices=vertices,
            table=inverse.reshape(-1).astype(np.int64),
            relation_count=int(uniques.shape[0]),
            representatives=first.astype(np.int64),
        )

    @classmethod
    def from_coloring(cls, coloring: StableColoring) -> "Configuration":
        return cls.from_table(
            coloring.table, coloring.k, range(coloring.vertex_count)
        )

    # Tuple addressing

    def index(self, entries: Sequence[int]) -> int:
        flat = 0
        for v in entries:
            flat = flat * self.vertex_count + int(v)
        return flat

    def tuple_at(self, flat: int) -> tuple[int, ...]:
        digits: list[int] = []
        for _ in range(self.k):
            flat, digit = divmod(int(flat), self.vertex_count)
            digits.append(digit)
        return tuple(reversed(digits))

    def relation_of(self, entries: Sequence[int]) -> int:
        """Relation of a tuple given by local indices; short tuples are padded."""
        padded = tuple(entries) + (entries[-1],) * (self.k - len(entries))
        return int(self.table[self.index(padded)])

    def representative(self, relation: int) -> tuple[int, ...]:
        return self.tuple_at(int(self.representatives[relation]))

    def relation_at(self, labels: Sequence[int]) -> int:
        """Relation of a tuple given by vertex labels."""
        return self.relation_of([self.label_index[v] for v in labels])

    def representative_labels(self, relation: int) -> tuple[int, ...]:
        return tuple(self.vertices[v] for v in self.representative(relation))

    def array(self) -> np.ndarray:
        return self.table.reshape((self.vertex_count,) * self.k)

    def digits(self) -> np.ndarray:
        """Local entries of every tuple, shape (k, n^k)."""
        return np.indices((self.vertex_count,) * self.k, dtype=np.int64).reshape(
            self.k, -1
        )

    # Per-relation data

    def equality_type(self, relation: int) -> tuple[int, ...]:
        """Position of the first equal entry, for every entry of the representative."""
        entries = self.representative(relation)
        return tuple(entries.index(v) for v in entries)

    def relation_fibers(self, relation: int) -> tuple[int, ...]:
        return tuple(int(self.fiber_of_vertex[v]) for v in self.representative(relation))

    def face(self, relation: int, positions: Sequence[int]) -> int:
        """Relation of the representative restricted to ``positions``, padded."""
        entries = self.representative(relation)
        return self.relation_of([entries[p] for p in positions])

    def transposed(self, relation: int, i: int, j: int) -> int:
        """Relation obtained by swapping positions i and j."""
        entries = list(self.representative(relation))
        entries[i], entries[j] = entries[j], entries[i]
        return self.relation_of(entries)

    def size(self, relation: int) -> int:
        return int(np.count_nonzero(self.table == relation))

    # Binary relations

    def pair_matrix(self) -> np.ndarray:
        """Relation of (u, v, v, ..., v) for every pair of local vertices."""
        n, k = self.vertex_count, self.k
        if k < 2:
            raise ValueError("pair relations need k >= 2")
        if self._pairs is None:
            u = np.arange(n, dtype=np.int64)[:, None]
            v = np.arange(n, dtype=np.int64)[None, :]
            tail = sum(n**i for i in range(k - 1))
            self._pairs = self.table[u * n ** (k - 1) + v * tail]
        return self._pairs

    def pair_relation(self, u: int, v: int) -> int:
        return self.relation_of((u, v))

    def binary_relations(self) -> list[int]:
        return sorted(int(r) for r in np.unique(self.pair_matrix()))

    # Intersection numbers

    def substitutions(self, entries: Sequence[int]) -> np.ndarray:
        """Relations of x[i<-y]; rows are y, columns are positions i."""
        n, k = self.vertex_count, self.k
        flat = self.index(entries)
        ys = np.arange(n, dtype=np.int64)
        columns = []
        for i in range(k):
            stride = n ** (k - 1 - i)
            columns.append(self.table[flat - entries[i] * stride + ys * stride])
        return np.stack(columns, axis=1)

    def profile(self, relation: int) -> Counter[tuple[int, ...]]:
        """All non-zero intersection numbers p(R; T_1..T_k), memoized."""
        cached = self._profiles.get(relation)
        if cached is not None:
            return cached
        rows = self.substitutions(self.representative(relation))
        computed = Counter(tuple(int(t) for t in row) for row in rows)
        with self._lock:
            return self._profiles.setdefault(relation, computed)

    def intersection_number(self, relation: int, targets: Sequence[int]) -> int:
        return self.profile(relation).get(tuple(targets), 0)

    def dump(self) -> str:
        """One line per relation: equality type, fibers and small faces."""
        lines = []
        for r in range(self.relation_count):
            faces = [
                self.face(r, positions)
                for size in (1, 2)
                for positions in itertools.combinations(range(self.k), size)
            ]
            lines.append(
                f"R {r} eqtype {','.join(map(str, self.equality_type(r)))} "
                f"fibers {','.join(map(str, self.relation_fibers(r)))} "
                f"faces {','.join(map(str, faces))}"
            )
        return "\n".join(lines)

    def __repr__(self) -> str:
        return (
            f"Configuration(k={self.k}, n={self.vertex_count}, "
            f"relations={self.relation_count}, fibers={self.fiber_count})"
        )


def _equality_codes(configuration: Configuration) -> np.ndarray:
    digits = configuration.digits()
    codes = np.zeros(digits.shape[1], dtype=np.int64)
    for i, j in itertools.combinations(range(configuration.k), 2):
        codes = codes * 2 + (digits[i] == digits[j])
    return codes


def _rainbow_violation(configuration: Configuration) -> str | None:
    """Describe the first failure of (R1) or (R2), if any."""
    table = configuration.table
    codes = _equality_codes(configuration)
    if not np.array_equal(codes, codes[configuration.representatives[table]]):
        return "a relation mixes equality types (R1)"
    array = configuration.array()
    for i in range(configuration.k - 1):
        swapped = array.swapaxes(i, i + 1).reshape(-1)
        pairs = np.unique(np.stack([table, swapped], axis=1), axis=0).shape[0]
        if pairs != configuration.relation_count:
            return f"not closed under swapping positions {i} and {i + 1} (R2)"
    return None


def check_axioms(
    configuration: Configuration, config: EngineConfig | None = None
) -> None:
    """Verify (R1), (R2) and (C).

    (C) is checked on every tuple (one refinement round must not split a
    relation) when n^k is small or debug checks are on, otherwise on sampled
    tuples against their relation's representative.

    Raises:
        CoherenceViolation: An axiom fails.
    """
    config = config or DEFAULT_CONFIG
    problem = _rainbow_violation(configuration)
    if problem:
        raise CoherenceViolation(problem)
    if configuration.k < 2:
        return
    n, k = configuration.vertex_count, configuration.k
    if config.debug_checks or n**k <= config.exhaustive_axiom_limit:
        _, count = _refine_round(
            configuration.table, n, k, configuration.relation_count, config.threads
        )
        if count != configuration.relation_count:
            raise CoherenceViolation(
                f"intersection numbers are not well-defined (C): "
                f"{configuration.relation_count} relations split into {count}"
            )
        return
    rng = random.Random(config.seed)
    for _ in range(config.sample_checks):
        flat = rng.randrange(n**k)
        relation = int(configuration.table[flat])
        rows = configuration.substitutions(configuration.tuple_at(flat))
        observed = Counter(tuple(int(t) for t in row) for row in rows)
        if observed != configuration.profile(relation):
            raise CoherenceViolation(
                f"intersection numbers of relation {relation} differ between tuples (C)"
            )


def is_coherent(
    configuration: Configuration, config: EngineConfig | None = None
) -> bool:
    try:
        check_axioms(configuration, config)
    except CoherenceViolation:
        return False
    return True


def build_configuration(
    structure: Structure, k: int, config: EngineConfig | None = None
) -> Configuration:
    """The k-ary coherent closure of a structure, from its WL[k] stable coloring."""
    if k < 2:
        raise ValueError("coherent configurations need k >= 2")
    configuration = Configuration.from_coloring(stable_coloring(structure, k, config))
    check_axioms(configuration, config)
    logger.info(
        f"built {configuration!r} from a structure on {structure.vertex_count} vertices"
    )
    return configuration


def lift_rainbow(
    table: np.ndarray, vertex_count: int, arity: int, k: int
) -> np.ndarray:
    """Lift an l-ary rainbow to k-tuples by the classes of all l-subtuples."""
    n = vertex_count
    digits = np.indices((n,) * k, dtype=np.int64).reshape(k, -1)
    columns = []
    for positions in itertools.combinations(range(k), arity):
        flat = np.zeros(digits.shape[1], dtype=np.int64)
        for p in positions:
            flat = flat * n + digits[p]
        columns.append(table[flat])
    ids, _ = canonical_ids(np.stack(columns, axis=1))
    return ids


def coherent_closure(
    rainbow: Configuration, config: EngineConfig | None = None
) -> Configuration:
    """Coarsest coherent configuration refining a rainbow.

    Raises:
        NotARainbow: (R1) or (R2) fails for the input partition.
    """
    problem = _rainbow_violation(rainbow)
    if problem:
        raise NotARainbow(problem)
    seed = StableColoring(
        k=rainbow.k,
        vertex_count=rainbow.vertex_count,
        table=rainbow.table,
        color_count=rainbow.relation_count,
        history=(rainbow.relation_count,),
    )
    closure = Configuration.from_table(
        refine(seed, config).table, rainbow.k, rainbow.vertices
    )
    logger.debug(f"coherent closure: {rainbow.relation_count} -> {closure.relation_count}")
    return closure


def skeleton(configuration: Configuration, arity: int) -> Configuration:
    """The partition of tuples (x_1, ..., x_l, x_l, ..., x_l) as an l-ary configuration."""
    k = configuration.k
    if not 1 <= arity <= k:
        raise ValueError(f"skeleton arity must lie in 1..{k}")
    if arity == k:
        return configuration
    n = configuration.vertex_count
    digits = np.indices((n,) * arity, dtype=np.int64).reshape(arity, -1)
    flat = np.zeros(digits.shape[1], dtype=np.int64)
    for i in range(arity):
        flat = flat + digits[i] * n ** (k - 1 - i)
    tail = sum(n**i for i in range(k - arity))
    flat = flat + digits[arity - 1] * tail
    return Configuration.from_table(configuration.table[flat], arity, configuration.vertices)


def interspace(configuration: Configuration, first: int, second: int) -> list[int]:
    """Binary relations from fiber ``first`` to fiber ``second``."""
    if first == second:
        raise ValueError("an interspace needs two distinct fibers")
    block = configuration.pair_matrix()[
        np.ix_(configuration.fibers[first], configuration.fibers[second])
    ]
    return sorted(int(r) for r in np.unique(block))


def fiber_relations(configuration: Configuration, fiber: int) -> list[int]:
    """Binary relations inside a fiber."""
    members = configuration.fibers[fiber]
    block = configuration.pair_matrix()[np.ix_(members, members)]
    return sorted(int(r) for r in np.unique(block))


class InterspaceType(Enum):
    """Coarse shape of an interspace between two fibers."""

    UNIFORM = "uniform"
    STARS = "stars"
    MATCHING_2K22 = "2K2,2"
    C8 = "C8"
    OTHER = "other"


def interspace_type(configuration: Configuration, first: int, second: int) -> InterspaceType:
    block = configuration.pair_matrix()[
        np.ix_(configuration.fibers[first], configuration.fibers[second])
    ]
    relations = np.unique(block)
    if relations.shape[0] == 1:
        return InterspaceType.UNIFORM
    for r in relations:
        member = block == r
        if (member.sum(axis=1) == 1).all() or (member.sum(axis=0) == 1).all():
            return InterspaceType.STARS
    if block.shape == (4, 4) and relations.shape[0] == 2:
        member = block == relations[0]
        neighborhoods = {tuple(row) for row in member.astype(int).tolist()}
        if len(neighborhoods) == 2:
            return InterspaceType.MATCHING_2K22
        if len(neighborhoods) == 4:
            return InterspaceType.C8
    return InterspaceType.OTHER


def nonuniform_coprime_interspaces(configuration: Configuration) -> list[tuple[int, int]]:
    """Fiber pairs of coprime orders whose interspace is not uniform."""
    found = []
    for first, second in itertools.combinations(range(configuration.fiber_count), 2):
        a = len(configuration.fibers[first])
        b = len(configuration.fibers[second])
        if a > 1 and b > 1 and math.gcd(a, b) == 1 and len(
            interspace(configuration, first, second)
        ) > 1:
            found.append((first, second))
    return found


def extension_number(configuration: Configuration, relation: int, positions: Sequence[int]) -> int:
    """Number of tuples of ``relation`` agreeing with its representative on ``positions``."""
    members = np.flatnonzero(configuration.table == relation)
    digits = np.stack(
        [(members // configuration.vertex_count ** (configuration.k - 1 - p))
         % configuration.vertex_count for p in positions]
    )
    anchor = np.array([configuration.representative(relation)[p] for p in positions])
    return int((digits == anchor[:, None]).all(axis=0).sum())


def check_extension_numbers(configuration: Configuration) -> None:
    """Assert ext(R_I | R) * |R_I| = |R| for every relation and index subset.

    Raises:
        CoherenceViolation: A face has non-constant extension numbers.
    """
    n, k = configuration.vertex_count, configuration.k
    for relation in range(configuration.relation_count):
        members = np.flatnonzero(configuration.table == relation)
        for size in range(1, k):
            for positions in itertools.combinations(range(k), size):
                projection = np.stack(
                    [(members // n ** (k - 1 - p)) % n for p in positions], axis=1
                )
                _, counts = np.unique(projection, axis=0, return_counts=True)
                if counts.min() != counts.max() or counts[0] * counts.shape[0] != members.shape[0]:
                    raise CoherenceViolation(
                        f"relation {relation} has non-constant extension numbers "
                        f"over positions {positions}"
                    )


@dataclass(frozen=True)
class StarCandidate:
    """A relation S from fiber Y to fiber X with out-degree 1 on Y."""

    removed_fiber: int
    anchor_fiber: int
    relation: int


@dataclass(frozen=True)
class StarRecord:
    """What is needed to re-attach an eliminated fiber.

    All vertices are labels. ``eq_classes`` partition the anchor fiber, ordered
    by smallest member; ``class_to_x[i]`` is the removed vertex of class i.
    """

    removed_fiber: int
    anchor_fiber: int
    star_relation: int
    removed_vertices: tuple[int, ...]
    anchor_vertices: tuple[int, ...]
    eq_classes: tuple[tuple[int, ...], ...]
    class_to_x: tuple[int, ...]

    def __post_init__(self) -> None:
        covered = sorted(v for cls in self.eq_classes for v in cls)
        if covered != sorted(self.anchor_vertices):
            raise NotAnEquivalence("classes do not partition the anchor fiber")
        if sorted(self.class_to_x) != sorted(self.removed_vertices):
            raise NotAnEquivalence("classes do not map bijectively to the removed fiber")
        if len({len(cls) for cls in self.eq_classes}) > 1:
            raise NotAnEquivalence("classes have different sizes")

    @property
    def ext(self) -> int:
        """Extension number ext(X|S): anchor vertices per removed vertex."""
        return len(self.eq_classes[0])

    def nu(self) -> dict[int, int]:
        """Anchor label to removed label."""
        return {
            v: x for cls, x in zip(self.eq_classes, self.class_to_x, strict=True) for v in cls
        }


def find_star(configuration: Configuration) -> StarCandidate | None:
    """Smallest (X, Y, S) with S from Y to X of out-degree exactly 1 on Y."""
    pairs = configuration.pair_matrix()
    for removed in range(configuration.fiber_count):
        xs = configuration.fibers[removed]
        for anchor in range(configuration.fiber_count):
            if anchor == removed:
                continue
            block = pairs[np.ix_(configuration.fibers[anchor], xs)]
            for relation in np.unique(block):
                if ((block == relation).sum(axis=1) == 1).all():
                    return StarCandidate(removed, anchor, int(relation))
    return None


def _eq_relation_split(
    configuration: Configuration, anchor_local: np.ndarray, classes: Sequence[int]
) -> bool:
    """Whether 'same class' on the anchor fiber is a union of binary relations."""
    block = configuration.pair_matrix()[np.ix_(anchor_local, anchor_local)]
    labels = np.asarray(classes)
    same = labels[:, None] == labels[None, :]
    return not np.intersect1d(np.unique(block[same]), np.unique(block[~same])).size


def eliminate_star(
    configuration: Configuration,
    removed_fiber: int,
    star_relation: int,
    config: EngineConfig | None = None,
) -> tuple[Configuration, StarRecord]:
    """Remove fiber X, reached from fiber Y by a disjoint union of stars S.

    Raises:
        NotAStar: S does not give every Y-vertex exactly one neighbour in X.
    """
    xs = configuration.fibers[removed_fiber]
    representative = configuration.representative(star_relation)
    anchor_fiber = int(configuration.fiber_of_vertex[representative[0]])
    if anchor_fiber == removed_fiber or int(
        configuration.fiber_of_vertex[representative[-1]]
    ) != removed_fiber:
        raise NotAStar(f"relation {star_relation} does not lead into fiber {removed_fiber}")
    ys = configuration.fibers[anchor_fiber]
    member = configuration.pair_matrix()[np.ix_(ys, xs)] == star_relation
    if not (member.sum(axis=1) == 1).all():
        raise NotAStar(f"relation {star_relation} is not a disjoint union of stars")

    labels = configuration.vertices
    targets = xs[member.argmax(axis=1)]
    grouped: dict[int, list[int]] = {}
    for y, x in zip(ys.tolist(), targets.tolist(), strict=True):
        grouped.setdefault(x, []).append(y)
    ordered = sorted(grouped.items(), key=lambda item: min(item[1]))
    record = StarRecord(
        removed_fiber=removed_fiber,
        anchor_fiber=anchor_fiber,
        star_relation=star_relation,
        removed_vertices=tuple(labels[x] for x in xs.tolist()),
        anchor_vertices=tuple(labels[y] for y in ys.tolist()),
        eq_classes=tuple(tuple(labels[y] for y in members) for _, members in ordered),
        class_to_x=tuple(labels[x] for x, _ in ordered),
    )
    if not _eq_relation_split(configuration, ys, targets.tolist()):
        raise CoherenceViolation("Eq_S is not a union of binary relations")

    keep = np.setdiff1d(np.arange(configuration.vertex_count), xs)
    restricted = configuration.array()[np.ix_(*([keep] * configuration.k))]
    reduced = Configuration.from_table(
        restricted.reshape(-1), configuration.k, [labels[v] for v in keep.tolist()]
    )
    check_axioms(reduced, config)
    logger.debug(
        f"eliminated fiber {removed_fiber} ({len(xs)} vertices) via relation "
        f"{star_relation}; {reduced.vertex_count} vertices remain"
    )
    return reduced, record


def attach_star(
    configuration: Configuration,
    record: StarRecord,
    config: EngineConfig | None = None,
) -> Configuration:
    """Re-attach a fiber X = Y/Eq; relations are the images nu^I(R).

    Raises:
        NotAnEquivalence: The classes are not a union of binary relations of
            the configuration, or the anchor vertices are missing.
        CoherenceViolation: The attached partition is not coherent.
    """
    k, n = configuration.k, configuration.vertex_count
    if not set(record.anchor_vertices) <= set(configuration.vertices):
        raise NotAnEquivalence("anchor vertices are not part of the configuration")
    if set(record.removed_vertices) & set(configuration.vertices):
        raise NotAnEquivalence("removed vertices are still part of the configuration")
    anchor_local = np.array([configuration.label_index[v] for v in record.anchor_vertices])
    nu = record.nu()
    class_of = {v: i for i, cls in enumerate(record.eq_classes) for v in cls}
    classes = [class_of[v] for v in record.anchor_vertices]
    if not _eq_relation_split(configuration, anchor_local, classes):
        raise NotAnEquivalence("classes are not a union of binary relations")

    labels = sorted(configuration.vertices + record.removed_vertices)
    position = {label: i for i, label in enumerate(labels)}
    size = len(labels)
    embed = np.array([position[v] for v in configuration.vertices], dtype=np.int64)
    mapped = embed.copy()
    in_anchor = np.zeros(n, dtype=bool)
    for local, label in zip(anchor_local.tolist(), record.anchor_vertices, strict=True):
        mapped[local] = position[nu[label]]
        in_anchor[local] = True

    digits = configuration.digits()
    targets: list[np.ndarray] = []
    sources: list[np.ndarray] = []
    for mask in range(1 << k):
        chosen = [p for p in range(k) if mask >> p & 1]
        eligible = np.ones(digits.shape[1], dtype=bool)
        for p in chosen:
            eligible &= in_anchor[digits[p]]
        flat = np.zeros(int(eligible.sum()), dtype=np.int64)
        for p in range(k):
            source = mapped if p in chosen else embed
            flat = flat * size + source[digits[p][eligible]]
        targets.append(flat)
        sources.append(configuration.table[eligible] * (1 << k) + mask)
    target = np.concatenate(targets)
    label = np.concatenate(sources)
    if np.unique(target).shape[0] != size**k:
        raise CoherenceViolation("attached relations do not cover every tuple")

    order = np.argsort(target, kind="stable")
    target, label = target[order], label[order]
    repeated = target[1:] == target[:-1]
    graph = nx.Graph()
    graph.add_nodes_from(np.unique(label).tolist())
    links = np.unique(np.stack([label[:-1][repeated], label[1:][repeated]], axis=1), axis=0)
    graph.add_edges_from(links.tolist())
    component = {}
    for rank, nodes in enumerate(sorted(nx.connected_components(graph), key=min)):
        for node in nodes:
            component[node] = rank
    lookup = np.vectorize(component.__getitem__, otypes=[np.int64])
    table = np.empty(size**k, dtype=np.int64)
    table[target] = lookup(label)

    attached = Configuration.from_table(table, k, labels)
    try:
        check_axioms(attached, config)
    except CoherenceViolation as e:
        raise CoherenceViolation(f"attached configuration is not coherent: {e}") from e
    logger.debug(
        f"attached {len(record.removed_vertices)} vertices with ext={record.ext}; "
        f"{attached.relation_count} relations"
    )
    return attached


def functional_map(configuration: Configuration, relation: int) -> np.ndarray:
    """nu_S on local vertices: the unique S-neighbour, or the vertex itself.

    Raises:
        NotFunctional: Some vertex has two outgoing S-pairs.
    """
    member = configuration.pair_matrix() == relation
    degrees = member.sum(axis=1)
    if (degrees > 1).any():
        raise NotFunctional(f"relation {relation} has out-degree above 1")
    identity = np.arange(configuration.vertex_count)
    return np.where(degrees == 1, member.argmax(axis=1), identity)


def functional_image(
    configuration: Configuration,
    star_relation: int,
    positions: Iterable[int],
    relation: int,
) -> int:
    """The relation nu_S^I(R); positions are 0-based."""
    nu = functional_map(configuration, star_relation)
    chosen = set(positions)
    entries = [
        int(nu[v]) if p in chosen else v
        for p, v in enumerate(configuration.representative(relation))
    ]
    return configuration.relation_of(entries)


def is_thin_fiber(configuration: Configuration, fiber: int) -> bool:
    members = configuration.fibers[fiber]
    block = configuration.pair_matrix()[np.ix_(members, members)]
    for relation in np.unique(block):
        member = block == relation
        if not ((member.sum(axis=0) == 1).all() and (member.sum(axis=1) == 1).all()):
            return False
    return True


class FiberType(Enum):
    """Two-dimensional association schemes on at most five points."""

    K1 = "K1"
    K2 = "K2"
    K3 = "K3"
    DIRECTED_C3 = "C3->"
    K4 = "K4"
    F4 = "F4"
    C4 = "C4"
    DIRECTED_C4 = "C4->"
    K5 = "K5"
    C5 = "C5"
    DIRECTED_C5 = "C5->"


_CATALOG = {
    (1, 1, 1): FiberType.K1,
    (2, 2, 2): FiberType.K2,
    (3, 2, 2): FiberType.K3,
    (3, 3, 1): FiberType.DIRECTED_C3,
    (4, 2, 2): FiberType.K4,
    (4, 4, 4): FiberType.F4,
    (4, 3, 3): FiberType.C4,
    (4, 4, 2): FiberType.DIRECTED_C4,
    (5, 2, 2): FiberType.K5,
    (5, 3, 3): FiberType.C5,
    (5, 5, 1): FiberType.DIRECTED_C5,
}


def classify_fiber(configuration: Configuration, fiber: int) -> FiberType:
    """Catalog entry of a fiber, keyed by order, relation count and self-paired count.

    Raises:
        FiberTooLarge: The fiber has more than five vertices.
        UnknownFiberType: The invariants match no catalog entry.
    """
    members = configuration.fibers[fiber]
    if len(members) > 5:
        raise FiberTooLarge(f"fiber {fiber} has {len(members)} vertices")
    block = configuration.pair_matrix()[np.ix_(members, members)]
    relations = np.unique(block)
    self_paired = sum(
        1
        for r in relations
        if np.array_equal(block == r, (block == r).T)
    )
    key = (len(members), int(relations.shape[0]), self_paired)
    try:
        return _CATALOG[key]
    except KeyError:
        raise UnknownFiberType(f"fiber {fiber} has invariants {key}") from None
