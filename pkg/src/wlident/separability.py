"""Identification deciders: algebraic automorphisms, inducedness and witnesses."""

import logging
from collections import Counter
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from wlident.coherent import (
    Configuration,
    StarRecord,
    attach_star,
    build_configuration,
    eliminate_star,
    find_star,
    is_thin_fiber,
    nonuniform_coprime_interspaces,
    skeleton,
)
from wlident.config import DEFAULT_CONFIG, K_MAX, EngineConfig
from wlident.errors import (
    ClassBoundExceeded,
    CoherenceViolation,
    ExtensionInconsistent,
    PreconditionReason,
    PreconditionViolated,
    WitnessVerificationFailed,
    WLIdentError,
)
from wlident.groups import (
    ColoredDigraph,
    GeneratorSet,
    Permutation,
    digraph_automorphisms,
    digraph_isomorphism,
    isomorphic,
)
from wlident.refinement import equivalent, same_partition
from wlident.structures import Relation, Structure, bound_report

logger = logging.getLogger(__name__)

CCS_CLASS_BOUND = 5


@dataclass(frozen=True, eq=False)
class AlgebraicMap:
    """A bijection between the basis relations of two configurations."""

    source: Configuration
    target: Configuration
    images: tuple[int, ...]

    def __post_init__(self) -> None:
        if (
            len(self.images) != self.source.relation_count
            or self.source.relation_count != self.target.relation_count
            or sorted(self.images) != list(range(self.target.relation_count))
        ):
            raise ValueError("relation map is not a bijection")

    @classmethod
    def identity(cls, configuration: Configuration) -> "AlgebraicMap":
        return cls(configuration, configuration, tuple(range(configuration.relation_count)))

    def __call__(self, relation: int) -> int:
        return self.images[relation]

    @property
    def is_identity(self) -> bool:
        return self.source is self.target and all(
            r == image for r, image in enumerate(self.images)
        )

    def inverse_images(self) -> list[int]:
        inverse = [0] * len(self.images)
        for r, image in enumerate(self.images):
            inverse[image] = r
        return inverse

    def then(self, other: "AlgebraicMap") -> "AlgebraicMap":
        """Apply self, then other."""
        if other.source is not self.target:
            raise ValueError("maps do not compose")
        return AlgebraicMap(self.source, other.target, tuple(other(r) for r in self.images))

    def is_strict(self) -> bool:
        """Every fiber goes to the fiber on the same vertices."""
        if set(self.source.vertices) != set(self.target.vertices):
            return False
        k = self.source.k
        return all(
            self(self.source.relation_at([v] * k)) == self.target.relation_at([v] * k)
            for v in self.source.vertices
        )

    def violation(self) -> str | None:
        """First failure among equality types (A1), transpositions (A2) and
        intersection numbers (A3), or None for an algebraic isomorphism."""
        source, target = self.source, self.target
        for r in range(source.relation_count):
            image = self(r)
            if source.equality_type(r) != target.equality_type(image):
                return f"relation {r} changes its equality type"
            for i in range(source.k - 1):
                if self(source.transposed(r, i, i + 1)) != target.transposed(image, i, i + 1):
                    return f"relation {r} breaks the transposition of {i} and {i + 1}"
            mapped = Counter(
                {tuple(self(t) for t in ts): count for ts, count in source.profile(r).items()}
            )
            if mapped != target.profile(image):
                return f"intersection numbers of relation {r} are not preserved"
        return None


@dataclass(frozen=True)
class ConfigGraph:
    """The relation/tuple incidence graph whose automorphisms are algebraic."""

    graph: ColoredDigraph
    relation_count: int
    tuples: tuple[tuple[int, ...], ...]


def encode_config_graph(configuration: Configuration) -> ConfigGraph:
    """Vertices are relations and their compatible k-tuples of relations.

    A relation points to every tuple in its intersection profile with the
    intersection number as label; a tuple points to each of its components
    with the positions holding it. Relations also point to their images
    under adjacent transpositions.
    """
    m, k = configuration.relation_count, configuration.k
    compatible = sorted({ts for r in range(m) for ts in configuration.profile(r)})
    index = {ts: m + i for i, ts in enumerate(compatible)}
    colors: list[object] = [
        ("rel", configuration.relation_fibers(r), configuration.equality_type(r))
        for r in range(m)
    ]
    colors.extend(
        ("tup", tuple(configuration.relation_fibers(t) for t in ts)) for ts in compatible
    )
    arcs: dict[tuple[int, int], object] = {}
    for r in range(m):
        for ts, count in configuration.profile(r).items():
            arcs[(r, index[ts])] = ("p", count)
        swaps: dict[int, list[int]] = {}
        for i in range(k - 1):
            swaps.setdefault(configuration.transposed(r, i, i + 1), []).append(i)
        for other, positions in swaps.items():
            arcs[(r, other)] = ("swap", tuple(positions))
    for ts in compatible:
        for r in set(ts):
            arcs[(index[ts], r)] = ("at", tuple(i for i, t in enumerate(ts) if t == r))
    logger.debug(f"configuration graph: {m} relations, {len(compatible)} tuples")
    return ConfigGraph(ColoredDigraph(colors, arcs), m, tuple(compatible))


def strict_algebraic_autos(
    configuration: Configuration, config: EngineConfig | None = None
) -> GeneratorSet:
    """Generators of the strict algebraic automorphisms, as relation permutations.

    Raises:
        CoherenceViolation: A generator fails to verify as an algebraic map.
        SearchBudgetExceeded: The automorphism search exceeds its budget.
    """
    encoded = encode_config_graph(configuration)
    m = encoded.relation_count
    gens = [g.restricted(m) for g in digraph_automorphisms(encoded.graph, config)]
    for g in gens:
        problem = AlgebraicMap(configuration, configuration, g.images).violation()
        if problem:
            raise CoherenceViolation(f"configuration graph automorphism is not algebraic: {problem}")
    result = GeneratorSet(m, tuple(gens))
    logger.info(f"{len(result)} strict algebraic automorphism generators")
    return result


def induced_by_combinatorial(
    configuration: Configuration,
    f: AlgebraicMap,
    arity: int = 2,
    config: EngineConfig | None = None,
) -> Permutation | None:
    """A vertex permutation inducing f, searched on the ``arity``-skeleton.

    The returned permutation (on local vertex indices) has been checked to
    induce f on every k-tuple.

    Raises:
        CoherenceViolation: The skeleton isomorphism does not induce f on the
            full configuration.
    """
    sk = skeleton(configuration, arity)
    n = configuration.vertex_count
    lift = [configuration.relation_of(sk.representative(s)) for s in range(sk.relation_count)]
    down = {c: s for s, c in enumerate(lift)}
    inverse = [0] * sk.relation_count
    for s, c in enumerate(lift):
        inverse[down[f(c)]] = s
    table = sk.table
    mapped = np.asarray(inverse, dtype=np.int64)[table]

    if arity == 2:
        diagonal = np.arange(n) * (n + 1)
        pairs = table.reshape(n, n)
        images = mapped.reshape(n, n)
        first = ColoredDigraph(
            table[diagonal].tolist(),
            {(u, v): int(pairs[u, v]) for u in range(n) for v in range(n) if u != v},
        )
        second = ColoredDigraph(
            mapped[diagonal].tolist(),
            {(u, v): int(images[u, v]) for u in range(n) for v in range(n) if u != v},
        )
        phi = digraph_isomorphism(first, second, config)
    else:
        phi = isomorphic(
            _skeleton_structure(sk, table), _skeleton_structure(sk, mapped), config
        )
    if phi is None:
        return None

    k = configuration.k
    digits = configuration.digits()
    perm = np.asarray(phi.images, dtype=np.int64)
    flat = np.zeros(digits.shape[1], dtype=np.int64)
    for p in range(k):
        flat = flat * n + perm[digits[p]]
    expected = np.asarray(f.images, dtype=np.int64)[configuration.table]
    if not np.array_equal(f.target.table[flat], expected):
        raise CoherenceViolation("skeleton isomorphism does not induce the algebraic map")
    return phi


def _skeleton_structure(sk: Configuration, table: np.ndarray) -> Structure:
    n, arity = sk.vertex_count, sk.k
    grid = np.indices((n,) * arity).reshape(arity, -1).T
    relations = tuple(
        Relation(
            f"s{s}",
            arity,
            frozenset(tuple(int(v) for v in row) for row in grid[table == s]),
        )
        for s in range(sk.relation_count)
    )
    return Structure(n, (0,) * n, relations, directed=True)


@dataclass
class EliminationTrace:
    """Configurations before and after every star elimination.

    ``stages[0]`` is the original configuration, ``stages[-1]`` the star-free
    reduct; ``records[j]`` turns ``stages[j]`` into ``stages[j + 1]``.
    """

    stages: list[Configuration]
    records: list[StarRecord] = field(default_factory=list)

    @property
    def original(self) -> Configuration:
        return self.stages[0]

    @property
    def reduced(self) -> Configuration:
        return self.stages[-1]

    def replay(self, config: EngineConfig | None = None) -> Configuration:
        """Attach every record back onto the reduct, last record first."""
        current = self.reduced
        for record in reversed(self.records):
            current = attach_star(current, record, config)
        return current


def eliminate_all_stars(
    configuration: Configuration, config: EngineConfig | None = None
) -> EliminationTrace:
    trace = EliminationTrace([configuration])
    while (star := find_star(trace.reduced)) is not None:
        reduced, record = eliminate_star(
            trace.reduced, star.removed_fiber, star.relation, config
        )
        trace.stages.append(reduced)
        trace.records.append(record)
    logger.info(
        f"eliminated {len(trace.records)} fibers; "
        f"{trace.reduced.vertex_count} of {configuration.vertex_count} vertices remain"
    )
    return trace


def _eq_classes(
    configuration: Configuration, anchor: Sequence[int], relations: set[int]
) -> list[tuple[int, ...]]:
    """Classes on anchor labels of the relation union ``relations``, by smallest member."""
    classes: list[tuple[int, ...]] = []
    seen: set[int] = set()
    for a in sorted(anchor):
        if a in seen:
            continue
        members = tuple(
            b for b in sorted(anchor) if configuration.relation_at([a, b]) in relations
        )
        if a not in members:
            raise ExtensionInconsistent("image of the star equivalence is not reflexive")
        seen.update(members)
        classes.append(members)
    return classes


def extend_through_stars(
    f: AlgebraicMap, trace: EliminationTrace, config: EngineConfig | None = None
) -> AlgebraicMap:
    """Extend a strict algebraic map on the reduct to the original configuration.

    Every eliminated fiber is re-attached on its original vertices, with the
    classes given by the f-image of the star equivalence.

    Raises:
        ExtensionInconsistent: The extended map is not an algebraic isomorphism.
    """
    g = f
    for j in reversed(range(len(trace.records))):
        record = trace.records[j]
        source, reduced = trace.stages[j], trace.stages[j + 1]
        if g.source is not reduced:
            raise ExtensionInconsistent("map does not start at the traced configuration")
        anchor = record.anchor_vertices
        eq_relations = {
            reduced.relation_at([a, b]) for cls in record.eq_classes for a in cls for b in cls
        }
        image_relations = {g(r) for r in eq_relations}
        classes = _eq_classes(g.target, anchor, image_relations)
        if len(classes) != len(record.removed_vertices) or sum(map(len, classes)) != len(anchor):
            raise ExtensionInconsistent("image classes do not match the removed fiber")
        if sorted(classes) == sorted(record.eq_classes):
            owner = dict(zip(record.eq_classes, record.class_to_x, strict=True))
            class_to_x = tuple(owner[cls] for cls in classes)
        else:
            class_to_x = tuple(sorted(record.removed_vertices))
        try:
            image_record = StarRecord(
                removed_fiber=record.removed_fiber,
                anchor_fiber=record.anchor_fiber,
                star_relation=record.star_relation,
                removed_vertices=record.removed_vertices,
                anchor_vertices=anchor,
                eq_classes=tuple(classes),
                class_to_x=class_to_x,
            )
            attached = attach_star(g.target, image_record, config)
        except WLIdentError as e:
            raise ExtensionInconsistent(f"cannot re-attach fiber {record.removed_fiber}: {e}") from e
        if same_partition(attached.table, source.table):
            attached = source

        removed = set(record.removed_vertices)
        member_of = {x: min(cls) for cls, x in zip(record.eq_classes, record.class_to_x, strict=True)}
        nu = image_record.nu()
        images = []
        for r in range(source.relation_count):
            entries = source.representative_labels(r)
            moved = [p for p, v in enumerate(entries) if v in removed]
            lifted = [member_of[v] if v in removed else v for v in entries]
            target = g.target.representative_labels(g(reduced.relation_at(lifted)))
            if any(target[p] not in nu for p in moved):
                raise ExtensionInconsistent(f"relation {r} leaves the anchor fiber")
            final = [nu[v] if p in moved else v for p, v in enumerate(target)]
            images.append(attached.relation_at(final))
        try:
            g = AlgebraicMap(source, attached, tuple(images))
        except ValueError as e:
            raise ExtensionInconsistent(str(e)) from e
        problem = g.violation()
        if problem:
            raise ExtensionInconsistent(problem)
        logger.debug(f"extended through fiber {record.removed_fiber}")
    return g


@dataclass(frozen=True)
class Witness:
    """A companion structure, checked non-isomorphic and WL[k]-equivalent."""

    companion: Structure
    k: int
    non_isomorphic: bool = True
    equivalent: bool = True

    def transcript(self, original_path: str = "G.txt", companion_path: str = "H.txt") -> str:
        """Commands that re-derive both checks."""
        return "\n".join(
            [
                f"# witness for WL[{self.k}]",
                f"wlident iso {original_path} {companion_path}    # expect: non-isomorphic",
                f"wlident equiv -k {self.k} {original_path} {companion_path}    # expect: equivalent",
                "",
            ]
        )

    def reverify(self, original: Structure, config: EngineConfig | None = None) -> bool:
        return (
            isomorphic(original, self.companion, config) is None
            and equivalent(original, self.companion, self.k, config).equivalent
        )


def build_witness(
    structure: Structure, f: AlgebraicMap, config: EngineConfig | None = None
) -> Witness:
    """Replace every relation by the f-image of its basis relations.

    Raises:
        WitnessVerificationFailed: The companion is isomorphic to the input or
            distinguished from it by WL[k].
    """
    source, target = f.source, f.target
    n, k = structure.vertex_count, source.k
    if source.vertices != tuple(range(n)) or target.vertices != source.vertices:
        raise ValueError("the algebraic map must act on the full configuration")

    diagonal = np.arange(n) * sum(n**i for i in range(k))
    color_of_relation = {
        int(source.table[flat]): structure.vertex_color[v] for v, flat in enumerate(diagonal)
    }
    inverse = f.inverse_images()
    colors = [color_of_relation[inverse[int(target.table[flat])]] for flat in diagonal]

    relations = []
    for relation in structure.relations:
        r = relation.arity
        grid = np.indices((n,) * r, dtype=np.int64).reshape(r, -1)
        flat = np.zeros(grid.shape[1], dtype=np.int64)
        for i in range(r):
            flat = flat + grid[i] * n ** (k - 1 - i)
        flat = flat + grid[r - 1] * sum(n**i for i in range(k - r))
        basis = {source.relation_of(entry) for entry in relation.tuples}
        member = np.isin(target.table[flat], [f(c) for c in basis])
        tuples = frozenset(tuple(int(v) for v in row) for row in grid[:, member].T)
        relations.append(Relation(relation.name, r, tuples))
    try:
        companion = Structure(n, tuple(colors), tuple(relations), structure.directed)
    except WLIdentError as e:
        raise WitnessVerificationFailed(f"companion is not a valid structure: {e}") from e

    if isomorphic(structure, companion, config) is not None:
        raise WitnessVerificationFailed("companion is isomorphic to the input")
    if not equivalent(structure, companion, k, config).equivalent:
        raise WitnessVerificationFailed(f"companion is distinguished by WL[{k}]")
    logger.info(f"witness verified: non-isomorphic and WL[{k}]-equivalent")
    return Witness(companion, k)


class Verdict(Enum):
    IDENTIFIED = "IDENTIFIED"
    NOT_IDENTIFIED = "NOT_IDENTIFIED"


@dataclass(frozen=True)
class IdentificationResult:
    verdict: Verdict
    k: int
    witness: Witness | None = None
    stats: dict[str, int] = field(default_factory=dict)

    @property
    def identified(self) -> bool:
        return self.verdict is Verdict.IDENTIFIED


def _check_k(k: int) -> None:
    if not 2 <= k <= K_MAX:
        raise PreconditionViolated(PreconditionReason.K_RANGE, f"k={k} outside 2..{K_MAX}")


def _first_non_induced(
    configuration: Configuration,
    gens: GeneratorSet,
    arity: int,
    config: EngineConfig,
) -> AlgebraicMap | None:
    maps = [AlgebraicMap(configuration, configuration, g.images) for g in gens]

    def check(f: AlgebraicMap) -> bool:
        return induced_by_combinatorial(configuration, f, arity, config) is not None

    if config.threads > 1 and len(maps) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            verdicts = list(pool.map(check, maps))
    else:
        verdicts = [check(f) for f in maps]
    for f, induced in zip(maps, verdicts, strict=True):
        if not induced:
            return f
    return None


def decide_identification_ccs5(
    structure: Structure, k: int, config: EngineConfig | None = None
) -> IdentificationResult:
    """Decide WL[k]-identification of a graph with color classes of size at most 5.

    Raises:
        ClassBoundExceeded: A color class has more than five vertices.
        PreconditionViolated: The input is not a graph or k is out of range.
    """
    config = config or DEFAULT_CONFIG
    _check_k(k)
    if not structure.is_graph:
        raise PreconditionViolated(PreconditionReason.ARITY_BOUND, "input must be a graph")
    report = bound_report(structure, check_abelian=False)
    if report.max_class_size > CCS_CLASS_BOUND:
        raise ClassBoundExceeded(
            f"largest color class has {report.max_class_size} > {CCS_CLASS_BOUND} vertices"
        )
    configuration = build_configuration(structure, k, config)
    trace = eliminate_all_stars(configuration, config)
    reduced = trace.reduced
    for first, second in nonuniform_coprime_interspaces(reduced):
        logger.warning(f"non-uniform interspace between fibers {first} and {second} of coprime orders")
    gens = strict_algebraic_autos(reduced, config)
    stats = {
        "vertices": structure.vertex_count,
        "relations": configuration.relation_count,
        "fibers": configuration.fiber_count,
        "stars_eliminated": len(trace.records),
        "reduced_vertices": reduced.vertex_count,
        "generators": len(gens),
    }
    f = _first_non_induced(reduced, gens, 2, config)
    if f is None:
        logger.info(f"WL[{k}] identifies the input")
        return IdentificationResult(Verdict.IDENTIFIED, k, stats=stats)
    extended = extend_through_stars(f, trace, config)
    witness = build_witness(structure, extended, config)
    return IdentificationResult(Verdict.NOT_IDENTIFIED, k, witness, stats)


def decide_identification_abelian(
    structure: Structure, k: int, config: EngineConfig | None = None
) -> IdentificationResult:
    """Decide WL[k]-identification of an r-ary structure with abelian color classes
    of size at most k (r <= k).

    Raises:
        PreconditionViolated: With the first failing condition as reason.
    """
    config = config or DEFAULT_CONFIG
    _check_k(k)
    arity = structure.max_arity
    if arity > k:
        raise PreconditionViolated(PreconditionReason.ARITY_BOUND, f"arity {arity} > k={k}")
    report = bound_report(structure, check_abelian=True)
    if report.max_class_size > k:
        raise PreconditionViolated(
            PreconditionReason.CLASS_BOUND,
            f"largest color class has {report.max_class_size} > k={k} vertices",
        )
    if not report.all_abelian:
        raise PreconditionViolated(PreconditionReason.NON_ABELIAN_CLASS)
    configuration = build_configuration(structure, k, config)
    for fiber in range(configuration.fiber_count):
        if not is_thin_fiber(configuration, fiber):
            raise PreconditionViolated(PreconditionReason.NON_THIN_FIBER, f"fiber {fiber}")
    gens = strict_algebraic_autos(configuration, config)
    stats = {
        "vertices": structure.vertex_count,
        "relations": configuration.relation_count,
        "fibers": configuration.fiber_count,
        "generators": len(gens),
    }
    f = _first_non_induced(configuration, gens, max(2, arity), config)
    if f is None:
        logger.info(f"WL[{k}] identifies the input")
        return IdentificationResult(Verdict.IDENTIFIED, k, stats=stats)
    witness = build_witness(structure, f, config)
    return IdentificationResult(Verdict.NOT_IDENTIFIED, k, witness, stats)


class Mode(Enum):
    CCS5 = "ccs5"
    ABELIAN = "abelian"


@dataclass(frozen=True)
class DimensionResult:
    """Least identifying k found, or None with the witness of the last attempt."""

    dimension: int | None
    attempts: tuple[tuple[int, str], ...]
    witness: Witness | None = None

    @property
    def found(self) -> bool:
        return self.dimension is not None


def wl_dimension_search(
    structure: Structure,
    mode: Mode,
    k_max_search: int,
    config: EngineConfig | None = None,
) -> DimensionResult:
    """Try k = 2, 3, ... up to ``k_max_search`` with the mode's decider.

    In abelian mode, values of k below the arity or class bound are skipped.
    """
    decide = (
        decide_identification_ccs5 if mode is Mode.CCS5 else decide_identification_abelian
    )
    attempts: list[tuple[int, str]] = []
    witness = None
    for k in range(2, min(k_max_search, K_MAX) + 1):
        try:
            result = decide(structure, k, config)
        except PreconditionViolated as e:
            if mode is Mode.ABELIAN and e.reason in (
                PreconditionReason.CLASS_BOUND,
                PreconditionReason.ARITY_BOUND,
            ):
                attempts.append((k, "SKIPPED"))
                continue
            raise
        attempts.append((k, result.verdict.value))
        if result.identified:
            return DimensionResult(k, tuple(attempts))
        witness = result.witness
    return DimensionResult(None, tuple(attempts), witness)
