"""WL[k] refinement of k-tuples on dense mixed-radix tables."""

import itertools
import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from wlident.config import DEFAULT_CONFIG, K_MAX, EngineConfig
from wlident.errors import (
    ArityExceedsK,
    CoherenceViolation,
    MemoryBudgetExceeded,
    OracleSizeExceeded,
    ValidationError,
)
from wlident.structures import Structure, disjoint_union

logger = logging.getLogger(__name__)

_PACK_LIMIT = 1 << 62
_CHUNK_ROWS = 1 << 16


@dataclass(frozen=True, eq=False)
class StableColoring:
    """A coloring of V^k, stored as a flat table indexed in base n.

    The first tuple entry is the most significant digit. ``history`` holds the
    color count after every round, starting with the initial coloring.
    """

    k: int
    vertex_count: int
    table: np.ndarray
    color_count: int
    round_count: int = 0
    history: tuple[int, ...] = field(default=())

    def index(self, entries: Sequence[int]) -> int:
        """Flat table index of a k-tuple."""
        flat = 0
        for v in entries:
            flat = flat * self.vertex_count + v
        return flat

    def tuple_at(self, flat: int) -> tuple[int, ...]:
        digits: list[int] = []
        for _ in range(self.k):
            flat, digit = divmod(flat, self.vertex_count)
            digits.append(digit)
        return tuple(reversed(digits))

    def pad(self, entries: Sequence[int]) -> tuple[int, ...]:
        """Extend an l-tuple to a k-tuple by repeating its last entry."""
        if not entries or len(entries) > self.k:
            raise ValueError(f"cannot pad a tuple of length {len(entries)} to {self.k}")
        return tuple(entries) + (entries[-1],) * (self.k - len(entries))

    def color(self, entries: Sequence[int]) -> int:
        """Color of a tuple; shorter tuples are padded."""
        return int(self.table[self.index(self.pad(entries))])

    def class_sizes(self) -> np.ndarray:
        return np.bincount(self.table, minlength=self.color_count)

    def vertex_partition(self) -> np.ndarray:
        """Dense ids of the diagonal colors, one per vertex (the fibers)."""
        n = self.vertex_count
        diagonal = self.table[np.arange(n) * _diagonal_stride(n, self.k)]
        _, ids = np.unique(diagonal, return_inverse=True)
        return ids.reshape(-1)

    def as_array(self) -> np.ndarray:
        return self.table.reshape((self.vertex_count,) * self.k)


def _diagonal_stride(n: int, k: int) -> int:
    return sum(n**i for i in range(k))


def check_k(structure: Structure, k: int) -> None:
    """Validate the dimension against the structure's arities."""
    if not 1 <= k <= K_MAX:
        raise ValidationError(f"k must lie in 1..{K_MAX}, got {k}")
    limit = 2 if k == 1 else k
    if structure.max_arity > limit:
        raise ArityExceedsK(
            f"structure has arity {structure.max_arity}, which exceeds k={k}"
        )


def check_memory(n: int, k: int, config: EngineConfig) -> None:
    """Refuse rounds whose tables would exceed the memory budget.

    For k >= 2 a round holds an n^k x (n + 1) descriptor. Color refinement
    holds the n x n pair types, an n x n code table and an n x (n + 1) descriptor.
    """
    itemsize = np.dtype(np.int64).itemsize
    if k == 1:
        estimate = n * (3 * n + 1) * itemsize
    else:
        estimate = n**k * (n + 1) * itemsize
    if estimate > config.memory_budget_bytes:
        raise MemoryBudgetExceeded(estimate, config.memory_budget_bytes)


def canonical_ids(rows: np.ndarray) -> tuple[np.ndarray, int]:
    """Number the distinct rows by lexicographic rank.

    Returns:
        Tuple of (id per row, number of distinct rows).
    """
    if rows.ndim == 1:
        uniques, inverse = np.unique(rows, return_inverse=True)
    else:
        uniques, inverse = np.unique(rows, axis=0, return_inverse=True)
    return inverse.reshape(-1).astype(np.int64), int(uniques.shape[0])


def same_partition(first: np.ndarray, second: np.ndarray) -> bool:
    """Whether two id tables induce the same partition."""
    if first.shape != second.shape:
        return False
    pairs = np.stack([first.reshape(-1), second.reshape(-1)], axis=1)
    joint = np.unique(pairs, axis=0).shape[0]
    return joint == np.unique(first).shape[0] == np.unique(second).shape[0]


def _relation_tensor(n: int, arity: int, tuples: frozenset[tuple[int, ...]]) -> np.ndarray:
    tensor = np.zeros((n,) * arity, dtype=np.int64)
    if tuples:
        coords = np.array(sorted(tuples), dtype=np.int64).T
        tensor[tuple(coords)] = 1
    return tensor


def atomic_features(structure: Structure, k: int) -> np.ndarray:
    """Atomic-type descriptor of every k-tuple, one row per tuple.

    Columns: the vertex colors of the entries, the equality pattern, and for
    every relation and every map of its positions into the tuple positions,
    whether the selected entries form a tuple of the relation.
    """
    n = structure.vertex_count
    grid = np.indices((n,) * k, dtype=np.int64).reshape(k, -1)
    colors = np.asarray(structure.vertex_color, dtype=np.int64)
    columns = [colors[grid[i]] for i in range(k)]
    columns.extend(
        (grid[i] == grid[j]).astype(np.int64)
        for i, j in itertools.combinations(range(k), 2)
    )
    for relation in structure.relations:
        tensor = _relation_tensor(n, relation.arity, relation.tuples)
        for positions in itertools.product(range(k), repeat=relation.arity):
            columns.append(tensor[tuple(grid[p] for p in positions)])
    return np.stack(columns, axis=1)


def initial_coloring(
    structure: Structure, k: int, config: EngineConfig | None = None
) -> StableColoring:
    """Color every k-tuple by its atomic type (round 0).

    Raises:
        ArityExceedsK: A relation has more than k positions (more than 2 for k=1).
        MemoryBudgetExceeded: The refinement tables would not fit.
    """
    config = config or DEFAULT_CONFIG
    check_k(structure, k)
    check_memory(structure.vertex_count, k, config)
    ids, count = canonical_ids(atomic_features(structure, k))
    return StableColoring(
        k=k,
        vertex_count=structure.vertex_count,
        table=ids,
        color_count=count,
        history=(count,),
    )


def _pack_substitutions(
    table: np.ndarray, n: int, k: int, color_count: int, rows: np.ndarray
) -> np.ndarray:
    """Pack the colors of x[i<-y], i=1..k, into one integer per (x, y).

    Packing is lexicographic, so the integer order is the tuple order.
    """
    ys = np.arange(n, dtype=np.int64)
    packed = np.zeros((rows.shape[0], n), dtype=np.int64)
    for i in range(k):
        stride = n ** (k - 1 - i)
        digit = (rows // stride) % n
        substituted = table[(rows - digit * stride)[:, None] + ys[None, :] * stride]
        packed = packed * color_count + substituted
    return packed


def _compressed_substitutions(table: np.ndarray, n: int, k: int) -> np.ndarray:
    """Order-preserving substitution codes when plain packing would overflow."""
    rows = np.arange(n**k, dtype=np.int64)
    ys = np.arange(n, dtype=np.int64)
    codes: np.ndarray | None = None
    for i in range(k):
        stride = n ** (k - 1 - i)
        digit = (rows // stride) % n
        substituted = table[(rows - digit * stride)[:, None] + ys[None, :] * stride]
        if codes is None:
            codes = substituted
            continue
        bound = int(codes.max()) + 1
        scale = int(substituted.max()) + 1
        if bound * scale >= _PACK_LIMIT:
            ids, bound = canonical_ids(codes.reshape(-1))
            codes = ids.reshape(codes.shape)
        codes = codes * scale + substituted
    assert codes is not None
    return codes


def _refine_round(
    table: np.ndarray,
    n: int,
    k: int,
    color_count: int,
    threads: int,
    pair_types: np.ndarray | None = None,
) -> tuple[np.ndarray, int]:
    """One WL round; new ids ranked by (old color, sorted multiset)."""
    total = n**k
    if k == 1:
        assert pair_types is not None
        codes = pair_types * color_count + table[None, :]
        codes.sort(axis=1)
        return canonical_ids(np.column_stack([table, codes]))

    descriptor = np.empty((total, n + 1), dtype=np.int64)
    descriptor[:, 0] = table
    if color_count**k < _PACK_LIMIT:

        def fill(start: int) -> None:
            rows = np.arange(start, min(start + _CHUNK_ROWS, total), dtype=np.int64)
            packed = _pack_substitutions(table, n, k, color_count, rows)
            packed.sort(axis=1)
            descriptor[rows[0] : rows[-1] + 1, 1:] = packed

        starts = range(0, total, _CHUNK_ROWS)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(fill, starts))
        else:
            for start in starts:
                fill(start)
    else:
        codes = _compressed_substitutions(table, n, k)
        codes.sort(axis=1)
        descriptor[:, 1:] = codes
    return canonical_ids(descriptor)


def refine(
    coloring: StableColoring,
    config: EngineConfig | None = None,
    pair_types: np.ndarray | None = None,
) -> StableColoring:
    """Refine a coloring to its fixed point.

    Args:
        coloring: Starting coloring (atomic types or a rainbow).
        config: Engine settings; ``threads`` parallelises descriptor filling.
        pair_types: Atomic types of vertex pairs, required for k=1.

    Returns:
        The stable coloring; one more round would not split any class.
    """
    config = config or DEFAULT_CONFIG
    n, k = coloring.vertex_count, coloring.k
    check_memory(n, k, config)
    table, count = coloring.table, coloring.color_count
    history = list(coloring.history or (count,))
    rounds = coloring.round_count
    while True:
        new_table, new_count = _refine_round(
            table, n, k, count, config.threads, pair_types
        )
        if new_count == count:
            break
        table, count = new_table, new_count
        rounds += 1
        history.append(count)
        logger.debug(f"WL[{k}] round {rounds}: {count} colors")
    return StableColoring(
        k=k,
        vertex_count=n,
        table=table,
        color_count=count,
        round_count=rounds,
        history=tuple(history),
    )


def pair_types(structure: Structure) -> np.ndarray:
    """Atomic types of ordered vertex pairs as an n x n id matrix."""
    n = structure.vertex_count
    ids, _ = canonical_ids(atomic_features(structure, 2))
    return ids.reshape(n, n)


def stable_coloring(
    structure: Structure, k: int, config: EngineConfig | None = None
) -> StableColoring:
    """Compute the WL[k] stable coloring of a structure.

    k=1 is color refinement on vertices, driven by the atomic pair types.

    Raises:
        ArityExceedsK: A relation has more than k positions.
        MemoryBudgetExceeded: The refinement tables would not fit.
    """
    start = initial_coloring(structure, k, config)
    types = pair_types(structure) if k == 1 else None
    result = refine(start, config, types)
    logger.debug(
        f"WL[{k}] on {structure.vertex_count} vertices: {result.color_count} colors "
        f"after {result.round_count} rounds"
    )
    return result


def naive_stable_coloring(
    structure: Structure, k: int, config: EngineConfig | None = None
) -> StableColoring:
    """Reference implementation straight from the definition, for tests.

    Raises:
        OracleSizeExceeded: n^k is above the oracle limit.
    """
    config = config or DEFAULT_CONFIG
    check_k(structure, k)
    n = structure.vertex_count
    if n**k > config.oracle_tuple_limit:
        raise OracleSizeExceeded(f"n^k = {n**k} exceeds {config.oracle_tuple_limit}")
    members = [(r.name, r.arity, r.tuples) for r in structure.relations]

    def atomic(entries: tuple[int, ...]) -> tuple[object, ...]:
        colors = tuple(structure.vertex_color[v] for v in entries)
        equal = tuple(
            entries[i] == entries[j]
            for i, j in itertools.combinations(range(len(entries)), 2)
        )
        facts = tuple(
            (name, positions)
            for name, arity, tuples in members
            for positions in itertools.product(range(len(entries)), repeat=arity)
            if tuple(entries[p] for p in positions) in tuples
        )
        return colors, equal, facts

    def renumber(values: dict[tuple[int, ...], object]) -> dict[tuple[int, ...], int]:
        ranks = {value: rank for rank, value in enumerate(sorted(set(values.values()), key=repr))}
        return {key: ranks[value] for key, value in values.items()}

    tuples = list(itertools.product(range(n), repeat=k))
    colors = renumber({x: atomic(x) for x in tuples})
    pairs = {(u, v): atomic((u, v)) for u in range(n) for v in range(n)}
    history = [len(set(colors.values()))]
    while True:
        if k == 1:
            refined: dict[tuple[int, ...], object] = {
                x: (colors[x], tuple(sorted((repr(pairs[(x[0], y)]), colors[(y,)]) for y in range(n))))
                for x in tuples
            }
        else:
            refined = {
                x: (
                    colors[x],
                    tuple(
                        sorted(
                            tuple(colors[x[:i] + (y,) + x[i + 1 :]] for i in range(k))
                            for y in range(n)
                        )
                    ),
                )
                for x in tuples
            }
        updated = renumber(refined)
        count = len(set(updated.values()))
        if count == history[-1]:
            break
        colors = updated
        history.append(count)
    table = np.array([colors[x] for x in tuples], dtype=np.int64)
    return StableColoring(
        k=k,
        vertex_count=n,
        table=table,
        color_count=history[-1],
        round_count=len(history) - 1,
        history=tuple(history),
    )


@dataclass(frozen=True)
class EquivalenceResult:
    """Outcome of a joint refinement: per stable color, tuples on each side."""

    equivalent: bool
    counts: dict[int, tuple[int, int]]

    def __bool__(self) -> bool:
        return self.equivalent


def equivalent(
    first: Structure, second: Structure, k: int, config: EngineConfig | None = None
) -> EquivalenceResult:
    """Decide WL[k]-equivalence by refining the disjoint union.

    Raises:
        SignatureMismatch: The structures use a relation name with two arities.
    """
    if first.vertex_count != second.vertex_count:
        logger.info(
            f"sizes differ ({first.vertex_count} vs {second.vertex_count}); "
            "not equivalent"
        )
        return EquivalenceResult(False, {})
    union, offset = disjoint_union(first, second)
    coloring = stable_coloring(union, k, config)
    grid = np.indices((union.vertex_count,) * k, dtype=np.int64).reshape(k, -1)
    left = (grid < offset).all(axis=0)
    right = (grid >= offset).all(axis=0)
    size = coloring.color_count
    left_counts = np.bincount(coloring.table[left], minlength=size)
    right_counts = np.bincount(coloring.table[right], minlength=size)
    counts = {
        color: (int(left_counts[color]), int(right_counts[color]))
        for color in range(size)
        if left_counts[color] or right_counts[color]
    }
    verdict = bool(np.array_equal(left_counts, right_counts))
    logger.info(f"WL[{k}] equivalence: {verdict} over {len(counts)} colors")
    return EquivalenceResult(verdict, counts)


def substitution_colors(coloring: StableColoring, entries: Sequence[int]) -> np.ndarray:
    """Colors of x[i<-y] for every y (rows) and position i (columns)."""
    n, k = coloring.vertex_count, coloring.k
    flat = coloring.index(entries)
    ys = np.arange(n, dtype=np.int64)
    columns = []
    for i in range(k):
        stride = n ** (k - 1 - i)
        base = flat - entries[i] * stride
        columns.append(coloring.table[base + ys * stride])
    return np.stack(columns, axis=1)


def intersection_number(
    coloring: StableColoring,
    entries: Sequence[int],
    colors: Sequence[int],
    config: EngineConfig | None = None,
) -> int:
    """Count the y with color(x[i<-y]) = colors[i] for every position i.

    With ``debug_checks`` the count is recomputed from another tuple of the
    same color and must agree.
    """
    config = config or DEFAULT_CONFIG
    target = np.asarray(colors, dtype=np.int64)
    count = int((substitution_colors(coloring, entries) == target).all(axis=1).sum())
    if config.debug_checks:
        own = coloring.table[coloring.index(entries)]
        other = int(np.flatnonzero(coloring.table == own)[-1])
        again = substitution_colors(coloring, coloring.tuple_at(other))
        if int((again == target).all(axis=1).sum()) != count:
            raise CoherenceViolation(
                f"intersection number differs between tuples of color {own}"
            )
    return count
