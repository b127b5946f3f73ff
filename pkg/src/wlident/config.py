"""Engine settings shared by the refinement, search and pipeline modules."""

from dataclasses import dataclass, replace
from typing import Any

K_MAX = 4
"""Largest supported arity and WL dimension."""

GIB = 1 << 30


@dataclass(frozen=True)
class EngineConfig:
    """Budgets and switches for a run.

    Attributes:
        memory_budget_bytes: Refuse refinement rounds whose tables exceed this.
        search_node_budget: Hard cap on individualization-refinement tree nodes.
        threads: Worker threads for descriptor computation in refinement rounds.
        seed: Seed for every pseudo-random choice (sampled axiom checks, random instances).
        debug_checks: Run exhaustive invariant checks instead of sampled ones.
        sample_checks: Number of spot checks performed in release mode.
        oracle_tuple_limit: Largest n^k accepted by the naive oracle.
        exhaustive_axiom_limit: Largest n^k for which axiom (C) is checked on every tuple.
        treewidth_vertex_limit: Largest graph accepted by the tree-width oracle.
        cfi_inner_class_cap: Largest inner class 2^(d-1) a CFI gadget may have.
    """

    memory_budget_bytes: int = 8 * GIB
    search_node_budget: int = 10**7
    threads: int = 1
    seed: int = 0
    debug_checks: bool = False
    sample_checks: int = 64
    oracle_tuple_limit: int = 10**6
    exhaustive_axiom_limit: int = 10**5
    treewidth_vertex_limit: int = 12
    cfi_inner_class_cap: int = 64

    def with_overrides(self, **changes: Any) -> "EngineConfig":
        """Return a copy with the given fields replaced."""
        return replace(self, **changes)


DEFAULT_CONFIG = EngineConfig()
