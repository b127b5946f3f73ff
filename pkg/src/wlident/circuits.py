"""Monotone circuits: data model, text format, evaluation and random instances."""

import logging
import random
from collections.abc import Iterable
from dataclasses import dataclass
from enum import Enum

import networkx as nx

from wlident.errors import CircuitInvalid, StructureSyntaxError
from wlident.structures import decode_text

logger = logging.getLogger(__name__)


class NodeKind(Enum):
    INPUT = "input"
    AND = "and"
    OR = "or"


@dataclass(frozen=True)
class Node:
    name: str
    kind: NodeKind
    value: bool | None = None
    inputs: tuple[str, ...] = ()

    @property
    def is_gate(self) -> bool:
        return self.kind is not NodeKind.INPUT


@dataclass(frozen=True)
class MonotoneCircuit:
    """An acyclic circuit of binary AND/OR gates over constant inputs.

    ``nodes`` are kept in a deterministic topological order.
    """

    nodes: tuple[Node, ...]
    output: str

    def __post_init__(self) -> None:
        names = [node.name for node in self.nodes]
        if len(set(names)) != len(names):
            raise CircuitInvalid("node names must be unique")
        known = set(names)
        if self.output not in known:
            raise CircuitInvalid(f"output {self.output!r} is not a node")
        graph = nx.DiGraph()
        graph.add_nodes_from(names)
        for node in self.nodes:
            if node.is_gate and len(node.inputs) != 2:
                raise CircuitInvalid(f"gate {node.name!r} must have exactly two inputs")
            if not node.is_gate and node.value is None:
                raise CircuitInvalid(f"input {node.name!r} has no value")
            for source in node.inputs:
                if source not in known:
                    raise CircuitInvalid(f"gate {node.name!r} reads unknown node {source!r}")
                graph.add_edge(source, node.name)
        if not nx.is_directed_acyclic_graph(graph):
            raise CircuitInvalid("circuit has a cycle")
        by_name = {node.name: node for node in self.nodes}
        ordered = tuple(by_name[name] for name in nx.lexicographical_topological_sort(graph))
        object.__setattr__(self, "nodes", ordered)

    def node(self, name: str) -> Node:
        for node in self.nodes:
            if node.name == name:
                return node
        raise KeyError(name)

    def inputs(self) -> list[Node]:
        return [node for node in self.nodes if not node.is_gate]

    def gates(self) -> list[Node]:
        return [node for node in self.nodes if node.is_gate]


def evaluate(circuit: MonotoneCircuit) -> dict[str, bool]:
    """Value of every node."""
    values: dict[str, bool] = {}
    for node in circuit.nodes:
        if node.kind is NodeKind.INPUT:
            values[node.name] = bool(node.value)
        elif node.kind is NodeKind.AND:
            values[node.name] = all(values[a] for a in node.inputs)
        else:
            values[node.name] = any(values[a] for a in node.inputs)
    return values


def parse_circuit(text: bytes | str) -> MonotoneCircuit:
    """Parse ``input``/``and``/``or``/``output`` lines; ``#`` starts a comment.

    Raises:
        StructureSyntaxError: A line is malformed.
        CircuitInvalid: The circuit is cyclic, has dangling inputs or no output.
    """
    text = decode_text(text)
    nodes: list[Node] = []
    output: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind = tokens[0]
        if kind == "input":
            if len(tokens) != 3 or tokens[2] not in ("true", "false"):
                raise StructureSyntaxError(lineno, "expected 'input <name> <true|false>'")
            nodes.append(Node(tokens[1], NodeKind.INPUT, value=tokens[2] == "true"))
        elif kind in ("and", "or"):
            if len(tokens) != 4:
                raise StructureSyntaxError(lineno, f"expected '{kind} <name> <a> <b>'")
            nodes.append(Node(tokens[1], NodeKind(kind), inputs=(tokens[2], tokens[3])))
        elif kind == "output":
            if len(tokens) != 2:
                raise StructureSyntaxError(lineno, "expected 'output <name>'")
            if output is not None:
                raise CircuitInvalid(f"line {lineno}: second output line")
            output = tokens[1]
        else:
            raise StructureSyntaxError(lineno, f"unknown line type {kind!r}")
    if output is None:
        raise CircuitInvalid("missing 'output' line")
    return MonotoneCircuit(tuple(nodes), output)


def serialize_circuit(circuit: MonotoneCircuit) -> bytes:
    lines = []
    for node in circuit.nodes:
        if node.kind is NodeKind.INPUT:
            lines.append(f"input {node.name} {'true' if node.value else 'false'}")
        else:
            lines.append(f"{node.kind.value} {node.name} {node.inputs[0]} {node.inputs[1]}")
    lines.append(f"output {circuit.output}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def random_circuit(
    rng: random.Random, gates: int, inputs: int = 3, names: Iterable[str] | None = None
) -> MonotoneCircuit:
    """A random circuit whose last gate is the output."""
    if inputs < 1:
        raise CircuitInvalid("a circuit needs at least one input")
    labels = iter(names) if names is not None else None
    nodes = []
    for i in range(inputs):
        name = next(labels) if labels else f"x{i}"
        nodes.append(Node(name, NodeKind.INPUT, value=rng.random() < 0.5))
    for i in range(gates):
        name = next(labels) if labels else f"g{i}"
        kind = rng.choice((NodeKind.AND, NodeKind.OR))
        a, b = rng.sample([node.name for node in nodes], 2) if len(nodes) > 1 else (nodes[0].name,) * 2
        nodes.append(Node(name, kind, inputs=(a, b)))
    circuit = MonotoneCircuit(tuple(nodes), nodes[-1].name)
    logger.debug(f"random circuit with {inputs} inputs and {gates} gates")
    return circuit
