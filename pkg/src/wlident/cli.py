"""Command line interface for wlident."""

import argparse
import logging
import random
import sys
import time
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, NoReturn

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from wlident.circuits import NodeKind, evaluate, parse_circuit, random_circuit, serialize_circuit
from wlident.config import DEFAULT_CONFIG, GIB, K_MAX, EngineConfig
from wlident.errors import WLIdentError
from wlident.generators import (
    base_graph,
    cfi,
    erase_colors,
    gate_gadget,
    mcvp_graph,
    one_way_switch,
    wall_base,
)
from wlident.groups import isomorphic
from wlident.refinement import equivalent, stable_coloring
from wlident.separability import (
    Mode,
    decide_identification_abelian,
    decide_identification_ccs5,
    wl_dimension_search,
)
from wlident.structures import Structure, parse, serialize

logger = logging.getLogger(__name__)
console = Console(highlight=False, soft_wrap=True)
err_console = Console(stderr=True, highlight=False)

EXIT_POSITIVE = 0
EXIT_NEGATIVE = 1
EXIT_INPUT = 2


@dataclass
class RunReport:
    """Key:value report of one command, rendered in a fixed order."""

    command: str
    parameters: dict[str, Any] = field(default_factory=dict)
    verdict: str | None = None
    values: dict[str, Any] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)

    def lines(self, with_timings: bool = False) -> list[str]:
        lines = [f"command: {self.command}"]
        lines.extend(f"{key}: {value}" for key, value in self.parameters.items())
        if self.verdict is not None:
            lines.append(f"verdict: {self.verdict}")
        lines.extend(f"{key}: {value}" for key, value in self.values.items())
        lines.extend(f"artifact: {path}" for path in self.artifacts)
        if with_timings:
            lines.extend(f"time_{phase}: {seconds:.3f}" for phase, seconds in self.timings.items())
        return lines

    @contextmanager
    def timed(self, phase: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[phase] = time.perf_counter() - start


def _config(args: argparse.Namespace) -> EngineConfig:
    return DEFAULT_CONFIG.with_overrides(
        seed=args.seed,
        threads=args.threads,
        search_node_budget=args.node_budget,
        memory_budget_bytes=int(args.memory_budget * GIB),
        debug_checks=args.debug,
    )


def _read_structure(path: str) -> Structure:
    return parse(Path(path).read_bytes())


def _write(data: bytes, path: str | None) -> None:
    if path is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(path).write_bytes(data)


def _print(report: RunReport, args: argparse.Namespace) -> None:
    for line in report.lines(args.timings):
        console.print(line, markup=False)


# Commands


def cmd_refine(args: argparse.Namespace) -> int:
    config = _config(args)
    report = RunReport("refine", {"k": args.k, "file": args.file})
    structure = _read_structure(args.file)
    with report.timed("refine"):
        coloring = stable_coloring(structure, args.k, config)
    report.values["vertices"] = structure.vertex_count
    report.values["colors"] = coloring.color_count
    report.values["rounds"] = coloring.round_count
    _print(report, args)
    if args.stats:
        console.print(f"history: {' '.join(str(c) for c in coloring.history)}", markup=False)
        table = Table(title=f"WL[{args.k}] color classes")
        table.add_column("Color", style="cyan", justify="right")
        table.add_column("Tuples", justify="right")
        for color, size in enumerate(coloring.class_sizes()):
            table.add_row(str(color), str(int(size)))
        console.print(table)
    return EXIT_POSITIVE


def cmd_equiv(args: argparse.Namespace) -> int:
    config = _config(args)
    report = RunReport("equiv", {"k": args.k, "first": args.first, "second": args.second})
    first, second = _read_structure(args.first), _read_structure(args.second)
    with report.timed("equiv"):
        result = equivalent(first, second, args.k, config)
    report.verdict = "EQUIVALENT" if result.equivalent else "DISTINGUISHED"
    report.values["colors"] = len(result.counts)
    _print(report, args)
    return EXIT_POSITIVE if result.equivalent else EXIT_NEGATIVE


def cmd_iso(args: argparse.Namespace) -> int:
    config = _config(args)
    report = RunReport("iso", {"first": args.first, "second": args.second})
    first, second = _read_structure(args.first), _read_structure(args.second)
    with report.timed("iso"):
        mapping = isomorphic(first, second, config)
    report.verdict = "ISOMORPHIC" if mapping is not None else "NON-ISOMORPHIC"
    if mapping is not None:
        report.values["mapping"] = " ".join(str(v) for v in mapping.images)
    _print(report, args)
    return EXIT_POSITIVE if mapping is not None else EXIT_NEGATIVE


def cmd_identify(args: argparse.Namespace) -> int:
    config = _config(args)
    mode = Mode(args.mode)
    report = RunReport("identify", {"k": args.k, "mode": mode.value, "file": args.file})
    structure = _read_structure(args.file)
    decide = (
        decide_identification_ccs5 if mode is Mode.CCS5 else decide_identification_abelian
    )
    with report.timed("identify"):
        result = decide(structure, args.k, config)
    report.verdict = result.verdict.value.replace("_", "-")
    report.values.update(result.stats)
    if result.witness is not None and args.witness:
        comments = [f"witness for WL[{args.k}] against {args.file}"]
        Path(args.witness).write_bytes(serialize(result.witness.companion, comments))
        transcript = Path(f"{args.witness}.transcript")
        transcript.write_text(result.witness.transcript(args.file, args.witness))
        report.artifacts.extend([args.witness, str(transcript)])
    _print(report, args)
    style = "green" if result.identified else "red"
    err_console.print(Panel(report.verdict, title="Identification", border_style=style))
    return EXIT_POSITIVE if result.identified else EXIT_NEGATIVE


def cmd_dim(args: argparse.Namespace) -> int:
    config = _config(args)
    mode = Mode(args.mode)
    report = RunReport("dim", {"mode": mode.value, "max_k": args.max_k, "file": args.file})
    structure = _read_structure(args.file)
    with report.timed("dim"):
        result = wl_dimension_search(structure, mode, args.max_k, config)
    report.values["dimension"] = result.dimension if result.found else "NOT_FOUND"
    for k, outcome in result.attempts:
        report.values[f"k_{k}"] = outcome
    _print(report, args)
    return EXIT_POSITIVE if result.found else EXIT_NEGATIVE


def cmd_gen(args: argparse.Namespace) -> int:
    config = _config(args)
    generator: Callable[[argparse.Namespace, EngineConfig], tuple[bytes, dict[str, Any]]] = (
        args.generator
    )
    data, values = generator(args, config)
    _write(data, args.output)
    if args.output is not None:
        report = RunReport(f"gen {args.family}", values, artifacts=[args.output])
        _print(report, args)
    return EXIT_POSITIVE


def _gen_cfi(args: argparse.Namespace, config: EngineConfig) -> tuple[bytes, dict[str, Any]]:
    gadget = cfi(base_graph(args.base), args.twist, args.abelian, config=config)
    comments = [f"cfi base={args.base} twist={args.twist % 2}", *gadget.registry()]
    return serialize(gadget.structure, comments), {"vertices": gadget.structure.vertex_count}


def _gen_wall(args: argparse.Namespace, _: EngineConfig) -> tuple[bytes, dict[str, Any]]:
    graph, apex = wall_base(args.k)
    structure = Structure.from_edges(graph.number_of_nodes(), list(graph.edges))
    return serialize(structure, [f"wall k={args.k} apex={apex}"]), {"apex": apex}


def _gen_ows(args: argparse.Namespace, config: EngineConfig) -> tuple[bytes, dict[str, Any]]:
    switch = one_way_switch(args.k, config)
    assert switch.output is not None
    (y1, y2), (x1, x2) = switch.inputs[0], switch.output
    comments = [
        f"one-way switch k={args.k}",
        f"input {y1} {y2}",
        f"output {x1} {x2}",
        *switch.registry(),
    ]
    return serialize(switch.structure, comments), {"vertices": switch.structure.vertex_count}


def _gen_gate(args: argparse.Namespace, _: EngineConfig) -> tuple[bytes, dict[str, Any]]:
    gate = gate_gadget(NodeKind(args.kind))
    return serialize(gate.structure, [f"{args.kind} gate", *gate.registry()]), {}


def _gen_mcvp(args: argparse.Namespace, config: EngineConfig) -> tuple[bytes, dict[str, Any]]:
    circuit = parse_circuit(Path(args.circuit).read_bytes())
    instance = mcvp_graph(circuit, args.k, config)
    value = evaluate(circuit)[circuit.output]
    comments = [
        f"circuit graph k={args.k} value={'true' if value else 'false'}",
        *instance.registry(),
    ]
    if args.starred:
        Path(args.starred).write_bytes(
            serialize(instance.starred, [*comments, "with split switch at the output"])
        )
    return serialize(instance.plain, comments), {
        "value": str(value).lower(),
        "vertices": instance.plain.vertex_count,
    }


def _gen_erase(args: argparse.Namespace, _: EngineConfig) -> tuple[bytes, dict[str, Any]]:
    structure = _read_structure(args.file)
    erased = erase_colors(structure)
    return serialize(erased, [f"colors erased from {args.file}"]), {
        "vertices": erased.vertex_count
    }


def _gen_circuit(args: argparse.Namespace, config: EngineConfig) -> tuple[bytes, dict[str, Any]]:
    circuit = random_circuit(random.Random(config.seed), args.gates, args.inputs)
    return serialize_circuit(circuit), {"value": str(evaluate(circuit)[circuit.output]).lower()}


# Parser


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=DEFAULT_CONFIG.seed, help="seed for every random choice")
    parser.add_argument("--threads", type=int, default=DEFAULT_CONFIG.threads, help="worker threads")
    parser.add_argument(
        "--node-budget",
        type=int,
        default=DEFAULT_CONFIG.search_node_budget,
        help="search tree node budget",
    )
    parser.add_argument(
        "--memory-budget",
        type=float,
        default=DEFAULT_CONFIG.memory_budget_bytes / GIB,
        help="refinement memory budget in GiB",
    )
    parser.add_argument("--debug", action="store_true", help="run exhaustive invariant checks")
    parser.add_argument("--timings", action="store_true", help="report per-phase timings")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")


def _k_arg(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument("-k", type=int, required=required, choices=range(1, K_MAX + 1), metavar="K")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wlident", description="Weisfeiler-Leman refinement and identification"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    refine = commands.add_parser("refine", help="compute the WL[k] stable coloring")
    _k_arg(refine)
    refine.add_argument("file")
    refine.add_argument("--stats", action="store_true", help="print class sizes and round history")
    refine.set_defaults(handler=cmd_refine)

    equiv = commands.add_parser("equiv", help="decide WL[k]-equivalence of two structures")
    _k_arg(equiv)
    equiv.add_argument("first")
    equiv.add_argument("second")
    equiv.set_defaults(handler=cmd_equiv)

    iso = commands.add_parser("iso", help="decide isomorphism of two structures")
    iso.add_argument("first")
    iso.add_argument("second")
    iso.set_defaults(handler=cmd_iso)

    identify = commands.add_parser("identify", help="decide WL[k]-identification")
    _k_arg(identify)
    identify.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.CCS5.value)
    identify.add_argument("file")
    identify.add_argument("--witness", help="write the companion structure here")
    identify.set_defaults(handler=cmd_identify)

    dim = commands.add_parser("dim", help="least k that identifies the input")
    dim.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.CCS5.value)
    dim.add_argument("--max-k", type=int, default=K_MAX)
    dim.add_argument("file")
    dim.set_defaults(handler=cmd_dim)

    gen = commands.add_parser("gen", help="generate instances")
    families = gen.add_subparsers(dest="family", required=True)

    gen_cfi = families.add_parser("cfi", help="CFI graph over a named base graph")
    gen_cfi.add_argument("--base", default="k4", help="k<n>, c<n>, p<n>, grid<r>x<c> or wall<k>")
    gen_cfi.add_argument("--twist", type=int, default=0)
    gen_cfi.add_argument("--abelian", action="store_true", help="add the abelianizing edges")
    gen_cfi.set_defaults(generator=_gen_cfi)

    gen_wall = families.add_parser("wall", help="wall base graph with apex")
    _k_arg(gen_wall)
    gen_wall.set_defaults(generator=_gen_wall)

    gen_ows = families.add_parser("ows", help="one-way switch")
    _k_arg(gen_ows)
    gen_ows.set_defaults(generator=_gen_ows)

    gen_gates = families.add_parser("gates", help="AND or OR gate gadget")
    gen_gates.add_argument("--kind", choices=["and", "or"], default="and")
    gen_gates.set_defaults(generator=_gen_gate)

    gen_mcvp = families.add_parser("mcvp", help="graphs of a monotone circuit")
    gen_mcvp.add_argument("circuit")
    _k_arg(gen_mcvp)
    gen_mcvp.add_argument("--starred", help="also write the graph with the split output switch")
    gen_mcvp.set_defaults(generator=_gen_mcvp)

    gen_erase = families.add_parser("erase", help="replace vertex colors by a scaffold")
    gen_erase.add_argument("file")
    gen_erase.set_defaults(generator=_gen_erase)

    gen_circuit = families.add_parser("circuit", help="random monotone circuit")
    gen_circuit.add_argument("--gates", type=int, default=4)
    gen_circuit.add_argument("--inputs", type=int, default=3)
    gen_circuit.set_defaults(generator=_gen_circuit)

    for family in (gen_cfi, gen_wall, gen_ows, gen_gates, gen_mcvp, gen_erase, gen_circuit):
        family.add_argument("-o", "--output", help="output file (default: stdout)")
        _add_common(family)
    gen.set_defaults(handler=cmd_gen)

    for command in (refine, equiv, iso, identify, dim):
        _add_common(command)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except WLIdentError as e:
        logger.debug(f"{args.command} failed: {e.kind.value}")
        err_console.print(f"Error ({e.kind.value}): {e.message}", style="red", markup=False)
        return e.exit_code
    except OSError as e:
        err_console.print(f"Error: {e}", style="red", markup=False)
        return EXIT_INPUT


def main() -> NoReturn:
    """Main entry point for the CLI."""
    sys.exit(run())


if __name__ == "__main__":
    main()
