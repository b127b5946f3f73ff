"""Tests for the wlident command line."""

from pathlib import Path

import pytest
from wlident.cli import RunReport, build_parser, main, run
from wlident.errors import SearchBudgetExceeded
from wlident.structures import parse


class TestRunReport:
    """Test cases for the key:value report."""

    def test_line_order(self):
        """Test that parameters come before the verdict and values."""
        report = RunReport("equiv", {"k": 2}, "EQUIVALENT", {"colors": 3}, {"equiv": 0.5}, ["x"])

        assert report.lines() == [
            "command: equiv",
            "k: 2",
            "verdict: EQUIVALENT",
            "colors: 3",
            "artifact: x",
        ]
        assert report.lines(with_timings=True)[-1] == "time_equiv: 0.500"

    def test_timed(self):
        """Test that phases are timed even when they fail."""
        report = RunReport("refine")

        with pytest.raises(RuntimeError), report.timed("refine"):
            raise RuntimeError("boom")
        assert report.timings["refine"] >= 0


class TestRefine:
    """Test cases for the refine command."""

    def test_refine(self, triangle, write_structure, capsys):
        """Test refining a triangle."""
        path = write_structure(triangle)

        assert run(["refine", "-k", "2", path]) == 0
        out = capsys.readouterr().out
        assert "command: refine" in out
        assert "colors: 2" in out
        assert "vertices: 3" in out

    def test_stats_and_timings(self, path3, write_structure, capsys):
        """Test the round history, class table and timings."""
        path = write_structure(path3)

        assert run(["refine", "-k", "1", "--stats", "--timings", path]) == 0
        out = capsys.readouterr().out
        assert "history: 1 2" in out
        assert "WL[1] color classes" in out
        assert "time_refine:" in out

    def test_memory_budget(self, hexagon, write_structure, capsys):
        """Test that the memory budget maps to the budget exit code."""
        path = write_structure(hexagon)

        assert run(["refine", "-k", "3", "--memory-budget", "0.000000001", path]) == 3
        assert "Error (memory_budget)" in capsys.readouterr().err

    def test_syntax_error(self, tmp_path, capsys):
        """Test that malformed input exits with the input error code."""
        path = tmp_path / "bad.txt"
        path.write_text("p struct 2 undirected\nbogus\n")

        assert run(["refine", "-k", "1", str(path)]) == 2
        assert "line 2" in capsys.readouterr().err

    def test_invalid_utf8(self, tmp_path, capsys):
        """Test that undecodable input exits with the input error code."""
        path = tmp_path / "bad.txt"
        path.write_bytes(b"\xff\xfe 3\n")

        assert run(["refine", "-k", "1", str(path)]) == 2
        assert "Error (syntax)" in capsys.readouterr().err

    def test_invalid_utf8_circuit(self, tmp_path, capsys):
        """Test the same for circuit files."""
        path = tmp_path / "circuit.txt"
        path.write_bytes(b"\xff\xfe\n")

        assert run(["gen", "mcvp", str(path), "-k", "2"]) == 2
        assert "Error (syntax)" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        """Test that unreadable files exit with the input error code."""
        assert run(["refine", "-k", "1", str(tmp_path / "missing.txt")]) == 2
        assert "Error:" in capsys.readouterr().err

    def test_k_out_of_range(self, tmp_path):
        """Test that argparse refuses k above the maximum."""
        with pytest.raises(SystemExit) as info:
            run(["refine", "-k", "5", str(tmp_path / "graph.txt")])
        assert info.value.code == 2


class TestCompare:
    """Test cases for equiv and iso."""

    def test_equiv(self, hexagon, two_triangles, write_structure, capsys):
        """Test both verdicts of the equivalence check."""
        first = write_structure(hexagon, "c6.txt")
        second = write_structure(two_triangles, "2k3.txt")

        assert run(["equiv", "-k", "1", first, second]) == 0
        assert "verdict: EQUIVALENT" in capsys.readouterr().out
        assert run(["equiv", "-k", "2", first, second]) == 1
        assert "verdict: DISTINGUISHED" in capsys.readouterr().out

    def test_iso(self, hexagon, two_triangles, write_structure, capsys):
        """Test both verdicts of the isomorphism check."""
        first = write_structure(hexagon, "c6.txt")
        moved = write_structure(hexagon.permuted([3, 4, 5, 0, 1, 2]), "moved.txt")
        other = write_structure(two_triangles, "2k3.txt")

        assert run(["iso", first, moved]) == 0
        out = capsys.readouterr().out
        assert "verdict: ISOMORPHIC" in out
        assert "mapping: " in out
        assert run(["iso", first, other]) == 1
        assert "verdict: NON-ISOMORPHIC" in capsys.readouterr().out


class TestIdentify:
    """Test cases for identify and dim."""

    def test_identified(self, cfi_c5, write_structure, capsys):
        """Test an identified CFI graph."""
        path = write_structure(cfi_c5[0])

        assert run(["identify", "-k", "2", path]) == 0
        captured = capsys.readouterr()
        assert "verdict: IDENTIFIED" in captured.out
        assert "vertices: 30" in captured.out
        assert "Identification" in captured.err

    def test_witness(self, cfi_k4, write_structure, tmp_path, capsys):
        """Test writing the companion and its transcript."""
        path = write_structure(cfi_k4[0])
        witness = tmp_path / "witness.txt"

        assert run(["identify", "-k", "2", path, "--witness", str(witness)]) == 1
        out = capsys.readouterr().out
        assert "verdict: NOT-IDENTIFIED" in out
        assert f"artifact: {witness}" in out
        assert parse(witness.read_bytes()).vertex_count == 40
        transcript = Path(f"{witness}.transcript").read_text()
        assert f"wlident equiv -k 2 {path} {witness}" in transcript

    def test_abelian_precondition(self, triangle, write_structure, capsys):
        """Test the precondition exit code in abelian mode."""
        path = write_structure(triangle)

        assert run(["identify", "-k", "3", "--mode", "abelian", path]) == 4
        assert "Error (precondition)" in capsys.readouterr().err

    def test_search_budget(self, triangle, write_structure, mocker, capsys):
        """Test that an exhausted search maps to the budget exit code."""
        path = write_structure(triangle)
        decide = mocker.patch(
            "wlident.cli.decide_identification_ccs5", side_effect=SearchBudgetExceeded(5)
        )

        assert run(["identify", "-k", "2", "--node-budget", "5", path]) == 3
        decide.assert_called_once()
        assert decide.call_args.args[2].search_node_budget == 5
        assert "node budget of 5" in capsys.readouterr().err

    def test_dim(self, cfi_c5, write_structure, capsys):
        """Test the dimension search."""
        path = write_structure(cfi_c5[0])

        assert run(["dim", "--max-k", "3", path]) == 0
        out = capsys.readouterr().out
        assert "dimension: 2" in out
        assert "k_2: IDENTIFIED" in out

    def test_dim_not_found(self, cfi_k4, write_structure, capsys):
        """Test that an exhausted search exits with the negative code."""
        path = write_structure(cfi_k4[0])

        assert run(["dim", "--max-k", "2", path]) == 1
        assert "dimension: NOT_FOUND" in capsys.readouterr().out


class TestGen:
    """Test cases for the generators."""

    def test_cfi_to_stdout(self, capsys):
        """Test that the structure goes to stdout without a report."""
        assert run(["gen", "cfi", "--base", "k4", "--twist", "1"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("p struct 40 undirected\n# cfi base=k4 twist=1\n# pair 0/1 ")
        assert "command:" not in out

    def test_cfi_to_file(self, tmp_path, capsys):
        """Test writing to a file with a report."""
        target = tmp_path / "cfi.txt"

        assert run(["gen", "cfi", "--base", "c5", "--abelian", "-o", str(target)]) == 0
        assert parse(target.read_bytes()).vertex_count == 30
        out = capsys.readouterr().out
        assert "command: gen cfi" in out
        assert "vertices: 30" in out

    def test_wall_and_switch(self, tmp_path):
        """Test the wall and switch families."""
        wall, switch = tmp_path / "wall.txt", tmp_path / "ows.txt"

        assert run(["gen", "wall", "-k", "2", "-o", str(wall)]) == 0
        assert run(["gen", "ows", "-k", "2", "-o", str(switch)]) == 0
        assert parse(wall.read_bytes()).vertex_count == 11
        text = switch.read_text()
        assert "# input " in text
        assert "# output " in text
        assert parse(text).vertex_count == 86

    def test_gate(self, tmp_path):
        """Test the gate family."""
        target = tmp_path / "or.txt"

        assert run(["gen", "gates", "--kind", "or", "-o", str(target)]) == 0
        assert "# pair out 4 5" in target.read_text()

    def test_mcvp(self, tmp_path, capsys):
        """Test generating both circuit graphs."""
        circuit = tmp_path / "circuit.txt"
        circuit.write_text("input a false\noutput a\n")
        plain, starred = tmp_path / "plain.txt", tmp_path / "starred.txt"

        code = run(
            ["gen", "mcvp", str(circuit), "-k", "2", "-o", str(plain), "--starred", str(starred)]
        )
        assert code == 0
        assert parse(plain.read_bytes()).vertex_count == 2
        assert parse(starred.read_bytes()).vertex_count == 86
        assert "value: false" in capsys.readouterr().out

    def test_mcvp_invalid_circuit(self, tmp_path, capsys):
        """Test the circuit error path."""
        circuit = tmp_path / "circuit.txt"
        circuit.write_text("input a true\n")

        assert run(["gen", "mcvp", str(circuit), "-k", "2"]) == 2
        assert "Error (circuit_invalid)" in capsys.readouterr().err

    def test_random_circuit(self, tmp_path):
        """Test that the seed makes random circuits reproducible."""
        first, second = tmp_path / "a.txt", tmp_path / "b.txt"

        assert run(["gen", "circuit", "--gates", "5", "--seed", "4", "-o", str(first)]) == 0
        assert run(["gen", "circuit", "--gates", "5", "--seed", "4", "-o", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()
        assert first.read_text().endswith("output g4\n")

    def test_erase(self, matching, write_structure, tmp_path):
        """Test the color erasure family."""
        path = write_structure(matching)
        target = tmp_path / "erased.txt"

        assert run(["gen", "erase", path, "-o", str(target)]) == 0
        erased = parse(target.read_bytes())
        assert erased.vertex_count == 8
        assert erased.color_count == 1


def test_parser_requires_command():
    """Test that a subcommand is mandatory."""
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_main_exits_with_run_code(mocker):
    """Test that main forwards the exit code."""
    mocker.patch("wlident.cli.run", return_value=1)

    with pytest.raises(SystemExit) as info:
        main()
    assert info.value.code == 1
