import json
import subprocess
import sys

import pytest

from treeslp.cli import main
from treeslp.evaluation import height, strahler
from treeslp.slp import expand
from treeslp.textformat import parse_slp, parse_tslp
from treeslp.tslp import tslp_expand

EXAMPLE = """alphabet f:2 a:0
start S
S -> B f B a a
B -> f f D
D -> a a
"""


@pytest.fixture
def example(tmp_path):
    path = tmp_path / "example1.slp"
    path.write_text(EXAMPLE)
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out.strip(), err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--output", "json")
    assert code == 0
    return json.loads(out)


def test_check(capsys, example, tmp_path):
    assert run(capsys, "check", example)[:2] == (0, "tree: true")
    forest = tmp_path / "forest.slp"
    forest.write_text("alphabet a:0\nS -> a a\n")
    assert run(capsys, "check", str(forest))[:2] == (0, "tree: false")


def test_navigation_queries(capsys, example):
    assert run(capsys, "nav", example, "--op", "child", "--node", "5", "--k", "2")[:2] == (0, "11")
    assert run(capsys, "nav", example, "--op", "parent", "--node", "11")[1] == "5"
    assert run(capsys, "nav", example, "--op", "size", "--node", "5")[1] == "7"
    assert run(capsys, "nav", example, "--op", "lca", "--node", "7", "--node2", "10")[1] == "6"
    assert run(capsys, "nav", example, "--op", "label", "--node", "4")[1] == "a"
    assert run(capsys, "nav", example, "--op", "match", "--node", "1", "--pattern", "f(f(x1,x2),x3)")[1] == "true"


def test_evaluation(capsys, example):
    slp = parse_slp(EXAMPLE)
    assert run(capsys, "eval", example, "--interp", "height")[:2] == (0, "4")
    assert run(capsys, "eval", example, "--interp", "strahler")[1] == str(strahler(slp))
    assert run(capsys, "eval", example, "--interp", "depth", "--node", "11")[1] == "2"


def test_arithmetic_interpretations(capsys, tmp_path):
    path = tmp_path / "arith.slp"
    path.write_text("alphabet +:2 *:2 max:2\nintconsts on\nS -> + #3 * #4 #5\n")
    assert run(capsys, "eval", str(path), "--interp", "plustimes-modp", "--p", "7")[1] == str(23 % 7)
    path.write_text("alphabet +:2 max:2\nintconsts on\nS -> max #3 + #4 #5\n")
    assert run(capsys, "eval", str(path), "--interp", "maxplus")[1] == "9"


def test_json_and_plain_agree(capsys, example):
    for argv in (["eval", example, "--interp", "height"],
                 ["nav", example, "--op", "child", "--node", "5", "--k", "2"]):
        plain = run(capsys, *argv)[1]
        data = run_json(capsys, *argv)
        key = "value" if "value" in data else "result"
        assert str(data[key]) == plain
    assert run_json(capsys, "check", example) == {"tree": True}


def test_stats(capsys, example):
    data = run_json(capsys, "stats", example)
    slp = parse_slp(EXAMPLE)
    assert data["size"] == slp.size and data["length"] == 11
    assert data["tree"] is True and data["shape"] == [1, 0]
    assert data["symbols"] == {"a": 6, "f": 5}
    assert data["depth"] == slp.depth()
    plain = run(capsys, "stats", example)[1]
    assert "length: 11" in plain and "symbol f: 5" in plain


def test_convert_round_trip(capsys, example, tmp_path):
    code, out, _ = run(capsys, "convert", example, "--to", "tslp")
    assert code == 0
    tslp_path = tmp_path / "example.tslp"
    tslp_path.write_text(out + "\n")
    assert tslp_expand(parse_tslp(out)) == expand(parse_slp(EXAMPLE))
    code, out, _ = run(capsys, "convert", str(tslp_path), "--to", "slp")
    assert expand(parse_slp(out)) == expand(parse_slp(EXAMPLE))
    code, out, _ = run(capsys, "convert", example, "--to", "dfuds")
    assert code == 0 and parse_slp(out).length == 22


@pytest.mark.parametrize("algo", ["bisection", "pairing"])
def test_compress_then_expand(capsys, tmp_path, algo):
    src = tmp_path / "tree.txt"
    src.write_text("f(g(a),f(g(a),f(g(a),a)))")
    code, out, _ = run(capsys, "compress", str(src), "--algo", algo)
    assert code == 0
    grammar = tmp_path / "tree.slp"
    grammar.write_text(out + "\n")
    assert run(capsys, "expand", str(grammar))[1] == "f(g(a),f(g(a),f(g(a),a)))"
    assert run(capsys, "expand", str(grammar), "--format", "traversal")[1] == "f g a f g a f g a a"


def test_generators(capsys, tmp_path):
    code, out, _ = run(capsys, "gen", "phitree", "--u", "10100", "--v", "10010")
    assert code == 0
    assert "".join(s.name for s in expand(parse_slp(out))) == "f f faf f faf a faa a a faa a".replace(" ", "")
    data = run_json(capsys, "gen", "doubling", "--n", "70")
    assert data["length"] == 2**71 - 1
    assert height(parse_slp(data["grammar"])) == 70
    code, out, _ = run(capsys, "gen", "comb", "--u", "10", "--v", "11")
    assert [s.name for s in expand(parse_slp(out))] == ["f1", "f0", "$", "1", "1"]


def test_large_numbers_print_exactly(capsys, tmp_path):
    data = run_json(capsys, "gen", "doubling", "--n", "80")
    path = tmp_path / "big.slp"
    path.write_text(data["grammar"])
    assert run(capsys, "nav", str(path), "--op", "size", "--node", "1")[1] == str(2**81 - 1)


def test_domain_errors_exit_one(capsys, tmp_path, example):
    forest = tmp_path / "forest.slp"
    forest.write_text("alphabet f:2 a:0\nS -> f a\n")
    code, out, err = run(capsys, "eval", str(forest), "--interp", "height")
    assert code == 1 and out == "" and "NotATree" in err
    assert run(capsys, "nav", example, "--op", "parent", "--node", "1")[0] == 1
    assert run(capsys, "nav", example, "--op", "child", "--node", "3", "--k", "1")[0] == 1
    assert run(capsys, "check", str(tmp_path / "missing.slp"))[0] == 1
    assert run(capsys, "gen", "comb", "--u", "10", "--v", "1")[0] == 1
    big = tmp_path / "big.slp"
    big.write_text(run_json(capsys, "gen", "doubling", "--n", "40")["grammar"])
    assert run(capsys, "expand", str(big))[0] == 1


def test_usage_errors_exit_two(capsys, example):
    for argv in ([], ["frobnicate"], ["nav", example], ["eval", example, "--interp", "nonsense"],
                 ["check", example, "--output", "xml"]):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == 2
    capsys.readouterr()
    code, _, err = run(capsys, "nav", example, "--op", "child", "--node", "1")
    assert code == 2 and "--k" in err


def test_module_entry_point(example):
    done = subprocess.run([sys.executable, "-m", "treeslp", "eval", example, "--interp", "height"],
                          capture_output=True, text=True, check=False)
    assert done.returncode == 0 and done.stdout.strip() == "4"
    done = subprocess.run([sys.executable, "-m", "treeslp", "bogus"], capture_output=True, text=True, check=False)
    assert done.returncode == 2
