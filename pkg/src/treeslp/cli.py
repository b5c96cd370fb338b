"""Command-line front end: ``treeslp <subcommand> ...``.

Exit status is 0 on success, 1 when the input violates a domain rule and
2 for malformed command lines.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from typing import List, Optional

from . import evaluation as ev
from .errors import TreeSlpError
from .generators import bits_slp, comb_slp, compress, doubling_slp, phi_gap_tree_slp
from .navigation import DfudsIndex, dfuds_grammar
from .shapes import compute_shapes
from .slp import Slp, count_occurrences, expand, occurring_symbols
from .textformat import dump_slp, dump_tslp, load_slp_text, parse_slp, parse_tree_text, parse_tslp
from .trees import parse_pattern, term_string
from .tslp import slp_to_tslp, tslp_to_slp


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _load(path: str) -> Slp:
    return load_slp_text(_read(path))


def _bits(value: str) -> Slp:
    if os.path.exists(value):
        text = _read(value)
        if "->" in text:
            return parse_slp(text)
        return bits_slp("".join(text.split()))
    if re.fullmatch(r"[01]+", value):
        return bits_slp(value)
    raise FileNotFoundError(f"{value} is neither a file nor a bit string")


def _symbol_text(sym) -> str:
    return str(sym.value) if sym.is_const else sym.name


# ---------------------------------------------------------------------------
# subcommands; each returns (plain lines, json object)

def cmd_check(args):
    slp = _load(args.file)
    tree = compute_shapes(slp)[slp.start] == (1, 0)
    return [f"tree: {'true' if tree else 'false'}"], {"tree": tree}


def cmd_stats(args):
    slp = _load(args.file)
    shape = compute_shapes(slp)[slp.start]
    hist = {_symbol_text(s): count_occurrences(slp, s)
            for s in sorted(occurring_symbols(slp), key=lambda s: (_symbol_text(s), s.rank))}
    data = {
        "size": slp.size,
        "length": slp.length,
        "tree": shape == (1, 0),
        "shape": [shape.full_trees, shape.gaps],
        "depth": slp.depth(),
        "nonterminals": len(slp.productions),
        "symbols": hist,
    }
    lines = [
        f"size: {data['size']}",
        f"length: {data['length']}",
        f"tree: {'true' if data['tree'] else 'false'}",
        f"shape: {shape}",
        f"depth: {data['depth']}",
        f"nonterminals: {data['nonterminals']}",
    ] + [f"symbol {name}: {count}" for name, count in hist.items()]
    return lines, data


def _need(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise _Usage(f"this query needs --{name}")


def cmd_nav(args):
    index = DfudsIndex(_load(args.file))
    op = args.op
    _need(args, "node")
    if op == "parent":
        result = index.parent(args.node)
    elif op == "child":
        _need(args, "k")
        result = index.kth_child(args.node, args.k)
    elif op == "childrank":
        result = index.child_rank(args.node)
    elif op == "size":
        result = index.subtree_size(args.node)
    elif op == "lca":
        _need(args, "node2")
        result = index.lca(args.node, args.node2)
    elif op == "label":
        result = _symbol_text(index.label_at(args.node))
    elif op == "degree":
        result = index.degree(args.node)
    else:  # match
        _need(args, "pattern")
        result = index.subtree_matches(args.node, parse_pattern(args.pattern))
        return ["true" if result else "false"], {"op": op, "node": args.node, "result": result}
    return [str(result)], {"op": op, "node": args.node, "result": result}


def cmd_eval(args):
    slp = _load(args.file)
    interp = args.interp
    if interp == "height":
        value = ev.height(slp)
    elif interp == "depth":
        _need(args, "node")
        value = ev.node_depth(slp, args.node)
    elif interp == "strahler":
        value = ev.strahler(slp)
    elif interp == "bool":
        value = ev.eval_bool(slp)
    elif interp == "lattice":
        _need(args, "lattice")
        text = _read(args.lattice) if os.path.exists(args.lattice) else args.lattice
        value = ev.eval_lattice(slp, json.loads(text), meet=args.meet, join=args.join)
    elif interp == "maxplus":
        value = ev.eval_max_plus(slp)
    else:  # plustimes-modp
        _need(args, "p")
        value = ev.eval_plus_times_mod(slp, args.p)
    return [str(value)], {"interp": interp, "value": value}


def cmd_convert(args):
    text = _read(args.file)
    if args.to == "tslp":
        out = dump_tslp(slp_to_tslp(load_slp_text(text)))
    elif args.to == "slp":
        out = dump_slp(tslp_to_slp(parse_tslp(text)))
    else:  # dfuds
        out = dump_slp(dfuds_grammar(load_slp_text(text)))
    return out.splitlines(), {"to": args.to, "grammar": out}


def cmd_compress(args):
    word = parse_tree_text(_read(args.file))
    slp = compress(word, args.algo)
    out = dump_slp(slp)
    return out.splitlines(), {"algo": args.algo, "size": slp.size, "depth": slp.depth(), "grammar": out}


def cmd_expand(args):
    word = expand(_load(args.file), args.limit)
    if args.format == "term":
        text = term_string(word)
    else:
        text = " ".join(f"#{s.value}" if s.is_const else s.name for s in word)
    return [text], {"length": len(word), "format": args.format, "value": text}


def cmd_gen(args):
    if args.family == "doubling":
        _need(args, "n")
        slp = doubling_slp(args.n)
    else:
        _need(args, "u", "v")
        u, v = _bits(args.u), _bits(args.v)
        slp = comb_slp(u, v) if args.family == "comb" else phi_gap_tree_slp(u, v)
    out = dump_slp(slp)
    return out.splitlines(), {"family": args.family, "size": slp.size, "length": slp.length, "grammar": out}


class _Usage(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", choices=("plain", "json"), default=argparse.SUPPRESS,
                        help="output format (default plain)")
    parser = argparse.ArgumentParser(prog="treeslp", parents=[common],
                                     description="Trees stored as grammars over their preorder traversal.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(func=func)
        return p

    p = add("check", cmd_check, "report whether the grammar derives a single tree")
    p.add_argument("file")
    p = add("stats", cmd_stats, "grammar size, derived length, shape, depth and symbol counts")
    p.add_argument("file")
    p = add("nav", cmd_nav, "navigation query on the derived tree (nodes are preorder numbers)")
    p.add_argument("file")
    p.add_argument("--op", required=True,
                   choices=("parent", "child", "childrank", "size", "lca", "label", "degree", "match"))
    p.add_argument("--node", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--node2", type=int)
    p.add_argument("--pattern", help="term with parameters x1, x2, ... (for --op match)")
    p = add("eval", cmd_eval, "evaluate the derived tree under an interpretation")
    p.add_argument("file")
    p.add_argument("--interp", required=True,
                   choices=("height", "depth", "strahler", "bool", "lattice", "maxplus", "plustimes-modp"))
    p.add_argument("--p", type=int, help="prime modulus for plustimes-modp")
    p.add_argument("--node", type=int, help="node for depth")
    p.add_argument("--lattice", help="JSON map element -> bit vector, or a file holding it")
    p.add_argument("--meet", default="meet")
    p.add_argument("--join", default="join")
    p = add("convert", cmd_convert, "convert between traversal SLPs, tree grammars and DFUDS grammars")
    p.add_argument("file")
    p.add_argument("--to", required=True, choices=("tslp", "slp", "dfuds"))
    p = add("compress", cmd_compress, "build an SLP for an explicit tree or word")
    p.add_argument("file")
    p.add_argument("--algo", choices=("bisection", "pairing"), default="bisection")
    p = add("expand", cmd_expand, "print the derived word")
    p.add_argument("file")
    p.add_argument("--limit", type=int, default=10**6)
    p.add_argument("--format", choices=("term", "traversal"), default="term")
    p = add("gen", cmd_gen, "generate a grammar for a named tree family")
    p.add_argument("family", choices=("comb", "phitree", "doubling"))
    p.add_argument("--u", help="bit string or file")
    p.add_argument("--v", help="bit string or file")
    p.add_argument("--n", type=int, help="height for doubling")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    output = getattr(args, "output", "plain")
    try:
        lines, data = args.func(args)
    except _Usage as exc:
        parser.print_usage(sys.stderr)
        print(f"treeslp: error: {exc}", file=sys.stderr)
        return 2
    except (TreeSlpError, OSError, ValueError, RecursionError) as exc:
        print(f"treeslp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if output == "json":
        print(json.dumps(data, ensure_ascii=False))
    else:
        for line in lines:
            print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
