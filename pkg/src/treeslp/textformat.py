"""Line-oriented text formats for SLPs, TSLPs and explicit trees.

SLP files::

    # Example tree
    alphabet f:2 a:0
    start S
    S -> f A B
    A -> a

Integer constants are written ``#42`` and need ``intconsts on``.  TSLP
files use the same header lines; heads carry their parameters, as in
``B(x1,x2) -> f x1 A x2``, and bodies are preorder sequences.
"""

from __future__ import annotations

import re
from typing import Dict, List, Optional, Tuple

from .errors import ParseError
from .slp import RankedAlphabet, Slp, Symbol
from .trees import Parameter, leaf_symbol, parse_term
from .tslp import Tslp, TslpRule

_CONST = re.compile(r"#[+-]?\d+\Z")
_HEAD = re.compile(r"([^\s()]+)\s*(?:\(([^)]*)\))?\Z")
_PARAM = re.compile(r"x(\d+)\Z")


def _strip_comment(tokens: List[str]) -> List[str]:
    for k, tok in enumerate(tokens):
        if tok.startswith("#") and not _CONST.match(tok):
            return tokens[:k]
    return tokens


class _Header:
    def __init__(self):
        self.ranks: Dict[str, int] = {}
        self.intconsts = False
        self.start: Optional[str] = None

    def take(self, tokens: List[str], lineno: int) -> bool:
        """Consume a header line; False when the line is a production."""
        key = tokens[0]
        if key == "alphabet" and "->" not in tokens:
            for tok in tokens[1:]:
                name, sep, rank = tok.rpartition(":")
                if not sep or not name or not rank.isdigit():
                    raise ParseError(f"alphabet entry {tok!r} is not name:rank", lineno)
                if self.ranks.get(name, int(rank)) != int(rank):
                    raise ParseError(f"symbol {name} declared with two ranks", lineno)
                self.ranks[name] = int(rank)
            return True
        if key == "intconsts" and len(tokens) == 2 and "->" not in tokens:
            if tokens[1] not in ("on", "off"):
                raise ParseError("intconsts takes on or off", lineno)
            self.intconsts = tokens[1] == "on"
            return True
        if key == "start" and len(tokens) == 2:
            self.start = tokens[1]
            return True
        return False

    def terminal(self, tok: str, lineno: int) -> Symbol:
        if _CONST.match(tok):
            if not self.intconsts:
                raise ParseError(f"integer constant {tok} needs 'intconsts on'", lineno)
            return Symbol.const(int(tok[1:]))
        if tok not in self.ranks:
            raise ParseError(f"undeclared symbol {tok!r}", lineno)
        return Symbol(tok, self.ranks[tok])

    def alphabet(self) -> RankedAlphabet:
        return RankedAlphabet(self.ranks, allow_int_consts=self.intconsts)


def _lines(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = _strip_comment(line.split())
        if tokens:
            yield lineno, tokens


def parse_slp(text: str) -> Slp:
    header = _Header()
    raw: List[Tuple[int, str, List[str]]] = []
    for lineno, tokens in _lines(text):
        if header.take(tokens, lineno):
            continue
        if len(tokens) < 2 or tokens[1] != "->":
            raise ParseError("expected 'NAME -> items'", lineno)
        if any(c in tokens[0] for c in "()"):
            raise ParseError("parameters are only allowed in tree grammars", lineno)
        raw.append((lineno, tokens[0], tokens[2:]))
    if not raw:
        raise ParseError("no productions")
    heads = {}
    for lineno, name, _ in raw:
        if name in heads:
            raise ParseError(f"second production for {name}", lineno)
        if name in header.ranks:
            raise ParseError(f"{name} is both a terminal and a nonterminal", lineno)
        heads[name] = lineno
    prods = {}
    for lineno, name, body in raw:
        if not body:
            raise ParseError(f"empty right-hand side for {name}", lineno)
        prods[name] = [x if x in heads else header.terminal(x, lineno) for x in body]
    start = header.start or raw[0][1]
    if start not in heads:
        raise ParseError(f"start symbol {start} has no production")
    return Slp(prods, start, header.alphabet() if header.ranks else None)


def _alphabet_lines(symbols) -> List[str]:
    lines = []
    named = sorted({s for s in symbols if not s.is_const}, key=lambda s: (s.rank, s.name), reverse=True)
    if named:
        lines.append("alphabet " + " ".join(f"{s.name}:{s.rank}" for s in named))
    if any(s.is_const for s in symbols):
        lines.append("intconsts on")
    return lines


def _token(x) -> str:
    if isinstance(x, str):
        return x
    return f"#{x.value}" if isinstance(x, Symbol) and x.is_const else x.name


def _ordered(order: List[str], start: str) -> List[str]:
    # start first, then the remaining rules top-down
    return [start] + [n for n in reversed(order) if n != start]


def dump_slp(slp: Slp) -> str:
    symbols = slp.alphabet if slp.alphabet is not None else slp.terminals()
    lines = _alphabet_lines(list(symbols) + [s for s in slp.terminals() if s.is_const])
    lines.append(f"start {slp.start}")
    for name in _ordered(slp.order, slp.start):
        lines.append(f"{name} -> " + " ".join(_token(x) for x in slp.productions[name]))
    return "\n".join(lines) + "\n"


def parse_tslp(text: str) -> Tslp:
    header = _Header()
    raw = []
    for lineno, tokens in _lines(text):
        if header.take(tokens, lineno):
            continue
        try:
            arrow = tokens.index("->")
        except ValueError:
            raise ParseError("expected 'NAME(x1,...) -> items'", lineno) from None
        m = _HEAD.match("".join(tokens[:arrow]))
        if not m:
            raise ParseError(f"malformed head {' '.join(tokens[:arrow])!r}", lineno)
        params = [p for p in (m.group(2) or "").split(",") if p]
        for k, p in enumerate(params, start=1):
            if p != f"x{k}":
                raise ParseError(f"parameters must be listed as x1, x2, ...; got {p}", lineno)
        raw.append((lineno, m.group(1), len(params), tokens[arrow + 1:]))
    if not raw:
        raise ParseError("no productions")
    ranks = {}
    for lineno, name, rank, _ in raw:
        if name in ranks:
            raise ParseError(f"second production for {name}", lineno)
        if name in header.ranks:
            raise ParseError(f"{name} is both a terminal and a nonterminal", lineno)
        ranks[name] = rank
    rules = {}
    for lineno, name, rank, body in raw:
        items = []
        for tok in body:
            if tok in ranks:
                items.append(tok)
            elif _PARAM.match(tok) and tok not in header.ranks:
                items.append(Parameter(int(tok[1:])))
            else:
                items.append(header.terminal(tok, lineno))
        rules[name] = TslpRule(rank, tuple(items))
    return Tslp(rules, header.start or raw[0][1])


def dump_tslp(t: Tslp) -> str:
    symbols = {x for rule in t.rules.values() for x in rule.body if isinstance(x, Symbol)}
    lines = _alphabet_lines(symbols)
    lines.append(f"start {t.start}")
    for name in _ordered(t.order(), t.start):
        rule = t.rules[name]
        head = name if rule.rank == 0 else f"{name}(" + ",".join(f"x{k}" for k in range(1, rule.rank + 1)) + ")"
        lines.append(f"{head} -> " + " ".join(_token(x) for x in rule.body))
    return "\n".join(lines) + "\n"


def parse_tree_text(text: str) -> List[Symbol]:
    """Explicit tree as term syntax ``f(g(a),a)`` or as a raw traversal.

    A raw traversal needs an ``alphabet`` line declaring ranks; integer
    tokens then count as constant leaves.
    """
    header = _Header()
    body: List[Tuple[int, str]] = []
    for lineno, tokens in _lines(text):
        if header.take(tokens, lineno):
            continue
        body.extend((lineno, tok) for tok in tokens)
    if not body:
        raise ParseError("no tree given")
    joined = " ".join(tok for _, tok in body)
    if "(" in joined:
        return parse_term(joined, header.alphabet() if header.ranks else None)
    out = []
    for lineno, tok in body:
        if tok in header.ranks:
            out.append(Symbol(tok, header.ranks[tok]))
        elif _CONST.match(tok) or re.fullmatch(r"[+-]?\d+", tok):
            out.append(leaf_symbol(tok))
        elif len(body) == 1 and not header.ranks:
            out.append(Symbol(tok, 0))
        else:
            raise ParseError(f"undeclared symbol {tok!r}", lineno)
    return out


def load_slp_text(text: str) -> Slp:
    """An SLP file, or an explicit tree which becomes a one-rule grammar."""
    if "->" in text:
        return parse_slp(text)
    return Slp.literal(parse_tree_text(text))
