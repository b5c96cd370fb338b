"""Uncompressed trees: term syntax, preorder strings and pointer views.

These are the reference objects that compressed results are checked
against, and the input format of the command-line tools.
"""

from __future__ import annotations

import re
from functools import cached_property
from typing import Dict, List, NamedTuple, Optional, Sequence

from .errors import NotATree, ParseError
from .shapes import is_tree_word
from .slp import RankedAlphabet, Symbol

_INT = re.compile(r"[+-]?\d+\Z")
_TOKEN = re.compile(r"\s*(?:(\()|(\))|(,)|([^\s(),]+))")


class Parameter(NamedTuple):
    """A pattern or grammar parameter ``x<index>``; it stands for a whole subtree."""

    index: int

    @property
    def rank(self) -> int:
        return 0

    @property
    def name(self) -> str:
        return f"x{self.index}"

    def __str__(self):
        return self.name


_PARAM = re.compile(r"x(\d+)\Z")


def parse_pattern(text: str) -> List:
    """Parse a term in which leaves ``x1, x2, ...`` are parameters."""
    out = []
    for sym in parse_term(text):
        m = _PARAM.match(sym.name) if sym.rank == 0 and not sym.is_const else None
        out.append(Parameter(int(m.group(1))) if m else sym)
    return out


def leaf_symbol(name: str) -> Symbol:
    """Rank-0 symbol for a leaf token; ``#12`` and bare integers become constants."""
    if name.startswith("#") and _INT.match(name[1:]):
        return Symbol.const(int(name[1:]))
    if _INT.match(name):
        return Symbol.const(int(name))
    return Symbol(name, 0)


def parse_term(text: str, alphabet: Optional[RankedAlphabet] = None) -> List[Symbol]:
    """Parse ``f(g(a),a)`` style syntax into a preorder symbol list.

    Ranks are read off the number of arguments.  With an alphabet, every
    symbol must be declared there with that rank.
    """
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character at offset {pos}")
        pos = m.end()
        tokens.append(m.group(1) or m.group(2) or m.group(3) or m.group(4))
        if text[pos:].strip() == "":
            break
    out: List[Symbol] = []
    # stack of [index in out, argument count]
    stack: List[List[int]] = []
    i = 0
    expect_term = True
    while i < len(tokens):
        tok = tokens[i]
        if expect_term:
            if tok in "(),":
                raise ParseError(f"expected a symbol, got {tok!r}")
            if i + 1 < len(tokens) and tokens[i + 1] == "(":
                out.append(Symbol(tok, 1))  # rank fixed when the call closes
                stack.append([len(out) - 1, 0])
                i += 2
                if i < len(tokens) and tokens[i] == ")":
                    raise ParseError(f"{tok}() has no arguments; write {tok} for a leaf")
                continue
            out.append(leaf_symbol(tok))
            expect_term = False
            i += 1
            continue
        if not stack:
            raise ParseError(f"trailing input {tok!r}")
        frame = stack[-1]
        frame[1] += 1
        if tok == ",":
            expect_term = True
        elif tok == ")":
            idx, count = stack.pop()
            out[idx] = Symbol(out[idx].name, count)
        else:
            raise ParseError(f"expected ',' or ')', got {tok!r}")
        i += 1
    if stack or expect_term:
        raise ParseError("unbalanced term")
    if alphabet is not None:
        for sym in out:
            if sym not in alphabet:
                raise ParseError(f"symbol {sym.name} of rank {sym.rank} is not declared")
    return out


def term_string(preorder: Sequence[Symbol]) -> str:
    """Inverse of :func:`parse_term` for a well-formed preorder word."""
    parts: List[str] = []
    pending: List[int] = []  # arguments still to print per open call
    for sym in preorder:
        if pending:
            if pending[-1] > 0 and parts[-1] != "(":
                parts.append(",")
        if sym.rank == 0:
            parts.append(sym.name if not sym.is_const else str(sym.value))
            while pending:
                pending[-1] -= 1
                if pending[-1] > 0:
                    break
                pending.pop()
                parts.append(")")
        else:
            parts.append(sym.name)
            parts.append("(")
            pending.append(sym.rank)
    return "".join(parts)


class ExplicitTree:
    """A tree held as its preorder word, with lazily computed pointer views.

    Nodes are the 1-based preorder positions.
    """

    def __init__(self, preorder: Sequence[Symbol]):
        self.preorder = tuple(preorder)
        if not is_tree_word(self.preorder):
            raise NotATree("word is not the preorder traversal of a tree")

    @classmethod
    def parse(cls, text: str, alphabet: Optional[RankedAlphabet] = None) -> "ExplicitTree":
        return cls(parse_term(text, alphabet))

    def __len__(self):
        return len(self.preorder)

    def label(self, node: int) -> Symbol:
        return self.preorder[node - 1]

    @cached_property
    def children(self) -> List[List[int]]:
        """``children[v]`` lists the children of node ``v`` (index 0 unused)."""
        kids: List[List[int]] = [[] for _ in range(len(self.preorder) + 1)]
        open_nodes: List[int] = []
        for pos, sym in enumerate(self.preorder, start=1):
            if open_nodes:
                parent = open_nodes[-1]
                kids[parent].append(pos)
                if len(kids[parent]) == self.preorder[parent - 1].rank:
                    open_nodes.pop()
            if sym.rank:
                open_nodes.append(pos)
        return kids

    @cached_property
    def parents(self) -> List[int]:
        par = [0] * (len(self.preorder) + 1)
        for v, kids in enumerate(self.children):
            for c in kids:
                par[c] = v
        return par

    @cached_property
    def subtree_sizes(self) -> List[int]:
        sizes = [1] * (len(self.preorder) + 1)
        sizes[0] = 0
        for v in range(len(self.preorder), 0, -1):
            for c in self.children[v]:
                sizes[v] += sizes[c]
        return sizes

    @cached_property
    def depths(self) -> List[int]:
        dep = [0] * (len(self.preorder) + 1)
        for v in range(2, len(self.preorder) + 1):
            dep[v] = dep[self.parents[v]] + 1
        return dep

    def height(self) -> int:
        return max(self.depths[1:])

    def term(self) -> str:
        return term_string(self.preorder)

    def ancestors(self, node: int) -> List[int]:
        out = [node]
        while node != 1:
            node = self.parents[node]
            out.append(node)
        return out

    def lca(self, i: int, j: int) -> int:
        up = set(self.ancestors(i))
        for v in self.ancestors(j):
            if v in up:
                return v
        raise AssertionError("root is a common ancestor")

    def subtree(self, node: int) -> "ExplicitTree":
        return ExplicitTree(self.preorder[node - 1: node - 1 + self.subtree_sizes[node]])

    def __repr__(self):
        text = self.term()
        if len(text) > 60:
            text = text[:57] + "..."
        return f"ExplicitTree({text})"


def symbols_from_string(text: str, ranks: Dict[str, int]) -> List[Symbol]:
    """Split a compact word like ``ffaa`` or ``f f a a`` using a rank table."""
    tokens = text.split()
    if len(tokens) == 1 and tokens[0] not in ranks:
        tokens = list(tokens[0])
    out = []
    for tok in tokens:
        if tok not in ranks:
            raise ParseError(f"symbol {tok!r} has no declared rank")
        out.append(Symbol(tok, ranks[tok]))
    return out
