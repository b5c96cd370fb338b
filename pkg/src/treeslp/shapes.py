"""The (full trees, gaps) monoid on traversal strings and the tree check.

Every word over a ranked alphabet factors uniquely as ``t1 ... tn s`` with
trees ``ti`` and a fragment ``s`` (a proper prefix of some tree).  Its shape
is the pair ``(n, gaps(s))``, where ``gaps(s)`` counts the subtrees still
missing from ``s``.  Shapes compose associatively, so the shape of every
nonterminal of an SLP is a bottom-up fold.
"""

from __future__ import annotations

from typing import Dict, Iterable, NamedTuple

from .slp import Slp, Symbol


class TreeShape(NamedTuple):
    full_trees: int
    gaps: int

    def __str__(self):
        return f"({self.full_trees},{self.gaps})"


EMPTY = TreeShape(0, 0)
TREE = TreeShape(1, 0)


def shape_of_symbol(symbol: Symbol) -> TreeShape:
    if symbol.rank == 0:
        return TREE
    return TreeShape(0, symbol.rank)


def shape_combine(left: TreeShape, right: TreeShape) -> TreeShape:
    """Shape of ``uv`` from the shapes of ``u`` and ``v``."""
    b1, b2 = left
    c1, c2 = right
    if b2 <= c1:
        return TreeShape(b1 + c1 - max(1, b2) + 1, c2)
    return TreeShape(b1, c2 + b2 - c1 - min(1, c2))


def shape_of_word(word: Iterable[Symbol]) -> TreeShape:
    """Left fold of :func:`shape_of_symbol` under :func:`shape_combine`."""
    full, gaps = 0, 0
    for sym in word:
        # shape_combine specialised to a single symbol on the right
        if sym.rank == 0:
            if gaps <= 1:
                full, gaps = full + 1, 0
            else:
                gaps -= 1
        elif gaps == 0:
            gaps = sym.rank
        else:
            gaps += sym.rank - 1
    return TreeShape(full, gaps)


def gaps(word: Iterable[Symbol]) -> int:
    return shape_of_word(word).gaps


def compute_shapes(slp: Slp) -> Dict[str, TreeShape]:
    """Shape of every nonterminal, one pass in dependency order."""
    cached = slp._cache.get("shapes")
    if cached is not None:
        return cached
    prods = slp.productions
    shapes: Dict[str, TreeShape] = {}
    for name in slp.order:
        acc = EMPTY
        for x in prods[name]:
            acc = shape_combine(acc, shape_of_symbol(x) if isinstance(x, Symbol) else shapes[x])
        shapes[name] = acc
    slp._cache["shapes"] = shapes
    return shapes


def is_tree(slp: Slp) -> bool:
    """Whether ``val(slp)`` is the preorder traversal of a single tree."""
    return compute_shapes(slp)[slp.start] == TREE


def is_tree_word(word: Iterable[Symbol]) -> bool:
    return shape_of_word(word) == TREE
