"""Tree navigation on a grammar-compressed DFUDS parenthesis string.

The DFUDS string of a tree lists, in preorder, ``d`` opening parentheses
followed by one closing parenthesis for every node with ``d`` children,
after a single leading opening parenthesis.  A grammar for it is obtained
by substituting that block for every terminal of the tree grammar.

:class:`BpSlp` compiles such a grammar into binary nodes annotated with
length, excess, minimum prefix excess and closing-parenthesis count.  Each
primitive walks from the root to a leaf a constant number of times, so it
costs O(grammar depth).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import (
    GrammarError,
    IsRoot,
    NoSuchChild,
    NotAParenthesisOfThatKind,
    NotATree,
    NotEnoughOccurrences,
    OutOfRange,
    ParameterRepeated,
)
from .shapes import is_tree
from .slp import GrammarBuilder, Slp, Symbol, power_items
from .trees import Parameter

OPEN = Symbol("(", 0)
CLOSE = Symbol(")", 0)


def _paren(b) -> Symbol:
    if b in ("(", OPEN):
        return OPEN
    if b in (")", CLOSE):
        return CLOSE
    raise ValueError(f"not a parenthesis: {b!r}")


@dataclass(frozen=True)
class NtSummary:
    length: int
    total_excess: int
    min_prefix_excess: int
    close_count: int


class BpSlp:
    """A balanced parenthesis string given by an SLP, with navigation primitives."""

    def __init__(self, slp: Slp, check_balanced: bool = True):
        for sym in slp.terminals():
            if sym not in (OPEN, CLOSE):
                raise GrammarError(f"symbol {sym} is not a parenthesis")
        self.slp = slp
        # node 0 is "(", node 1 is ")"; binary nodes start at 2
        left = [-1, -1]
        right = [-1, -1]
        length = [1, 1]
        excess = [1, -1]
        minpref = [1, -1]
        closes = [0, 1]
        ids: Dict[str, int] = {}

        def join(a: int, b: int) -> int:
            left.append(a)
            right.append(b)
            length.append(length[a] + length[b])
            excess.append(excess[a] + excess[b])
            minpref.append(min(minpref[a], excess[a] + minpref[b]))
            closes.append(closes[a] + closes[b])
            return len(left) - 1

        def balanced(items: List[int], lo: int, hi: int) -> int:
            if hi - lo == 1:
                return items[lo]
            mid = (lo + hi) // 2
            return join(balanced(items, lo, mid), balanced(items, mid, hi))

        for name in slp.order:
            items = [(0 if x == OPEN else 1) if isinstance(x, Symbol) else ids[x]
                     for x in slp.productions[name]]
            ids[name] = balanced(items, 0, len(items))
        self._ids = ids
        self._left, self._right = left, right
        self._len, self._exc, self._min, self._cl = length, excess, minpref, closes
        self.root = ids[slp.start]
        self.length = length[self.root]
        if check_balanced and (excess[self.root] != 0 or minpref[self.root] < 0):
            raise GrammarError("parenthesis string is not balanced")

    @classmethod
    def from_string(cls, text: str) -> "BpSlp":
        return cls(Slp.literal([_paren(c) for c in text]))

    def summary(self, nonterminal: str) -> NtSummary:
        k = self._ids[nonterminal]
        return NtSummary(self._len[k], self._exc[k], self._min[k], self._cl[k])

    def __len__(self):
        return self.length

    def _check(self, k: int):
        if not 1 <= k <= self.length:
            raise OutOfRange(f"position {k} outside 1..{self.length}")

    def char_at(self, k: int) -> str:
        self._check(k)
        L, R, ln = self._left, self._right, self._len
        node = self.root
        while node >= 2:
            l = L[node]
            if k <= ln[l]:
                node = l
            else:
                k -= ln[l]
                node = R[node]
        return "(" if node == 0 else ")"

    def rank_close(self, k: int) -> int:
        """Closing parentheses in positions 1..k (k may be 0)."""
        if k <= 0:
            return 0
        self._check(k)
        L, R, ln, cl = self._left, self._right, self._len, self._cl
        node = self.root
        acc = 0
        while node >= 2:
            if k == ln[node]:
                return acc + cl[node]
            l = L[node]
            if k <= ln[l]:
                node = l
            else:
                acc += cl[l]
                k -= ln[l]
                node = R[node]
        return acc + node

    def rank(self, b, k: int) -> int:
        closes = self.rank_close(k)
        return closes if _paren(b) is CLOSE else max(k, 0) - closes

    def select_close(self, c: int) -> int:
        L, R, ln, cl = self._left, self._right, self._len, self._cl
        if not 1 <= c <= cl[self.root]:
            raise NotEnoughOccurrences(f"no closing parenthesis number {c}")
        node = self.root
        pos = 0
        while node >= 2:
            l = L[node]
            if c <= cl[l]:
                node = l
            else:
                c -= cl[l]
                pos += ln[l]
                node = R[node]
        return pos + 1

    def select_open(self, c: int) -> int:
        L, R, ln, cl = self._left, self._right, self._len, self._cl
        if not 1 <= c <= ln[self.root] - cl[self.root]:
            raise NotEnoughOccurrences(f"no opening parenthesis number {c}")
        node = self.root
        pos = 0
        while node >= 2:
            l = L[node]
            opens = ln[l] - cl[l]
            if c <= opens:
                node = l
            else:
                c -= opens
                pos += ln[l]
                node = R[node]
        return pos + 1

    def select(self, b, c: int) -> int:
        return self.select_close(c) if _paren(b) is CLOSE else self.select_open(c)

    def excess(self, k: int) -> int:
        """Opening minus closing parentheses in positions 1..k."""
        return k - 2 * self.rank_close(k)

    def forward_search(self, start: int, target: int) -> Optional[int]:
        """First position p >= start whose prefix excess is at most ``target``."""
        self._check(start)
        L, R, ln, ex, mn = self._left, self._right, self._len, self._exc, self._min
        node, off, base = self.root, 0, 0
        pending: List[Tuple[int, int, int]] = []
        while node >= 2:
            l = L[node]
            if start <= off + ln[l]:
                pending.append((R[node], off + ln[l], base + ex[l]))
                node = l
            else:
                off += ln[l]
                base += ex[l]
                node = R[node]
        if base + ex[node] <= target:
            return start
        while pending:
            node, off, base = pending.pop()
            if base + mn[node] <= target:
                while node >= 2:
                    l = L[node]
                    if base + mn[l] <= target:
                        node = l
                    else:
                        off += ln[l]
                        base += ex[l]
                        node = R[node]
                return off + 1
        return None

    def backward_search(self, end: int, target: int) -> Optional[int]:
        """Last position q in 0..end whose prefix excess is at most ``target``."""
        if end <= 0:
            return 0 if target >= 0 else None
        self._check(end)
        L, R, ln, ex, mn = self._left, self._right, self._len, self._exc, self._min
        node, off, base = self.root, 0, 0
        pending: List[Tuple[int, int, int]] = []
        while node >= 2:
            l = L[node]
            if end <= off + ln[l]:
                node = l
            else:
                pending.append((l, off, base))
                off += ln[l]
                base += ex[l]
                node = R[node]
        if base + ex[node] <= target:
            return end
        while pending:
            node, off, base = pending.pop()
            if base + mn[node] <= target:
                while node >= 2:
                    l, r = L[node], R[node]
                    if base + ex[l] + mn[r] <= target:
                        off += ln[l]
                        base += ex[l]
                        node = r
                    else:
                        node = l
                return off + 1
        return 0 if target >= 0 else None

    def findclose(self, k: int) -> int:
        if self.char_at(k) != "(":
            raise NotAParenthesisOfThatKind(f"position {k} is not an opening parenthesis")
        p = self.forward_search(k + 1, self.excess(k) - 1) if k < self.length else None
        if p is None:
            raise NotAParenthesisOfThatKind(f"opening parenthesis at {k} is unmatched")
        return p

    def findopen(self, k: int) -> int:
        if self.char_at(k) != ")":
            raise NotAParenthesisOfThatKind(f"position {k} is not a closing parenthesis")
        q = self.backward_search(k - 1, self.excess(k))
        if q is None:
            raise NotAParenthesisOfThatKind(f"closing parenthesis at {k} is unmatched")
        return q + 1

    def rmqi(self, k: int, j: int) -> int:
        """Leftmost position in [k, j] of minimum prefix excess."""
        if not 1 <= k <= j <= self.length:
            raise OutOfRange(f"range [{k}, {j}] outside 1..{self.length}")
        L, R, ln, ex, mn = self._left, self._right, self._len, self._exc, self._min
        best = None
        stack = [(self.root, 0, 0)]
        while stack:
            node, off, base = stack.pop()
            lo, hi = off + 1, off + ln[node]
            if hi < k or lo > j:
                continue
            if k <= lo and hi <= j:
                value = base + mn[node]
                if best is None or value < best[0]:
                    best = (value, node, off, base)
                continue
            l = L[node]
            stack.append((R[node], off + ln[l], base + ex[l]))
            stack.append((l, off, base))
        value, node, off, base = best
        while node >= 2:
            l = L[node]
            if base + mn[l] == value:
                node = l
            else:
                off += ln[l]
                base += ex[l]
                node = R[node]
        return off + 1

    def to_string(self, limit: int = 10**6) -> str:
        from .slp import expand
        return "".join(s.name for s in expand(self.slp, limit))


def dfuds_grammar(tree: Slp) -> Slp:
    """Grammar for the DFUDS string of the tree derived by ``tree``."""
    builder = GrammarBuilder(reserved=set(tree.productions) | {s.name for s in tree.terminals()} | {"(", ")"})
    blocks: Dict[int, object] = {}
    for sym in tree.terminals():
        d = sym.rank
        if d not in blocks:
            blocks[d] = builder.wrap(power_items(builder, OPEN, d) + [CLOSE])
    for name in tree.order:
        rhs = tuple(blocks[x.rank] if isinstance(x, Symbol) else x for x in tree.productions[name])
        builder.add(rhs, name)
    return builder.build([OPEN, tree.start])


class DfudsIndex:
    """Navigation over a tree grammar via its DFUDS parenthesis grammar.

    Nodes are preorder numbers 1..N, i.e. positions in the traversal string.
    """

    def __init__(self, tree: Slp):
        if not is_tree(tree):
            raise NotATree("grammar does not derive a tree")
        self.tree_slp = tree
        self.bp = BpSlp(dfuds_grammar(tree))
        self.tree_size = tree.length

    def _node(self, i: int):
        if not 1 <= i <= self.tree_size:
            raise OutOfRange(f"node {i} outside 1..{self.tree_size}")

    def start_of(self, i: int) -> int:
        """DFUDS position where the block of node ``i`` begins."""
        self._node(i)
        return 2 if i == 1 else self.bp.select_close(i - 1) + 1

    def node_at(self, k: int) -> int:
        """Preorder number of the node whose block contains position ``k``."""
        return self.bp.rank_close(k - 1) + 1

    def degree(self, i: int) -> int:
        return self.bp.select_close(i) - self.start_of(i)

    def parent(self, i: int) -> int:
        self._node(i)
        if i == 1:
            raise IsRoot("the root has no parent")
        return self.node_at(self.bp.findopen(self.start_of(i) - 1))

    def kth_child(self, i: int, k: int) -> int:
        start = self.start_of(i)
        d = self.bp.select_close(i) - start
        if not 1 <= k <= d:
            raise NoSuchChild(f"node {i} has {d} children, asked for child {k}")
        return self.node_at(self.bp.findclose(start + d - k) + 1)

    def child_rank(self, i: int) -> int:
        self._node(i)
        if i == 1:
            raise IsRoot("the root is nobody's child")
        p = self.bp.findopen(self.start_of(i) - 1)
        return self.bp.select_close(self.bp.rank_close(p) + 1) - p

    def subtree_size(self, i: int) -> int:
        start = self.start_of(i)
        end = self.bp.forward_search(start, self.bp.excess(start - 1) - 1)
        return (end - start + 2) // 2

    def lca(self, i: int, j: int) -> int:
        self._node(i)
        self._node(j)
        if i > j:
            i, j = j, i
        if i == j or j < i + self.subtree_size(i):
            return i
        r = self.bp.rmqi(self.start_of(i), self.start_of(j) - 1)
        return self.parent(self.node_at(r + 1))

    def label_at(self, i: int) -> Symbol:
        self._node(i)
        return self.tree_slp.symbol_at(i)

    def subtree_matches(self, i: int, pattern: Sequence) -> bool:
        """Whether the subtree at ``i`` is an instance of ``pattern``.

        ``pattern`` is a preorder sequence of symbols and :class:`Parameter`
        leaves; every parameter may occur at most once.
        """
        self._node(i)
        seen = set()
        for item in pattern:
            if isinstance(item, Parameter):
                if item in seen:
                    raise ParameterRepeated(f"parameter {item} occurs twice in the pattern")
                seen.add(item)
        stack = [i]
        for item in pattern:
            if not stack:
                raise ValueError("pattern is not a single term")
            node = stack.pop()
            if isinstance(item, Parameter):
                continue
            if self.label_at(node) != item:
                return False
            stack.extend(self.kth_child(node, k) for k in range(item.rank, 0, -1))
        if stack:
            raise ValueError("pattern is not a single term")
        return True


def dfuds_slp(tree: Slp) -> DfudsIndex:
    return DfudsIndex(tree)
