"""Grammar compressors and named families of trees.

``compress`` turns an explicit word into an SLP, either by splitting at
powers of two with shared halves or by repeatedly replacing the most
frequent pair of adjacent symbols.  The families cover combs, the pair of
homomorphic images used to separate traversal and parenthesis encodings,
and perfect binary trees grown by doubling.
"""

from __future__ import annotations

import heapq
from typing import Dict, List, Sequence, Tuple, Union

from .errors import EmptyInput, LengthMismatch, TooLarge
from .slp import GrammarBuilder, Item, Slp, Symbol, Transducer, _Names, apply_transducer, concat_slp, reverse_slp
from .trees import ExplicitTree


def compress(word: Sequence[Symbol], algo: str = "bisection") -> Slp:
    """SLP with start ``S`` deriving exactly ``word``."""
    word = list(word)
    if not word:
        raise EmptyInput("cannot compress the empty word")
    if algo == "bisection":
        return _bisection(word)
    if algo in ("pairing", "repair"):
        return _repair(word)
    raise ValueError(f"unknown compressor {algo!r}")


def _bisection(word: List[Symbol]) -> Slp:
    builder = GrammarBuilder(reserved={s.name for s in word} | {"S"})
    shared: Dict[Tuple[Item, Item], str] = {}

    def build(lo: int, hi: int, name=None) -> Item:
        n = hi - lo
        if n == 1:
            return word[lo]
        half = 1 << ((n - 1).bit_length() - 1)
        left, right = build(lo, lo + half), build(lo + half, hi)
        if name is not None:
            return builder.add((left, right), name)
        key = (left, right)
        if key not in shared:
            shared[key] = builder.add(key)
        return shared[key]

    if len(word) == 1:
        return Slp({"S": (word[0],)}, "S")
    return builder.build([build(0, len(word), "S")])


def _repair(word: List[Symbol]) -> Slp:
    """Repeatedly replace the most frequent digram.

    Counts are non-overlapping (a run of ``L`` equal symbols holds
    ``L // 2`` copies of its digram); ties go to the digram occurring
    first.  Rules are named ``R1, R2, ...`` in creation order.
    """
    n = len(word)
    sym: List[Item] = list(word)
    nxt = list(range(1, n + 1))
    prv = list(range(-1, n - 1))
    alive = [True] * n
    occ: Dict[Tuple, set] = {}
    first_heap: Dict[Tuple, List[int]] = {}

    def add(i: int):
        j = nxt[i]
        if j < n:
            d = (sym[i], sym[j])
            occ.setdefault(d, set()).add(i)
            heapq.heappush(first_heap.setdefault(d, []), i)
            touched.add(d)

    def remove(i: int):
        if 0 <= i < n and nxt[i] < n:
            d = (sym[i], sym[nxt[i]])
            occ[d].discard(i)
            touched.add(d)

    def first(d) -> int:
        h, live = first_heap[d], occ[d]
        while h[0] not in live:
            heapq.heappop(h)
        return h[0]

    def exact_count(d) -> int:
        live = occ[d]
        if d[0] != d[1]:
            return len(live)
        total = 0
        for i in live:
            if prv[i] >= 0 and prv[i] in live:
                continue
            run = 0
            while i in live:
                run += 1
                i = nxt[i]
            total += (run + 1) // 2
        return total

    touched: set = set()
    for i in range(n - 1):
        add(i)
    heap: List = []
    current: Dict[Tuple, Tuple[int, int, bool]] = {}

    def publish():
        for d in touched:
            live = occ[d]
            if len(live) >= 2:
                key = (len(live), first(d), d[0] != d[1])
                current[d] = key
                heapq.heappush(heap, (-key[0], key[1], key[2], _order_key(d), d))
            else:
                current.pop(d, None)
        touched.clear()

    publish()
    names = _Names({s.name for s in word} | {"S"}, prefix="R")
    rules: Dict[str, Tuple[Item, Item]] = {}
    while heap:
        negc, pos, exact, _, d = heapq.heappop(heap)
        if current.get(d) != (-negc, pos, exact):
            continue
        if not exact:
            c = exact_count(d)
            key = (c, pos, True)
            current[d] = key
            heapq.heappush(heap, (-c, pos, True, _order_key(d), d))
            continue
        if -negc < 2:
            break
        name = names()
        rules[name] = d
        del current[d]
        for i in sorted(occ[d]):
            if not alive[i] or i not in occ[d]:
                continue
            j = nxt[i]
            a, b = prv[i], nxt[j]
            remove(a)
            remove(i)
            remove(j)
            sym[i] = name
            alive[j] = False
            nxt[i] = b
            if b < n:
                prv[b] = i
            if a >= 0:
                add(a)
            add(i)
        publish()
    final = []
    i = 0
    while i < n:
        final.append(sym[i])
        i = nxt[i]
    rules["S"] = tuple(final)
    return Slp(rules, "S")


def _order_key(d) -> Tuple[str, str]:
    # total order on digrams, only used so heap entries never compare items directly
    return tuple(x if isinstance(x, str) else f"\0{x.name}/{x.rank}" for x in d)


def repair_reference(word: Sequence[Symbol]) -> Slp:
    """Round-by-round rescanning version of the pairing compressor (quadratic)."""
    seq: List[Item] = list(word)
    if not seq:
        raise EmptyInput("cannot compress the empty word")
    names = _Names({s.name for s in seq} | {"S"}, prefix="R")
    rules: Dict[str, Tuple] = {}
    while True:
        counts: Dict[Tuple, int] = {}
        firsts: Dict[Tuple, int] = {}
        last: Dict[Tuple, int] = {}
        for i in range(len(seq) - 1):
            d = (seq[i], seq[i + 1])
            if d not in firsts:
                firsts[d] = i
            if last.get(d, -2) != i - 1:
                counts[d] = counts.get(d, 0) + 1
                last[d] = i
        if not counts:
            break
        best = min(counts, key=lambda d: (-counts[d], firsts[d]))
        if counts[best] < 2:
            break
        name = names()
        rules[name] = best
        out: List[Item] = []
        i = 0
        while i < len(seq):
            if i + 1 < len(seq) and (seq[i], seq[i + 1]) == best:
                out.append(name)
                i += 2
            else:
                out.append(seq[i])
                i += 1
        seq = out
    rules["S"] = tuple(seq)
    return Slp(rules, "S")


# ---------------------------------------------------------------------------
# families

ZERO, ONE = Symbol("0", 0), Symbol("1", 0)
F0, F1 = Symbol("f0", 2), Symbol("f1", 2)
DOLLAR = Symbol("$", 0)
F, A = Symbol("f", 2), Symbol("a", 0)

BitsLike = Union[Slp, str, Sequence[int], Sequence[Symbol]]


def bits_slp(bits: BitsLike) -> Slp:
    """Coerce ``"0110"``, ``[0, 1, 1, 0]`` or a grammar into an SLP over the leaves 0 and 1."""
    if isinstance(bits, Slp):
        return bits
    word = []
    for b in bits:
        if isinstance(b, Symbol):
            b = b.value if b.is_const else b.name
        if str(b) not in ("0", "1"):
            raise ValueError(f"{b!r} is not a bit")
        word.append(ONE if str(b) == "1" else ZERO)
    if not word:
        raise EmptyInput("bit string is empty")
    return Slp.literal(word)


def _bit_map(slp: Slp, zero, one) -> Slp:
    mapping = {}
    for s in slp.terminals():
        bit = s.value if s.is_const else s.name
        if str(bit) not in ("0", "1"):
            raise ValueError(f"{s} is not a bit")
        mapping[s] = zero if str(bit) == "0" else one
    return apply_transducer(slp, Transducer.homomorphism(mapping))


def _same_length(u: Slp, v: Slp):
    if u.length != v.length:
        raise LengthMismatch(f"u has length {u.length} but v has length {v.length}")


def comb_slp(u: BitsLike, v: BitsLike) -> Slp:
    """Traversal of the comb whose spine spells ``u`` and whose leaves spell ``v``.

    The spine node for bit ``b`` is ``f_b``; the innermost leaf is ``$``
    and the leaves hanging off the spine, bottom-up, are ``v``.
    """
    u, v = bits_slp(u), bits_slp(v)
    _same_length(u, v)
    spine = _bit_map(u, (F0,), (F1,))
    leaves = reverse_slp(_bit_map(v, (ZERO,), (ONE,)))
    return concat_slp([spine, [DOLLAR], leaves])


def phi_gap_tree_slp(u: BitsLike, v: BitsLike) -> Slp:
    """Traversal ``phi1(rev(u)) a phi2(v)`` of a full binary tree over ``f`` and ``a``.

    ``phi1`` maps 0 to ``f`` and 1 to ``f a f``; ``phi2`` maps 0 to ``a``
    and 1 to ``f a a``.
    """
    u, v = bits_slp(u), bits_slp(v)
    _same_length(u, v)
    left = _bit_map(reverse_slp(u), (F,), (F, A, F))
    right = _bit_map(v, (A,), (F, A, A))
    return concat_slp([left, [A], right])


def doubling_slp(n: int, inner: Symbol = F, leaf: Symbol = A) -> Slp:
    """Perfect binary tree of height ``n``: ``T0 -> a`` and ``Tk -> f T(k-1) T(k-1)``."""
    if n < 0:
        raise ValueError("height must be non-negative")
    rules = {"T0": (leaf,)}
    for k in range(1, n + 1):
        rules[f"T{k}"] = (inner, f"T{k - 1}", f"T{k - 1}")
    return Slp(rules, f"T{n}")


def bp_brute(tree: Union[ExplicitTree, Sequence[Symbol]], limit: int = 10**6) -> str:
    """Balanced parentheses by nesting: a node is ``(`` its children ``)``."""
    word = tree.preorder if isinstance(tree, ExplicitTree) else tuple(tree)
    if len(word) > limit:
        raise TooLarge(f"tree has {len(word)} nodes, limit is {limit}")
    if not isinstance(tree, ExplicitTree):
        ExplicitTree(word)
    out: List[str] = []
    missing: List[int] = []
    for sym in word:
        out.append("(")
        if sym.rank:
            missing.append(sym.rank)
            continue
        out.append(")")
        while missing:
            missing[-1] -= 1
            if missing[-1]:
                break
            missing.pop()
            out.append(")")
    return "".join(out)
