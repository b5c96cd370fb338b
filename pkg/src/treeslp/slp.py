"""Straight-line programs over ranked alphabets.

An :class:`Slp` maps every nonterminal (a ``str``) to a non-empty tuple of
items, where an item is either a nonterminal name or a :class:`Symbol`.
Positions are 1-based and slices ``[i:j]`` are inclusive on both ends.
Lengths are Python integers, so grammars for strings of astronomical length
are handled exactly.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

from .errors import (
    CyclicGrammar,
    EmptyProduction,
    EmptyValue,
    ExpansionTooLarge,
    GrammarError,
    MissingProduction,
    NotEnoughOccurrences,
    OutOfRange,
    RankMismatch,
    UndefinedTransition,
    UnknownNonterminal,
)


class Symbol:
    """A terminal symbol: a ranked function symbol or an integer constant.

    Integer constants always have rank 0 and are named ``#<value>``.
    """

    __slots__ = ("name", "rank", "value", "_hash")

    def __init__(self, name: str, rank: int = 0, value: Optional[int] = None):
        if rank < 0:
            raise ValueError(f"negative rank for {name}")
        if value is not None and rank != 0:
            raise ValueError("integer constants have rank 0")
        self.name = name
        self.rank = rank
        self.value = value
        self._hash = hash((name, rank, value))

    @classmethod
    def const(cls, value: int) -> "Symbol":
        return cls(f"#{value}", 0, int(value))

    @property
    def is_const(self) -> bool:
        return self.value is not None

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Symbol):
            return NotImplemented
        return self.name == other.name and self.rank == other.rank and self.value == other.value

    def __hash__(self):
        return self._hash

    def __repr__(self):
        if self.is_const:
            return f"Symbol.const({self.value})"
        return f"Symbol({self.name!r}, {self.rank})"

    def __str__(self):
        return self.name


class RankedAlphabet:
    """A finite set of ranked symbols, optionally admitting integer constants."""

    def __init__(self, symbols: Union[Mapping[str, int], Iterable[Symbol]], allow_int_consts: bool = False):
        if isinstance(symbols, Mapping):
            symbols = [Symbol(name, rank) for name, rank in symbols.items()]
        self._by_name: Dict[str, Symbol] = {}
        for sym in symbols:
            if sym.is_const:
                raise GrammarError("integer constants are not declared individually")
            if sym.name in self._by_name and self._by_name[sym.name] != sym:
                raise RankMismatch(f"symbol {sym.name} declared with two ranks")
            self._by_name[sym.name] = sym
        self.allow_int_consts = allow_int_consts
        if not allow_int_consts and not any(s.rank == 0 for s in self._by_name.values()):
            raise GrammarError("alphabet needs a symbol of rank 0")

    def __getitem__(self, name: str) -> Symbol:
        return self._by_name[name]

    def get(self, name: str) -> Optional[Symbol]:
        return self._by_name.get(name)

    def __contains__(self, sym) -> bool:
        if isinstance(sym, Symbol) and sym.is_const:
            return self.allow_int_consts
        if isinstance(sym, Symbol):
            return self._by_name.get(sym.name) == sym
        return sym in self._by_name

    def __iter__(self):
        return iter(self._by_name.values())

    def __len__(self):
        return len(self._by_name)

    @property
    def max_rank(self) -> int:
        return max((s.rank for s in self._by_name.values()), default=0)

    def __repr__(self):
        body = " ".join(f"{s.name}:{s.rank}" for s in self._by_name.values())
        return f"RankedAlphabet({body}{', intconsts' if self.allow_int_consts else ''})"


Item = Union[str, Symbol]


class Cut(NamedTuple):
    """The right-hand-side item ``nonterminal[i:j]`` of a composition system."""

    nonterminal: str
    i: int
    j: int


def _children(rhs):
    for item in rhs:
        if isinstance(item, str):
            yield item
        elif isinstance(item, Cut):
            yield item.nonterminal


def _topological_order(prods: Mapping[str, tuple]) -> List[str]:
    """Children-first order of all nonterminals; raises on cycles."""
    state: Dict[str, int] = {}
    order: List[str] = []
    for root in prods:
        if root in state:
            continue
        state[root] = 1
        stack = [(root, _children(prods[root]))]
        while stack:
            node, it = stack[-1]
            for child in it:
                mark = state.get(child)
                if mark is None:
                    state[child] = 1
                    stack.append((child, _children(prods[child])))
                    break
                if mark == 1:
                    raise CyclicGrammar(child)
            else:
                state[node] = 2
                order.append(node)
                stack.pop()
    return order


def _check_items(prods, alphabet, allow_cuts=False):
    ranks: Dict[str, Symbol] = {}
    for name, rhs in prods.items():
        if not rhs:
            raise EmptyProduction(name)
        for item in rhs:
            if isinstance(item, str):
                if item not in prods:
                    raise UnknownNonterminal(item)
            elif isinstance(item, Symbol):
                if alphabet is not None and item not in alphabet:
                    raise GrammarError(f"symbol {item} is not in the alphabet", name)
                if not item.is_const:
                    seen = ranks.setdefault(item.name, item)
                    if seen.rank != item.rank:
                        raise RankMismatch(f"symbol {item.name} used with ranks {seen.rank} and {item.rank}", name)
            elif allow_cuts and isinstance(item, Cut):
                if item.nonterminal not in prods:
                    raise UnknownNonterminal(item.nonterminal)
            else:
                raise GrammarError(f"bad right-hand-side item {item!r}", name)


class Slp:
    """A straight-line program: one production per nonterminal, acyclic.

    Parameters
    ----------
    productions:
        Mapping from nonterminal name to a non-empty sequence of items.
    start:
        The start nonterminal.
    alphabet:
        Optional :class:`RankedAlphabet`; when given, every terminal must
        belong to it.
    """

    def __init__(self, productions: Mapping[str, Sequence[Item]], start: str,
                 alphabet: Optional[RankedAlphabet] = None):
        prods = {name: tuple(rhs) for name, rhs in productions.items()}
        if start not in prods:
            raise MissingProduction(start)
        _check_items(prods, alphabet)
        self._prods = prods
        self.start = start
        self.alphabet = alphabet
        self._order = _topological_order(prods)
        lengths: Dict[str, int] = {}
        for name in self._order:
            lengths[name] = sum(1 if isinstance(x, Symbol) else lengths[x] for x in prods[name])
        self._lengths = lengths
        self._offsets: Dict[str, List[int]] = {}
        self._cache: Dict[Hashable, object] = {}

    # construction helpers

    @classmethod
    def literal(cls, symbols: Sequence[Symbol], alphabet: Optional[RankedAlphabet] = None) -> "Slp":
        """The trivial grammar ``S -> w``."""
        if len(symbols) == 0:
            raise EmptyValue("cannot build a grammar for the empty word")
        return cls({"S": tuple(symbols)}, "S", alphabet)

    # basic properties

    @property
    def productions(self) -> Mapping[str, Tuple[Item, ...]]:
        return self._prods

    @property
    def nonterminals(self) -> List[str]:
        return list(self._prods)

    @property
    def order(self) -> List[str]:
        """Nonterminals with every nonterminal after the ones it references."""
        return self._order

    @property
    def size(self) -> int:
        return sum(len(rhs) for rhs in self._prods.values())

    @property
    def length(self) -> int:
        return self._lengths[self.start]

    def __len__(self):
        return self.length

    def length_of(self, item: Item) -> int:
        return 1 if isinstance(item, Symbol) else self._lengths[item]

    @property
    def lengths(self) -> Mapping[str, int]:
        return self._lengths

    def depth(self) -> int:
        """Height of the derivation tree; a rule with only terminals has depth 1."""
        depths: Dict[str, int] = {}
        for name in self._order:
            depths[name] = 1 + max((depths[x] for x in self._prods[name] if isinstance(x, str)), default=0)
        return depths[self.start]

    def terminals(self) -> set:
        return {x for rhs in self._prods.values() for x in rhs if isinstance(x, Symbol)}

    def reachable(self) -> List[str]:
        seen = {self.start}
        stack = [self.start]
        while stack:
            for x in self._prods[stack.pop()]:
                if isinstance(x, str) and x not in seen:
                    seen.add(x)
                    stack.append(x)
        return [name for name in self._order if name in seen]

    def pruned(self) -> "Slp":
        """The grammar restricted to nonterminals reachable from the start."""
        keep = set(self.reachable())
        if len(keep) == len(self._prods):
            return self
        return Slp({k: v for k, v in self._prods.items() if k in keep}, self.start, self.alphabet)

    def offsets(self, name: str) -> List[int]:
        """Cumulative item lengths of the right-hand side of ``name``."""
        cum = self._offsets.get(name)
        if cum is None:
            cum = []
            total = 0
            for x in self._prods[name]:
                total += 1 if isinstance(x, Symbol) else self._lengths[x]
                cum.append(total)
            self._offsets[name] = cum
        return cum

    def locate(self, name: str, i: int) -> Tuple[int, int]:
        """Index of the item of ``name`` holding position ``i``, and the length before it."""
        cum = self.offsets(name)
        k = bisect_left(cum, i)
        return k, (cum[k - 1] if k else 0)

    def symbol_at(self, i: int) -> Symbol:
        """Random access: the symbol at 1-based position ``i``."""
        if not 1 <= i <= self.length:
            raise OutOfRange(f"position {i} outside 1..{self.length}")
        item: Item = self.start
        while isinstance(item, str):
            k, before = self.locate(item, i)
            i -= before
            item = self._prods[item][k]
        return item

    def __eq__(self, other):
        return (isinstance(other, Slp) and self.start == other.start
                and self._prods == other._prods)

    def __hash__(self):
        return id(self)

    def __repr__(self):
        return f"<Slp start={self.start} nonterminals={len(self._prods)} size={self.size} length={self.length}>"


@dataclass
class ValidationReport:
    ok: bool
    nonterminals: int
    size: int
    depth: int
    lengths: Dict[str, int] = field(repr=False)

    @property
    def length(self):
        return max(self.lengths.values()) if self.lengths else 0


def validate(slp: Union[Slp, Mapping[str, Sequence[Item]]], start: Optional[str] = None,
             alphabet: Optional[RankedAlphabet] = None) -> ValidationReport:
    """Check a grammar and report its lengths.

    Accepts either a constructed :class:`Slp` or raw productions plus a start
    symbol.  Structural problems raise :class:`CyclicGrammar`,
    :class:`MissingProduction` or :class:`UnknownNonterminal`.
    """
    if not isinstance(slp, Slp):
        if start is None:
            raise MissingProduction("<start>")
        slp = Slp(slp, start, alphabet)
    return ValidationReport(True, len(slp.productions), slp.size, slp.depth(), dict(slp.lengths))


# ---------------------------------------------------------------------------
# grammar builder: the workhorse for cuts, concatenation and normal forms


class _Names:
    def __init__(self, taken: Iterable[str], prefix: str = "N"):
        self.taken = set(taken)
        self.prefix = prefix
        self.counter = 0

    def __call__(self) -> str:
        while True:
            self.counter += 1
            name = f"{self.prefix}{self.counter}"
            if name not in self.taken:
                self.taken.add(name)
                return name

    def claim(self, name: str) -> str:
        if name in self.taken:
            return self()
        self.taken.add(name)
        return name


class GrammarBuilder:
    """Mutable grammar with length bookkeeping and substring construction.

    Rules added to a builder are never changed afterwards, so slices of a
    nonterminal can be shared between many later rules.
    """

    def __init__(self, base: Optional[Slp] = None, reserved: Iterable[str] = ()):
        self.rules: Dict[str, Tuple[Item, ...]] = {}
        self.lengths: Dict[str, int] = {}
        self._cum: Dict[str, List[int]] = {}
        self._prefix_memo: Dict[Tuple[str, int], str] = {}
        self._suffix_memo: Dict[Tuple[str, int], str] = {}
        self.alphabet = base.alphabet if base is not None else None
        taken = set(reserved)
        if base is not None:
            taken.update(base.productions)
            taken.update(s.name for s in base.terminals())
            self.rules.update(base.productions)
            self.lengths.update(base.lengths)
        self.names = _Names(taken)

    def fresh(self) -> str:
        return self.names()

    def length_of(self, item) -> int:
        return 1 if isinstance(item, Symbol) else self.lengths[item]

    def total_length(self, items: Iterable[Item]) -> int:
        return sum(1 if isinstance(x, Symbol) else self.lengths[x] for x in items)

    def add(self, items: Sequence[Item], name: Optional[str] = None) -> str:
        items = tuple(items)
        if not items:
            raise EmptyValue("a production needs a non-empty right-hand side")
        if name is None:
            name = self.fresh()
        else:
            self.names.taken.add(name)
        self.rules[name] = items
        self.lengths[name] = self.total_length(items)
        return name

    def merge(self, slp: Slp) -> str:
        """Copy ``slp`` in under fresh names where needed; returns its start name."""
        rename: Dict[str, str] = {}
        for name in slp.order:
            new = name if name not in self.rules and name not in self.names.taken else self.fresh()
            self.names.taken.add(new)
            rename[name] = new
            rhs = tuple(rename[x] if isinstance(x, str) else x for x in slp.productions[name])
            self.rules[new] = rhs
            self.lengths[new] = slp.lengths[name]
        for sym in slp.terminals():
            self.names.taken.add(sym.name)
        return rename[slp.start]

    def wrap(self, items: Sequence[Item]) -> Optional[Item]:
        """A single item deriving ``items``, or None for the empty sequence."""
        if not items:
            return None
        if len(items) == 1:
            return items[0]
        return self.add(items)

    def _locate(self, name: str, i: int) -> Tuple[int, int]:
        cum = self._cum.get(name)
        if cum is None:
            cum = []
            total = 0
            for x in self.rules[name]:
                total += 1 if isinstance(x, Symbol) else self.lengths[x]
                cum.append(total)
            self._cum[name] = cum
        k = bisect_left(cum, i)
        return k, (cum[k - 1] if k else 0)

    def prefix(self, item: Item, j: int) -> List[Item]:
        """Items deriving ``val(item)[1:j]`` (empty when ``j <= 0``)."""
        if j <= 0:
            return []
        n = self.length_of(item)
        if j >= n:
            if j > n:
                raise OutOfRange(f"prefix length {j} exceeds {n}")
            return [item]
        heads: List[Tuple[Tuple[Item, ...], Tuple[str, int]]] = []
        while True:
            if j == self.length_of(item):
                inner: List[Item] = [item]
                break
            memo = self._prefix_memo.get((item, j))
            if memo is not None:
                inner = [memo]
                break
            rhs = self.rules[item]
            k, before = self._locate(item, j)
            heads.append((rhs[:k], (item, j)))
            item, j = rhs[k], j - before
        for level, (head, key) in enumerate(reversed(heads)):
            items = list(head) + inner
            if level == len(heads) - 1:
                return items
            if len(items) > 1:
                name = self.add(items)
                self._prefix_memo[key] = name
                inner = [name]
            else:
                inner = items
        return inner

    def suffix(self, item: Item, i: int) -> List[Item]:
        """Items deriving ``val(item)[i:]`` (empty when ``i`` is past the end)."""
        n = self.length_of(item)
        if i > n:
            if i > n + 1:
                raise OutOfRange(f"suffix start {i} exceeds {n + 1}")
            return []
        if i <= 1:
            if i < 1:
                raise OutOfRange(f"suffix start {i} below 1")
            return [item]
        tails: List[Tuple[Tuple[Item, ...], Tuple[str, int]]] = []
        while True:
            if i == 1:
                inner: List[Item] = [item]
                break
            memo = self._suffix_memo.get((item, i))
            if memo is not None:
                inner = [memo]
                break
            rhs = self.rules[item]
            k, before = self._locate(item, i)
            tails.append((rhs[k + 1:], (item, i)))
            item, i = rhs[k], i - before
        for level, (tail, key) in enumerate(reversed(tails)):
            items = inner + list(tail)
            if level == len(tails) - 1:
                return items
            if len(items) > 1:
                name = self.add(items)
                self._suffix_memo[key] = name
                inner = [name]
            else:
                inner = items
        return inner

    def slice(self, item: Item, i: int, j: int, allow_empty: bool = False) -> List[Item]:
        """Items deriving ``val(item)[i:j]``, 1-based and inclusive."""
        n = self.length_of(item)
        if i > j:
            if allow_empty and 1 <= i <= n + 1 and 0 <= j <= n:
                return []
            raise OutOfRange(f"empty or reversed slice [{i}:{j}]")
        if i < 1 or j > n:
            raise OutOfRange(f"slice [{i}:{j}] outside 1..{n}")
        while True:
            if i == 1 and j == self.length_of(item):
                return [item]
            if i == 1:
                return self.prefix(item, j)
            if j == self.length_of(item):
                return self.suffix(item, i)
            rhs = self.rules[item]
            k1, before1 = self._locate(item, i)
            k2, before2 = self._locate(item, j)
            if k1 == k2:
                item, i, j = rhs[k1], i - before1, j - before1
                continue
            return (self.suffix(rhs[k1], i - before1) + list(rhs[k1 + 1:k2])
                    + self.prefix(rhs[k2], j - before2))

    def build(self, items: Sequence[Item], start: Optional[str] = None,
              alphabet: Optional[RankedAlphabet] = None) -> Slp:
        """Freeze the part of the builder reachable from ``items`` into an Slp."""
        items = list(items)
        if not items:
            raise EmptyValue("the resulting word is empty")
        if start is None and len(items) == 1 and isinstance(items[0], str):
            root = items[0]
        else:
            root = self.add(items, start)
        rules = self.rules
        prods = {root: rules[root]}
        stack = [root]
        while stack:
            for x in rules[stack.pop()]:
                if isinstance(x, str) and x not in prods:
                    prods[x] = rules[x]
                    stack.append(x)
        return Slp(prods, root, alphabet if alphabet is not None else self.alphabet)


# ---------------------------------------------------------------------------
# operations


def expand(slp: Slp, limit: int = 10**7) -> List[Symbol]:
    """The word derived by ``slp``; refuses words longer than ``limit``."""
    n = slp.length
    if n > limit:
        raise ExpansionTooLarge(n, limit)
    prods = slp.productions
    out: List[Symbol] = []
    stack: List[Item] = [slp.start]
    while stack:
        item = stack.pop()
        if isinstance(item, Symbol):
            out.append(item)
        else:
            rhs = prods[item]
            if len(rhs) == 1 and isinstance(rhs[0], Symbol):
                out.append(rhs[0])
            else:
                stack.extend(reversed(rhs))
    return out


def expand_nonterminal(slp: Slp, name: str, limit: int = 10**7) -> List[Symbol]:
    if slp.lengths[name] > limit:
        raise ExpansionTooLarge(slp.lengths[name], limit)
    sub = Slp({k: v for k, v in slp.productions.items()}, name)
    return expand(sub, limit)


def normalize_cnf(slp: Slp) -> Slp:
    """Equivalent grammar whose rules are ``A -> a`` or ``A -> B C``.

    Long right-hand sides are split into balanced binary trees and chain
    rules are short-circuited; the start symbol keeps its name.
    """
    prods = slp.productions
    names = _Names(set(prods) | {s.name for s in slp.terminals()})
    rules: Dict[str, tuple] = {}
    leaf_for: Dict[Symbol, str] = {}

    def as_nt(x):
        if isinstance(x, str):
            return x
        leaf = leaf_for.get(x)
        if leaf is None:
            leaf = names()
            rules[leaf] = (x,)
            leaf_for[x] = leaf
        return leaf

    for name in slp.reachable():
        rhs = prods[name]
        if len(rhs) == 1:
            x = rhs[0]
            rules[name] = (x,) if isinstance(x, Symbol) else rules[x]
            continue
        items = [as_nt(x) for x in rhs]

        def balanced(lo, hi):
            if hi - lo == 1:
                return items[lo]
            mid = (lo + hi) // 2
            new = names()
            rules[new] = (balanced(lo, mid), balanced(mid, hi))
            return new

        mid = len(items) // 2
        rules[name] = (balanced(0, mid), balanced(mid, len(items)))
    return Slp(rules, slp.start, slp.alphabet).pruned()


def is_cnf(slp: Slp) -> bool:
    for rhs in slp.productions.values():
        if len(rhs) == 1:
            if not isinstance(rhs[0], Symbol):
                return False
        elif len(rhs) != 2 or not all(isinstance(x, str) for x in rhs):
            return False
    return True


def occurring_symbols(slp: Slp) -> set:
    """The set of terminals occurring in ``val(slp)``."""
    prods = slp.productions
    return {x for name in slp.reachable() for x in prods[name] if isinstance(x, Symbol)}


def _gamma_key(gamma) -> frozenset:
    if isinstance(gamma, Symbol):
        return frozenset((gamma,))
    return frozenset(gamma)


def symbol_counts(slp: Slp, gamma) -> Dict[str, int]:
    """Per-nonterminal number of occurrences of symbols from ``gamma``."""
    key = ("counts", _gamma_key(gamma))
    cached = slp._cache.get(key)
    if cached is not None:
        return cached
    members = key[1]
    counts: Dict[str, int] = {}
    prods = slp.productions
    for name in slp.order:
        counts[name] = sum((x in members) if isinstance(x, Symbol) else counts[x] for x in prods[name])
    slp._cache[key] = counts
    return counts


def count_occurrences(slp: Slp, gamma) -> int:
    """Number of positions of ``val(slp)`` holding a symbol from ``gamma``."""
    if not _gamma_key(gamma):
        return 0
    return symbol_counts(slp, gamma)[slp.start]


def rank_occurrences(slp: Slp, gamma, k: int) -> int:
    """Occurrences of ``gamma`` symbols within ``val(slp)[1:k]``."""
    members = _gamma_key(gamma)
    if not members or k <= 0:
        return 0
    if k > slp.length:
        raise OutOfRange(f"position {k} outside 1..{slp.length}")
    counts = symbol_counts(slp, members)
    prods = slp.productions
    total = 0
    item: Item = slp.start
    while True:
        if isinstance(item, Symbol):
            return total + (item in members)
        if k == slp.lengths[item]:
            return total + counts[item]
        idx, before = slp.locate(item, k)
        rhs = prods[item]
        for x in rhs[:idx]:
            total += (x in members) if isinstance(x, Symbol) else counts[x]
        item, k = rhs[idx], k - before


def select_occurrence(slp: Slp, gamma, i: int) -> int:
    """Position of the ``i``-th occurrence of a ``gamma`` symbol."""
    members = _gamma_key(gamma)
    if i < 1:
        raise OutOfRange("occurrence index must be at least 1")
    counts = symbol_counts(slp, members) if members else None
    available = counts[slp.start] if counts else 0
    if i > available:
        raise NotEnoughOccurrences(f"asked for occurrence {i}, only {available} present")
    prods = slp.productions
    lengths = slp.lengths
    pos = 0
    item: Item = slp.start
    while isinstance(item, str):
        for x in prods[item]:
            if isinstance(x, Symbol):
                if x in members:
                    if i == 1:
                        return pos + 1
                    i -= 1
                pos += 1
            else:
                c = counts[x]
                if i <= c:
                    item = x
                    break
                i -= c
                pos += lengths[x]
    return pos + 1


def substring_slp(slp: Slp, i: int, j: int) -> Slp:
    """Grammar for ``val(slp)[i:j]``; adds O(depth) rules of bounded size."""
    n = slp.length
    if not (1 <= i <= j <= n):
        raise OutOfRange(f"slice [{i}:{j}] outside 1..{n}")
    builder = GrammarBuilder(slp)
    return builder.build(builder.slice(slp.start, i, j))


def reverse_slp(slp: Slp) -> Slp:
    """Grammar for the reversed word."""
    return Slp({name: tuple(reversed(rhs)) for name, rhs in slp.productions.items()},
               slp.start, slp.alphabet)


def concat_slp(parts: Sequence[Union[Slp, Sequence[Symbol]]], alphabet: Optional[RankedAlphabet] = None) -> Slp:
    """Grammar for the concatenation of grammars and literal words."""
    reserved = set()
    for part in parts:
        if isinstance(part, Slp):
            reserved.update(s.name for s in part.terminals())
        else:
            reserved.update(s.name for s in part)
    builder = GrammarBuilder(reserved=reserved)
    items: List[Item] = []
    for part in parts:
        if isinstance(part, Slp):
            items.append(builder.merge(part))
        else:
            items.extend(part)
    return builder.build(items, alphabet=alphabet)


def power_items(builder: GrammarBuilder, item: Item, n: int) -> List[Item]:
    """Items deriving ``val(item)^n`` via repeated squaring."""
    if n < 0:
        raise ValueError("negative exponent")
    out: List[Item] = []
    square = item
    while n:
        if n & 1:
            out.append(square)
        n >>= 1
        if n:
            square = builder.add((square, square))
    return out


class Transducer:
    """Deterministic finite-state transducer with output words on transitions.

    ``transitions`` maps ``(state, symbol)`` to ``(next_state, output)``.
    ``final_output`` optionally maps a state to a word emitted when the input
    ends in that state.
    """

    def __init__(self, transitions: Mapping[Tuple[Hashable, Symbol], Tuple[Hashable, Sequence[Symbol]]],
                 initial: Hashable = 0, final_output: Optional[Mapping[Hashable, Sequence[Symbol]]] = None):
        self.transitions = {k: (v[0], tuple(v[1])) for k, v in transitions.items()}
        self.initial = initial
        self.final_output = {k: tuple(v) for k, v in (final_output or {}).items()}

    @classmethod
    def homomorphism(cls, mapping: Mapping[Symbol, Sequence[Symbol]]) -> "Transducer":
        return cls({(0, a): (0, tuple(w)) for a, w in mapping.items()}, 0)

    @classmethod
    def identity(cls, symbols: Iterable[Symbol]) -> "Transducer":
        return cls.homomorphism({a: (a,) for a in symbols})

    def step(self, state, symbol):
        try:
            return self.transitions[(state, symbol)]
        except KeyError:
            raise UndefinedTransition(state, symbol) from None

    def run(self, word: Iterable[Symbol]) -> List[Symbol]:
        state = self.initial
        out: List[Symbol] = []
        for a in word:
            state, w = self.step(state, a)
            out.extend(w)
        out.extend(self.final_output.get(state, ()))
        return out


def apply_transducer(slp: Slp, transducer: Transducer, alphabet: Optional[RankedAlphabet] = None) -> Slp:
    """Grammar for the transducer image of ``val(slp)``.

    Builds one nonterminal per reachable (nonterminal, entry state) pair,
    so the result has size O(|slp|) for a fixed transducer.
    """
    prods = slp.productions
    reserved = {s.name for s in slp.terminals()}
    for _, out in transducer.transitions.values():
        reserved.update(s.name for s in out)
    builder = GrammarBuilder(reserved=reserved)
    memo: Dict[Tuple[str, Hashable], Tuple[Hashable, Optional[Item]]] = {}

    def finish(key, state, items):
        memo[key] = (state, builder.wrap(items))

    # explicit stack: [nonterminal, entry state, index, current state, collected items]
    stack = [[slp.start, transducer.initial, 0, transducer.initial, []]]
    while stack:
        frame = stack[-1]
        name, entry, idx, state, items = frame
        rhs = prods[name]
        while idx < len(rhs):
            x = rhs[idx]
            if isinstance(x, Symbol):
                state, out = transducer.step(state, x)
                items.extend(out)
                idx += 1
                continue
            done = memo.get((x, state))
            if done is None:
                break
            state, produced = done
            if produced is not None:
                items.append(produced)
            idx += 1
        frame[2], frame[3] = idx, state
        if idx < len(rhs):
            stack.append([rhs[idx], state, 0, state, []])
            continue
        finish((name, entry), state, items)
        stack.pop()
    end, top = memo[(slp.start, transducer.initial)]
    items = ([top] if top is not None else []) + list(transducer.final_output.get(end, ()))
    if not items:
        raise EmptyValue("transducer image is empty")
    return builder.build(items, alphabet=alphabet)


def eliminate_cuts(cs: "CompositionSystem") -> Slp:
    """Replace every cut ``B[i:j]`` by prefix/suffix nonterminals of ``B``."""
    builder = GrammarBuilder(reserved=set(cs.productions) | {s.name for s in cs.terminals()})
    rename = {}
    for name in cs.order:
        items: List[Item] = []
        for x in cs.productions[name]:
            if isinstance(x, Symbol):
                items.append(x)
            elif isinstance(x, str):
                items.append(rename[x])
            else:
                items.extend(builder.slice(rename[x.nonterminal], x.i, x.j))
        if not items:
            raise EmptyValue(f"{name} derives the empty word")
        rename[name] = builder.add(items, name)
    return builder.build([rename[cs.start]], alphabet=cs.alphabet)


class CompositionSystem:
    """An SLP whose right-hand sides may also contain :class:`Cut` items."""

    def __init__(self, productions: Mapping[str, Sequence[Union[Item, Cut]]], start: str,
                 alphabet: Optional[RankedAlphabet] = None):
        prods = {name: tuple(rhs) for name, rhs in productions.items()}
        if start not in prods:
            raise MissingProduction(start)
        _check_items(prods, alphabet, allow_cuts=True)
        self.productions = prods
        self.start = start
        self.alphabet = alphabet
        self.order = _topological_order(prods)
        lengths: Dict[str, int] = {}
        for name in self.order:
            total = 0
            for x in prods[name]:
                if isinstance(x, Symbol):
                    total += 1
                elif isinstance(x, str):
                    total += lengths[x]
                else:
                    n = lengths[x.nonterminal]
                    if not 1 <= x.i <= x.j <= n:
                        raise OutOfRange(f"cut {x.nonterminal}[{x.i}:{x.j}] outside 1..{n}")
                    total += x.j - x.i + 1
            lengths[name] = total
        self.lengths = lengths

    def terminals(self) -> set:
        return {x for rhs in self.productions.values() for x in rhs if isinstance(x, Symbol)}

    @property
    def length(self) -> int:
        return self.lengths[self.start]

    def to_slp(self) -> Slp:
        return eliminate_cuts(self)
