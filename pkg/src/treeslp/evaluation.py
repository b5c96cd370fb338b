"""Bottom-up evaluation of grammar-compressed trees.

The generic path, :func:`reduce_to_caterpillar`, processes a CNF grammar
bottom-up.  For every nonterminal it keeps the values of the complete
trees at the front of its word, plus the trailing fragment with each
finished subtree already replaced by its value.  Such a fragment is a
caterpillar: every node has at most one non-leaf child.  Whenever a
caterpillar is completed, a caterpillar oracle evaluates it.  Height,
Strahler number and Boolean evaluation supply oracles that work on the
compressed caterpillar directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import (
    DomainViolation,
    InvalidEmbedding,
    NotATree,
    NotCaterpillar,
    NotPrime,
    OutOfRange,
    ValueTooLarge,
    WrongAlphabet,
)
from .navigation import DfudsIndex
from .shapes import EMPTY, TreeShape, compute_shapes, is_tree, shape_combine, shape_of_symbol
from .slp import (
    GrammarBuilder,
    Item,
    Slp,
    Symbol,
    Transducer,
    apply_transducer,
    count_occurrences,
    expand,
    normalize_cnf,
    occurring_symbols,
    power_items,
    rank_occurrences,
    reverse_slp,
    select_occurrence,
    substring_slp,
)
from .trees import ExplicitTree


def _no_leaf(symbol: Symbol) -> int:
    raise WrongAlphabet(f"leaf {symbol} has no value under this interpretation")


def _any_value(value: int) -> bool:
    return True


@dataclass(frozen=True)
class Interpretation:
    """Integer semantics for ranked symbols.

    ``operation(symbol, args)`` handles symbols of positive rank and
    ``leaf(symbol)`` non-constant leaves; integer constants always denote
    themselves.  ``poly_bound = (alpha, beta)`` declares
    ``|value| <= (beta * size + sum of |leaf values|) ** alpha``.
    """

    name: str
    operation: Callable[[Symbol, Sequence[int]], int]
    leaf: Callable[[Symbol], int] = _no_leaf
    domain: Callable[[int], bool] = _any_value
    poly_bound: Optional[Tuple[int, int]] = None

    def apply(self, symbol: Symbol, args: Sequence[int] = ()) -> int:
        if symbol.rank == 0:
            return symbol.value if symbol.is_const else self.leaf(symbol)
        return self.operation(symbol, args)


def eval_brute(tree: Union[ExplicitTree, Sequence[Symbol]], interp: Interpretation) -> int:
    """Evaluate an explicit tree bottom-up."""
    word = tree.preorder if isinstance(tree, ExplicitTree) else tuple(tree)
    stack: List[int] = []
    for pos in range(len(word), 0, -1):
        sym = word[pos - 1]
        if sym.rank > len(stack):
            raise NotATree("word is not the preorder traversal of a tree")
        args = [stack.pop() for _ in range(sym.rank)]
        value = interp.apply(sym, args)
        if not interp.domain(value):
            raise DomainViolation(f"value {value} at node {pos} is outside the domain", pos)
        stack.append(value)
    if len(stack) != 1:
        raise NotATree("word is not the preorder traversal of a tree")
    return stack[0]


def within_poly_bound(tree: Union[ExplicitTree, Sequence[Symbol]], interp: Interpretation) -> bool:
    """Whether the declared polynomial bound holds for ``tree``."""
    if interp.poly_bound is None:
        raise ValueError(f"{interp.name} declares no polynomial bound")
    alpha, beta = interp.poly_bound
    word = tree.preorder if isinstance(tree, ExplicitTree) else tuple(tree)
    leaves = sum(abs(interp.apply(s)) for s in word if s.rank == 0)
    return abs(eval_brute(word, interp)) <= (beta * len(word) + leaves) ** alpha


# ---------------------------------------------------------------------------
# interpretations

def _height_op(symbol, args):
    return 1 + max(args)


def _strahler_op(symbol, args):
    top = max(args)
    return top + 1 if args.count(top) >= 2 else top


def _zero(symbol):
    return 0


HEIGHT = Interpretation("height", _height_op, _zero, lambda v: v >= 0, (1, 1))
STRAHLER = Interpretation("strahler", _strahler_op, _zero, lambda v: v >= 0, (1, 1))

AND_NAMES = frozenset({"and", "∧"})
OR_NAMES = frozenset({"or", "∨"})


def _bool_kind(symbol: Symbol):
    """'and', 'or', 0 or 1; anything else is outside the Boolean alphabet."""
    if symbol.rank == 2:
        if symbol.name in AND_NAMES:
            return "and"
        if symbol.name in OR_NAMES:
            return "or"
    elif symbol.rank == 0:
        if symbol.is_const and symbol.value in (0, 1):
            return symbol.value
        if symbol.name in ("0", "1"):
            return int(symbol.name)
    raise WrongAlphabet(f"symbol {symbol} of rank {symbol.rank} is not a Boolean operator or constant")


def _bool_op(symbol, args):
    kind = _bool_kind(symbol)
    return min(args) if kind == "and" else max(args)


BOOLEAN = Interpretation("bool", _bool_op, _bool_kind, lambda v: v in (0, 1), (1, 1))

PLUS_NAMES = frozenset({"+", "plus"})
TIMES_NAMES = frozenset({"*", "×", "times"})
MAX_NAMES = frozenset({"max"})


def plus_times_interp(p: Optional[int] = None) -> Interpretation:
    """Sum and product, optionally modulo ``p``."""

    def op(symbol, args):
        if symbol.rank != 2:
            raise WrongAlphabet(f"{symbol} must be binary")
        a, b = args
        if symbol.name in PLUS_NAMES:
            v = a + b
        elif symbol.name in TIMES_NAMES:
            v = a * b
        else:
            raise WrongAlphabet(f"{symbol} is neither + nor ×")
        return v % p if p else v

    if p:
        return Interpretation(f"plus-times mod {p}", op, domain=lambda v: 0 <= v < p, poly_bound=(1, p))
    return Interpretation("plus-times", op)


def _max_plus_op(symbol, args):
    if symbol.rank != 2:
        raise WrongAlphabet(f"{symbol} must be binary")
    if symbol.name in MAX_NAMES:
        return max(args)
    if symbol.name in PLUS_NAMES:
        return args[0] + args[1]
    raise WrongAlphabet(f"{symbol} is neither max nor +")


MAX_PLUS = Interpretation("max-plus", _max_plus_op, poly_bound=(1, 1))


# ---------------------------------------------------------------------------
# the generic reduction

GAP = Symbol("<gap>", 0)

CaterpillarOracle = Callable[[Slp], int]


@dataclass
class EvalPair:
    """Values of the leading complete trees and the evaluated trailing fragment."""

    values: Optional[Slp]
    fragment: Optional[Slp]


@dataclass
class _Reduction:
    builder: GrammarBuilder
    cnf: Slp
    pairs: Dict[str, Tuple[Optional[Item], Optional[Item]]] = field(default_factory=dict)
    oracle_calls: int = 0


def brute_caterpillar_oracle(interp: Interpretation, limit: int = 10**6) -> CaterpillarOracle:
    return lambda cat: eval_brute(expand(cat, limit), interp)


class _BuilderScan:
    """Shape and operator queries on builder items, memoised per rule."""

    def __init__(self, builder: GrammarBuilder):
        self.builder = builder
        self.shapes: Dict[str, TreeShape] = {}
        self.has_op: Dict[str, bool] = {}

    def _fill(self, name: str):
        rules, shapes = self.builder.rules, self.shapes
        stack = [name]
        while stack:
            top = stack[-1]
            if top in shapes:
                stack.pop()
                continue
            todo = [x for x in rules[top] if isinstance(x, str) and x not in shapes]
            if todo:
                stack.extend(todo)
                continue
            stack.pop()
            acc = EMPTY
            op = False
            for x in rules[top]:
                if isinstance(x, Symbol):
                    acc = shape_combine(acc, shape_of_symbol(x))
                    op = op or x.rank > 0
                else:
                    acc = shape_combine(acc, shapes[x])
                    op = op or self.has_op[x]
            shapes[top] = acc
            self.has_op[top] = op

    def shape(self, item: Item) -> TreeShape:
        if isinstance(item, Symbol):
            return shape_of_symbol(item)
        if item not in self.shapes:
            self._fill(item)
        return self.shapes[item]

    def operator_inside(self, item: Item) -> bool:
        if isinstance(item, Symbol):
            return item.rank > 0
        if item not in self.has_op:
            self._fill(item)
        return self.has_op[item]

    def shape_of_items(self, items: Iterable[Item]) -> TreeShape:
        acc = EMPTY
        for x in items:
            acc = shape_combine(acc, self.shape(x))
        return acc

    def gap_free_start(self, item: Item) -> int:
        """Smallest position whose suffix has no gaps (the item itself must have some)."""
        rules = self.builder.rules
        pos = self.builder.length_of(item) + 1
        acc = EMPTY
        while True:
            for x in reversed(rules[item]):
                joined = shape_combine(self.shape(x), acc)
                if joined.gaps:
                    break
                acc = joined
                pos -= self.builder.length_of(x)
            if isinstance(x, Symbol):
                return pos
            item = x

    def first_operator(self, item: Item, start: int) -> Optional[int]:
        """Position of the first symbol of positive rank at or after ``start``."""
        pos = start
        for x in self.builder.suffix(item, start):
            if not self.operator_inside(x):
                pos += self.builder.length_of(x)
                continue
            while not isinstance(x, Symbol):
                for y in self.builder.rules[x]:
                    if self.operator_inside(y):
                        x = y
                        break
                    pos += self.builder.length_of(y)
            return pos
        return None


def _run_reduction(slp: Slp, interp: Interpretation, oracle: CaterpillarOracle) -> _Reduction:
    if not is_tree(slp):
        raise NotATree("grammar does not derive a tree")
    cnf = normalize_cnf(slp)
    shapes = compute_shapes(cnf)
    builder = GrammarBuilder(cnf, reserved={GAP.name})
    builder.alphabet = None  # intermediate words hold integer constants
    run = _Reduction(builder, cnf)
    pairs = run.pairs
    scan = _BuilderScan(builder)

    def evaluate(items: List[Item]) -> Symbol:
        run.oracle_calls += 1
        value = oracle(builder.build(items))
        if not interp.domain(value):
            raise DomainViolation(f"caterpillar value {value} is outside the domain")
        return Symbol.const(value)

    for name in cnf.order:
        rhs = cnf.productions[name]
        if len(rhs) == 1:
            sym = rhs[0]
            if sym.rank == 0:
                value = interp.apply(sym)
                if not interp.domain(value):
                    raise DomainViolation(f"leaf {sym} has value {value} outside the domain")
                pairs[name] = (Symbol.const(value), None)
            else:
                pairs[name] = (None, sym)
            continue
        b, c = rhs
        (b1, b2), (c1, c2) = shapes[b], shapes[c]
        (bv, bf), (cv, cf) = pairs[b], pairs[c]
        if b2 <= c1:
            values = [bv] if bv is not None else []
            if b2 > 0:
                values.append(evaluate([bf] + builder.prefix(cv, b2)))
                values += builder.suffix(cv, b2 + 1)
            elif cv is not None:
                values.append(cv)
            pairs[name] = (builder.wrap(values), cf)
            continue
        tail = [cf] if cf is not None else []
        if c1 == 0:
            pairs[name] = (bv, builder.wrap([bf] + tail))
            continue
        # filling the first c1 gaps may complete the lowest spine subtree;
        # it starts at the first operator of the longest gap-free suffix
        joined = builder.wrap([bf, cv])
        settled = scan.gap_free_start(joined)
        lowest = scan.first_operator(joined, settled)
        if lowest is None:
            pairs[name] = (bv, builder.wrap([joined] + tail))
            continue
        # only constants follow the completed subtree
        trailing = scan.shape_of_items(builder.suffix(joined, lowest)).full_trees - 1
        end = builder.length_of(joined) - trailing
        value = evaluate(builder.slice(joined, lowest, end))
        frag = builder.prefix(joined, lowest - 1) + [value] + builder.suffix(joined, end + 1) + tail
        pairs[name] = (bv, builder.wrap(frag))
    return run


def reduce_to_caterpillar(slp: Slp, interp: Interpretation,
                          caterpillar_eval: Optional[CaterpillarOracle] = None) -> int:
    """Value of the tree derived by ``slp``, using an oracle for caterpillars."""
    oracle = caterpillar_eval or brute_caterpillar_oracle(interp)
    run = _run_reduction(slp, interp, oracle)
    values, _ = run.pairs[run.cnf.start]
    return values.value if isinstance(values, Symbol) else run.builder.build([values]).symbol_at(1).value


def eval_pairs(slp: Slp, interp: Interpretation,
               caterpillar_eval: Optional[CaterpillarOracle] = None) -> Dict[str, EvalPair]:
    """The intermediate pairs of :func:`reduce_to_caterpillar`, keyed by CNF nonterminal."""
    oracle = caterpillar_eval or brute_caterpillar_oracle(interp)
    run = _run_reduction(slp, interp, oracle)
    out = {}
    for name, (values, frag) in run.pairs.items():
        out[name] = EvalPair(run.builder.build([values]) if values is not None else None,
                             run.builder.build([frag]) if frag is not None else None)
    return out


def evaluated_word(word: Sequence[Symbol], interp: Interpretation) -> List[Symbol]:
    """Reference for one pair: values of the leading trees, then the fragment
    with every maximal complete subtree replaced by its value."""
    word = list(word)
    out: List[Symbol] = []
    # pending[i] = [index into out, missing children] for open nodes
    pending: List[List[int]] = []
    for sym in word:
        if sym.rank > 0:
            out.append(sym)
            pending.append([len(out) - 1, sym.rank])
            continue
        out.append(Symbol.const(interp.apply(sym)))
        while pending:
            pending[-1][1] -= 1
            if pending[-1][1] > 0:
                break
            start, _ = pending.pop()
            value = eval_brute(out[start:], interp)
            del out[start:]
            out.append(Symbol.const(value))
    return out


# ---------------------------------------------------------------------------
# caterpillar oracles

def _leaf_groups(cat: Slp, leaf_value: Callable[[Symbol], int]) -> Dict[int, set]:
    groups: Dict[int, set] = {}
    for sym in occurring_symbols(cat):
        if sym.rank == 0:
            groups.setdefault(leaf_value(sym), set()).add(sym)
    return groups


def _spine(cat: Slp):
    ops = {s for s in occurring_symbols(cat) if s.rank > 0}
    m = count_occurrences(cat, ops)
    last = select_occurrence(cat, ops, m) if m else 0
    return ops, m, last


def _deepest_parents(cat: Slp, index: DfudsIndex, ops, syms, last: int, per_side: int) -> List[int]:
    """Spine depths of the parents of up to ``per_side`` occurrences of ``syms``
    on each side of the last spine node, nearest first."""
    before = rank_occurrences(cat, syms, last)
    total = count_occurrences(cat, syms)
    positions = [select_occurrence(cat, syms, k) for k in range(before, max(0, before - per_side), -1)]
    positions += [select_occurrence(cat, syms, k) for k in range(before + 1, min(total, before + per_side) + 1)]
    return [rank_occurrences(cat, ops, index.parent(p)) for p in positions]


def _const_or_zero(sym: Symbol) -> int:
    return sym.value if sym.is_const else 0


def caterpillar_height(cat: Slp) -> int:
    """Height of a caterpillar whose leaves carry subtree heights.

    A leaf with value ``d`` below the ``j``-th spine node contributes
    ``d + j``; only the deepest leaf for each value matters.
    """
    ops, m, last = _spine(cat)
    groups = _leaf_groups(cat, _const_or_zero)
    if m == 0:
        return next(iter(groups))
    index = DfudsIndex(cat)
    return max(d + max(_deepest_parents(cat, index, ops, syms, last, 1)) for d, syms in groups.items())


def caterpillar_strahler(cat: Slp) -> int:
    """Strahler number of a caterpillar whose leaves carry Strahler numbers.

    Beyond the two deepest leaves carrying a value ``d``, further ``d``
    leaves can no longer change the result, so only those are simulated.
    """
    ops, m, last = _spine(cat)
    groups = _leaf_groups(cat, _const_or_zero)
    if m == 0:
        return next(iter(groups))
    index = DfudsIndex(cat)
    events: Dict[int, List[int]] = {}
    for d, syms in groups.items():
        for depth in sorted(_deepest_parents(cat, index, ops, syms, last, 2), reverse=True)[:2]:
            events.setdefault(depth, []).append(d)
    value = None
    for depth in sorted(events, reverse=True):
        vals = events[depth] + ([value] if value is not None else [])
        top = max(vals)
        value = top + 1 if vals.count(top) >= 2 else top
    return value


_MARK_ABSORB = Symbol("<absorb>", 0)
_MARK_NONE = Symbol("<none>", 0)
_WANT = {0: Symbol("<w0>", 0), 1: Symbol("<w1>", 0)}
_NEUTRAL_LEAF = {"and": 1, "or": 0}


class _Fingerprint:
    """Karp-Rabin fingerprints of prefixes of a compressed word."""

    MOD = (1 << 61) - 1
    BASE = 1_000_003

    def __init__(self, slp: Slp, code: Mapping[Symbol, int]):
        self.slp = slp
        self.code = code
        self.hash: Dict[str, int] = {}
        self.power: Dict[str, int] = {}
        for name in slp.order:
            h, pw = 0, 1
            for x in slp.productions[name]:
                xh, xp = self._item(x)
                h = (h * xp + xh) % self.MOD
                pw = pw * xp % self.MOD
            self.hash[name], self.power[name] = h, pw

    def _item(self, x) -> Tuple[int, int]:
        if isinstance(x, Symbol):
            return self.code[x], self.BASE
        return self.hash[x], self.power[x]

    def prefix(self, length: int) -> int:
        slp, h = self.slp, 0
        item: Item = slp.start
        while length:
            if isinstance(item, Symbol):
                return (h * self.BASE + self.code[item]) % self.MOD
            if length == slp.lengths[item]:
                return (h * self.power[item] + self.hash[item]) % self.MOD
            idx, before = slp.locate(item, length)
            for x in slp.productions[item][:idx]:
                xh, xp = self._item(x)
                h = (h * xp + xh) % self.MOD
            item, length = slp.productions[item][idx], length - before
        return h


def _common_prefix(x: Slp, y: Slp, code: Mapping[Symbol, int]) -> int:
    fx, fy = _Fingerprint(x, code), _Fingerprint(y, code)
    lo, hi = 0, min(x.length, y.length)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if fx.prefix(mid) == fy.prefix(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def caterpillar_bool(cat: Slp) -> int:
    """Value of a Boolean caterpillar.

    Going down the spine, an ``and`` node with a 0 leaf or an ``or`` node
    with a 1 leaf fixes the value; all other nodes pass the lower value
    through.  Leaves sitting left of the spine are found by a marking
    transducer; leaves right of the spine appear in reverse order after
    the last spine node and are matched against the spine by a binary
    search on common-prefix fingerprints.
    """
    symbols = occurring_symbols(cat)
    kind = {s: _bool_kind(s) for s in symbols}
    ops = {s for s in symbols if s.rank > 0}
    m = count_occurrences(cat, ops)
    if m == 0:
        return kind[cat.symbol_at(1)]
    last = select_occurrence(cat, ops, m)
    if last + 2 > cat.length or kind[cat.symbol_at(last + 1)] not in (0, 1) \
            or kind[cat.symbol_at(last + 2)] not in (0, 1):
        raise NotCaterpillar("the lowest operator must have two leaf children")

    # mark[p] describes the pair (t[p], t[p+1]) inside t[1:last]
    transitions = {}
    for s in symbols:
        transitions[("start", s)] = (kind[s], ())
        for prev in ("and", "or", 0, 1):
            cur = kind[s]
            if prev in ("and", "or") and cur in ("and", "or"):
                out = _WANT[_NEUTRAL_LEAF[prev]]
            elif prev in ("and", "or") and cur == 1 - _NEUTRAL_LEAF[prev]:
                out = _MARK_ABSORB
            else:
                out = _MARK_NONE
            transitions[(prev, s)] = (cur, (out,))
    final = {k: (_MARK_NONE,) for k in ("and", "or", 0, 1)}
    marks = apply_transducer(substring_slp(cat, 1, last), Transducer(transitions, "start", final))

    hits = []
    if count_occurrences(marks, _MARK_ABSORB):
        hits.append(select_occurrence(marks, _MARK_ABSORB, 1))
    wanted = set(_WANT.values())
    n_right = count_occurrences(marks, wanted)
    if last + 2 + n_right != cat.length:
        raise NotCaterpillar("spine nodes and right leaves do not pair up")
    if n_right:
        spine = apply_transducer(marks, Transducer.homomorphism(
            {_MARK_NONE: (), _MARK_ABSORB: (), _WANT[0]: (_WANT[0],), _WANT[1]: (_WANT[1],)}))
        leaf_map = {s: (_WANT[kind[s]],) for s in symbols if s.rank == 0}
        right = reverse_slp(apply_transducer(substring_slp(cat, last + 3, cat.length),
                                             Transducer.homomorphism(leaf_map)))
        common = _common_prefix(spine, right, {_WANT[0]: 1, _WANT[1]: 2})
        if common < n_right:
            hits.append(select_occurrence(marks, wanted, common + 1))
    if hits:
        return 0 if kind[cat.symbol_at(min(hits))] == "and" else 1
    a, b = kind[cat.symbol_at(last + 1)], kind[cat.symbol_at(last + 2)]
    return min(a, b) if kind[cat.symbol_at(last)] == "and" else max(a, b)


# ---------------------------------------------------------------------------
# public evaluators

def _plain_leaves(slp: Slp) -> Slp:
    """Replace integer-constant leaves, which count as ordinary leaves for shape statistics."""
    consts = {s for s in occurring_symbols(slp) if s.is_const}
    if not consts:
        return slp
    leaf = Symbol("<leaf>", 0)
    mapping = {s: ((leaf,) if s in consts else (s,)) for s in occurring_symbols(slp)}
    return apply_transducer(slp, Transducer.homomorphism(mapping))


def height(slp: Slp) -> int:
    """Height of the derived tree (edges on a longest root-leaf path)."""
    if not is_tree(slp):
        raise NotATree("grammar does not derive a tree")
    return reduce_to_caterpillar(_plain_leaves(slp), HEIGHT, caterpillar_height)


def node_depth(slp: Slp, i: int) -> int:
    """Depth of preorder node ``i``.

    The subtree at ``i`` is replaced by a unary chain of length ``N``
    ending in a leaf; that chain then realises the height, which exceeds
    the depth of ``i`` by exactly ``N``.
    """
    if not is_tree(slp):
        raise NotATree("grammar does not derive a tree")
    n = slp.length
    if not 1 <= i <= n:
        raise OutOfRange(f"node {i} outside 1..{n}")
    unary, leaf = Symbol("<chain>", 1), Symbol("<end>", 0)
    builder = GrammarBuilder(slp, reserved={unary.name, leaf.name})
    builder.alphabet = None
    end = i + DfudsIndex(slp).subtree_size(i) - 1
    items = (builder.prefix(slp.start, i - 1) + power_items(builder, unary, n) + [leaf]
             + builder.suffix(slp.start, end + 1))
    return height(builder.build(items)) - n


def strahler(slp: Slp) -> int:
    if not is_tree(slp):
        raise NotATree("grammar does not derive a tree")
    return reduce_to_caterpillar(_plain_leaves(slp), STRAHLER, caterpillar_strahler)


def eval_bool(slp: Slp) -> int:
    """Truth value of a tree over binary and/or and the constants 0, 1."""
    for sym in occurring_symbols(slp):
        _bool_kind(sym)
    if not is_tree(slp):
        raise NotATree("grammar does not derive a tree")
    return reduce_to_caterpillar(slp, BOOLEAN, caterpillar_bool)


def validate_embedding(embedding: Mapping[str, Sequence[int]]) -> int:
    """Check that the bit vectors form a sublattice of a Boolean power; return their width."""
    if not embedding:
        raise InvalidEmbedding("the lattice has no elements")
    vectors = {name: tuple(int(b) for b in bits) for name, bits in embedding.items()}
    widths = {len(v) for v in vectors.values()}
    if len(widths) != 1 or 0 in widths:
        raise InvalidEmbedding("all elements need bit vectors of one positive length")
    if any(b not in (0, 1) for v in vectors.values() for b in v):
        raise InvalidEmbedding("bit vectors may only contain 0 and 1")
    image = set(vectors.values())
    if len(image) != len(vectors):
        raise InvalidEmbedding("two elements share a bit vector")
    for u in image:
        for v in image:
            if tuple(a & b for a, b in zip(u, v)) not in image or tuple(a | b for a, b in zip(u, v)) not in image:
                raise InvalidEmbedding(f"{u} and {v} have a meet or join outside the lattice")
    return widths.pop()


def _element_name(sym: Symbol) -> str:
    return str(sym.value) if sym.is_const else sym.name


def eval_lattice(slp: Slp, embedding: Mapping[str, Sequence[int]],
                 meet: str = "meet", join: str = "join") -> str:
    """Evaluate meets and joins of lattice elements, one bit position at a time."""
    width = validate_embedding(embedding)
    vectors = {name: tuple(int(b) for b in bits) for name, bits in embedding.items()}
    by_vector = {v: name for name, v in vectors.items()}
    symbols = occurring_symbols(slp)
    for sym in symbols:
        ok = (sym.rank == 2 and sym.name in (meet, join)) or (sym.rank == 0 and _element_name(sym) in vectors)
        if not ok:
            raise WrongAlphabet(f"symbol {sym} is neither {meet}, {join} nor a lattice element")
    if not is_tree(slp):
        raise NotATree("grammar does not derive a tree")
    and_, or_ = Symbol("and", 2), Symbol("or", 2)
    bits = []
    for c in range(width):
        mapping = {}
        for sym in symbols:
            if sym.rank == 2:
                mapping[sym] = (and_ if sym.name == meet else or_,)
            else:
                mapping[sym] = (Symbol.const(vectors[_element_name(sym)][c]),)
        bits.append(eval_bool(apply_transducer(slp, Transducer.homomorphism(mapping))))
    return by_vector[tuple(bits)]


def lattice_interp(embedding: Mapping[str, Sequence[int]], meet: str = "meet",
                   join: str = "join") -> Tuple[Interpretation, Dict[str, int]]:
    """Brute-force semantics for lattice trees: elements are coded as integers.

    Returns the interpretation and the element-to-code map; codes read the
    bit vector as a binary number.
    """
    validate_embedding(embedding)
    codes = {name: int("".join(str(int(b)) for b in bits), 2) for name, bits in embedding.items()}

    def op(symbol, args):
        if symbol.name == meet:
            return args[0] & args[1]
        if symbol.name == join:
            return args[0] | args[1]
        raise WrongAlphabet(f"{symbol} is neither {meet} nor {join}")

    def leaf(symbol):
        try:
            return codes[_element_name(symbol)]
        except KeyError:
            raise WrongAlphabet(f"{symbol} is not a lattice element") from None

    return Interpretation("lattice", op, leaf), codes


# ---------------------------------------------------------------------------
# caterpillar matrices

MATRIX_LIMIT = 256  # explicit n x n rows
OPERAND_LIMIT = 10**6  # operands materialised for the closed-form sums


class _MinusInfinity:
    """Absorbing bottom element for max-plus rows; never used in arithmetic."""

    def __repr__(self):
        return "-inf"


MINUS_INFINITY = _MinusInfinity()


class Caterpillar:
    """Operators and operands of a binary caterpillar, read off the grammar.

    Spine operators are numbered 1..m top-down; operand ``j <= m`` is the
    leaf child of operator ``j``, and the lowest operator has operands
    ``m`` and ``m + 1``.
    """

    def __init__(self, slp: Slp):
        if not is_tree(slp):
            raise NotATree("grammar does not derive a tree")
        self.slp = slp
        self.ops = {s for s in occurring_symbols(slp) if s.rank > 0}
        if any(s.rank != 2 for s in self.ops):
            raise NotCaterpillar("operators must be binary")
        self.m = count_occurrences(slp, self.ops)
        self.index = DfudsIndex(slp) if self.m else None

    def op_position(self, i: int) -> int:
        if not 1 <= i <= self.m:
            raise OutOfRange(f"operator {i} outside 1..{self.m}")
        return select_occurrence(self.slp, self.ops, i)

    def op(self, i: int) -> Symbol:
        return self.slp.symbol_at(self.op_position(i))

    def operand(self, j: int) -> int:
        if not 1 <= j <= self.m + 1:
            raise OutOfRange(f"operand {j} outside 1..{self.m + 1}")
        if self.m == 0:
            return self._value(self.slp.symbol_at(1))
        node = self.op_position(min(j, self.m))
        kids = [self.index.kth_child(node, 1), self.index.kth_child(node, 2)]
        leaves = [k for k in kids if self.index.label_at(k).rank == 0]
        if j < self.m:
            if len(leaves) != 1:
                raise NotCaterpillar(f"operator {j} needs exactly one leaf child")
            return self._value(self.index.label_at(leaves[0]))
        if len(leaves) != 2:
            raise NotCaterpillar("the lowest operator needs two leaf children")
        return self._value(self.index.label_at(kids[j - self.m]))

    @staticmethod
    def _value(sym: Symbol) -> int:
        if not sym.is_const:
            raise WrongAlphabet(f"operand {sym} is not an integer")
        return sym.value

    def lists(self, limit: int = OPERAND_LIMIT) -> Tuple[List[str], List[int]]:
        """Operator names and operand values, read off one expansion."""
        if self.m + 1 > limit:
            raise ValueTooLarge(f"{self.m + 1} operands exceed the limit of {limit}")
        if self.m == 0:
            return [], [self._value(self.slp.symbol_at(1))]
        ops: List[str] = []
        operands: List[Optional[int]] = [None] * (self.m + 1)
        lowest = self.m - 1
        stack: List[List[int]] = []  # [operator index, children seen so far]
        for sym in expand(self.slp, 2 * limit + 1):
            if sym.rank:
                if stack:
                    stack[-1][1] += 1
                ops.append(sym.name)
                stack.append([len(ops) - 1, 0])
                continue
            parent = stack[-1]
            parent[1] += 1
            idx = parent[0]
            slot = idx + parent[1] - 1 if idx == lowest else idx
            if operands[slot] is not None:
                raise NotCaterpillar(f"operator {idx + 1} needs exactly one leaf child")
            operands[slot] = self._value(sym)
            while stack and stack[-1][1] == 2:
                stack.pop()
        if None in operands:
            raise NotCaterpillar("every operator above the lowest needs a leaf child")
        return ops, operands


def caterpillar_op(slp: Slp, i: int) -> Symbol:
    return Caterpillar(slp).op(i)


def caterpillar_operand(slp: Slp, j: int) -> int:
    return Caterpillar(slp).operand(j)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for q in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d, s = d // 2, s + 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class _Matrix:
    def __init__(self, slp: Slp, limit: int = OPERAND_LIMIT):
        self.caterpillar = Caterpillar(slp)
        self.limit = limit
        self._lists = None

    @property
    def size(self) -> int:
        return self.caterpillar.m + 1

    def _data(self):
        if self._lists is None:
            self._lists = self.caterpillar.lists(self.limit)
        return self._lists

    def rows(self) -> List[List]:
        if self.size > MATRIX_LIMIT:
            raise ValueTooLarge(f"a {self.size}x{self.size} matrix exceeds the limit of {MATRIX_LIMIT}")
        return [[self.entry(i, j) for j in range(1, self.size + 1)] for i in range(1, self.size + 1)]


class PlusTimesMatrix(_Matrix):
    """Matrix ``x`` with ``sum_i prod_j x[i][j]`` equal to the caterpillar's value mod ``p``."""

    def __init__(self, slp: Slp, p: int, limit: int = OPERAND_LIMIT):
        if not is_prime(p):
            raise NotPrime(f"{p} is not prime")
        super().__init__(slp, limit)
        self.p = p
        for s in self.caterpillar.ops:
            if s.name not in PLUS_NAMES | TIMES_NAMES:
                raise WrongAlphabet(f"{s} is neither + nor ×")

    def entry(self, i: int, j: int) -> int:
        n = self.size
        if not (1 <= i <= n and 1 <= j <= n):
            raise OutOfRange(f"entry ({i},{j}) outside the {n}x{n} matrix")
        cat = self.caterpillar
        if i == j == n:
            return cat.operand(n) % self.p
        if i <= j:
            plus = cat.op(i).name in PLUS_NAMES
            if i < j:
                return 1 if plus else 0
            return cat.operand(j) % self.p if plus else 0
        return 1 if cat.op(j).name in PLUS_NAMES else cat.operand(j) % self.p

    def combined(self) -> int:
        # row i is zero beyond a × operator; otherwise it is the running
        # product of the rows above times operand i
        ops, operands = self._data()
        p, n = self.p, self.size
        total, prefix = 0, 1
        for i in range(1, n):
            plus = ops[i - 1] in PLUS_NAMES
            if plus:
                total = (total + prefix * operands[i - 1]) % p
            else:
                prefix = prefix * operands[i - 1] % p
        return (total + prefix * operands[n - 1]) % p

    def check(self, limit: int = 10**6) -> bool:
        exact = eval_brute(expand(self.caterpillar.slp, limit), plus_times_interp())
        return self.combined() == exact % self.p


class MaxPlusMatrix(_Matrix):
    """Matrix ``x`` with ``max_i sum_j x[i][j]`` equal to the caterpillar's value.

    Rows containing :data:`MINUS_INFINITY` are left out of the maximum.
    """

    def __init__(self, slp: Slp, limit: int = OPERAND_LIMIT):
        super().__init__(slp, limit)
        for s in self.caterpillar.ops:
            if s.name not in MAX_NAMES | PLUS_NAMES:
                raise WrongAlphabet(f"{s} is neither max nor +")

    def entry(self, i: int, j: int):
        n = self.size
        if not (1 <= i <= n and 1 <= j <= n):
            raise OutOfRange(f"entry ({i},{j}) outside the {n}x{n} matrix")
        cat = self.caterpillar
        if i == j == n:
            return cat.operand(n)
        if i < j:
            return 0
        if i == j:
            return cat.operand(i) if cat.op(i).name in MAX_NAMES else MINUS_INFINITY
        return 0 if cat.op(j).name in MAX_NAMES else cat.operand(j)

    def combined(self) -> int:
        ops, operands = self._data()
        n = self.size
        best = None
        shift = 0  # sum of operands of + operators above row i
        for i in range(1, n + 1):
            if i == n:
                row = shift + operands[n - 1]
            elif ops[i - 1] in MAX_NAMES:
                row = shift + operands[i - 1]
            else:
                row = None
            if row is not None and (best is None or row > best):
                best = row
            if i < n and ops[i - 1] in PLUS_NAMES:
                shift += operands[i - 1]
        return best

    def check(self, limit: int = 10**6) -> bool:
        return self.combined() == eval_brute(expand(self.caterpillar.slp, limit), MAX_PLUS)


def caterpillar_matrix_plus_times(slp: Slp, p: int) -> PlusTimesMatrix:
    return PlusTimesMatrix(slp, p)


def caterpillar_matrix_max_plus(slp: Slp) -> MaxPlusMatrix:
    return MaxPlusMatrix(slp)


def eval_plus_times_mod(slp: Slp, p: int) -> int:
    """Sum/product tree modulo a prime, via caterpillar matrices."""
    if not is_prime(p):
        raise NotPrime(f"{p} is not prime")
    # operands are residues; bring constants outside 0..p-1 into range first
    outside = {s for s in occurring_symbols(slp) if s.is_const and not 0 <= s.value < p}
    if outside:
        mapping = {s: (Symbol.const(s.value % p) if s in outside else s,) for s in occurring_symbols(slp)}
        slp = apply_transducer(slp, Transducer.homomorphism(mapping))
    return reduce_to_caterpillar(slp, plus_times_interp(p), lambda cat: PlusTimesMatrix(cat, p).combined())


def eval_max_plus(slp: Slp) -> int:
    return reduce_to_caterpillar(slp, MAX_PLUS, lambda cat: MaxPlusMatrix(cat).combined())
