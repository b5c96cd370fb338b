"""Tree straight-line programs and conversions to and from traversal SLPs.

A rule body is stored in preorder: a sequence of terminal :class:`Symbol`
items, nonterminal names (``str``) whose arity is the rank of their rule,
and :class:`~treeslp.trees.Parameter` leaves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

from .errors import (
    CyclicGrammar,
    EmptyProduction,
    ExpansionTooLarge,
    NotATree,
    ParameterRepeated,
    RankMismatch,
    UnknownNonterminal,
)
from .shapes import compute_shapes, is_tree
from .slp import GrammarBuilder, Slp, Symbol, _Names, normalize_cnf
from .trees import Parameter, parse_term

TslpItem = Union[Symbol, str, Parameter]


class TslpRule(NamedTuple):
    rank: int
    body: Tuple[TslpItem, ...]


@dataclass(frozen=True)
class TslpReport:
    ok: bool
    nonterminals: int
    size: int
    max_rank: int


class Tslp:
    """A linear tree grammar: ``rules[A] = TslpRule(rank, body)``."""

    def __init__(self, rules: Mapping[str, Union[TslpRule, Tuple[int, Sequence[TslpItem]]]],
                 start: str, check: bool = True):
        self.rules: Dict[str, TslpRule] = {
            name: TslpRule(int(rule[0]), tuple(rule[1])) for name, rule in rules.items()
        }
        self.start = start
        self._order: Optional[List[str]] = None
        if check:
            validate_tslp(self)

    @classmethod
    def from_terms(cls, rules: Mapping[str, str], start: str = "S") -> "Tslp":
        """Build from term syntax, e.g. ``{"S": "f(A(a), A(b))", "A(x1)": "g(x1, x1)"}``.

        Keys may carry a parameter list ``A(x1,x2)``; a call ``B(t1,t2)`` in a
        body must pass exactly as many arguments as ``B`` has parameters.
        """
        heads: Dict[str, int] = {}
        for key in rules:
            name, _, params = key.partition("(")
            heads[name.strip()] = len([p for p in params.rstrip(")").split(",") if p.strip()])
        out: Dict[str, TslpRule] = {}
        for key, text in rules.items():
            name = key.partition("(")[0].strip()
            body: List[TslpItem] = []
            for sym in parse_term(text):
                if sym.name in heads:
                    if sym.rank != heads[sym.name]:
                        raise RankMismatch(
                            f"{sym.name} has rank {heads[sym.name]} but is applied to {sym.rank} arguments",
                            name)
                    body.append(sym.name)
                elif sym.rank == 0 and not sym.is_const and sym.name[:1] == "x" and sym.name[1:].isdigit():
                    body.append(Parameter(int(sym.name[1:])))
                else:
                    body.append(sym)
            out[name] = TslpRule(heads[name], tuple(body))
        return cls(out, start)

    def rank_of(self, item: TslpItem) -> int:
        if isinstance(item, str):
            return self.rules[item].rank
        return item.rank

    @property
    def size(self) -> int:
        """Number of non-parameter nodes over all right-hand sides."""
        return sum(1 for rule in self.rules.values() for x in rule.body if not isinstance(x, Parameter))

    @property
    def max_terminal_rank(self) -> int:
        return max((x.rank for rule in self.rules.values() for x in rule.body if isinstance(x, Symbol)),
                   default=0)

    def order(self) -> List[str]:
        """Nonterminals with every rule after the rules it references."""
        if self._order is None:
            self._order = _tslp_order(self.rules)
        return self._order

    def reachable(self) -> List[str]:
        seen = {self.start}
        stack = [self.start]
        while stack:
            for x in self.rules[stack.pop()].body:
                if isinstance(x, str) and x not in seen:
                    seen.add(x)
                    stack.append(x)
        return [n for n in self.order() if n in seen]

    def __eq__(self, other):
        return isinstance(other, Tslp) and self.start == other.start and self.rules == other.rules

    def __repr__(self):
        return f"Tslp({len(self.rules)} rules, size {self.size}, start {self.start})"


def _tslp_order(rules: Mapping[str, TslpRule]) -> List[str]:
    state: Dict[str, int] = {}
    order: List[str] = []
    for root in rules:
        if root in state:
            continue
        state[root] = 1
        stack = [(root, iter(rules[root].body))]
        while stack:
            name, it = stack[-1]
            for x in it:
                if isinstance(x, str):
                    if x not in rules:
                        raise UnknownNonterminal(x)
                    mark = state.get(x)
                    if mark == 1:
                        raise CyclicGrammar(x)
                    if mark is None:
                        state[x] = 1
                        stack.append((x, iter(rules[x].body)))
                        break
            else:
                stack.pop()
                state[name] = 2
                order.append(name)
    return order


def validate_tslp(t: Tslp) -> TslpReport:
    """Check references, acyclicity, parameter linearity and ranks; raise on failure."""
    rules = t.rules
    if t.start not in rules:
        raise UnknownNonterminal(t.start)
    for name, rule in rules.items():
        if not rule.body:
            raise EmptyProduction(name)
        seen = set()
        need = 1
        for x in rule.body:
            if need == 0:
                raise RankMismatch(f"body of {name} has items after a complete tree", name)
            if isinstance(x, Parameter):
                if not 1 <= x.index <= rule.rank:
                    raise RankMismatch(f"{x} used in {name}, which has rank {rule.rank}", name)
                if x in seen:
                    raise ParameterRepeated(f"{x} occurs twice in the body of {name}", name)
                seen.add(x)
                r = 0
            elif isinstance(x, str):
                if x not in rules:
                    raise UnknownNonterminal(x)
                r = rules[x].rank
            elif isinstance(x, Symbol):
                r = x.rank
            else:
                raise TypeError(f"unsupported body item {x!r}")
            need += r - 1
        if need != 0:
            raise RankMismatch(f"body of {name} is not a single tree", name)
    if rules[t.start].rank != 0:
        raise RankMismatch(f"start {t.start} must have rank 0", t.start)
    t._order = _tslp_order(rules)
    return TslpReport(True, len(rules), t.size, max((r.rank for r in rules.values()), default=0))


def _expanded_sizes(t: Tslp) -> Dict[str, int]:
    sizes: Dict[str, int] = {}
    for name in t.order():
        sizes[name] = sum(sizes[x] if isinstance(x, str) else (0 if isinstance(x, Parameter) else 1)
                          for x in t.rules[name].body)
    return sizes


def tslp_tree_size(t: Tslp) -> int:
    """Node count of the derived tree, computed without expansion."""
    return _expanded_sizes(t)[t.start]


def tslp_expand(t: Tslp, limit: int = 10**6) -> List[Symbol]:
    """Preorder word of the derived tree, by explicit parameter substitution."""
    sizes = _expanded_sizes(t)
    if sizes[t.start] > limit:
        raise ExpansionTooLarge(sizes[t.start], limit)
    values: Dict[str, List] = {}
    for name in t.reachable():
        body = t.rules[name].body
        # evaluate the preorder body right to left, as in reverse Polish notation
        stack: List[List] = []
        for x in reversed(body):
            if isinstance(x, Parameter):
                stack.append([x])
                continue
            r = t.rank_of(x)
            args = [stack.pop() for _ in range(r)]
            if isinstance(x, Symbol):
                word = [x]
                for a in args:
                    word.extend(a)
            else:
                word = []
                for y in values[x]:
                    word.extend(args[y.index - 1] if isinstance(y, Parameter) else (y,))
            stack.append(word)
        values[name] = stack[0]
    return values[t.start]


def tslp_to_slp(t: Tslp) -> Slp:
    """SLP for the preorder traversal of the tree derived by ``t``.

    A rank-n nonterminal ``A`` becomes pieces ``A_0 ... A_k`` such that
    ``val(A) = A_0 x_{p1} A_1 ... x_{pk} A_k``; empty pieces are omitted.
    """
    taken = {s.name for rule in t.rules.values() for s in rule.body if isinstance(s, Symbol)}
    builder = GrammarBuilder(reserved=taken)
    pieces: Dict[str, List[Optional[Union[str, Symbol]]]] = {}
    perms: Dict[str, List[int]] = {}
    for name in t.reachable():
        stack: List[List] = []
        for x in reversed(t.rules[name].body):
            if isinstance(x, Parameter):
                stack.append([x])
                continue
            r = t.rank_of(x)
            args = [stack.pop() for _ in range(r)]
            if isinstance(x, Symbol):
                tokens = [x]
                for a in args:
                    tokens.extend(a)
            else:
                own = pieces[x]
                tokens = [own[0]] if own[0] is not None else []
                for k, p in enumerate(perms[x]):
                    tokens.extend(args[p - 1])
                    if own[k + 1] is not None:
                        tokens.append(own[k + 1])
            stack.append(tokens)
        segments: List[List] = [[]]
        order: List[int] = []
        for tok in stack[0]:
            if isinstance(tok, Parameter):
                order.append(tok.index)
                segments.append([])
            else:
                segments[-1].append(tok)
        own = []
        for i, seg in enumerate(segments):
            if not seg:
                own.append(None)
            elif len(seg) == 1:
                own.append(seg[0])
            else:
                wanted = f"{name}_{i}"
                own.append(builder.add(seg, None if wanted in builder.names.taken else wanted))
        pieces[name] = own
        perms[name] = order
    return builder.build([pieces[t.start][0]])


def max_full_trees_in_factor(slp: Slp) -> int:
    """Largest number of complete trees at the front of any nonterminal's value."""
    if not is_tree(slp):
        raise NotATree("grammar does not derive a tree")
    shapes = compute_shapes(slp)
    return max(shapes[name].full_trees for name in slp.reachable())


class _Emitter:
    """Collects converted rules and collapses chain rules as they appear."""

    def __init__(self, taken: Iterable[str]):
        self.rules: Dict[str, TslpRule] = {}
        self.names = _Names(taken, prefix="T")

    def name(self, wanted: str) -> str:
        if wanted in self.names.taken:
            return self.names()
        self.names.taken.add(wanted)
        return wanted

    def emit(self, wanted: str, rank: int, body: List[TslpItem]) -> str:
        head = body[0]
        if isinstance(head, str) and self.rules[head].rank == rank and \
                body[1:] == [Parameter(k) for k in range(1, rank + 1)]:
            return head
        name = self.name(wanted)
        self.rules[name] = TslpRule(rank, tuple(body))
        return name


def slp_to_tslp(slp: Slp) -> Tslp:
    """TSLP deriving the tree whose traversal is ``val(slp)``.

    For a nonterminal with value ``t_1 ... t_a s`` (trees ``t_i``, fragment
    ``s`` with ``g`` gaps) it creates rank-0 nonterminals ``A_1..A_a`` and,
    when ``g > 0``, one rank-``g`` nonterminal ``A'``.
    """
    if not is_tree(slp):
        raise NotATree("grammar does not derive a tree")
    cnf = normalize_cnf(slp)
    shapes = compute_shapes(cnf)
    taken = set(cnf.productions) | {s.name for s in cnf.terminals()}
    out = _Emitter(taken)
    trees: Dict[str, List[str]] = {}
    frag: Dict[str, Optional[str]] = {}
    for name in cnf.order:
        rhs = cnf.productions[name]
        if len(rhs) == 1:
            sym = rhs[0]
            if sym.rank == 0:
                trees[name] = [out.emit(f"{name}_1", 0, [sym])]
                frag[name] = None
            else:
                trees[name] = []
                frag[name] = out.emit(f"{name}'", sym.rank,
                                      [sym] + [Parameter(k) for k in range(1, sym.rank + 1)])
            continue
        b, c = rhs
        b1, b2 = shapes[b]
        c1, c2 = shapes[c]
        bt, ct = trees[b], trees[c]
        if b2 == 0:
            trees[name] = bt + ct
            frag[name] = frag[c]
        elif b2 <= c1:
            joined = out.emit(f"{name}_{b1 + 1}", 0, [frag[b]] + ct[:b2])
            trees[name] = bt + [joined] + ct[b2:]
            frag[name] = frag[c]
        else:
            rest = b2 - c1
            if c2 == 0:
                body = [frag[b]] + ct + [Parameter(k) for k in range(1, rest + 1)]
                rank = rest
            else:
                body = ([frag[b]] + ct + [frag[c]] + [Parameter(k) for k in range(1, c2 + 1)]
                        + [Parameter(k) for k in range(c2 + 1, c2 + rest)])
                rank = c2 + rest - 1
            trees[name] = list(bt)
            frag[name] = out.emit(f"{name}'", rank, body)
    start = trees[cnf.start][0]
    keep = set()
    stack = [start]
    while stack:
        n = stack.pop()
        if n in keep:
            continue
        keep.add(n)
        stack.extend(x for x in out.rules[n].body if isinstance(x, str))
    return Tslp({n: r for n, r in out.rules.items() if n in keep}, start)

