"""Random inputs and brute-force references shared by the test modules."""

from __future__ import annotations

import random
from typing import Dict, List, Optional, Sequence

from treeslp.slp import GrammarBuilder, Slp, Symbol
from treeslp.trees import ExplicitTree, Parameter
from treeslp.tslp import Tslp, TslpRule

LEAVES = [Symbol("a", 0), Symbol("b", 0)]
INNER = {1: [Symbol("g", 1)], 2: [Symbol("f", 2), Symbol("h", 2)], 3: [Symbol("k", 3)]}

# filled by the acceptance suite, printed in the pytest summary
ACCEPTANCE_LINES: List[str] = []


def random_tree(rng: random.Random, size: int, max_rank: int = 3,
                leaves: Sequence[Symbol] = LEAVES, inner: Optional[Dict[int, List[Symbol]]] = None) -> List[Symbol]:
    """Preorder word of a random tree with exactly ``size`` nodes.

    Ranks summing to ``size - 1`` are scattered over the positions and the
    sequence is rotated so that every proper prefix still misses a subtree.
    """
    inner = inner or INNER
    ranks = [r for r in inner if r <= max_rank]
    slots = [0] * size
    free = list(range(size))
    rng.shuffle(free)
    budget = size - 1
    while budget:
        fits = [r for r in ranks if r <= budget]
        r = rng.choice(fits) if fits else min(ranks)
        if r > budget:
            raise ValueError("rank set cannot reach this size")
        slots[free.pop()] = r
        budget -= r
    low, low_at, acc = 0, -1, 0
    for k, r in enumerate(slots):
        acc += r - 1
        if acc < low:
            low, low_at = acc, k
    slots = slots[low_at + 1:] + slots[:low_at + 1]
    return [rng.choice(inner[r]) if r else rng.choice(leaves) for r in slots]


def random_word(rng: random.Random, size: int, symbols: Sequence[Symbol]) -> List[Symbol]:
    return [rng.choice(symbols) for _ in range(size)]


def random_slp(rng: random.Random, word: Sequence[Symbol], max_arity: int = 3) -> Slp:
    """A random grammar for ``word``: random splits, equal factors shared."""
    word = list(word)
    builder = GrammarBuilder(reserved={s.name for s in word})
    shared: Dict[tuple, object] = {}
    # iterative post-order over (lo, hi) intervals
    result: Dict[tuple, object] = {}
    stack = [(0, len(word), False)]
    while stack:
        lo, hi, ready = stack.pop()
        key = tuple(word[lo:hi]) if hi - lo <= 64 else None
        if hi - lo == 1:
            result[(lo, hi)] = word[lo]
            continue
        if key is not None and key in shared and not ready:
            result[(lo, hi)] = shared[key]
            continue
        if not ready:
            k = rng.randint(2, min(max_arity, hi - lo))
            cuts = sorted(rng.sample(range(lo + 1, hi), k - 1))
            bounds = list(zip([lo] + cuts, cuts + [hi]))
            result[("parts", lo, hi)] = bounds
            stack.append((lo, hi, True))
            for b in bounds:
                stack.append((b[0], b[1], False))
            continue
        items = [result[b] for b in result[("parts", lo, hi)]]
        name = builder.add(items)
        result[(lo, hi)] = name
        if key is not None:
            shared[key] = name
    root = result[(0, len(word))]
    if isinstance(root, Symbol):
        return Slp({"S": (root,)}, "S")
    return builder.build([root])


def random_tslp(rng: random.Random, rules: int = 5, max_rank: int = 2, body_size: int = 6,
                leaves: Sequence[Symbol] = LEAVES, inner: Optional[Dict[int, List[Symbol]]] = None) -> Tslp:
    """A random linear tree grammar; later rules may call earlier ones.

    ``max_rank`` bounds the rank of nonterminals; terminals come from ``inner``.
    """
    inner = inner or INNER
    defined: List[tuple] = []  # (name, rank)
    out: Dict[str, TslpRule] = {}
    for k in range(rules):
        rank = 0 if k == rules - 1 else rng.randint(0, max_rank)
        name = "S" if k == rules - 1 else f"A{k}"
        body: List = []
        leaf_slots: List[int] = []
        need = 1
        while need:
            if len(body) < body_size and (not body or rng.random() < 0.5):
                callable_ = [d for d in defined if d[1] > 0]
                if callable_ and rng.random() < 0.6:
                    x, r = rng.choice(callable_)
                else:
                    r = rng.choice(list(inner))
                    x = rng.choice(inner[r])
                body.append(x)
                need += r - 1
                continue
            zero = [d[0] for d in defined if d[1] == 0]
            body.append(rng.choice(zero) if zero and rng.random() < 0.5 else rng.choice(leaves))
            leaf_slots.append(len(body) - 1)
            need -= 1
        params = list(range(1, rank + 1))
        rng.shuffle(params)
        if rng.random() < 0.2:
            params = params[:rng.randint(0, rank)]
        for pos, p in zip(rng.sample(leaf_slots, min(len(params), len(leaf_slots))), params):
            body[pos] = Parameter(p)
        out[name] = TslpRule(rank, tuple(body))
        defined.append((name, rank))
    return Tslp(out, "S")


def dfuds_brute(word: Sequence[Symbol]) -> str:
    return "(" + "".join("(" * s.rank + ")" for s in word)


def naive_is_tree(word: Sequence[Symbol]) -> bool:
    """Recursive-descent style check with an explicit counter."""
    need = 1
    for s in word:
        if need == 0:
            return False
        need += s.rank - 1
    return need == 0 and len(word) > 0


def lca_brute(tree: ExplicitTree, i: int, j: int) -> int:
    return tree.lca(i, j)


def random_caterpillar(rng: random.Random, m: int, ops: Sequence[Symbol], lo: int, hi: int) -> List[Symbol]:
    """Binary caterpillar with ``m`` operators and integer operands in ``[lo, hi]``."""
    def leaf():
        return Symbol.const(rng.randint(lo, hi))

    if m == 0:
        return [leaf()]
    tail = [rng.choice(ops), leaf(), leaf()]
    for _ in range(m - 1):
        op = rng.choice(ops)
        tail = [op, leaf()] + tail if rng.random() < 0.5 else [op] + tail + [leaf()]
    return tail


def any_compressor(rng: random.Random, word: Sequence[Symbol]) -> Slp:
    """One of the available grammar constructions, picked at random."""
    from treeslp.generators import compress

    pick = rng.randrange(4)
    if pick == 0:
        return compress(word, "bisection")
    if pick == 1:
        return compress(word, "pairing")
    if pick == 2:
        return random_slp(rng, word)
    return Slp.literal(list(word))
