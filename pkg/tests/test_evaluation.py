import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import random_caterpillar, random_slp, random_tree, random_tslp
from treeslp.errors import (
    DomainViolation,
    InvalidEmbedding,
    NotATree,
    NotCaterpillar,
    NotPrime,
    OutOfRange,
    ValueTooLarge,
    WrongAlphabet,
)
from treeslp.evaluation import (
    BOOLEAN,
    HEIGHT,
    MAX_PLUS,
    MINUS_INFINITY,
    STRAHLER,
    Caterpillar,
    Interpretation,
    MaxPlusMatrix,
    PlusTimesMatrix,
    caterpillar_bool,
    caterpillar_height,
    caterpillar_matrix_max_plus,
    caterpillar_matrix_plus_times,
    caterpillar_strahler,
    eval_bool,
    eval_brute,
    eval_lattice,
    eval_max_plus,
    eval_pairs,
    eval_plus_times_mod,
    evaluated_word,
    height,
    is_prime,
    lattice_interp,
    node_depth,
    plus_times_interp,
    reduce_to_caterpillar,
    strahler,
    validate_embedding,
    within_poly_bound,
)
from treeslp.generators import compress, doubling_slp
from treeslp.slp import Slp, Symbol, expand, expand_nonterminal, normalize_cnf
from treeslp.trees import ExplicitTree, leaf_symbol, parse_term
from treeslp.tslp import tslp_to_slp

AND, OR = Symbol("and", 2), Symbol("or", 2)
ZERO, ONE = Symbol("0", 0), Symbol("1", 0)
PLUS, TIMES, MAX = Symbol("+", 2), Symbol("*", 2), Symbol("max", 2)
BOOL_ARGS = {"leaves": [ZERO, ONE], "inner": {2: [AND, OR]}}


def odd(n):
    return n if n % 2 else n + 1


def example_tree():
    return parse_term("f(f(a,a),f(f(f(a,a),a),a))")


# --- fixtures ------------------------------------------------------------------

def test_worked_example_values():
    word = example_tree()
    for slp in (compress(word, "bisection"), compress(word, "pairing"), Slp.literal(word)):
        assert height(slp) == 4
        assert strahler(slp) == 2
        assert node_depth(slp, 6) == 2
        assert node_depth(slp, 1) == 0
        assert node_depth(slp, 9) == 4


def test_partially_evaluated_word():
    ranks = {"+": 2, "x": 2}
    word = [Symbol(t, ranks[t]) if t in ranks else leaf_symbol(t) for t in "0 2 + 2 + + x 2 + 2 1 + x".split()]
    interp = Interpretation("arith", lambda s, a: a[0] + a[1] if s.name == "+" else a[0] * a[1])
    out = evaluated_word(word, interp)
    assert [str(s.value) if s.is_const else s.name for s in out] == "0 2 + 2 + + 6 + x".split()


def test_small_matrix_fixtures():
    pt = compress([PLUS, Symbol.const(2), TIMES, Symbol.const(3), Symbol.const(4)])
    matrix = caterpillar_matrix_plus_times(pt, 101)
    assert matrix.rows() == [[2, 1, 1], [1, 0, 0], [1, 3, 4]]
    assert matrix.combined() == 14 == eval_plus_times_mod(pt, 101)
    mp = compress([MAX, Symbol.const(5), PLUS, Symbol.const(2), Symbol.const(3)])
    matrix = caterpillar_matrix_max_plus(mp)
    assert matrix.rows() == [[5, 0, 0], [0, MINUS_INFINITY, 0], [0, 2, 3]]
    assert matrix.combined() == 5 == eval_max_plus(mp)


# --- agreement with bottom-up evaluation ----------------------------------------

@settings(max_examples=120, deadline=None)
@given(st.integers(1, 250), st.randoms(use_true_random=False))
def test_tree_statistics_match_brute_force(n, rng):
    word = random_tree(rng, n)
    slp = random_slp(rng, word) if rng.random() < 0.5 else compress(word, "pairing")
    assert height(slp) == eval_brute(word, HEIGHT) == ExplicitTree(word).height()
    assert strahler(slp) == eval_brute(word, STRAHLER)
    i = rng.randint(1, n)
    assert node_depth(slp, i) == ExplicitTree(word).depths[i]


@settings(max_examples=120, deadline=None)
@given(st.integers(1, 250), st.randoms(use_true_random=False))
def test_boolean_trees_match_brute_force(n, rng):
    word = random_tree(rng, odd(n), **BOOL_ARGS)
    slp = random_slp(rng, word)
    assert eval_bool(slp) == eval_brute(word, BOOLEAN)


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False), st.integers(2, 20))
def test_grammar_built_trees_match_brute_force(rng, rules):
    t = random_tslp(rng, rules=rules, max_rank=2, body_size=8, **BOOL_ARGS)
    slp = tslp_to_slp(t)
    word = expand(slp)
    assert eval_bool(slp) == eval_brute(word, BOOLEAN)
    assert height(slp) == eval_brute(word, HEIGHT)
    assert strahler(slp) == eval_brute(word, STRAHLER)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 150), st.randoms(use_true_random=False))
def test_generic_reduction_with_brute_oracle(n, rng):
    word = random_tree(rng, odd(n), leaves=[Symbol.const(v) for v in range(-3, 4)], inner={2: [PLUS, MAX]})
    slp = random_slp(rng, word)
    assert reduce_to_caterpillar(slp, MAX_PLUS) == eval_brute(word, MAX_PLUS)
    assert eval_max_plus(slp) == eval_brute(word, MAX_PLUS)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 120), st.randoms(use_true_random=False))
def test_plus_times_modulo_prime(n, rng):
    word = random_tree(rng, odd(n), leaves=[Symbol.const(v) for v in range(0, 300)], inner={2: [PLUS, TIMES]})
    slp = random_slp(rng, word)
    exact = eval_brute(word, plus_times_interp())
    for p in (2, 101, 65537):
        assert eval_plus_times_mod(slp, p) == exact % p


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 120), st.randoms(use_true_random=False))
def test_pairs_hold_values_and_evaluated_fragments(n, rng):
    word = random_tree(rng, n)
    slp = random_slp(rng, word)
    cnf = normalize_cnf(slp)
    for name, pair in eval_pairs(slp, HEIGHT).items():
        got = (expand(pair.values) if pair.values else []) + (expand(pair.fragment) if pair.fragment else [])
        assert got == evaluated_word(expand_nonterminal(cnf, name), HEIGHT), name


# --- caterpillar oracles ----------------------------------------------------------

def caterpillar_word(rng, m, ops, leaves):
    word = random_caterpillar(rng, m, ops, 0, len(leaves) - 1)
    return [leaves[s.value] if s.rank == 0 else s for s in word]


@settings(max_examples=150)
@given(st.integers(0, 40), st.randoms(use_true_random=False))
def test_caterpillar_oracles_directly(m, rng):
    word = caterpillar_word(rng, m, [Symbol("f", 2), Symbol("h", 2)], [Symbol.const(v) for v in range(6)])
    slp = random_slp(rng, word)
    assert caterpillar_height(slp) == eval_brute(word, HEIGHT)
    assert caterpillar_strahler(slp) == eval_brute(word, STRAHLER)
    bools = caterpillar_word(rng, m, [AND, OR], [Symbol.const(0), Symbol.const(1)])
    assert caterpillar_bool(random_slp(rng, bools)) == eval_brute(bools, BOOLEAN)


def test_long_boolean_caterpillar():
    rng = random.Random(5)
    for _ in range(20):
        word = caterpillar_word(rng, 3000, [AND, OR], [ZERO, ONE])
        assert eval_bool(compress(word, "pairing")) == eval_brute(word, BOOLEAN)


def test_exponential_trees_without_expansion():
    slp = doubling_slp(60)
    assert height(slp) == 60
    assert strahler(slp) == 60
    assert node_depth(slp, 2**61 - 1) == 60
    rules = {"T0": (ONE,)}
    for k in range(1, 41):
        rules[f"T{k}"] = (AND if k % 2 else OR, f"T{k - 1}", f"T{k - 1}")
    assert eval_bool(Slp(rules, "T40")) == 1
    rules["T0"] = (ZERO,)
    assert eval_bool(Slp(rules, "T40")) == 0


# --- lattices ----------------------------------------------------------------------

DIAMOND = {"bot": [0, 0], "l": [1, 0], "r": [0, 1], "top": [1, 1]}


def test_lattice_evaluation():
    slp = compress(parse_term("join(meet(l,r),meet(top,l))"))
    assert eval_lattice(slp, DIAMOND) == "l"
    slp = compress(parse_term("join(l,r)"))
    assert eval_lattice(slp, DIAMOND) == "top"
    interp, codes = lattice_interp(DIAMOND)
    rng = random.Random(9)
    leaves = [Symbol(name, 0) for name in DIAMOND]
    inner = {2: [Symbol("meet", 2), Symbol("join", 2)]}
    for _ in range(100):
        word = random_tree(rng, odd(rng.randint(1, 80)), leaves=leaves, inner=inner)
        assert codes[eval_lattice(random_slp(rng, word), DIAMOND)] == eval_brute(word, interp)


@pytest.mark.parametrize("embedding", [
    {},
    {"a": [0, 1], "b": [1]},
    {"a": [0, 1], "b": [0, 1]},
    {"a": [1, 0], "b": [0, 1]},
    {"a": [2]},
])
def test_invalid_embeddings(embedding):
    with pytest.raises(InvalidEmbedding):
        validate_embedding(embedding)


def test_lattice_symbols_are_checked():
    with pytest.raises(WrongAlphabet):
        eval_lattice(compress(parse_term("meet(l,x)")), DIAMOND)


# --- matrices -------------------------------------------------------------------------

@settings(max_examples=100)
@given(st.integers(0, 12), st.randoms(use_true_random=False), st.sampled_from([101, 65537]))
def test_plus_times_matrix_identity(m, rng, p):
    word = random_caterpillar(rng, m, [PLUS, TIMES], 0, 10**6)
    slp = random_slp(rng, word)
    matrix = PlusTimesMatrix(slp, p)
    total = 0
    for row in matrix.rows():
        prod = 1
        for x in row:
            prod = prod * x % p
        total = (total + prod) % p
    assert total == matrix.combined() == eval_brute(word, plus_times_interp()) % p
    assert matrix.check()


@settings(max_examples=100)
@given(st.integers(0, 12), st.randoms(use_true_random=False))
def test_max_plus_matrix_identity(m, rng):
    word = random_caterpillar(rng, m, [PLUS, MAX], -40, 40)
    matrix = MaxPlusMatrix(random_slp(rng, word))
    best = max(sum(row) for row in matrix.rows() if MINUS_INFINITY not in row)
    assert best == matrix.combined() == eval_brute(word, MAX_PLUS)


def test_caterpillar_accessors():
    slp = compress([PLUS, Symbol.const(2), TIMES, Symbol.const(3), Symbol.const(4)])
    cat = Caterpillar(slp)
    assert cat.m == 2
    assert [cat.op(i).name for i in (1, 2)] == ["+", "*"]
    assert [cat.operand(j) for j in (1, 2, 3)] == [2, 3, 4]
    with pytest.raises(OutOfRange):
        cat.operand(4)


def test_matrix_errors():
    cat = compress([PLUS, Symbol.const(2), Symbol.const(3)])
    with pytest.raises(NotPrime):
        PlusTimesMatrix(cat, 100)
    with pytest.raises(NotPrime):
        eval_plus_times_mod(cat, 1)
    bushy = compress([PLUS, PLUS, Symbol.const(1), Symbol.const(1), PLUS, Symbol.const(1), Symbol.const(1)])
    with pytest.raises(NotCaterpillar):
        PlusTimesMatrix(bushy, 101).rows()
    with pytest.raises(NotCaterpillar):
        MaxPlusMatrix(compress([MAX if s == PLUS else s for s in expand(bushy)])).combined()
    with pytest.raises(WrongAlphabet):
        MaxPlusMatrix(compress([TIMES, Symbol.const(1), Symbol.const(1)]))
    long_word = random_caterpillar(random.Random(1), 300, [PLUS], 0, 5)
    matrix = PlusTimesMatrix(compress(long_word), 101)
    with pytest.raises(ValueTooLarge):
        matrix.rows()
    with pytest.raises(ValueTooLarge):
        PlusTimesMatrix(compress(long_word), 101, limit=100).combined()
    assert matrix.combined() == eval_brute(long_word, plus_times_interp()) % 101
    assert eval_plus_times_mod(compress(long_word), 101) == matrix.combined()


def long_two_sided_caterpillar(ops, m):
    word = [Symbol.const(2)]
    for k in reversed(range(m)):
        leaf = Symbol.const(k % 7 + 1)
        word = [ops[k % 2], leaf] + word if k % 3 else [ops[k % 2]] + word + [leaf]
    return word


def test_long_caterpillars_beyond_the_explicit_matrix():
    word = long_two_sided_caterpillar([MAX, PLUS], 3000)
    assert eval_max_plus(compress(word)) == eval_brute(word, MAX_PLUS)
    word = long_two_sided_caterpillar([PLUS, TIMES], 3000)
    assert eval_plus_times_mod(compress(word), 65537) == eval_brute(word, plus_times_interp()) % 65537


def test_primality():
    assert [n for n in range(30) if is_prime(n)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    assert is_prime(65537) and not is_prime(65537 * 3)


# --- errors and bounds -----------------------------------------------------------------

def test_evaluator_errors():
    for func in (height, strahler):
        with pytest.raises(NotATree):
            func(Slp.literal([Symbol("f", 2), Symbol("a", 0)]))
    with pytest.raises(NotATree):
        eval_bool(Slp.literal([AND, ONE]))
    with pytest.raises(OutOfRange):
        node_depth(compress(example_tree()), 12)
    with pytest.raises(WrongAlphabet):
        eval_bool(compress(example_tree()))
    with pytest.raises(DomainViolation):
        eval_brute([AND, Symbol.const(0), Symbol.const(2)], BOOLEAN)


def test_polynomial_bounds_hold_on_samples():
    rng = random.Random(4)
    for _ in range(50):
        word = random_tree(rng, rng.randint(1, 200))
        assert within_poly_bound(word, HEIGHT)
        assert within_poly_bound(word, STRAHLER)
        cat = random_caterpillar(rng, rng.randint(0, 30), [PLUS, MAX], -20, 20)
        assert within_poly_bound(cat, MAX_PLUS)
