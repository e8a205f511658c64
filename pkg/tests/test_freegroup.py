import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyharm.errors import InvalidInputError
from polyharm.freegroup import (Word, abelianized_length, conjugate, cyclic_reduce, invert,
                                multiply, reduce, sphere_spelling_bound, spelling_length,
                                spelling_lower_bound)
from polyharm.reflection import (OCTANT_ADJACENCY, delta, enumerate_classes, h0_class,
                                 h1_class, improved_lower_bound, symmetric_lower_bound)
from polyharm.topology import ReflSymClass

from oracles import LETTERS2, ConjugatorSpeller, free_reduce, reduced_words

COMMUTATOR = (1, 2, -1, -2)

letter = st.sampled_from([1, -1, 2, -2, 3, -3])
words = st.lists(letter, max_size=12).map(tuple)


# --- word arithmetic -------------------------------------------------------

def test_basic_examples():
    assert reduce((1, -1)) == ()
    assert multiply((1, 2), (-2, 3)) == (1, 3)
    assert conjugate((2,), (1,)) == (1, 2, -1)
    assert str(Word((1, 2, -1))) == "c1 c2 c1^-1"


def test_out_of_range_generator():
    with pytest.raises(InvalidInputError):
        reduce((1, 3), n=2)
    with pytest.raises(InvalidInputError):
        reduce((0,))


@given(words, words, words)
def test_group_axioms(a, b, c):
    assert multiply(multiply(a, b), c) == multiply(a, multiply(b, c))
    assert multiply(a, invert(a)) == ()
    assert multiply(a, ()) == reduce(a)
    r = reduce(a)
    assert all(r[i] != -r[i + 1] for i in range(len(r) - 1))
    assert r == free_reduce(a)


@given(words)
def test_word_class_is_reduced(a):
    w = Word(a)
    assert (w * w.inverse()).is_identity
    assert len(w) == len(free_reduce(a))


# --- abelianised length ------------------------------------------------------

def test_abelianized_examples():
    assert abelianized_length(COMMUTATOR) == 0
    assert abelianized_length(()) == 0
    assert abelianized_length((1, 1, 1, -2)) == 4


# --- spelling length -------------------------------------------------------

def test_spelling_examples():
    r = spelling_length(COMMUTATOR)
    assert (r.lower, r.upper, r.exact) == (2, 2, True)
    r = spelling_length(())
    assert (r.lower, r.upper, r.exact) == (0, 0, True)
    assert spelling_length((1, 2, -1)).upper == 1


def test_budget_below_lower_bound_rejected():
    with pytest.raises(InvalidInputError):
        spelling_length((1, 1, 1), budget=1)


def test_small_budget_gives_inexact_interval():
    # abelianised length 2, but four factors are needed
    g = (1, 2, 2, -1, -2, 1)
    r = spelling_length(g, budget=2)
    assert (r.lower, r.exact) == (2, False)
    full = spelling_length(g)
    assert (full.lower, full.upper, full.exact) == (2, 4, False)


def test_random_words_bounds():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(1, 8))
        g = reduce(tuple(int(x) for x in rng.choice([1, -1, 2, -2, 3, -3], size=n)))
        r = spelling_length(g)
        assert r.upper >= r.lower >= abelianized_length(g)
        assert r.exact == (r.lower == r.upper)
        # parity: every factor flips the parity of the letter count
        assert (r.upper - len(g)) % 2 == 0


@settings(max_examples=80, deadline=None)
@given(st.lists(letter, max_size=6).map(tuple), st.lists(letter, max_size=3).map(tuple))
def test_conjugation_invariance(g, h):
    a = spelling_length(g)
    b = spelling_length(conjugate(g, h))
    assert (a.lower, a.upper) == (b.lower, b.upper)


def test_witness_is_a_deletion_path():
    from polyharm.freegroup import canonical_cyclic
    g = (1, 2, 2, -1, -2, 1)
    r = spelling_length(g)
    assert len(r.witness) == r.upper
    word = canonical_cyclic(g)
    for prev, k in r.witness:
        assert prev == word
        word = canonical_cyclic(prev[:k] + prev[k + 1:])
    assert word == ()


def test_deletion_search_matches_conjugator_oracle_small():
    speller = ConjugatorSpeller(LETTERS2, conj_len=2)
    for w in reduced_words(LETTERS2, 4):
        assert spelling_length(w).upper == speller.length(w), w


def test_spelling_lower_bound_is_sound_against_oracle():
    speller = ConjugatorSpeller(LETTERS2, conj_len=2)
    for w in reduced_words(LETTERS2, 4):
        assert spelling_lower_bound(w) <= speller.length(w)


def test_cyclic_reduce():
    assert cyclic_reduce((1, 2, -1)) == (2,)
    assert cyclic_reduce((-2, 1, 2, 2)) == (1, 2)


# --- sphere bound ------------------------------------------------------------

def test_sphere_bound_examples():
    c0 = (1, 2)
    assert sphere_spelling_bound((), c0, 0, r_max=2, conj_len=2) == 0
    assert sphere_spelling_bound((), c0, 1, r_max=1, conj_len=1) >= 1
    b = sphere_spelling_bound(c0, c0, 0, r_max=2, conj_len=2)
    assert 0 <= b <= spelling_length(c0).upper


# --- reflection-symmetric bounds -------------------------------------------

def test_adjacency_is_three_regular_hypercube():
    for s, nb in enumerate(OCTANT_ADJACENCY):
        assert len(nb) == 3
        assert all(bin(s ^ t).count("1") == 1 for t in nb)


def test_delta_examples():
    assert delta(h0_class()) == (0, True)
    assert delta(h1_class()).value == 0
    # isolated +1 at octant 0 and -1 at its far corner 7
    rs = ReflSymClass((1, 0, 0, 0, 0, 0, 0, -1), 0)
    assert delta(rs) == (1, False)
    assert delta(ReflSymClass((1, 0, 0, 0, 0, 0, 0, -1), 1)).value == 0
    # +2 at octant 0 with positive neighbours 1 and 2 summing to 2; negatives alike
    rs = ReflSymClass((2, 1, 1, 0, 0, -1, -1, -2), 0)
    assert delta(rs).value == 0


def test_improved_bound_examples():
    rs = ReflSymClass((1, 0, 0, 0, 0, 0, 0, -1), 0)
    assert symmetric_lower_bound(rs) == pytest.approx(8 * np.pi)
    rs3 = ReflSymClass((1, 0, 0, 0, 0, 0, -1, -1), 0)
    assert delta(rs3).value == 1
    assert improved_lower_bound(rs3) == pytest.approx(20 * np.pi)
    assert improved_lower_bound(ReflSymClass((0,) * 8)) == 0.0
    assert improved_lower_bound(h0_class((20, 10, 1))) == pytest.approx(4 * np.pi)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(-2, 2), min_size=8, max_size=8), st.sampled_from([0, 1]),
       st.floats(0.1, 5.0))
def test_improved_dominates_symmetric(w, chi, lz):
    rs = ReflSymClass(tuple(w), chi, (lz * 3, lz * 2, lz))
    d = delta(rs).value
    imp, sym = improved_lower_bound(rs), symmetric_lower_bound(rs)
    assert imp >= sym
    assert (imp == sym) == (d == 0)


def test_enumeration_size():
    assert sum(1 for _ in enumerate_classes(max_abs=1)) == 3 ** 8 * 2
