import pytest
from hypothesis import given, settings, strategies as st

from strandmsr.terms import (IDENTITY, Atom, Cat, Enc, Hash, Indet, ParseError, Sig, SortError,
                             Substitution, appears_in, cat, depth, indets, inv, is_ground,
                             is_ingredient, match, name, nonce, parse_term, path_apply, paths,
                             pk, render, sk, substitute, symkey, text)

from oracles import ALPHABET, ingredients, occurrences, terms_up_to

A, B, T = name("A"), name("B"), name("T")
M, K, R = text("M"), symkey("K"), nonce("R")


# --- strategies -------------------------------------------------------------------

atoms = st.sampled_from([A, B, T, M, K, R, pk(T), sk(A), inv(pk(T)), text("nil")])


def ground_terms(max_leaves=12):
    return st.recursive(
        atoms,
        lambda sub: st.one_of(
            st.builds(Cat, st.sampled_from(["nil", "keytag", "ab_rq"]), sub, sub),
            st.builds(Enc, sub, sub, st.one_of(st.none(), sub)),
            st.builds(Sig, sub, sub),
            st.builds(Hash, sub)),
        max_leaves=max_leaves)


# --- worked examples ---------------------------------------------------------------

def test_substitute_indeterminate():
    x = Indet("x")
    assert substitute(x, Substitution(indet_map={x: K})) == K


def test_substitute_identity():
    t = Enc(M, K, R)
    assert substitute(t, IDENTITY) == t


def test_substitute_by_hand():
    x = Indet("x")
    s = Substitution({A: B}, {x: Hash(M)})
    assert substitute(Cat("nil", A, x), s) == Cat("nil", B, Hash(M))


def test_path_apply_examples():
    assert path_apply(Enc(M, K, R), ("L",)) == M
    assert path_apply(A, ("L",)) is None
    assert path_apply(Cat("nil", A, Enc(M, K, R)), ("R", "R")) == K


def test_ingredient_examples():
    assert is_ingredient(M, Enc(M, K, R))
    assert not is_ingredient(K, Enc(M, K, R))
    assert not is_ingredient(R, Enc(M, K, R))
    t = Cat("nil", A, Hash(M))
    assert is_ingredient(t, t)
    assert not is_ingredient(M, t)


def test_appears_in_examples():
    assert appears_in(K, Enc(M, K, R))
    assert not appears_in(K, M)
    L, EK = Cat("nil", A, B), Enc(K, pk(T), R)
    assert appears_in(Hash(L), Sig(Cat("eootag", Hash(L), EK), sk(A)))


# --- algebra oracles ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def universe():
    return terms_up_to(2)


def test_universe_size(universe):
    # 4 atoms; 72 terms of depth <= 1; frozen count at depth <= 2.
    assert len(terms_up_to(1)) == 72
    assert len(universe) == 20812


def test_ingredient_and_appearance_match_path_enumeration(universe):
    probes = terms_up_to(1)
    for t in universe:
        ing, occ = ingredients(t), occurrences(t)
        for t0 in set(probes) | occ:
            assert is_ingredient(t0, t) == (t0 in ing), (render(t0), render(t))
            assert appears_in(t0, t) == (t0 in occ), (render(t0), render(t))


def test_paths_match_path_enumeration(universe):
    for t in universe[::7]:
        got = {path_apply(t, p) for p in paths(t, through_keys=False)}
        assert got == ingredients(t)
        assert {path_apply(t, p) for p in paths(t)} == occurrences(t)


def test_ingredient_is_a_partial_order():
    small = terms_up_to(1)
    rel = {(a, b) for a in small for b in small if is_ingredient(a, b)}
    assert all((a, a) in rel for a in small)
    for a, b in rel:
        if a != b:
            assert (b, a) not in rel
    for a, b in rel:
        for c in small:
            if (b, c) in rel:
                assert (a, c) in rel


@settings(max_examples=300, deadline=None)
@given(ground_terms(), ground_terms(6))
def test_ingredient_random_depth(t, t0):
    assert is_ingredient(t0, t) == (t0 in ingredients(t))
    assert appears_in(t0, t) == (t0 in occurrences(t))


# --- structure ----------------------------------------------------------------------------

def test_depth_and_ground():
    assert depth(A) == 0
    assert depth(Cat("nil", A, Hash(M))) == 2
    assert is_ground(Enc(M, K, R))
    assert not is_ground(Cat("nil", A, Indet("x")))
    assert indets(Sig(Indet("y"), sk(A))) == {Indet("y")}


def test_cat_nests_right():
    assert cat(A, B, T, tag="ab_rq") == Cat("ab_rq", A, Cat("nil", B, T))
    with pytest.raises(ValueError):
        cat(A)


def test_sorts():
    with pytest.raises(SortError):
        Atom("bogus", "x")
    with pytest.raises(SortError):
        Atom("name", "x", inverse=True)
    with pytest.raises(SortError):
        sk(M)
    with pytest.raises(SortError):
        Substitution({A: M})
    assert inv(inv(pk(T))) == pk(T)
    assert inv(K) == K
    with pytest.raises(ValueError):
        Cat("nosuchtag", A, B)


def test_keys_follow_their_owner():
    s = Substitution({A: B})
    assert s(sk(A)) == sk(B)
    assert s(inv(pk(A))) == inv(pk(B))
    assert s(pk(T)) == pk(T)


@settings(max_examples=200, deadline=None)
@given(ground_terms())
def test_render_parse_roundtrip(t):
    assert parse_term(render(t)) == t


@pytest.mark.parametrize("bad", ["", "cat(nil, name:A)", "foo:A", "enc(name:A)", "name:A )"])
def test_parse_errors(bad):
    with pytest.raises(ParseError):
        parse_term(bad)


def test_match_binds_parameters():
    x = Indet("x")
    pat = Sig(Cat("nil", A, x), sk(A))
    b = match(pat, Sig(Cat("nil", B, M), sk(B)), params=frozenset({A}))
    assert b is not None and b(pat) == Sig(Cat("nil", B, M), sk(B))
    assert match(pat, Sig(Cat("nil", B, M), sk(T)), params=frozenset({A})) is None
    assert match(pat, Sig(Cat("nil", B, M), sk(B))) is None


@settings(max_examples=200, deadline=None)
@given(ground_terms())
def test_match_is_inverse_of_substitution(t):
    x, y = Indet("x"), Indet("y")
    pat = Cat("nil", x, Hash(y))
    g = substitute(pat, Substitution(indet_map={x: t, y: M}))
    b = match(pat, g)
    assert b.indet_map == {x: t, y: M}


@settings(max_examples=200, deadline=None)
@given(ground_terms(), st.sampled_from(ALPHABET))
def test_compose_applies_right_then_left(t, a):
    x = Indet("x")
    first = Substitution(indet_map={x: Cat("nil", A, t)})
    second = Substitution({A: B}, {})
    u = Enc(x, K, a if a.sort == "nonce" else None)
    assert second.compose(first)(u) == second(first(u))
