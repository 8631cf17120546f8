import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from veering.fixtures import sphere4, torus, torus_state
from veering.flips import (
    InapplicableWord,
    apply_word,
    area_compatibility,
    area_defect,
    flip,
    flip_matrix,
    height_matrix,
    lattice_join,
    lattice_meet,
    parse_word,
    phi_coordinates,
    replay,
    resolve_word,
)
from veering.flow import FlowState, flip_forward, random_forward_word, sample_state
from veering.geometry import validate_state
from veering.triangulation import BACKWARD, BLUE, FORWARD


def quirks_word(n):
    return resolve_word(torus(BLUE), ["c"] + ["b", "c"] * n + ["a"])


def test_vector_flip_matches_engine():
    s = torus_state()
    new, move = flip(s, "c")
    assert validate_state(new) == []
    st_ = FlowState.from_surface(s)
    colour, _ = flip_forward(st_, s.triangulation.index()["c"])
    assert colour is move.colour
    assert new.triangulation == st_.triangulation
    np.testing.assert_allclose(st_.x, [0.3, 0.7, 0.4], atol=1e-15)
    np.testing.assert_allclose(st_.y, new.height_array(), atol=1e-15)
    assert st_.y[2] == pytest.approx(8 / 3)


def test_backward_vector_flip_undoes_forward():
    s = torus_state()
    new, move = flip(s, "c")
    back, _ = flip(new, "c", BACKWARD)
    assert back.triangulation == s.triangulation
    for l in "abc":
        np.testing.assert_allclose(np.abs(back.vectors[l]), np.abs(s.vectors[l]), atol=1e-15)


def test_single_flip_matrix():
    w = parse_word(torus(BLUE), ["c:B"])
    # the quad about c is (a, b, a, b), so both sides of the pair are b
    assert flip_matrix(w) == [[1, 0, 0], [0, 1, 0], [0, 2, 1]]
    assert height_matrix(w) == [[1, 0, 0], [0, 1, 0], [0, 2, 1]]


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_quirks_words(n):
    w = quirks_word(n)
    assert w.tokens()[: 2 * n] == ("c:R", "b:R") * n
    assert w.tokens()[-2:] == ("c:B", "a:B")
    assert flip_matrix(w) == [[1, 2, 0], [2 * n, 4 * n + 1, 0], [2 * n, 4 * n + 2, 1]]
    assert w.end.isomorphic(w.start)


def test_resolve_word_respects_explicit_colours():
    w = resolve_word(torus(BLUE), ["c:B", "a"])
    assert w.tokens() == ("c:B", "a:B")


def test_bare_token_is_rejected_by_parse_word():
    with pytest.raises(InapplicableWord):
        parse_word(torus(BLUE), ["c"])
    with pytest.raises(InapplicableWord):
        parse_word(torus(BLUE), ["a:R"])


def test_replay_is_identity_on_words():
    w = quirks_word(2)
    assert replay(w.start, w).tokens() == w.tokens()


def _random_word(seed, length, base):
    rng = np.random.Generator(np.random.Philox(seed))
    state = sample_state(base, rng)
    tokens, end = random_forward_word(state, length, rng)
    return state, parse_word(state.triangulation, tokens), end


@settings(max_examples=30)
@given(st.integers(0, 10**6), st.integers(1, 12), st.sampled_from(["torus", "sphere4"]))
def test_matrices_transport_widths_and_heights(seed, length, name):
    base = torus(BLUE) if name == "torus" else sphere4()
    start, word, end = _random_word(seed, length, base)
    assert word.end == end.triangulation
    A = np.array(flip_matrix(word), dtype=float)
    H = np.array(height_matrix(word), dtype=float)
    np.testing.assert_allclose(A @ end.x, start.x, rtol=1e-9)
    np.testing.assert_allclose(H @ start.y, end.y, rtol=1e-9)


@settings(max_examples=15)
@given(st.integers(0, 10**6), st.integers(1, 10))
def test_area_identity_with_height_matrix(seed, length):
    _, word, _ = _random_word(seed, length, sphere4())
    assert area_compatibility(word)


def test_literal_identity_holds_without_colour_changes():
    w = parse_word(torus(BLUE), ["c:B", "a:B", "c:B", "a:B"])
    assert area_compatibility(w, literal=True)


def test_literal_identity_fails_on_colour_change():
    w = parse_word(torus(BLUE), ["c:R"])
    assert not area_compatibility(w, literal=True)
    assert area_compatibility(w)
    assert not area_defect(w, literal=True, on_cones=False).is_zero_matrix


def _torus_words(seed):
    r = random.Random(seed)
    s = sample_state(torus(BLUE), np.random.Generator(np.random.Philox(seed))).surface_state()
    out = []
    for _ in range(2):
        cur, edges = s, []
        for _ in range(r.randint(0, 6)):
            e = r.choice(sorted(cur.triangulation.flippable(FORWARD)))
            cur, _ = flip(cur, e)
            edges.append(e)
        out.append(edges)
    return s, out


@given(st.integers(0, 10**6))
def test_lattice_join_and_meet(seed):
    s, (u, v) = _torus_words(seed)
    _, wu = apply_word(s, u)
    _, wv = apply_word(s, v)
    pu, pv = phi_coordinates(wu), phi_coordinates(wv)
    _, jw = lattice_join(s, u, v)
    joined = phi_coordinates(wu + jw)
    assert joined == {l: max(pu[l], pv[l]) for l in pu}
    _, mw = lattice_meet(s, u, v)
    met = phi_coordinates(wu + mw)
    assert met == {l: min(pu[l], pv[l]) for l in pu}


@given(st.integers(0, 10**6))
def test_lattice_is_commutative_and_idempotent(seed):
    s, (u, v) = _torus_words(seed)
    ju, _ = lattice_join(s, u, v)
    jv, _ = lattice_join(s, v, u)
    assert ju.triangulation == jv.triangulation
    same, w = lattice_join(s, u, u)
    assert len(w) == 0
