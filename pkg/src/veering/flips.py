"""Geometric flips, flip words and their integer matrices, and lattice operations."""

from dataclasses import dataclass

import sympy

from .geometry import SurfaceState, height_equalities, omega_matrix, slot_vectors, width_equalities
from .triangulation import BACKWARD, BLUE, FORWARD, RED, Colour, Direction, NotFlippable

__all__ = [
    "DegenerateWidth",
    "FlipMove",
    "FlipWord",
    "InapplicableWord",
    "JoinStalled",
    "NotFlippable",
    "SurfaceState",
    "apply_word",
    "area_compatibility",
    "area_defect",
    "flip",
    "flip_matrix",
    "height_matrix",
    "lattice_join",
    "lattice_meet",
    "parse_word",
    "phi_coordinates",
    "reach_phi",
    "replay",
    "resolve_word",
]


class DegenerateWidth(Exception):
    """The new diagonal is horizontal or vertical (a non-Keane tie)."""


class InapplicableWord(Exception):
    pass


class JoinStalled(Exception):
    pass


@dataclass(frozen=True)
class FlipMove:
    """One flip.

    ``width_pair`` names the two quad sides p, q with x_before = (I + E_ep + E_eq) x_after
    for a forward move; it depends on the new colour.  ``height_pair`` plays
    the same role for y_after = (I + E_ep + E_eq) y_before and depends on the old
    colour.  For a backward move both pairs describe the forward move that
    undoes it.
    """

    edge: str
    colour: Colour
    direction: Direction = FORWARD
    width_pair: tuple = ()
    height_pair: tuple = ()

    def token(self):
        arrow = "" if self.direction is FORWARD else "~"
        return f"{arrow}{self.edge}:{self.colour.value}"


@dataclass(frozen=True)
class FlipWord:
    moves: tuple = ()
    start: object = None
    end: object = None

    def __len__(self):
        return len(self.moves)

    def __iter__(self):
        return iter(self.moves)

    def edges(self):
        return tuple(m.edge for m in self.moves)

    def tokens(self):
        return tuple(m.token() for m in self.moves)

    def signature(self):
        """Edge, colour and direction of each move."""
        return tuple((m.edge, m.colour, m.direction) for m in self.moves)

    def __add__(self, other):
        return FlipWord(self.moves + other.moves, self.start, other.end)


def _pairs(t, edge, new_colour):
    """(width_pair, height_pair) for a forward flip of ``edge`` in ``t``."""
    a, b, c, d = t.quad(edge).labels
    width_pair = (a, c) if new_colour is RED else (b, d)
    height_pair = (a, c) if t.colour(edge) is RED else (b, d)
    return width_pair, height_pair


def combinatorial_flip(t, edge, colour, direction=FORWARD):
    """Flip on the triangulation alone; returns (new triangulation, FlipMove)."""
    colour = Colour(colour)
    if direction is FORWARD:
        wp, hp = _pairs(t, edge, colour)
        new = t.flip(edge, colour, FORWARD)
    else:
        new = t.flip(edge, colour, BACKWARD)
        wp, hp = _pairs(new, edge, t.colour(edge))
    return new, FlipMove(edge, colour, direction, wp, hp)


def new_diagonal(state, edge):
    """Vector of the other diagonal of the quad about ``edge``."""
    t = state.triangulation
    q = t.quad(edge)
    inner = slot_vectors(state, q.inner)
    outer = slot_vectors(state, q.outer)
    i = q.slots[1][1]
    j = q.slots[2][1]
    e_in = inner[(i + 1) % 3]
    e_out = outer[(j + 2) % 3]
    # the two charts agree up to a half turn; align the outer one with the inner one
    sigma = -1.0 if e_in[0] * e_out[0] + e_in[1] * e_out[1] > 0 else 1.0
    wb = inner[i]
    wc = outer[j]
    return (wb[0] + sigma * wc[0], wb[1] + sigma * wc[1])


def flip(state, edge, direction=FORWARD, tol=1e-15):
    """Geometric flip; the outcome colour is read off the new diagonal."""
    t = state.triangulation
    if not t.is_flippable(edge, direction):
        raise NotFlippable(f"{edge} is not {direction.value} flippable in {t!r}")
    dx, dy = new_diagonal(state, edge)
    big_x = max(abs(v[0]) for v in state.vectors.values())
    big_y = max(abs(v[1]) for v in state.vectors.values())
    if abs(dx) <= tol * big_x or abs(dy) <= tol * big_y:
        raise DegenerateWidth(f"flipping {edge} gives an axis-parallel diagonal ({dx!r}, {dy!r})")
    colour = RED if dx * dy > 0 else BLUE
    new_t, move = combinatorial_flip(t, edge, colour, direction)
    vec = dict(state.vectors)
    vec[edge] = (dx, dy)
    return SurfaceState(new_t, vec), move


def apply_word(state, edges, direction=FORWARD):
    """Flip the given edges in order from a geometric state."""
    moves = []
    cur = state
    for e in edges:
        cur, m = flip(cur, e, direction)
        moves.append(m)
    return cur, FlipWord(tuple(moves), state.triangulation, cur.triangulation)


def parse_word(t, tokens):
    """Combinatorial word from tokens ``edge:R`` / ``edge:B`` (``~`` prefix = backward)."""
    moves = []
    cur = t
    for tok in tokens:
        tok = tok.strip()
        direction = FORWARD
        if tok.startswith("~"):
            direction = BACKWARD
            tok = tok[1:]
        if ":" not in tok:
            raise InapplicableWord(f"token {tok!r} needs an outcome colour, e.g. {tok}:R")
        edge, col = tok.split(":")
        try:
            cur, m = combinatorial_flip(cur, edge, Colour(col.upper()), direction)
        except (NotFlippable, KeyError, ValueError) as exc:
            raise InapplicableWord(f"cannot apply {tok!r}: {exc}") from exc
        moves.append(m)
    return FlipWord(tuple(moves), t, cur)


def resolve_word(t, tokens):
    """Combinatorial word from tokens that may omit the outcome colour.

    A bare edge takes the colour after which the next token is flippable.
    For the last bare edge the colour that brings the triangulation back to
    the isomorphism class of ``t`` is preferred; otherwise the edge keeps its
    colour.  Explicit ``edge:R`` / ``edge:B`` tokens are taken as given.
    """
    tokens = [tok.strip() for tok in tokens if tok.strip()]
    cur = t
    moves = []
    for i, tok in enumerate(tokens):
        if ":" in tok:
            m = parse_word(cur, [tok])
            cur = m.end
            moves.extend(m.moves)
            continue
        direction = BACKWARD if tok.startswith("~") else FORWARD
        edge = tok.lstrip("~")
        if not cur.is_flippable(edge, direction):
            raise InapplicableWord(f"{edge} is not {direction.value} flippable at move {i + 1}")
        options = []
        for colour in (cur.colour(edge), cur.colour(edge).other()):
            new, m = combinatorial_flip(cur, edge, colour, direction)
            if i + 1 < len(tokens):
                nxt = tokens[i + 1]
                nd = BACKWARD if nxt.startswith("~") else FORWARD
                ok = new.is_flippable(nxt.lstrip("~").split(":")[0], nd)
            else:
                ok = new.isomorphic(t)
            options.append((not ok, len(options), new, m))
        _, _, cur, m = min(options, key=lambda o: o[:2])
        moves.append(m)
    return FlipWord(tuple(moves), t, cur)


def replay(t, word):
    """Re-apply the moves of ``word`` to ``t``; raises InapplicableWord on failure."""
    cur = t
    moves = []
    for m in word.moves:
        try:
            cur, mm = combinatorial_flip(cur, m.edge, m.colour, m.direction)
        except (NotFlippable, KeyError) as exc:
            raise InapplicableWord(str(exc)) from exc
        moves.append(mm)
    return FlipWord(tuple(moves), t, cur)


def _identity(n):
    return [[int(i == j) for j in range(n)] for i in range(n)]


def _move_matrix(idx, pair, edge, inverse=False):
    n = len(idx)
    A = _identity(n)
    s = -1 if inverse else 1
    for p in pair:
        A[idx[edge]][idx[p]] += s
    return A


def _matmul(A, B):
    n = len(A)
    m = len(B[0])
    cols = list(zip(*B))
    return [[sum(a * b for a, b in zip(A[i], cols[j])) for j in range(m)] for i in range(n)]


def flip_matrix(word, labels=None):
    """Integer matrix A with x_start = A x_end, as nested lists in label order."""
    if labels is None:
        labels = word.start.labels
    idx = {l: i for i, l in enumerate(labels)}
    A = _identity(len(labels))
    for m in word.moves:
        A = _matmul(A, _move_matrix(idx, m.width_pair, m.edge, inverse=m.direction is BACKWARD))
    return A


def height_matrix(word, labels=None):
    """Integer matrix H with y_end = H y_start."""
    if labels is None:
        labels = word.start.labels
    idx = {l: i for i, l in enumerate(labels)}
    H = _identity(len(labels))
    for m in word.moves:
        H = _matmul(_move_matrix(idx, m.height_pair, m.edge, inverse=m.direction is BACKWARD), H)
    return H


def transpose(A):
    return [list(r) for r in zip(*A)]


def _span_basis(rows, n):
    """Exact basis (columns) of the solutions of ``rows``."""
    M = sympy.Matrix(rows) if rows else sympy.zeros(0, n)
    basis = M.nullspace() if rows else [sympy.eye(n)[:, k] for k in range(n)]
    return sympy.Matrix.hstack(*basis)


def area_defect(word, literal=False, on_cones=True):
    """Exact defect matrix of the area compatibility identity along ``word``.

    With W the area matrix (omega = y^T W x) the identity is
    H^T W_end = W_start A, where A transports widths back and H transports
    heights forward.  ``literal`` uses A in place of H.  With ``on_cones``
    the defect is taken between the spans of the start height cone and the
    end width cone, where the forms are actually defined.
    """
    A = sympy.Matrix(flip_matrix(word))
    H = A if literal else sympy.Matrix(height_matrix(word))
    W0 = sympy.Matrix(omega_matrix(word.start))
    Wn = sympy.Matrix(omega_matrix(word.end))
    D = H.T * Wn - W0 * A
    if on_cones:
        n = len(word.start.labels)
        Q0 = _span_basis(height_equalities(word.start), n)
        Pn = _span_basis(width_equalities(word.end), n)
        D = Q0.T * D * Pn
    return D


def area_compatibility(word, literal=False, on_cones=True):
    """True when the area forms at the two ends of ``word`` correspond exactly.

    H coincides with A whenever no move changes the colour of its edge, so
    the literal form holds for such words.
    """
    return area_defect(word, literal, on_cones).is_zero_matrix


def phi_coordinates(word):
    """Signed flip counts per label: +1 per forward move, -1 per backward move."""
    counts = {l: 0 for l in word.start.labels} if word.start is not None else {}
    for m in word.moves:
        counts[m.edge] = counts.get(m.edge, 0) + (1 if m.direction is FORWARD else -1)
    return counts


def _greedy_to(state, target, direction, cap):
    """Flip labels whose count is on the wrong side of ``target`` until none is."""
    counts = {l: 0 for l in state.triangulation.labels}
    moves = []
    cur = state
    sign = 1 if direction is FORWARD else -1
    while True:
        behind = [l for l in sorted(counts) if sign * (target[l] - counts[l]) > 0]
        if not behind:
            break
        if len(moves) >= cap:
            raise JoinStalled(f"cap {cap} reached with labels {behind} behind target")
        eligible = [l for l in behind if cur.triangulation.is_flippable(l, direction)]
        if not eligible:
            raise JoinStalled(f"no flippable label among {behind}")
        cur, m = flip(cur, eligible[0], direction)
        counts[m.edge] += sign
        moves.append(m)
    return cur, FlipWord(tuple(moves), state.triangulation, cur.triangulation)


def reach_phi(state, target, cap=10**4):
    """Forward word from ``state`` whose signed flip counts equal ``target``."""
    return _greedy_to(state, dict(target), FORWARD, cap)


def lattice_join(state, u, v):
    """Forward word from the end of ``u`` reaching coordinatewise max of Phi(u), Phi(v).

    ``u`` and ``v`` are edge sequences of forward flips from ``state``.
    Returns ``(end_state, word)`` where ``word`` continues ``u``.
    """
    su, wu = apply_word(state, u)
    _, wv = apply_word(state, v)
    pu, pv = phi_coordinates(wu), phi_coordinates(wv)
    target = {l: max(pu[l], pv[l]) - pu[l] for l in pu}
    cap = 10 * sum(abs(max(pu[l], pv[l])) for l in pu) + 10
    return _greedy_to(su, target, FORWARD, cap)


def lattice_meet(state, u, v):
    """Backward word from the end of ``u`` down to coordinatewise min of Phi(u), Phi(v)."""
    su, wu = apply_word(state, u)
    _, wv = apply_word(state, v)
    pu, pv = phi_coordinates(wu), phi_coordinates(wv)
    target = {l: min(pu[l], pv[l]) - pu[l] for l in pu}
    cap = 10 * sum(abs(min(pu[l], pv[l])) for l in pu) + 10 * sum(abs(x) for x in pu.values()) + 10
    return _greedy_to(su, target, BACKWARD, cap)
