"""Balanced states, the flow, first returns to the transversal, and coding.

The flow scales widths by e^t and heights by e^-t.  A balanced state flows
until its widest edge reaches width one, where every forward flippable
edge of width one is flipped; that is one return to the transversal.

States here carry widths and heights as arrays in label order.  Flips act
on them directly:

* forward: x'_e = |x_d - x_a|, y'_e = y_a + y_d, red iff x_d > x_a
* backward: x'_e = x_a + x_d, y'_e = |y_a - y_d|, red iff y_a > y_d

where a, b, c, d are the sides of the quad about e.  These agree with the
vector flip in ``flips`` (checked in the tests) and avoid the cost of
rebuilding charts on long runs.
"""

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    height_cone,
    omega,
    state_from_widths_heights,
    vertex_cycles,
    width_cone,
)
from .triangulation import BACKWARD, BLUE, FORWARD, RED, Triangulation

WIDTH_ONE_TOL = 1e-12
DEGENERATE_TOL = 1e-15
AREA_TOL = 1e-9


class FlowError(Exception):
    pass


class NonKeaneDetected(FlowError):
    pass


class IterationCap(FlowError):
    pass


class NotBalancedAfterFlip(FlowError):
    pass


class ThetaNeverSeen(FlowError):
    pass


class NotBalanced(FlowError):
    pass


class FlipTable:
    """Interned triangulations with cached quads, flip results and symbols.

    Labelled triangulations reached from one start form a finite set up to
    the sign flags, so caching by identity of interned objects makes long
    runs cheap.
    """

    def __init__(self):
        self._interned = {}
        self._fwd = {}
        self._bwd = {}
        self._next = {}
        self._class = {}
        self._symbol = {}
        # caches are keyed by id(); holding the objects keeps those ids unique
        self._pinned = {}

    def intern(self, t):
        key = t.key()
        got = self._interned.get(key)
        if got is None:
            self._interned[key] = t
            got = t
        return got

    def _quads(self, t, direction):
        idx = t.index()
        out = []
        for e in sorted(t.flippable(direction), key=idx.get):
            a, b, c, d = t.quad(e).labels
            out.append((idx[e], idx[a], idx[b], idx[c], idx[d]))
        return tuple(out)

    def forward(self, t):
        """Tuples (e, a, b, c, d) of label indices for forward flippable edges."""
        got = self._fwd.get(id(t))
        if got is None:
            self._pinned[id(t)] = t
            got = self._fwd[id(t)] = self._quads(t, FORWARD)
        return got

    def backward(self, t):
        got = self._bwd.get(id(t))
        if got is None:
            self._pinned[id(t)] = t
            got = self._bwd[id(t)] = self._quads(t, BACKWARD)
        return got

    def after(self, t, e, colour, direction):
        key = (id(t), e, colour, direction)
        got = self._next.get(key)
        if got is None:
            self._pinned[id(t)] = t
            label = t.labels[e]
            got = self.intern(t.flip(label, colour, direction))
            self._next[key] = got
        return got

    def class_key(self, t):
        """Short stable name for the isomorphism class of ``t``."""
        got = self._class.get(id(t))
        if got is None:
            self._pinned[id(t)] = t
            canon = t.canonical_form()
            got = hashlib.sha1(repr(canon).encode()).hexdigest()[:10]
            self._class[id(t)] = got
        return got

    def symbol(self, t, e, colour):
        """Relabelling-invariant name of the move flipping label index ``e``."""
        key = (id(t), e, colour)
        got = self._symbol.get(key)
        if got is None:
            self._pinned[id(t)] = t
            label = t.labels[e]
            best = None
            names = set()
            for ti in range(len(t.triangles)):
                for r in range(3):
                    code, relabel = t._walk(ti, r)
                    if best is None or code < best:
                        best, names = code, set()
                    if code == best:
                        names.add(relabel[label])
            got = f"{self.class_key(t)}/{min(names)}{colour.value}"
            self._symbol[key] = got
        return got


DEFAULT_TABLE = FlipTable()


@dataclass
class FlowState:
    """Triangulation with widths ``x`` and heights ``y`` in label order."""

    triangulation: Triangulation
    x: np.ndarray
    y: np.ndarray

    @property
    def labels(self):
        return self.triangulation.labels

    def copy(self):
        return FlowState(self.triangulation, self.x.copy(), self.y.copy())

    def widths(self):
        return dict(zip(self.labels, self.x.tolist()))

    def heights(self):
        return dict(zip(self.labels, self.y.tolist()))

    def area(self):
        return omega(self.triangulation, self.widths(), self.heights())

    def surface_state(self):
        return state_from_widths_heights(self.triangulation, self.widths(), self.heights())

    def flowed(self, t):
        return FlowState(self.triangulation, self.x * math.exp(t), self.y * math.exp(-t))

    @classmethod
    def from_surface(cls, s):
        t = s.triangulation
        return cls(t, np.array([abs(s.vectors[l][0]) for l in t.labels]), np.array([abs(s.vectors[l][1]) for l in t.labels]))


def flip_forward(state, e, table=DEFAULT_TABLE):
    """Forward flip of label index ``e`` in place; returns (colour, (a, b, c, d))."""
    t = state.triangulation
    quad = next((q for q in table.forward(t) if q[0] == e), None)
    if quad is None:
        raise FlowError(f"{t.labels[e]} is not forward flippable")
    _, a, b, c, d = quad
    x, y = state.x, state.y
    diff = x[d] - x[a]
    scale = x[e]
    if abs(diff) <= DEGENERATE_TOL * scale:
        raise NonKeaneDetected(f"tie x_a = x_d while flipping {t.labels[e]}")
    colour = RED if diff > 0 else BLUE
    x[e] = abs(diff)
    y[e] = y[a] + y[d]
    state.triangulation = table.after(t, e, colour, FORWARD)
    return colour, (a, b, c, d)


def flip_backward(state, e, table=DEFAULT_TABLE):
    t = state.triangulation
    quad = next((q for q in table.backward(t) if q[0] == e), None)
    if quad is None:
        raise FlowError(f"{t.labels[e]} is not backward flippable")
    _, a, b, c, d = quad
    x, y = state.x, state.y
    diff = y[a] - y[d]
    if abs(diff) <= DEGENERATE_TOL * y[e]:
        raise NonKeaneDetected(f"tie y_a = y_d while back-flipping {t.labels[e]}")
    colour = RED if diff > 0 else BLUE
    x[e] = x[a] + x[d]
    y[e] = abs(diff)
    state.triangulation = table.after(t, e, colour, BACKWARD)
    return colour, (a, b, c, d)


# balance


def balance_violations(state, table=DEFAULT_TABLE, tol=0.0):
    """Labels (indices) failing each balance condition.

    ``tol`` widens the first condition and allows the second to be tight,
    which is the situation just after a return.
    """
    x = state.x
    con1 = [q[0] for q in table.forward(state.triangulation) if x[q[0]] > 1.0 + tol]
    con2 = [q[0] for q in table.backward(state.triangulation) if x[q[1]] + x[q[4]] <= 1.0 - tol]
    return con1, con2


def is_balanced(state, table=DEFAULT_TABLE, tol=0.0):
    con1, con2 = balance_violations(state, table, tol)
    return not con1 and not con2


def make_balanced(state, table=DEFAULT_TABLE, cap=10**6, tol=1e-12):
    """The balanced triangulation of the surface carried by ``state``.

    First back-flip every backward flippable edge whose back-flipped width is
    at most one, repeating until none is left; then forward-flip every
    forward flippable edge wider than one, repeating likewise.  Returns a
    new state and the number of flips performed.

    A back-flipped width within ``tol`` of one counts as one, so a state
    sitting on the upper boundary is represented by its unflipped form
    whichever side rounding put it on.
    """
    cur = state.copy()
    cur.triangulation = table.intern(cur.triangulation)
    flips = 0
    x = cur.x
    for _ in range(cap):
        con2 = [q[0] for q in table.backward(cur.triangulation) if x[q[1]] + x[q[4]] <= 1.0 + tol]
        if con2:
            for e in con2:
                if any(q[0] == e for q in table.backward(cur.triangulation)):
                    flip_backward(cur, e, table)
                    flips += 1
            continue
        con1 = [q[0] for q in table.forward(cur.triangulation) if x[q[0]] > 1.0 + tol]
        if con1:
            for e in con1:
                if any(q[0] == e for q in table.forward(cur.triangulation)):
                    flip_forward(cur, e, table)
                    flips += 1
            continue
        return cur, flips
    raise IterationCap(f"no balanced triangulation after {cap} rounds")


# returns


@dataclass(frozen=True)
class ReturnEvent:
    roof: float
    flipped: tuple
    symbol_key: str
    moves: tuple = ()
    pairs: tuple = ()


def roof_time(state):
    return 0.0 - math.log(float(np.max(state.x)))


def advance(state, table=DEFAULT_TABLE, tol=WIDTH_ONE_TOL):
    """Flow to the upper boundary and flip every forward flippable edge of width one.

    Mutates ``state`` and returns the ReturnEvent.  Scaling divides widths by
    the largest width, so that width is exactly one afterwards.
    """
    m = float(np.max(state.x))
    roof = 0.0 - math.log(m)
    state.x /= m
    state.y *= m
    t0 = state.triangulation
    batch = [q[0] for q in table.forward(t0) if state.x[q[0]] >= 1.0 - tol]
    if not batch:
        raise NotBalanced("widest edge is not forward flippable; state is not balanced")
    moves, pairs = [], []
    for e in batch:
        before = state.triangulation
        colour, (a, b, c, d) = flip_forward(state, e, table)
        moves.append(table.symbol(before, e, colour))
        pairs.append((e, a, c) if colour is RED else (e, b, d))
    con1, con2 = balance_violations(state, table, tol=1e-9)
    if con1 or con2:
        raise NotBalancedAfterFlip(f"after flipping {[t0.labels[e] for e in batch]}: con1 {con1}, con2 {con2}")
    labels = state.triangulation.labels
    return ReturnEvent(roof, tuple(labels[e] for e in batch), table.class_key(state.triangulation), tuple(moves), tuple(pairs))


@dataclass
class Trajectory:
    start: FlowState
    events: list = field(default_factory=list)
    rng_seed: object = None
    abort_reason: str = ""
    end: FlowState = None

    def roofs(self):
        return np.array([ev.roof for ev in self.events])

    def total_time(self):
        return float(sum(ev.roof for ev in self.events))

    def symbols(self):
        return [m for ev in self.events for m in ev.moves]

    def move_durations(self):
        """Roof of the event each move belongs to, spread over its batch."""
        out = []
        for ev in self.events:
            n = len(ev.moves)
            out.extend([ev.roof / n] * n)
        return out


def run_trajectory(state, n_returns, renorm_every=1000, table=DEFAULT_TABLE, on_event=None, seed=None):
    """Sequence of ``n_returns`` returns from a balanced state.

    Every ``renorm_every`` events the heights are rescaled to unit area if
    the area has drifted by more than 1e-9 (0 disables).  Errors end the run
    early with ``abort_reason`` set.
    """
    cur = state.copy()
    cur.triangulation = table.intern(cur.triangulation)
    traj = Trajectory(state.copy(), [], seed)
    for i in range(n_returns):
        try:
            ev = advance(cur, table)
        except FlowError as exc:
            traj.abort_reason = f"event {i}: {type(exc).__name__}: {exc}"
            break
        traj.events.append(ev)
        if on_event is not None:
            on_event(i, cur, ev)
        if renorm_every and (i + 1) % renorm_every == 0:
            a = cur.area()
            if abs(a - 1.0) > AREA_TOL:
                cur.y /= a
    traj.end = cur
    return traj


# sampling


def _simplex_point(rng, cycles):
    w = rng.dirichlet(np.ones(len(cycles)))
    return w @ cycles


def hit_and_run(rng, rows, n, start, steps=50):
    """Uniform-ish point of {x >= 0, rows x = 0, sum x = 1} by hit-and-run from ``start``."""
    A = np.vstack([np.array(rows, dtype=float), np.ones(n)]) if rows else np.ones((1, n))
    _, s, vt = np.linalg.svd(A)
    rank = int(np.sum(s > 1e-10))
    basis = vt[rank:]
    x = np.array(start, dtype=float)
    for _ in range(steps):
        d = rng.standard_normal(len(basis)) @ basis
        d /= np.linalg.norm(d)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = -x / d
        lo = np.max(ratios[d > 1e-14], initial=-np.inf)
        hi = np.min(ratios[d < -1e-14], initial=np.inf)
        x = x + rng.uniform(lo, hi) * d
        x = np.clip(x, 0.0, None)
    return x


def cone_sampler(cone):
    """Function rng -> uniform point of the cone intersected with the simplex."""
    cyc = vertex_cycles(cone).as_floats()
    if len(cyc) == cone.dim:
        return lambda rng: _simplex_point(rng, cyc)
    centre = cyc.mean(axis=0)
    rows = list(cone.equalities)
    n = cone.ambient_dim
    return lambda rng: hit_and_run(rng, rows, n, centre)


def sample_state(t, rng, balanced=True, table=DEFAULT_TABLE):
    """Random unit-area state on ``t``, balanced unless told otherwise.

    Widths are uniform on the width cone in the simplex, rescaled so that
    forward flippable widths are at most one; heights are uniform on the
    height cone in the simplex, rescaled to unit area.
    """
    xs = cone_sampler(width_cone(t))(rng)
    ys = cone_sampler(height_cone(t))(rng)
    fwd = [t.index()[e] for e in t.flippable(FORWARD)]
    top = max(xs[fwd]) if fwd else max(xs)
    x = xs / top
    y = ys / omega(t, dict(zip(t.labels, x)), dict(zip(t.labels, ys)))
    state = FlowState(table.intern(t), x, y)
    if balanced:
        state, _ = make_balanced(state, table)
    return state


# expansions and coding


def forward_expansion(state, n_moves, table=DEFAULT_TABLE, stop_label=None):
    """Flip the widest edge ``n_moves`` times (the flip sequence of the widths).

    Widths are renormalised by exact powers of two so long runs neither
    underflow nor lose relative precision.  Returns the list of
    (label index, colour, symbol) and the final state.  With ``stop_label``
    the run halts just before that label would flip.
    """
    cur = state.copy()
    cur.triangulation = table.intern(cur.triangulation)
    out = []
    for _ in range(n_moves):
        e = int(np.argmax(cur.x))
        if stop_label is not None and e == stop_label:
            break
        before = cur.triangulation
        colour, _ = flip_forward(cur, e, table)
        out.append((e, colour, table.symbol(before, e, colour)))
        if cur.x[e] < 2.0**-200:
            cur.x *= 2.0**200
            cur.y *= 2.0**-200
    return out, cur


def random_forward_word(state, n_moves, rng, table=DEFAULT_TABLE):
    """Tokens ``edge:colour`` of ``n_moves`` forward flips chosen uniformly at random.

    Outcome colours come from the geometry of ``state``.  Returns the tokens
    and the final state.
    """
    cur = state.copy()
    cur.triangulation = table.intern(cur.triangulation)
    tokens = []
    for _ in range(n_moves):
        quads = table.forward(cur.triangulation)
        e = quads[int(rng.integers(len(quads)))][0]
        label = cur.triangulation.labels[e]
        colour, _ = flip_forward(cur, e, table)
        tokens.append(f"{label}:{colour.value}")
        if cur.x[e] < 2.0**-200:
            cur.x *= 2.0**200
            cur.y *= 2.0**-200
    return tokens, cur


def integer_widths(t, rng, bits=4096):
    """Exact random point of the width cone as Python integers.

    A random convex combination of the vertex cycles, cleared of
    denominators and carried with ``bits`` random bits per weight, so the
    triangle equalities hold exactly and ties are pushed far down the
    expansion.  Returns (widths, scale) where widths / scale is balanced in
    the sense that the largest forward flippable width is one.
    """
    cyc = vertex_cycles(width_cone(t)).cycles
    den = math.lcm(*(v.denominator for c in cyc for v in c))
    weights = [int.from_bytes(rng.bytes(bits // 8), "big") | 1 for _ in cyc]
    x = [sum(w * int(c[i] * den) for w, c in zip(weights, cyc)) for i in range(len(t.labels))]
    fwd = [t.index()[e] for e in t.flippable(FORWARD)]
    return x, max(x[i] for i in fwd)


def integer_expansion(t, x, n_moves, table=DEFAULT_TABLE):
    """Exact flip sequence of integer widths ``x``, always flipping the widest edge.

    Yields (label index, colour, old width, new width, triangulation after)
    per move; ``x`` is updated in place.
    """
    cur = table.intern(t)
    for _ in range(n_moves):
        e = max(range(len(x)), key=x.__getitem__)
        quad = next((q for q in table.forward(cur) if q[0] == e), None)
        if quad is None:
            raise FlowError(f"widest edge {cur.labels[e]} is not forward flippable")
        _, a, _, _, d = quad
        if x[a] == x[d]:
            raise NonKeaneDetected(f"exact tie while flipping {cur.labels[e]}")
        old = x[e]
        colour = RED if x[d] > x[a] else BLUE
        x[e] = abs(x[d] - x[a])
        cur = table.after(cur, e, colour, FORWARD)
        yield e, colour, old, x[e], cur


@dataclass
class CodingRecord:
    theta: tuple
    symbols: list
    durations: list
    tail: tuple = ()

    def flat(self):
        return [s for seg in self.symbols for s in seg] + list(self.tail)


def word_symbols(word, table=DEFAULT_TABLE):
    """Relabelling-invariant symbols of a combinatorial FlipWord."""
    cur = table.intern(word.start)
    out = []
    for m in word.moves:
        e = cur.labels.index(m.edge)
        out.append(table.symbol(cur, e, m.colour))
        cur = table.after(cur, e, m.colour, m.direction)
    return tuple(out)


def split_by_theta(symbols, theta, durations=None):
    """Cut ``symbols`` after each leftmost non-overlapping occurrence of ``theta``.

    Returns (segments, segment durations, leftover tail).
    """
    theta = tuple(theta)
    k = len(theta)
    segs, durs = [], []
    start = 0
    i = 0
    n = len(symbols)
    while i + k <= n:
        if tuple(symbols[i : i + k]) == theta:
            segs.append(tuple(symbols[start : i + k]))
            if durations is not None:
                durs.append(float(sum(durations[start : i + k])))
            start = i = i + k
        else:
            i += 1
    return segs, durs, tuple(symbols[start:])


def code_by_theta(traj, theta, table=DEFAULT_TABLE):
    """Split the trajectory's flip word at occurrences of ``theta``.

    ``theta`` is a FlipWord or a tuple of symbols.  Durations are the summed
    roofs of each segment, with a batch roof shared evenly by its moves.
    """
    theta_syms = word_symbols(theta, table) if hasattr(theta, "moves") else tuple(theta)
    syms = traj.symbols()
    segs, durs, tail = split_by_theta(syms, theta_syms, traj.move_durations())
    if not segs:
        raise ThetaNeverSeen(f"theta of length {len(theta_syms)} never seen in {len(syms)} moves")
    return CodingRecord(theta_syms, segs, durs, tail)


def count_occurrences(symbols, word):
    """Number of (possibly overlapping) occurrences of ``word`` in ``symbols``."""
    word = tuple(word)
    k = len(word)
    if k == 0:
        return 0
    first = word[0]
    return sum(1 for i in range(len(symbols) - k + 1) if symbols[i] == first and tuple(symbols[i : i + k]) == word)
