"""Labelled, coloured triangulations of a closed oriented surface with marked points.

A triangulation is stored as triangle/slot incidence.  Each triangle is an
anticlockwise triple of slots and each slot is a pair ``(label, sign)``.  The
two slots carrying a label have opposite signs, which is how orientability
shows up combinatorially.
"""

import enum
import random
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import NamedTuple


class Colour(enum.Enum):
    RED = "R"
    BLUE = "B"

    def other(self):
        return Colour.BLUE if self is Colour.RED else Colour.RED


RED = Colour.RED
BLUE = Colour.BLUE


class Direction(enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


FORWARD = Direction.FORWARD
BACKWARD = Direction.BACKWARD


class TriangulationError(Exception):
    pass


class NotVeering(TriangulationError):
    pass


class DegenerateQuad(TriangulationError):
    pass


class NotFlippable(TriangulationError):
    pass


class Slot(NamedTuple):
    label: str
    sign: int


def label_key(label):
    # numeric labels sort numerically, everything else lexicographically
    return (0, int(label), "") if label.isdigit() else (1, 0, label)


@dataclass(frozen=True)
class ValidationReport:
    failures: tuple = ()

    @property
    def ok(self):
        return not self.failures

    def __bool__(self):
        return self.ok


@dataclass(frozen=True)
class StratumDatum:
    kappa: tuple
    genus: int

    def total(self):
        return sum(self.kappa)

    def key(self):
        return tuple(sorted(self.kappa))


@dataclass(frozen=True)
class Quad:
    """The quadrilateral about an edge.

    ``slots`` holds the four boundary positions ``(triangle, index)`` in
    anticlockwise order a, b, c, d, with a, b in ``inner`` (the triangle
    holding the positive slot of the edge) and c, d in ``outer``.
    """

    edge: str
    inner: int
    outer: int
    slots: tuple
    labels: tuple


@dataclass(frozen=True, eq=False)
class Triangulation:
    triangles: tuple
    colours: dict
    genus: int
    marked: int
    _positions: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        tris = tuple(tuple(Slot(str(l), int(s)) for l, s in t) for t in self.triangles)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "colours", {str(k): Colour(v) for k, v in self.colours.items()})
        pos = {}
        for ti, tri in enumerate(tris):
            for i, slot in enumerate(tri):
                pos.setdefault(slot.label, []).append((ti, i))
        object.__setattr__(self, "_positions", {k: tuple(v) for k, v in pos.items()})

    # basic structure

    @property
    def labels(self):
        return tuple(sorted(self._positions, key=label_key))

    def index(self):
        return {l: i for i, l in enumerate(self.labels)}

    def positions(self, label):
        return self._positions[label]

    def slot(self, pos):
        ti, i = pos
        return self.triangles[ti][i]

    def twin(self, pos):
        first, second = self._positions[self.slot(pos).label]
        return second if pos == first else first

    def colour(self, label):
        return self.colours[label]

    def slot_colours(self, ti):
        return tuple(self.colours[s.label] for s in self.triangles[ti])

    def key(self):
        """Hashable description that ignores triangle order and rotation."""
        tris = []
        for tri in self.triangles:
            rots = [tri[i:] + tri[:i] for i in range(3)]
            tris.append(min(rots))
        cols = tuple(sorted((l, c.value) for l, c in self.colours.items()))
        return (tuple(sorted(tris)), cols, self.genus, self.marked)

    def __eq__(self, other):
        return isinstance(other, Triangulation) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        body = " ".join("".join(f"{s.label}{'+' if s.sign > 0 else '-'}" for s in t) for t in self.triangles)
        cols = "".join(self.colours[l].value for l in self.labels)
        return f"Triangulation(g={self.genus}, |Z|={self.marked}, [{body}], {cols})"

    # vertices

    def corner_cycles(self):
        """Cycles of corners around each vertex.

        Corner ``(t, i)`` sits at the end of slot i and the start of slot i+1.
        Crossing slot i lands at the start of its twin, which is the corner
        just before the twin.
        """
        seen = set()
        cycles = []
        for ti in range(len(self.triangles)):
            for i in range(3):
                if (ti, i) in seen:
                    continue
                cyc = []
                cur = (ti, i)
                while cur not in seen:
                    seen.add(cur)
                    cyc.append(cur)
                    t2, j = self.twin(cur)
                    cur = (t2, (j - 1) % 3)
                cycles.append(tuple(cyc))
        return cycles

    def vertex_links(self):
        """For every vertex, the circular list of edge labels met around it."""
        return [tuple(self.slot(c).label for c in cyc) for cyc in self.corner_cycles()]

    def vertex_count(self):
        return len(self.corner_cycles())

    # invariants

    def validate(self):
        fails = []
        counts = Counter(s.label for t in self.triangles for s in t)
        for label, n in sorted(counts.items()):
            if n != 2:
                fails.append(f"multiplicity: label {label} occurs {n} times")
        for label, n in counts.items():
            if n == 2:
                signs = [self.slot(p).sign for p in self._positions[label]]
                if sorted(signs) != [-1, 1]:
                    fails.append(f"orientability: label {label} has direction flags {signs}")
        for tri in self.triangles:
            if len(tri) != 3:
                fails.append(f"shape: triangle with {len(tri)} slots")
        if set(self.colours) != set(counts):
            fails.append("colours: colour map does not match the label set")
        g, z = self.genus, self.marked
        if g < 0 or z < 1:
            fails.append(f"topology: need g >= 0 and |Z| >= 1, got g={g}, |Z|={z}")
        n_tri = 4 * g - 4 + 2 * z
        n_edge = 6 * g - 6 + 3 * z
        if len(self.triangles) != n_tri:
            fails.append(f"euler: {len(self.triangles)} triangles, expected {n_tri}")
        if len(counts) != n_edge:
            fails.append(f"euler: {len(counts)} labels, expected {n_edge}")
        if not fails:
            v = self.vertex_count()
            if v - len(counts) + len(self.triangles) != 2 - 2 * g:
                fails.append(f"euler: V - E + F = {v - len(counts) + len(self.triangles)}, expected {2 - 2 * g}")
            if v != z:
                fails.append(f"vertices: corner walk finds {v} vertices, expected {z}")
            if not self._connected():
                fails.append("connectivity: triangles do not form a connected surface")
        return ValidationReport(tuple(fails))

    def _connected(self):
        seen = {0}
        todo = [0]
        while todo:
            ti = todo.pop()
            for i in range(3):
                t2, _ = self.twin((ti, i))
                if t2 not in seen:
                    seen.add(t2)
                    todo.append(t2)
        return len(seen) == len(self.triangles)

    def is_veering(self):
        for ti in range(len(self.triangles)):
            if len(set(self.slot_colours(ti))) == 1:
                return False
        for link in self.vertex_links():
            if len({self.colours[l] for l in link}) == 1:
                return False
        return True

    def stratum_datum(self):
        if not self.is_veering():
            raise NotVeering("stratum datum needs a veering triangulation")
        kappa = []
        for link in self.vertex_links():
            cols = [self.colours[l] for l in link]
            n = len(cols)
            switches = sum(1 for i in range(n) if cols[i] is RED and cols[(i + 1) % n] is BLUE)
            kappa.append(switches - 2)
        return StratumDatum(tuple(kappa), self.genus)

    # quads and flips

    def quad(self, edge):
        p, q = self._positions[edge]
        if p[0] == q[0]:
            raise DegenerateQuad(f"both sides of {edge} lie in triangle {p[0]}")
        if self.slot(p).sign < 0:
            p, q = q, p
        (t, i), (u, j) = p, q
        slots = ((t, (i + 1) % 3), (t, (i + 2) % 3), (u, (j + 1) % 3), (u, (j + 2) % 3))
        labels = tuple(self.slot(s).label for s in slots)
        return Quad(edge, t, u, slots, labels)

    def flippable(self, direction=FORWARD):
        out = set()
        for e in self.labels:
            try:
                q = self.quad(e)
            except DegenerateQuad:
                continue
            a, b, c, d = (self.colours[l] for l in q.labels)
            if direction is FORWARD and a is BLUE and c is BLUE and b is RED and d is RED:
                out.add(e)
            if direction is BACKWARD and a is RED and c is RED and b is BLUE and d is BLUE:
                out.add(e)
        return frozenset(out)

    def is_flippable(self, edge, direction=FORWARD):
        return edge in self.flippable(direction)

    def flip(self, edge, colour, direction=FORWARD):
        """Replace ``edge`` by the other diagonal of its quad, coloured ``colour``.

        The new triangles are (b, c, e) and (d, a, e).  A forward flip gives the
        new slot in (b, c, e) a negative sign and a backward flip a positive
        one, so that a flip followed by its reverse restores the direction
        flags exactly.
        """
        if not self.is_flippable(edge, direction):
            raise NotFlippable(f"{edge} is not {direction.value} flippable")
        q = self.quad(edge)
        sa, sb, sc, sd = (self.slot(s) for s in q.slots)
        sign = -1 if direction is FORWARD else 1
        tris = list(self.triangles)
        tris[q.inner] = (sb, sc, Slot(edge, sign))
        tris[q.outer] = (sd, sa, Slot(edge, -sign))
        cols = dict(self.colours)
        cols[edge] = Colour(colour)
        return Triangulation(tuple(tris), cols, self.genus, self.marked)

    # relabelling and isomorphism

    def relabel(self, mapping):
        tris = tuple(tuple(Slot(mapping[s.label], s.sign) for s in t) for t in self.triangles)
        cols = {mapping[l]: c for l, c in self.colours.items()}
        return Triangulation(tris, cols, self.genus, self.marked)

    def shuffled(self, rng=None):
        """Random relabelling, triangle reordering and rotation (for tests)."""
        rng = rng or random.Random()
        labels = list(self.labels)
        perm = labels[:]
        rng.shuffle(perm)
        t = self.relabel(dict(zip(labels, perm)))
        tris = [tri[k:] + tri[:k] for tri in t.triangles for k in [rng.randrange(3)]]
        rng.shuffle(tris)
        return Triangulation(tuple(tris), t.colours, self.genus, self.marked)

    def _code_from(self, start, rot):
        return self._walk(start, rot)[0]

    def _walk(self, start, rot):
        """Breadth-first code from a corner and the relabelling it induces."""
        order = {start: 0}
        queue = deque([(start, rot)])
        newlabel = {}
        code = []
        while queue:
            ti, r = queue.popleft()
            tri = self.triangles[ti]
            for k in range(3):
                i = (r + k) % 3
                label = tri[i].label
                if label not in newlabel:
                    newlabel[label] = len(newlabel)
                code.append((newlabel[label], self.colours[label].value))
                t2, j = self.twin((ti, i))
                if t2 not in order:
                    order[t2] = len(order)
                    queue.append((t2, j))
        return tuple(code), newlabel

    def canonical_form(self):
        best = None
        for ti in range(len(self.triangles)):
            for r in range(3):
                code = self._code_from(ti, r)
                if best is None or code < best:
                    best = code
        return (self.genus, self.marked, best)

    def isomorphic(self, other):
        return self.canonical_form() == other.canonical_form()

    def isomorphism(self, other):
        """A label map carrying ``self`` onto ``other``, or None."""
        if (self.genus, self.marked) != (other.genus, other.marked):
            return None
        code, mine = self._walk(0, 0)
        for ti in range(len(other.triangles)):
            for r in range(3):
                c2, theirs = other._walk(ti, r)
                if c2 == code:
                    back = {k: l for l, k in theirs.items()}
                    return {l: back[k] for l, k in mine.items()}
        return None


def canonical_form(t):
    return t.canonical_form()


def isomorphic(t, u):
    return t.isomorphic(u)


def validate(t):
    return t.validate()


def is_veering(t):
    return t.is_veering()


def stratum_datum(t):
    return t.stratum_datum()


def quad_about(t, edge):
    return t.quad(edge)


def flippable_edges(t, direction=FORWARD):
    return t.flippable(direction)


def from_gluing(triangles, colours, genus=None, marked=None):
    """Build a triangulation from label triples; signs are assigned + then -.

    Labels must each occur twice.  Genus and marked-point count are read
    off the corner walk when not given.
    """
    seen = set()
    tris = []
    for tri in triangles:
        row = []
        for label in tri:
            label = str(label)
            row.append((label, -1 if label in seen else 1))
            seen.add(label)
        tris.append(tuple(row))
    if genus is None or marked is None:
        probe = Triangulation(tuple(tris), colours, 0, 1)
        v = probe.vertex_count()
        e = len(probe.labels)
        f = len(tris)
        genus = (2 - (v - e + f)) // 2
        marked = v
    return Triangulation(tuple(tris), colours, genus, marked)
