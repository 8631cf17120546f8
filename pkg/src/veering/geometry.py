"""Edge vectors, widths and heights, the area form, and the width/height cones."""

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np
import sympy
from scipy.optimize import linprog

from .triangulation import BACKWARD, BLUE, FORWARD, RED, TriangulationError

REL_TOL = 1e-12
AXIS_TOL = 1e-15


class GeometryError(Exception):
    pass


class AxisAlignedEdge(GeometryError):
    pass


class Monochromatic(GeometryError):
    pass


class EmptyCone(GeometryError):
    pass


class ClosureError(GeometryError):
    pass


@dataclass(frozen=True, eq=False)
class SurfaceState:
    """A triangulation with one vector ``(dx, dy)`` per label.

    Vectors are defined up to sign.  In each triangle the signs that close up
    the boundary are recovered by ``chart_signs``.
    """

    triangulation: object
    vectors: dict

    def widths(self):
        return {l: abs(v[0]) for l, v in self.vectors.items()}

    def heights(self):
        return {l: abs(v[1]) for l, v in self.vectors.items()}

    def width_array(self):
        return np.array([abs(self.vectors[l][0]) for l in self.triangulation.labels])

    def height_array(self):
        return np.array([abs(self.vectors[l][1]) for l in self.triangulation.labels])

    def scaled(self, sx, sy):
        return SurfaceState(self.triangulation, {l: (v[0] * sx, v[1] * sy) for l, v in self.vectors.items()})

    def flowed(self, t):
        return self.scaled(math.exp(t), math.exp(-t))


def chart_signs(vectors):
    """Signs s with s0 = +1 making s . v close up anticlockwise.

    Returns ``(signs, residual)``; the residual is relative to the largest
    coordinate involved.
    """
    (x0, y0), (x1, y1), (x2, y2) = vectors
    best = None
    for s1 in (1, -1):
        for s2 in (1, -1):
            rx = x0 + s1 * x1 + s2 * x2
            ry = y0 + s1 * y1 + s2 * y2
            cross = x0 * s1 * y1 - y0 * s1 * x1
            res = max(abs(rx), abs(ry))
            cand = (res, cross <= 0, (1, s1, s2))
            if best is None or cand[:2] < best[:2]:
                best = cand
    scale = max(abs(x0), abs(y0), abs(x1), abs(y1), abs(x2), abs(y2)) or 1.0
    res, clockwise, signs = best
    if clockwise:
        return signs, math.inf
    return signs, res / scale


def slot_vectors(state, ti):
    """Boundary vectors of triangle ``ti`` in a chart of that triangle."""
    tri = state.triangulation.triangles[ti]
    vecs = [state.vectors[s.label] for s in tri]
    signs, _ = chart_signs(vecs)
    return [(s * v[0], s * v[1]) for s, v in zip(signs, vecs)]


def closure_residual(state):
    worst = 0.0
    for ti, tri in enumerate(state.triangulation.triangles):
        _, res = chart_signs([state.vectors[s.label] for s in tri])
        worst = max(worst, res)
    return worst


def derive_views(state):
    """Widths, heights and slope colours of a state."""
    vals = list(state.vectors.values())
    big = max(max(abs(v[0]), abs(v[1])) for v in vals)
    x, y, colours = {}, {}, {}
    for label, (dx, dy) in state.vectors.items():
        if abs(dx) <= AXIS_TOL * big or abs(dy) <= AXIS_TOL * big:
            raise AxisAlignedEdge(f"edge {label} is horizontal or vertical: ({dx!r}, {dy!r})")
        x[label] = abs(dx)
        y[label] = abs(dy)
        colours[label] = RED if dx * dy > 0 else BLUE
    return x, y, colours


def colours_match(state):
    _, _, colours = derive_views(state)
    t = state.triangulation
    return all(colours[l] is t.colour(l) for l in t.labels)


def triangle_roles(colours):
    """Positions ``(wide, tall, small)`` inside an anticlockwise triangle.

    With a blue majority the wide edge is the blue one followed by blue;
    with a red majority it is the red one preceded by red.  The tall edge
    is the other majority edge and the small edge is the odd one out.
    """
    colours = tuple(colours)
    if colours.count(RED) in (0, 3):
        raise Monochromatic(f"triangle coloured {[c.value for c in colours]}")
    if colours.count(BLUE) == 2:
        for i in range(3):
            if colours[i] is BLUE and colours[(i + 1) % 3] is BLUE:
                return i, (i + 1) % 3, (i + 2) % 3
    for i in range(3):
        if colours[i] is RED and colours[(i - 1) % 3] is RED:
            return i, (i - 1) % 3, (i + 1) % 3
    raise AssertionError("unreachable")


def roles(t, ti):
    """Labels ``(wide, tall, small)`` of triangle ``ti``."""
    tri = t.triangles[ti]
    w, h, s = triangle_roles(t.slot_colours(ti))
    return tri[w].label, tri[h].label, tri[s].label


def all_roles(t):
    return [roles(t, ti) for ti in range(len(t.triangles))]


def area(state):
    """Total area by the shoelace formula on each triangle."""
    total = 0.0
    for ti in range(len(state.triangulation.triangles)):
        (ax, ay), (bx, by), _ = slot_vectors(state, ti)
        total += 0.5 * abs(ax * by - ay * bx)
    return total


def omega(t, x, y):
    """Area of the surface with widths ``x`` and heights ``y``.

    Per triangle, twice the area is x_wide y_small + x_small y_tall - x_small y_small.
    """
    total = 0.0
    for w, h, s in all_roles(t):
        total += x[w] * y[s] + x[s] * y[h] - x[s] * y[s]
    return 0.5 * total


def omega_matrix(t):
    """Exact matrix W with omega(x, y) = y^T W x in the sorted label basis."""
    idx = t.index()
    n = len(idx)
    W = [[Fraction(0)] * n for _ in range(n)]
    half = Fraction(1, 2)
    for w, h, s in all_roles(t):
        W[idx[s]][idx[w]] += half
        W[idx[h]][idx[s]] += half
        W[idx[s]][idx[s]] -= half
    return W


def width_equalities(t):
    idx = t.index()
    rows = []
    for w, h, s in all_roles(t):
        row = [0] * len(idx)
        row[idx[w]] += 1
        row[idx[h]] -= 1
        row[idx[s]] -= 1
        rows.append(tuple(row))
    return rows


def height_equalities(t):
    idx = t.index()
    rows = []
    for w, h, s in all_roles(t):
        row = [0] * len(idx)
        row[idx[h]] += 1
        row[idx[w]] -= 1
        row[idx[s]] -= 1
        rows.append(tuple(row))
    return rows


def _max_support(rows, n):
    """Largest set of coordinates that can be simultaneously positive."""
    # variables (x, z): maximise sum z with z <= x, z <= 1, x in the cone
    A_eq = np.hstack([np.array(rows, dtype=float), np.zeros((len(rows), n))])
    A_ub = np.hstack([-np.eye(n), np.eye(n)])
    res = linprog(
        -np.r_[np.zeros(n), np.ones(n)],
        A_ub=A_ub,
        b_ub=np.zeros(n),
        A_eq=A_eq,
        b_eq=np.zeros(len(rows)),
        bounds=[(0, 1e4)] * n + [(0, 1)] * n,
        method="highs",
    )
    if res.status != 0:
        raise GeometryError(f"support program failed: {res.message}")
    return tuple(i for i in range(n) if res.x[n + i] > 0.5)


def _interior_margin(rows, n):
    """max t with x >= t, sum x = 1 on the cone; positive iff interior exists."""
    A_eq = np.vstack([np.hstack([np.array(rows, dtype=float), np.zeros((len(rows), 1))]), np.r_[np.ones(n), 0.0]])
    b_eq = np.r_[np.zeros(len(rows)), 1.0]
    A_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
    res = linprog(
        -np.r_[np.zeros(n), 1.0],
        A_ub=A_ub,
        b_ub=np.zeros(n),
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=[(0, None)] * n + [(None, None)],
        method="highs",
    )
    if res.status != 0:
        return 0.0
    return float(res.x[-1])


@dataclass(frozen=True)
class WidthCone:
    """Nonnegative solutions of one linear equality per triangle.

    ``linear_dim`` is ambient dimension minus the rank of the equalities;
    ``dim`` is the dimension of the cone itself, which is smaller when some
    coordinates are forced to vanish.
    """

    labels: tuple
    equalities: tuple
    rank: int
    linear_dim: int
    dim: int
    support: tuple
    interior_margin: float
    kind: str = "width"

    @property
    def ambient_dim(self):
        return len(self.labels)

    @property
    def has_interior(self):
        return self.interior_margin > 1e-12


def _rank(rows, n, cols=None):
    if not rows:
        return 0
    M = np.array(rows, dtype=float)
    if cols is not None:
        M = M[:, list(cols)]
        if M.shape[1] == 0:
            return 0
    return int(np.linalg.matrix_rank(M))


def _cone(t, rows, kind):
    n = len(t.labels)
    rank = _rank(rows, n)
    support = _max_support(rows, n)
    if len(support) == n:
        dim = n - rank
    else:
        dim = len(support) - _rank(rows, n, support)
    return WidthCone(t.labels, tuple(rows), rank, n - rank, dim, support, _interior_margin(rows, n), kind)


def width_cone(t):
    return _cone(t, width_equalities(t), "width")


def height_cone(t):
    return _cone(t, height_equalities(t), "height")


@dataclass(frozen=True)
class VertexCycleSet:
    labels: tuple
    cycles: tuple
    B: Fraction

    def alpha(self, u, label):
        return self.cycles[u][self.labels.index(label)]

    def as_floats(self):
        return np.array([[float(v) for v in c] for c in self.cycles])


def vertex_cycles(cone):
    """Extreme points of the cone intersected with the simplex, exactly.

    A point is extreme iff its support carries a one-dimensional kernel, so
    supports are scanned by size and every such kernel of constant sign is
    kept.  Supports are restricted to the coordinates that can be positive.
    """
    M = sympy.Matrix(cone.equalities) if cone.equalities else sympy.zeros(0, cone.ambient_dim)
    n = cone.ambient_dim
    found = []
    supports = []
    for size in range(1, len(cone.support) + 1):
        for S in combinations(cone.support, size):
            if any(set(s) <= set(S) for s in supports):
                continue
            sub = M[:, list(S)] if M.rows else sympy.zeros(0, len(S))
            kernel = sub.nullspace() if M.rows else [sympy.eye(len(S))[:, k] for k in range(len(S))]
            if len(kernel) != 1:
                continue
            vec = [sympy.Rational(v) for v in kernel[0]]
            if all(v > 0 for v in vec) or all(v < 0 for v in vec):
                total = sum(vec)
                point = [Fraction(0)] * n
                for i, v in zip(S, vec):
                    q = v / total
                    point[i] = Fraction(int(q.p), int(q.q))
                found.append(tuple(point))
                supports.append(S)
    if not found:
        raise EmptyCone("no nonzero nonnegative solution")
    B = min(v for c in found for v in c if v > 0)
    return VertexCycleSet(cone.labels, tuple(found), B)


def is_core(t, expected_dim):
    """Both cones attain ``expected_dim`` and have interior points."""
    wc, hc = width_cone(t), height_cone(t)
    return wc.dim == hc.dim == expected_dim and wc.has_interior and hc.has_interior


def forward_widths_ok(t, x):
    return {e: x[e] <= 1.0 for e in t.flippable(FORWARD)}


def backflip_width(t, x, e):
    """Width the diagonal would have after flipping ``e`` backward."""
    q = t.quad(e)
    return x[q.labels[1]] + x[q.labels[2]]


@dataclass(frozen=True)
class BalanceReport:
    con1: dict
    con2: dict

    @property
    def balanced(self):
        return all(self.con1.values()) and all(self.con2.values())

    def con1_failures(self):
        return sorted(k for k, v in self.con1.items() if not v)

    def con2_failures(self):
        return sorted(k for k, v in self.con2.items() if not v)


def check_balance(t, x, tol=0.0):
    """Balance conditions for widths ``x``.

    Forward flippable widths must be at most one and backward flippable
    edges must be more than one wide once flipped back.  ``tol`` loosens
    the first condition to absorb rounding at the upper boundary.
    """
    con1 = {e: x[e] <= 1.0 + tol for e in t.flippable(FORWARD)}
    con2 = {e: backflip_width(t, x, e) > 1.0 for e in t.flippable(BACKWARD)}
    return BalanceReport(con1, con2)


def state_from_widths_heights(t, x, y):
    """Edge vectors with the given widths, heights and the colours of ``t``."""
    vec = {}
    for l in t.labels:
        sy = 1.0 if t.colour(l) is RED else -1.0
        vec[l] = (float(x[l]), sy * float(y[l]))
    return SurfaceState(t, vec)


def triangle_identity_residual(t, x, y):
    """Worst relative violation of x_wide = x_tall + x_small and y_tall = y_wide + y_small."""
    worst = 0.0
    for w, h, s in all_roles(t):
        sx = max(x[w], x[h], x[s])
        sy = max(y[w], y[h], y[s])
        worst = max(worst, abs(x[w] - x[h] - x[s]) / sx, abs(y[h] - y[w] - y[s]) / sy)
    return worst


def validate_state(state):
    """List of geometric problems with a state (empty when consistent)."""
    problems = []
    t = state.triangulation
    try:
        x, y, colours = derive_views(state)
    except AxisAlignedEdge as exc:
        return [str(exc)]
    for l in t.labels:
        if colours[l] is not t.colour(l):
            problems.append(f"colour mismatch at {l}")
    res = closure_residual(state)
    if res > REL_TOL:
        problems.append(f"triangle closure residual {res:.3g}")
    return problems


def edge_rectangles_ok(state):
    """Local form of the edge-rectangle property.

    In every triangle, no vertex lies strictly inside the axis-parallel
    rectangle having one of the triangle's edges as a diagonal.  A
    triangle fails exactly when its three edges share a slope sign.
    """
    for ti in range(len(state.triangulation.triangles)):
        v = slot_vectors(state, ti)
        pts = [(0.0, 0.0), v[0], (v[0][0] + v[1][0], v[0][1] + v[1][1])]
        for i in range(3):
            p, q, r = pts[i], pts[(i + 1) % 3], pts[(i + 2) % 3]
            inside_x = min(p[0], q[0]) < r[0] < max(p[0], q[0])
            inside_y = min(p[1], q[1]) < r[1] < max(p[1], q[1])
            if inside_x and inside_y:
                return False
    return True


__all__ = [
    "AxisAlignedEdge",
    "BalanceReport",
    "ClosureError",
    "EmptyCone",
    "GeometryError",
    "Monochromatic",
    "SurfaceState",
    "TriangulationError",
    "VertexCycleSet",
    "WidthCone",
    "area",
    "backflip_width",
    "chart_signs",
    "check_balance",
    "closure_residual",
    "derive_views",
    "edge_rectangles_ok",
    "height_cone",
    "is_core",
    "omega",
    "omega_matrix",
    "roles",
    "slot_vectors",
    "state_from_widths_heights",
    "triangle_roles",
    "vertex_cycles",
    "width_cone",
]
