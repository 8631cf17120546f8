"""Numerical checks of the estimates: Jacobians, distortion, Kerckhoff
fractions, roof tails, normality, the torus volume and the core graph."""

import itertools
import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy import integrate

from .flow import DEFAULT_TABLE, FlowState, forward_expansion, word_symbols
from .geometry import all_roles, height_cone, omega_matrix, vertex_cycles, width_cone
from .triangulation import BLUE, FORWARD, RED, Triangulation, label_key


class AnalysisError(Exception):
    pass


class SingularPoint(AnalysisError):
    pass


class BoundaryPoint(AnalysisError):
    pass


class InsufficientSamples(AnalysisError):
    pass


class QuadratureNonconvergence(AnalysisError):
    pass


class TooLarge(AnalysisError):
    pass


# Jacobians


@dataclass(frozen=True)
class JacobianReport:
    point: tuple
    analytic: float
    numeric: float
    rel_err: float


def projective_map(A, u):
    v = A @ u
    return v / v.sum()


def _fd_jacobian(f, s0, h):
    """Central-difference Jacobian matrix of ``f`` at ``s0``."""
    cols = []
    for k in range(len(s0)):
        ds = np.zeros(len(s0))
        ds[k] = h
        cols.append((f(s0 + ds) - f(s0 - ds)) / (2 * h))
    return np.column_stack(cols)


def _richardson(f, s0, h, volume):
    """Volume factor from steps h and h/2, extrapolated when they disagree."""
    v1 = volume(_fd_jacobian(f, s0, h))
    v2 = volume(_fd_jacobian(f, s0, h / 2))
    if abs(v1 - v2) <= 1e-4 * abs(v2):
        return v2
    return (4 * v2 - v1) / 3


def jacobian_full(A, u, h=1e-6):
    """Jacobian of u -> Au/|Au| on the simplex, numeric against |det A| / |Au|^d.

    The simplex is charted by its first d-1 coordinates on both sides, so the
    chart's constant volume factor cancels.  For flip matrices det A = 1.
    """
    A = np.asarray(A, dtype=float)
    u = np.asarray(u, dtype=float)
    d = len(u)
    if np.any(u <= 0) or abs(u.sum() - 1) > 1e-12:
        raise BoundaryPoint("u must be strictly positive with sum 1")
    norm = (A @ u).sum()
    if norm <= 0:
        raise SingularPoint("|Au| = 0")
    analytic = abs(np.linalg.det(A)) / norm**d

    def f(s):
        full = np.r_[s, 1 - s.sum()]
        return projective_map(A, full)[:-1]

    numeric = _richardson(f, u[:-1], h, lambda J: abs(np.linalg.det(J)))
    return JacobianReport(tuple(u), analytic, numeric, abs(analytic - numeric) / abs(analytic))


def _affine_chart(cone):
    """Orthonormal basis of the directions of cone span intersected with {sum = 0}."""
    n = cone.ambient_dim
    rows = [list(r) for r in cone.equalities] + [[1.0] * n]
    _, s, vt = np.linalg.svd(np.array(rows, dtype=float))
    rank = int(np.sum(s > 1e-10))
    return vt[rank:].T


def restricted_jacobian(A, cone, u, h=1e-6):
    """Numeric Jacobian of u -> Au/|Au| restricted to the polytope cone ∩ simplex.

    Volume on both sides is Euclidean (D-1)-volume, computed from the Gram
    determinant of the finite-difference derivative in orthonormal cone
    coordinates.
    """
    A = np.asarray(A, dtype=float)
    u = np.asarray(u, dtype=float)
    B = _affine_chart(cone)
    if np.any(u[list(cone.support)] <= 0):
        raise BoundaryPoint("u is not interior to the cone")
    return _richardson(lambda s: projective_map(A, u + B @ s), np.zeros(B.shape[1]), h, lambda J: math.sqrt(abs(np.linalg.det(J.T @ J))))


def jacobian_restricted_ratio(A, cone, u, u2, h=1e-6):
    """Numeric J(u)/J(u2) for the restricted projective map."""
    return restricted_jacobian(A, cone, u, h) / restricted_jacobian(A, cone, u2, h)


def predicted_restricted_ratio(A, cone, u, u2):
    """(|A u2| / |A u|)^D, the closed form of the restricted ratio."""
    A = np.asarray(A, dtype=float)
    return ((A @ np.asarray(u2, dtype=float)).sum() / (A @ np.asarray(u, dtype=float)).sum()) ** cone.dim


# normalisation bounds


def norm_bounds(t):
    """Lower and upper bounds for |x| on the upper boundary of a balanced triangulation.

    The upper bound is the edge count.  The lower bound is the number of
    distinct labels in the quad about a width-one edge, minimised over
    forward flippable edges: three when the four sides are distinct, two on
    the torus where the quad is (a, b, a, b).
    """
    low = math.inf
    for e in t.flippable(FORWARD):
        q = t.quad(e)
        sides = set(q.labels)
        low = min(low, 1 + len(sides) / 2)
    return low, len(t.labels)


def roof_matrix_gap(events, start_x, end_x, labels):
    """|sum of roofs - log |A rho(x_end)|| for the flips recorded in ``events``.

    ``events`` carry the width pairs of their moves; widths are on the upper
    boundary at both ends.
    """
    n = len(labels)
    A = [[int(i == j) for j in range(n)] for i in range(n)]
    for ev in events:
        for e, p, q in ev.pairs:
            # right-multiply by I + E_ep + E_eq: column p and q gain column e
            for row in A:
                row[p] += row[e]
                row[q] += row[e]
    xe = np.asarray(end_x, dtype=float)
    rho = xe / xe.sum()
    norm = sum(float(sum(A[i][j] * rho[j] for j in range(n))) for i in range(n))
    total = sum(ev.roof for ev in events)
    return abs(total - math.log(norm)), A


def rho_jacobian(t, x, e, h=1e-6):
    """Numeric Jacobian of x -> x/|x| on the facet {x_e = 1} of the width cone."""
    cone = width_cone(t)
    n = len(t.labels)
    ei = t.index()[e]
    rows = [list(r) for r in cone.equalities] + [[1.0 if i == ei else 0.0 for i in range(n)]]
    _, s, vt = np.linalg.svd(np.array(rows, dtype=float))
    B = vt[int(np.sum(s > 1e-10)) :].T
    x = np.asarray(x, dtype=float)
    J = _fd_jacobian(lambda s_: (x + B @ s_) / (x + B @ s_).sum(), np.zeros(B.shape[1]), h)
    return math.sqrt(abs(np.linalg.det(J.T @ J)))


# distortion


def _interior_points(cone, n_points):
    """Deterministic interior points of cone ∩ simplex (a grid on a segment)."""
    cyc = vertex_cycles(cone).as_floats()
    if len(cyc) == 2:
        s = (np.arange(n_points) + 0.5) / n_points
        return np.outer(1 - s, cyc[0]) + np.outer(s, cyc[1])
    rng = np.random.Generator(np.random.Philox(0))
    return rng.dirichlet(np.ones(len(cyc)), size=n_points) @ cyc


def distortion_of_matrix(A, cone, n_points=1000):
    """sup/inf of |Au|^-D over interior points of the end cone."""
    pts = _interior_points(cone, n_points)
    norms = (pts @ np.asarray(A, dtype=float).T).sum(axis=1)
    vals = norms ** (-cone.dim)
    return float(vals.max() / vals.min())


def distortion_of_word(word, n_points=1000):
    from .flips import flip_matrix

    if len(word) == 0:
        return 1.0
    return distortion_of_matrix(flip_matrix(word), width_cone(word.end), n_points)


def theta_constants(theta):
    """(m, B) for a loop ``theta``.

    m is the largest column sum of A_theta.  B is the smallest barycentric
    coefficient of the images A_theta v / |A_theta v| of the end vertex
    cycles, written in the vertex cycles of the start; the start polytope
    must be a simplex.
    """
    from .flips import flip_matrix

    A = np.array(flip_matrix(theta), dtype=float)
    m = float(A.sum(axis=0).max())
    start = vertex_cycles(width_cone(theta.start)).as_floats()
    end = vertex_cycles(width_cone(theta.end)).as_floats()
    if len(start) != width_cone(theta.start).dim:
        raise AnalysisError("start polytope is not a simplex")
    coeffs = []
    for v in end:
        z = A @ v
        z /= z.sum()
        b, *_ = np.linalg.lstsq(start.T, z, rcond=None)
        coeffs.extend(b)
    return m, float(min(coeffs))


def theta_distortion_bound(theta):
    """(m/B)^D, the distortion bound for any loop followed by ``theta``."""
    m, B = theta_constants(theta)
    if B <= 0:
        raise AnalysisError("theta does not map the polytope compactly into itself")
    return (m / B) ** width_cone(theta.start).dim


# Kerckhoff fractions


class _WidthFlips:
    """Widths-only forward flips with cached quads and successors."""

    def __init__(self, table=DEFAULT_TABLE):
        self.table = table
        self.info = {}

    def quad(self, t, e):
        key = (id(t), e)
        got = self.info.get(key)
        if got is None:
            q = next((q for q in self.table.forward(t) if q[0] == e), None)
            if q is None:
                raise AnalysisError(f"widest edge {t.labels[e]} is not forward flippable")
            _, a, b, c, d = q
            got = (a, b, c, d, self.table.after(t, e, RED, FORWARD), self.table.after(t, e, BLUE, FORWARD))
            self.info[key] = got
        return got


def first_flip_column_norms(t, x, cap=10**5, engine=None):
    """Column sums of A at the move just before each label first flips.

    Follows the flip expansion of widths ``x`` (always flipping the widest
    edge).  Returns (norms by label index, number of moves, capped flag);
    labels that never flip within ``cap`` moves are absent.
    """
    engine = engine or _WidthFlips()
    t = engine.table.intern(t)
    x = list(map(float, x))
    n = len(x)
    s = [1] * n
    found = {}
    moves = 0
    while len(found) < n:
        if moves >= cap:
            return found, moves, True
        e = max(range(n), key=x.__getitem__)
        if e not in found:
            found[e] = s[e]
        a, b, c, d, t_red, t_blue = engine.quad(t, e)
        if x[d] > x[a]:
            x[e] = x[d] - x[a]
            p, q, t = a, c, t_red
        else:
            x[e] = x[a] - x[d]
            p, q, t = b, d, t_blue
        s[p] += s[e]
        s[q] += s[e]
        moves += 1
        if x[e] < 1e-200:
            x = [v * 2.0**600 for v in x]
    return found, moves, False


@dataclass
class KerckhoffReport:
    Ms: tuple
    labels: tuple
    fractions: dict
    n_samples: int
    horizon_exceeded: int
    fitted_c: dict = field(default_factory=dict)

    def stable(self, factor=2.0):
        """Per label with any hits: fitted c within ``factor`` across M, and monotone fractions."""
        out = {}
        for r in self.labels:
            fr = [self.fractions[(M, r)] for M in self.Ms]
            if fr[0] == 0:
                continue
            cs = [self.fitted_c[(M, r)] for M in self.Ms]
            monotone = all(a >= b for a, b in zip(fr, fr[1:]))
            out[r] = monotone and min(cs) > 0 and max(cs) / min(cs) <= factor
        return out


def kerckhoff_estimate(base, Ms, n_samples, rng, cap=10**5, labels=None):
    """Fractions of x on the base width polytope with column norm above M before r flips.

    With the empty word at the base every column has norm one, so the event
    is that column r of the product of the flips before r's first flip has
    sum larger than M.  One expansion per sample serves all M and r.
    """
    from .flow import cone_sampler

    t = base.triangulation if hasattr(base, "triangulation") else base
    sampler = cone_sampler(width_cone(t))
    labels = tuple(labels or t.labels)
    idx = t.index()
    hits = {(M, r): 0 for M in Ms for r in labels}
    capped = 0
    engine = _WidthFlips()
    for _ in range(n_samples):
        norms, _, was_capped = first_flip_column_norms(t, sampler(rng), cap, engine)
        capped += was_capped
        for r in labels:
            v = norms.get(idx[r])
            if v is None:
                continue
            for M in Ms:
                if v > M:
                    hits[(M, r)] += 1
    fractions = {k: v / n_samples for k, v in hits.items()}
    fitted = {(M, r): M * fractions[(M, r)] for M in Ms for r in labels}
    return KerckhoffReport(tuple(Ms), labels, fractions, n_samples, capped, fitted)


# tails


@dataclass(frozen=True)
class TailFit:
    h_hat: float
    r2: float
    n: int
    discarded: int
    intercept: float = 0.0


def tail_fit(samples, discard=0.01, min_samples=10**4):
    """Least-squares fit of log P(xi > t) = -h t + c over the observed support.

    The top ``discard`` fraction of samples is dropped before fitting.
    """
    data = np.sort(np.asarray(samples, dtype=float))
    if len(data) < min_samples:
        raise InsufficientSamples(f"{len(data)} samples, need {min_samples}")
    keep = len(data) - int(len(data) * discard)
    n = len(data)
    t = data[:keep]
    logS = np.log1p(-np.arange(keep) / n)
    X = np.vstack([t, np.ones(keep)]).T
    coef, *_ = np.linalg.lstsq(X, logS, rcond=None)
    resid = logS - X @ coef
    r2 = 1 - resid @ resid / np.sum((logS - logS.mean()) ** 2)
    return TailFit(float(-coef[0]), float(r2), keep, n - keep, float(coef[1]))


# normality


def lebesgue_cylinder(t, zeta_symbols, n_samples, rng, table=DEFAULT_TABLE):
    """Fraction of widths on the polytope of ``t`` whose expansion starts with the symbols."""
    from .flow import cone_sampler

    k = len(zeta_symbols)
    if k == 0:
        return 1.0
    sampler = cone_sampler(width_cone(t))
    hits = 0
    y = np.ones(len(t.labels))
    for _ in range(n_samples):
        moves, _ = forward_expansion(FlowState(t, sampler(rng), y.copy()), k, table)
        if tuple(m[2] for m in moves) == tuple(zeta_symbols):
            hits += 1
    return hits / n_samples


def normality_check(traj, zeta, n_mc, rng, table=DEFAULT_TABLE):
    """(occurrences of zeta per return, Lebesgue measure of its cylinder).

    ``zeta`` is a FlipWord from the base triangulation, or None for an
    inapplicable word (both frequencies are then zero).
    """
    from .flow import count_occurrences

    if zeta is None:
        return 0.0, 0.0
    syms = word_symbols(zeta, table)
    freq_traj = count_occurrences(traj.symbols(), syms) / max(len(traj.events), 1)
    freq_leb = lebesgue_cylinder(zeta.start, syms, n_mc, rng, table)
    return freq_traj, freq_leb


# torus volume


@dataclass(frozen=True)
class TorusVolume:
    I1: float
    I2: float
    closed_form_check: float
    volume: float
    mc_estimate: float
    mc_stderr: float
    mc_full_range: float
    scaled_I1: float
    scaled_I2: float
    n_samples: int


def _torus_integrals():
    opts = dict(epsabs=1e-14, epsrel=1e-13, limit=200, full_output=True)
    out = []
    for f in (lambda x: -math.log1p(-x) / x if x > 0 else 1.0, lambda x: -math.log1p(-x) / (1 - x)):
        val, err, info = integrate.quad(f, 0.0, 0.5, **opts)[:3]
        if err > 1e-10:
            raise QuadratureNonconvergence(f"quadrature error estimate {err}")
        out.append(val)
    return out


def torus_fibre_area(t, X):
    """Area of {y in the height cone : area(x, y) <= 1} in free height coordinates.

    ``X`` holds one width vector per row.  The fibre is a triangle spanned by
    the two extreme rays of the height cone, each scaled to unit area; the
    chart drops the tall label of the triangles.
    """
    rays = vertex_cycles(height_cone(t)).as_floats()
    W = np.array(omega_matrix(t), dtype=float)
    p = [np.outer(1.0 / (X @ (W.T @ r)), r) for r in rays]
    tall = {h for _, h, _ in all_roles(t)}
    free = [i for i, l in enumerate(t.labels) if l not in tall]
    return 0.5 * np.abs(p[0][:, free[0]] * p[1][:, free[1]] - p[0][:, free[1]] * p[1][:, free[0]])


def torus_roofs(t, X, table=DEFAULT_TABLE):
    """Return time after flipping the width-one edge, for each row of widths ``X``."""
    quads = table.forward(table.intern(t))
    if len(quads) != 1:
        raise AnalysisError("expected one forward flippable edge")
    e, a, _, _, d = quads[0]
    Y = X.copy()
    Y[:, e] = np.abs(X[:, d] - X[:, a])
    return -np.log(Y.max(axis=1))


def torus_volume(n_samples=10**6, rng=None, roof_factor=2.0):
    """Torus volume by quadrature and by Monte Carlo over the suspension.

    The quadrature returns the unscaled integrals; the scaled values carry
    the extra factor 3 of Euclidean measure on the width and height planes.
    The Monte Carlo estimate draws x_a uniformly with x_b > x_a for each
    colour of c, flips c, and averages roof times fibre area; the half with
    x_a > x_b is added by symmetry.  The roof is taken as twice the flow
    return time to match the volume normalisation.  ``mc_full_range``
    samples both halves directly instead.
    """
    from .fixtures import torus

    I1, I2 = _torus_integrals()
    rng = rng or np.random.Generator(np.random.Philox(0))
    half = n_samples // 2
    parts, sq, full = [], [], 0.0
    for colour in (RED, BLUE):
        t = torus(colour)
        xa = rng.uniform(0.0, 0.5, size=half)
        X = np.column_stack([xa, 1 - xa, np.ones(half)])
        g = roof_factor * torus_roofs(t, X) * torus_fibre_area(t, X) * 0.5
        parts.append(g.mean())
        sq.append(g.var() / half)
        xa2 = rng.uniform(0.0, 1.0, size=half)
        X2 = np.column_stack([xa2, 1 - xa2, np.ones(half)])
        full += (roof_factor * torus_roofs(t, X2) * torus_fibre_area(t, X2)).mean()
    mc = 2 * sum(parts)
    stderr = 2 * math.sqrt(sum(sq))
    return TorusVolume(I1, I2, I1 + I2 - math.pi**2 / 12, 2 * (I1 + I2), mc, stderr, full, 3 * I1, 3 * I2, 2 * half)


# enumeration and the core graph


def gluings(F):
    """Connected gluings of F triangles, built by attaching triangles breadth first.

    Each gluing is a list ``partner`` on slots 3t+i.  The first free slot is
    paired either with a later free slot or with slot 0 of a new triangle,
    which makes every connected gluing appear with its triangles in order of
    first contact.
    """

    def rec(partner, used):
        free = [s for s in range(3 * used) if partner[s] is None]
        if not free:
            if used == F:
                yield list(partner)
            return
        s = free[0]
        for o in free[1:]:
            partner[s], partner[o] = o, s
            yield from rec(partner, used)
            partner[s] = partner[o] = None
        if used < F:
            o = 3 * used
            partner[s], partner[o] = o, s
            yield from rec(partner, used + 1)
            partner[s] = partner[o] = None

    yield from rec([None] * (3 * F), 1)


def gluing_triangles(partner, F):
    label = {}
    tris = []
    for ti in range(F):
        row = []
        for i in range(3):
            s = 3 * ti + i
            o = partner[s]
            key = min(s, o)
            if key not in label:
                label[key] = str(len(label))
            row.append((label[key], 1 if s < o else -1))
        tris.append(tuple(row))
    return tuple(tris)


def veering_classes(g, marked):
    """One representative per isomorphism class of veering triangulations."""
    E = 6 * g - 6 + 3 * marked
    if E > 9:
        raise TooLarge(f"{E} edges; enumeration is limited to 9")
    if E <= 0 or E % 3:
        return {}
    F = 2 * E // 3
    labels = [str(i) for i in range(E)]
    seen = {}
    for partner in gluings(F):
        tris = gluing_triangles(partner, F)
        probe = Triangulation(tris, {l: RED for l in labels}, g, marked)
        if probe.vertex_count() != marked:
            continue
        for cols in itertools.product((RED, BLUE), repeat=E):
            t = Triangulation(tris, dict(zip(labels, cols)), g, marked)
            if not t.is_veering():
                continue
            key = t.canonical_form()
            if key not in seen:
                seen[key] = t
    return seen


@dataclass
class CoreGraph:
    nodes: dict
    arcs: set
    kappa: dict
    expected_dim: dict
    graph: object = None

    @property
    def scc_count(self):
        return nx.number_strongly_connected_components(self.graph)

    def components_by_stratum(self):
        """Strongly connected components grouped by stratum datum."""
        out = {}
        for k in set(self.kappa.values()):
            sub = self.graph.subgraph([n for n in self.nodes if self.kappa[n] == k])
            out[k] = [set(c) for c in nx.strongly_connected_components(sub)]
        return out

    def strongly_connected_per_stratum(self):
        return all(len(c) == 1 for c in self.components_by_stratum().values())


def enumerate_core_graph(g, marked):
    """Core triangulations up to isomorphism and the forward flips between them.

    A triangulation is core when both cones have interior points and reach
    the largest cone dimension found among such triangulations with the same
    stratum datum.  Arcs are forward flips to either colour whose result is
    core.
    """
    classes = veering_classes(g, marked)
    info = {}
    for key, t in classes.items():
        wc, hc = width_cone(t), height_cone(t)
        info[key] = (t, t.stratum_datum().key(), wc, hc)
    expected = {}
    for t, k, wc, hc in info.values():
        if wc.has_interior and hc.has_interior:
            expected[k] = max(expected.get(k, 0), wc.dim, hc.dim)
    core = {}
    for key, (t, k, wc, hc) in info.items():
        if k in expected and wc.has_interior and hc.has_interior and wc.dim == hc.dim == expected[k]:
            core[key] = t
    G = nx.DiGraph()
    G.add_nodes_from(core)
    arcs = set()
    kappa = {key: info[key][1] for key in core}
    for key, t in core.items():
        for e in sorted(t.flippable(FORWARD), key=label_key):
            for colour in (RED, BLUE):
                new = t.flip(e, colour, FORWARD)
                if not new.is_veering():
                    continue
                nkey = new.canonical_form()
                if nkey in core:
                    arcs.add((key, nkey))
                    G.add_edge(key, nkey)
    return CoreGraph(core, arcs, kappa, expected, G)
