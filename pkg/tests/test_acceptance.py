"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -v tests/test_acceptance.py -s`` to see the lines inline;
they are repeated in the terminal summary either way.
"""

import math
import random
import time

import numpy as np
import pytest

from veering.analysis import (
    enumerate_core_graph,
    jacobian_restricted_ratio,
    kerckhoff_estimate,
    tail_fit,
    torus_volume,
    veering_classes,
)
from veering.cli import TORUS_THETA, coded_roofs, jacobian_trials, normality_run, run_command
from veering.fixtures import sphere4, torus
from veering.flips import (
    JoinStalled,
    apply_word,
    area_compatibility,
    flip,
    flip_matrix,
    lattice_join,
    lattice_meet,
    parse_word,
    phi_coordinates,
    reach_phi,
    resolve_word,
)
from veering.flow import (
    advance,
    integer_expansion,
    integer_widths,
    make_balanced,
    random_forward_word,
    run_trajectory,
    sample_state,
)
from veering.geometry import width_cone
from veering.triangulation import BLUE, FORWARD

pytestmark = pytest.mark.acceptance


def gen(seed, worker=0):
    return np.random.Generator(np.random.Philox(key=[seed, worker]))


def gamma(n):
    return resolve_word(torus(BLUE), ["c"] + ["b", "c"] * n + ["a"])


def test_criterion_01_flip_matrices(verdict, capsys):
    t0 = time.perf_counter()
    code = run_command(["matrix", "--fixture", "torus", "--word", "c,b,c,a"])
    out = capsys.readouterr().out.strip()
    A = flip_matrix(resolve_word(torus(BLUE), ["c", "b", "c", "a"]))
    fixes_c = [row[2] for row in A] == [0, 0, 1]
    variants = all(flip_matrix(gamma(n)) == [[1, 2, 0], [2 * n, 4 * n + 1, 0], [2 * n, 4 * n + 2, 1]] for n in (2, 3))
    elapsed = time.perf_counter() - t0
    ok = code == 0 and out == "[[1,2,0],[2,5,0],[2,6,1]]" and fixes_c and variants and elapsed < 1.0
    assert verdict(1, "flip matrices of the torus loop", ok, f"cli={out} A.e_c=e_c:{fixes_c} n=2,3:{variants} {elapsed:.2f}s")


def test_criterion_02_torus_volume(verdict):
    t0 = time.perf_counter()
    tv = torus_volume(10**6, gen(2))
    elapsed = time.perf_counter() - t0
    target = math.pi**2 / 6
    quad_ok = abs(tv.I1 + tv.I2 - math.pi**2 / 12) <= 1e-8
    vol_ok = abs(tv.volume - target) <= 1e-8
    mc_rel = abs(tv.mc_estimate - target) / target
    ok = quad_ok and vol_ok and mc_rel < 0.02 and elapsed < 60
    detail = f"I1+I2-pi^2/12={tv.closed_form_check:.1e} vol={tv.volume:.12f} mc={tv.mc_estimate:.4f} rel={mc_rel:.2%} {elapsed:.1f}s"
    assert verdict(2, "torus volume pi^2/6", ok, detail)


def test_criterion_03_full_jacobian(verdict):
    t0 = time.perf_counter()
    trials = jacobian_trials(3, 100)
    elapsed = time.perf_counter() - t0
    worst = max(r.rel_err for _, _, r in trials)
    dims_ok = all(len(u) <= 6 for _, u, _ in trials)
    ok = worst < 1e-5 and dims_ok and len(trials) == 100 and elapsed < 10
    assert verdict(3, "projective Jacobian vs finite differences", ok, f"worst rel_err {worst:.2e} {elapsed:.2f}s")


def test_criterion_04_restricted_jacobian(verdict):
    t0 = time.perf_counter()
    rng = gen(4)
    worst = 0.0
    used = set()
    for k in range(100):
        n = 5 if k % 5 == 0 else int(rng.integers(1, 6))
        used.add(n)
        w = gamma(n)
        cone = width_cone(w.end)
        A = np.array(flip_matrix(w), dtype=float)
        s, s2 = rng.uniform(0.01, 0.99, 2)
        u = np.array([s / 2, (1 - s) / 2, 0.5])
        u2 = np.array([s2 / 2, (1 - s2) / 2, 0.5])
        numeric = jacobian_restricted_ratio(A, cone, u, u2)
        predicted = ((A @ u2).sum() / (A @ u).sum()) ** 2
        worst = max(worst, abs(numeric - predicted) / predicted)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-5 and 5 in used and elapsed < 10
    assert verdict(4, "restricted Jacobian ratio on the torus segment", ok, f"worst rel {worst:.2e} words n={sorted(used)} {elapsed:.2f}s")


def test_criterion_05_staggered_expansion(verdict):
    t0 = time.perf_counter()
    t = sphere4()
    x, scale = integer_widths(t, gen(5))
    monotone, veering = True, True
    checked = set()
    for e, colour, old, new, cur in integer_expansion(t, x, 10**4):
        monotone &= new < old
        if id(cur) not in checked:
            checked.add(id(cur))
            veering &= cur.is_veering()
    # the ratio underflows a float, so compare logarithms of the exact integers
    log_final = math.log10(max(x)) - math.log10(scale)
    elapsed = time.perf_counter() - t0
    ok = monotone and veering and log_final < -3 and elapsed < 10
    detail = f"final max width 10^{log_final:.1f} triangulations seen {len(checked)} {elapsed:.2f}s"
    assert verdict(5, "widths shrink along 10^4 forward flips", ok, detail)


def test_criterion_06_balanced_normal_form(verdict):
    t0 = time.perf_counter()
    failures = 0
    for k in range(100):
        rng = gen(6, k)
        s = sample_state(sphere4() if k % 2 else torus(BLUE), rng)
        again, n_again = make_balanced(s)
        _, moved = random_forward_word(s, 5, rng)
        back, _ = make_balanced(moved)
        ok = (
            n_again == 0
            and back.triangulation == s.triangulation
            and np.allclose(back.x, s.x, rtol=0, atol=1e-9)
            and np.allclose(back.y, s.y, rtol=0, atol=1e-9)
        )
        failures += not ok
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < 10
    assert verdict(6, "balanced normal form is idempotent and recovered", ok, f"{failures}/100 failures {elapsed:.2f}s")


def test_criterion_07_conservation(verdict):
    # (a) area per event
    worst_area = 0.0
    for base, seed in ((torus(BLUE), 70), (sphere4(), 71)):
        s = sample_state(base, gen(seed))

        def track(i, cur, ev):
            nonlocal worst_area
            worst_area = max(worst_area, abs(cur.area() - 1.0))

        run_trajectory(s, 10**4, renorm_every=0, on_event=track)
    # (b) the literal identity A^T W_end = W_start A on the cone spans
    literal_ok = height_ok = 0
    for k in range(50):
        rng = gen(72, k)
        s = sample_state(torus(BLUE), rng)
        tokens, _ = random_forward_word(s, int(rng.integers(1, 51)), rng)
        w = parse_word(s.triangulation, tokens)
        literal_ok += area_compatibility(w, literal=True)
        height_ok += area_compatibility(w)
    # (c) 3 < |x| < 6g-6+3|Z| on the upper boundary, on sphere4 where every quad has four sides
    s = sample_state(sphere4(), gen(73))
    E = len(s.labels)
    lo, hi = math.inf, 0.0
    for _ in range(10**4):
        norm = s.x.sum() / s.x.max()
        lo, hi = min(lo, norm), max(hi, norm)
        advance(s)
    bounds_ok = 3 < lo and hi < E
    ok = worst_area <= 1e-12 and literal_ok == 50 and bounds_ok
    detail = (
        f"area drift {worst_area:.1e}; literal identity {literal_ok}/50 "
        f"(with height matrix {height_ok}/50); |x| in [{lo:.4f}, {hi:.4f}] vs (3, {E})"
    )
    assert verdict(7, "area conservation and norm bounds", ok, detail)


def test_criterion_08_core_graph(verdict):
    t0 = time.perf_counter()
    n_torus = len(veering_classes(1, 1))
    cg1 = enumerate_core_graph(1, 1)
    cg4 = enumerate_core_graph(0, 4)
    elapsed = time.perf_counter() - t0
    ok = n_torus == 2 and cg1.scc_count == 1 and len(cg1.nodes) == 2 and cg4.strongly_connected_per_stratum() and elapsed < 60
    detail = f"(1,1): {n_torus} classes, {cg1.scc_count} component; (0,4): {len(cg4.nodes)} core nodes, per stratum {cg4.strongly_connected_per_stratum()} {elapsed:.1f}s"
    assert verdict(8, "core graph enumeration", ok, detail)


def test_criterion_09_kerckhoff(verdict):
    t0 = time.perf_counter()
    rep = kerckhoff_estimate(torus(BLUE), (10, 30, 100), 10**5, gen(9))
    elapsed = time.perf_counter() - t0
    stable = rep.stable(2.0)
    monotone = all(
        rep.fractions[(10, r)] >= rep.fractions[(30, r)] >= rep.fractions[(100, r)] for r in rep.labels
    )
    ok = bool(stable) and all(stable.values()) and monotone and elapsed < 120
    cs = {r: [round(rep.fitted_c[(M, r)], 3) for M in rep.Ms] for r in stable}
    assert verdict(9, "Kerckhoff fractions decay like c/M", ok, f"c by label {cs} horizon_exceeded {rep.horizon_exceeded} {elapsed:.1f}s")


def test_criterion_10_exponential_tails(verdict):
    t0 = time.perf_counter()
    coded, raw, used = coded_roofs(10, min_returns=10**5, min_samples=10**4, fixture="torus", theta=TORUS_THETA)
    fit = tail_fit(coded)
    calib = tail_fit(gen(11).exponential(0.5, size=10**5))
    elapsed = time.perf_counter() - t0
    calib_ok = abs(calib.h_hat - 2.0) <= 0.1
    ok = fit.h_hat > 0 and fit.r2 >= 0.95 and calib_ok
    detail = f"h_hat {fit.h_hat:.4f} r2 {fit.r2:.4f} n {fit.n} from {used} returns; Exp(2) gives {calib.h_hat:.4f} {elapsed:.1f}s"
    assert verdict(10, "exponential tails of coded roofs", ok, detail)


def test_criterion_11_normality(verdict):
    t0 = time.perf_counter()
    res = normality_run(11, 10**5, 20000)
    elapsed = time.perf_counter() - t0
    ratios = {w: (ft / fl if fl > 0 and ft > 0 else math.inf) for w, ft, fl in res}
    ok = len(res) == 3 and all(1 / 10 <= r <= 10 for r in ratios.values())
    detail = "; ".join(f"{w}: {ft:.4f} vs {fl:.4f}" for w, ft, fl in res) + f" {elapsed:.1f}s"
    assert verdict(11, "trajectory vs Lebesgue cylinder frequencies", ok, detail)


def _same_state(a, b):
    if a.triangulation != b.triangulation:
        return False
    return all(np.allclose(np.abs(a.vectors[l]), np.abs(b.vectors[l]), rtol=1e-9, atol=1e-12) for l in a.vectors)


def _random_edges(r, state, k):
    cur, edges = state, []
    for _ in range(k):
        e = r.choice(sorted(cur.triangulation.flippable(FORWARD)))
        cur, _ = flip(cur, e)
        edges.append(e)
    return edges


def test_criterion_12_lattice(verdict):
    stalled = 0
    failures = {"idempotence": 0, "commutativity": 0, "absorption": 0}
    for k in range(100):
        r = random.Random(k)
        base = sample_state(torus(BLUE), gen(12, k)).surface_state()
        u, v = _random_edges(r, base, r.randint(0, 6)), _random_edges(r, base, r.randint(0, 6))
        try:
            end_u, _ = apply_word(base, u)
            j_uu, _ = lattice_join(base, u, u)
            m_uu, _ = lattice_meet(base, u, u)
            failures["idempotence"] += not (_same_state(j_uu, end_u) and _same_state(m_uu, end_u))
            j_uv, _ = lattice_join(base, u, v)
            j_vu, _ = lattice_join(base, v, u)
            m_uv, _ = lattice_meet(base, u, v)
            m_vu, _ = lattice_meet(base, v, u)
            failures["commutativity"] += not (_same_state(j_uv, j_vu) and _same_state(m_uv, m_vu))
            # forward words from the base reaching the meet and the join
            pu = phi_coordinates(apply_word(base, u)[1])
            pv = phi_coordinates(apply_word(base, v)[1])
            m_state, m_word = reach_phi(base, {l: min(pu[l], pv[l]) for l in pu})
            j_state, j_word = reach_phi(base, {l: max(pu[l], pv[l]) for l in pu})
            consistent = _same_state(m_state, m_uv) and _same_state(j_state, j_uv)
            a1, _ = lattice_join(base, u, list(m_word.edges()))
            a2, _ = lattice_meet(base, u, list(j_word.edges()))
            failures["absorption"] += not (consistent and _same_state(a1, end_u) and _same_state(a2, end_u))
        except JoinStalled:
            stalled += 1
    ok = stalled == 0 and not any(failures.values())
    assert verdict(12, "join and meet lattice laws", ok, f"failures {failures} JoinStalled {stalled}")
