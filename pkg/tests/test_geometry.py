from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from veering.fixtures import sphere4, torus, torus_state
from veering.geometry import (
    SurfaceState,
    area,
    check_balance,
    derive_views,
    edge_rectangles_ok,
    height_cone,
    omega,
    omega_matrix,
    triangle_identity_residual,
    validate_state,
    vertex_cycles,
    width_cone,
)
from veering.triangulation import BLUE, RED


def test_torus_state_is_consistent():
    s = torus_state()
    assert validate_state(s) == []
    x, y, colours = derive_views(s)
    assert colours == {"a": BLUE, "b": RED, "c": RED}
    assert triangle_identity_residual(s.triangulation, x, y) < 1e-15


def test_torus_area_two_ways():
    s = torus_state()
    x, y = s.widths(), s.heights()
    assert area(s) == pytest.approx(1.0, abs=1e-15)
    assert omega(s.triangulation, x, y) == pytest.approx(1.0, abs=1e-15)


def test_omega_matrix_matches_omega():
    s = torus_state()
    t = s.triangulation
    W = np.array(omega_matrix(t), dtype=float)
    x, y = s.width_array(), s.height_array()
    assert y @ W @ x == pytest.approx(omega(t, s.widths(), s.heights()), abs=1e-14)


def test_omega_matrix_on_torus_is_exact():
    W = omega_matrix(torus(RED))
    assert all(isinstance(v, Fraction) for row in W for v in row)
    # widths (1, 1, 2), heights (1, 1, 0): the red torus has area x_a y_b + x_b y_a
    x, y = [1, 1, 2], [1, 1, 0]
    val = sum(y[i] * W[i][j] * x[j] for i in range(3) for j in range(3))
    assert val == 2


def test_torus_cones_and_vertex_cycles():
    t = torus(RED)
    wc, hc = width_cone(t), height_cone(t)
    assert wc.dim == hc.dim == 2
    assert wc.has_interior and hc.has_interior
    cyc = vertex_cycles(wc)
    half = Fraction(1, 2)
    assert set(cyc.cycles) == {(half, 0, half), (0, half, half)}
    assert cyc.B == half


def test_sphere_cones():
    t = sphere4()
    wc, hc = width_cone(t), height_cone(t)
    assert wc.dim == hc.dim == 2
    assert wc.has_interior and hc.has_interior


def test_balance_on_torus_state():
    s = torus_state()
    report = check_balance(s.triangulation, s.widths())
    assert report.balanced
    squeezed = check_balance(s.triangulation, {"a": 0.1, "b": 0.3, "c": 0.4})
    assert not squeezed.balanced
    assert squeezed.con2_failures() == ["b"]


def test_edge_rectangles():
    assert edge_rectangles_ok(torus_state())
    mono = SurfaceState(
        torus(RED), {"a": (0.3, 0.5), "b": (0.7, 13 / 6), "c": (1.0, 8 / 3)}
    )
    assert not edge_rectangles_ok(mono)


@given(st.floats(0.05, 0.95), st.floats(-3, 3))
def test_flow_preserves_area(xa, t):
    s = SurfaceState(torus(RED), {"a": (xa, -1.0), "b": (1 - xa, 2.5), "c": (1.0, 1.5)})
    assert validate_state(s) == []
    a0 = area(s)
    assert a0 == pytest.approx(omega(s.triangulation, s.widths(), s.heights()), rel=1e-12)
    assert area(s.flowed(t)) == pytest.approx(a0, rel=1e-12)
