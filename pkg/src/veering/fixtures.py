"""Bundled triangulations and geometric states."""

from fractions import Fraction

from .geometry import SurfaceState
from .triangulation import BLUE, RED, Triangulation


def torus(c_colour=RED):
    """The two-triangle torus with wide edge c and a, b anticlockwise from c.

    a is blue, b is red and the diagonal c takes either colour.
    """
    tris = ((("c", 1), ("a", 1), ("b", 1)), (("c", -1), ("a", -1), ("b", -1)))
    return Triangulation(tris, {"a": BLUE, "b": RED, "c": c_colour}, 1, 1)


# x = (0.3, 0.7, 1.0) with unit area x_a y_b + x_b y_a = 1
TORUS_X = {"a": Fraction(3, 10), "b": Fraction(7, 10), "c": Fraction(1)}
TORUS_Y = {"a": Fraction(1, 2), "b": Fraction(13, 6), "c": Fraction(5, 3)}


def torus_state():
    """Unit-area torus on the upper boundary: widths (0.3, 0.7, 1.0)."""
    t = torus(RED)
    vec = {
        "a": (float(TORUS_X["a"]), -float(TORUS_Y["a"])),
        "b": (float(TORUS_X["b"]), float(TORUS_Y["b"])),
        "c": (float(TORUS_X["c"]), float(TORUS_Y["c"])),
    }
    return SurfaceState(t, vec)


def sphere4():
    """A veering triangulation of the sphere with four marked points.

    Every vertex has valence three, so its link carries a single red to blue
    transition and the stratum datum is (-1, -1, -1, -1).
    """
    tris = (
        (("0", 1), ("1", 1), ("2", 1)),
        (("0", -1), ("3", 1), ("4", 1)),
        (("1", -1), ("4", -1), ("5", 1)),
        (("2", -1), ("5", -1), ("3", -1)),
    )
    colours = {"0": RED, "1": RED, "2": BLUE, "3": RED, "4": BLUE, "5": RED}
    return Triangulation(tris, colours, 0, 4)


# the plain torus has c blue, the convention of the flip-matrix examples
FIXTURES = {
    "torus": lambda: torus(BLUE),
    "torus-red": lambda: torus(RED),
    "torus-blue": lambda: torus(BLUE),
    "sphere4": sphere4,
}
