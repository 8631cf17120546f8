"""Fraction of widths whose column norm passes M before a label first flips."""

import sys
from dataclasses import dataclass

sys.path.insert(0, __file__.rsplit("/", 1)[0])
from _common import emit, parse_config, rng_for  # noqa: E402

from veering.analysis import kerckhoff_estimate  # noqa: E402
from veering.fixtures import FIXTURES  # noqa: E402


@dataclass
class Config:
    """Kerckhoff fractions and fitted constants."""

    seed: int = 9
    fixture: str = "torus"
    samples: int = 100000
    Ms: tuple = (10, 30, 100, 300)


def main():
    cfg = parse_config(Config)
    rep = kerckhoff_estimate(FIXTURES[cfg.fixture](), cfg.Ms, cfg.samples, rng_for(cfg.seed))
    rows = [[M, r, f"{rep.fractions[(M, r)]:.6f}", f"{rep.fitted_c[(M, r)]:.4f}"] for M in rep.Ms for r in rep.labels]
    rows.append(["horizon_exceeded", "", rep.horizon_exceeded, ""])
    emit(cfg, rows, ["M", "label", "fraction", "c"])


if __name__ == "__main__":
    main()
