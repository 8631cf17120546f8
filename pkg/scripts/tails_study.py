"""Survival of raw roofs against roofs coded by a loop, on the torus.

Raw per-return roofs are bounded and pile up near zero in the cusp; the
durations between occurrences of a loop are the quantity with an
exponential tail.
"""

import sys
from dataclasses import dataclass

sys.path.insert(0, __file__.rsplit("/", 1)[0])
from _common import emit, parse_config  # noqa: E402

from veering.analysis import tail_fit  # noqa: E402
from veering.cli import coded_roofs  # noqa: E402


@dataclass
class Config:
    """Tail fits for raw and coded roofs under a few loops."""

    seed: int = 10
    min_returns: int = 100000
    min_samples: int = 10000
    thetas: tuple = ("c:R|b:B", "c:B|a:B", "c:R|b:R|c:B|a:B")


def main():
    cfg = parse_config(Config)
    rows = []
    for theta in cfg.thetas:
        coded, raw, used = coded_roofs(cfg.seed, cfg.min_returns, cfg.min_samples, "torus", tuple(theta.split("|")))
        fit, raw_fit = tail_fit(coded), tail_fit(raw)
        rows.append([theta, used, fit.n, f"{fit.h_hat:.5f}", f"{fit.r2:.5f}", f"{raw_fit.h_hat:.5f}", f"{raw_fit.r2:.5f}"])
    emit(cfg, rows, ["theta", "returns", "coded_samples", "coded_h", "coded_r2", "raw_h", "raw_r2"])


if __name__ == "__main__":
    main()
