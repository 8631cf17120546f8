"""Monte Carlo torus volume against the quadrature value as samples grow."""

import math
import sys
from dataclasses import dataclass

sys.path.insert(0, __file__.rsplit("/", 1)[0])
from _common import emit, parse_config, rng_for  # noqa: E402

from veering.analysis import torus_volume  # noqa: E402


@dataclass
class Config:
    """Suspension volume of the torus at several sample sizes."""

    seed: int = 2
    samples: tuple = (10000, 100000, 1000000)


def main():
    cfg = parse_config(Config)
    target = math.pi**2 / 6
    rows = []
    for k, n in enumerate(cfg.samples):
        tv = torus_volume(n, rng_for(cfg.seed, k))
        rows.append([n, f"{tv.volume:.12f}", f"{tv.mc_estimate:.6f}", f"{tv.mc_stderr:.2e}", f"{tv.mc_full_range:.6f}", f"{abs(tv.mc_estimate - target) / target:.3e}"])
    emit(cfg, rows, ["samples", "quadrature_volume", "mc", "mc_stderr", "mc_both_halves", "rel_err"])


if __name__ == "__main__":
    main()
