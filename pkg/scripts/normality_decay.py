"""Per-return frequency of fixed flip words as the run grows.

On the torus the return section has infinite invariant measure, so the
frequency of a compact cylinder keeps falling with the number of returns
while the Lebesgue measure of the cylinder stays put.
"""

import sys
from dataclasses import dataclass

sys.path.insert(0, __file__.rsplit("/", 1)[0])
from _common import emit, parse_config, rng_for  # noqa: E402

from veering.analysis import lebesgue_cylinder  # noqa: E402
from veering.cli import NORMALITY_WORDS  # noqa: E402
from veering.fixtures import torus  # noqa: E402
from veering.flips import resolve_word  # noqa: E402
from veering.flow import count_occurrences, run_trajectory, sample_state, word_symbols  # noqa: E402
from veering.triangulation import BLUE  # noqa: E402


@dataclass
class Config:
    """Word frequencies along torus trajectories of growing length."""

    seed: int = 1
    lengths: tuple = (1000, 10000, 100000, 1000000)
    lebesgue_samples: int = 20000


def main():
    cfg = parse_config(Config)
    t = torus(BLUE)
    words = [resolve_word(t, list(w)) for w in NORMALITY_WORDS]
    syms = [word_symbols(w) for w in words]
    leb = [lebesgue_cylinder(t, s, cfg.lebesgue_samples, rng_for(cfg.seed, k + 1)) for k, s in enumerate(syms)]
    traj = run_trajectory(sample_state(t, rng_for(cfg.seed)), max(cfg.lengths))
    moves_per_event = [len(ev.moves) for ev in traj.events]
    rows = []
    for n in cfg.lengths:
        n_moves = sum(moves_per_event[:n])
        prefix = traj.symbols()[:n_moves]
        for w, s, fl in zip(words, syms, leb):
            ft = count_occurrences(prefix, s) / n
            rows.append([n, "|".join(w.tokens()), f"{ft:.6g}", f"{fl:.6g}", f"{ft / fl:.4g}"])
    emit(cfg, rows, ["returns", "word", "freq_trajectory", "freq_lebesgue", "ratio"])


if __name__ == "__main__":
    main()
