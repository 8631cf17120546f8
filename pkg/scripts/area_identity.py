"""Which form of the area transport identity holds along random flip words.

For each word the exact defect is computed twice: with the height matrix
transporting heights, and with the width matrix standing in for it.  The
second form holds exactly when no move changes the colour of its edge.
"""

import sys
from dataclasses import dataclass

sys.path.insert(0, __file__.rsplit("/", 1)[0])
from _common import emit, parse_config, rng_for  # noqa: E402

from veering.fixtures import FIXTURES  # noqa: E402
from veering.flips import area_compatibility, parse_word  # noqa: E402
from veering.flow import random_forward_word, sample_state  # noqa: E402


@dataclass
class Config:
    """Area identity on random forward words."""

    seed: int = 72
    fixture: str = "torus"
    words: int = 50
    max_length: int = 50


def main():
    cfg = parse_config(Config)
    rows = []
    for k in range(cfg.words):
        rng = rng_for(cfg.seed, k)
        s = sample_state(FIXTURES[cfg.fixture](), rng)
        tokens, _ = random_forward_word(s, int(rng.integers(1, cfg.max_length + 1)), rng)
        w = parse_word(s.triangulation, tokens)
        cur, changes = w.start, 0
        for m in w.moves:
            changes += cur.colour(m.edge) is not m.colour
            cur = cur.flip(m.edge, m.colour, m.direction)
        rows.append([k, len(w), changes, area_compatibility(w), area_compatibility(w, literal=True)])
    emit(cfg, rows, ["word", "length", "colour_changes", "height_form_holds", "literal_form_holds"])


if __name__ == "__main__":
    main()
