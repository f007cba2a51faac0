"""Regenerate the bundled reference-size label dictionaries.

The real verb list and Visual Genome object classes are not redistributed;
these are pronounceable pseudo-words with the same sizes (1000 / 1374).
About one object label in eight is a two-token phrase so that multi-token
pooling is exercised. A few tokens are shared between the two files.
"""
from pathlib import Path

import numpy as np

ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "gl", "kr", "pl", "st", "tr", "sk"]
VOWELS = ["a", "e", "i", "o", "u", "ai", "ou"]
CODAS = ["", "", "n", "r", "s", "l", "k"]

OUT = Path(__file__).resolve().parents[1] / "src" / "aopath" / "data"


def words(rng, n, taken):
    out = []
    while len(out) < n:
        syl = rng.integers(2, 4)
        w = "".join(rng.choice(ONSETS) + rng.choice(VOWELS) for _ in range(syl)) + rng.choice(CODAS)
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


def main():
    rng = np.random.default_rng(20240411)
    taken = set()
    actions = words(rng, 1000, taken)
    singles = words(rng, 1374 - 8 - 170, taken)
    shared = actions[:8]
    modifiers = words(rng, 40, taken)
    phrases = set()
    while len(phrases) < 170:
        phrases.add(f"{rng.choice(modifiers)} {rng.choice(singles)}")
    objects = singles + shared + sorted(phrases)
    order = rng.permutation(len(objects))
    objects = [objects[i] for i in order]
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "actions.txt").write_text("# reference action labels (pseudo-words)\n" + "\n".join(actions) + "\n")
    (OUT / "objects.txt").write_text("# reference object labels (pseudo-words)\n" + "\n".join(objects) + "\n")


if __name__ == "__main__":
    main()
