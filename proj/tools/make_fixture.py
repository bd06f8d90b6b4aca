"""Writes the synthetic set-7-shaped TSV used by the demo and tests.

Eight essays per trait-1 label (0.0 to 3.0 in steps of 0.5); other traits
get seeded random rater pairs. Texts are filler sentences whose length grows
with the label.
"""
import random
import sys

LABEL_PAIRS = {
    0.0: (0, 0), 0.5: (0, 1), 1.0: (1, 1), 1.5: (1, 2),
    2.0: (2, 2), 2.5: (2, 3), 3.0: (3, 3),
}
WORDS = ("patience waiting line friend store bus turn calm finally wait minutes "
         "hours mother brother game ride ticket rain window quiet").split()


def main(path):
    rng = random.Random(7)
    header = ["essay_id", "essay_set", "essay"]
    for t in range(1, 5):
        header += [f"rater1_trait{t}", f"rater2_trait{t}"]
    rows = []
    essay_id = 20000
    for label, pair in LABEL_PAIRS.items():
        for k in range(8):
            essay_id += 1
            n_words = 20 + int(label * 20) + k
            text = " ".join(rng.choice(WORDS) for _ in range(n_words)).capitalize() + "."
            scores = list(pair if k % 2 == 0 else pair[::-1])
            for _ in range(3):
                a = rng.randint(0, 3)
                scores += [a, min(3, max(0, a + rng.choice((-1, 0, 0, 1))))]
            rows.append([str(essay_id), "7", text] + [str(s) for s in scores])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\t".join(header) + "\n")
        for r in rows:
            fh.write("\t".join(r) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/fixtures/set7_synthetic.tsv")
