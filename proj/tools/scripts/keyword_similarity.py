"""Independent cosine computation for the shipped keyword excerpts.

Usage: python3 tools/scripts/keyword_similarity.py glove.6B.300d.txt
Prints one "label,cosine" line per topic (skip-OOV averaging) followed by a
random-words baseline over 1000 trials of 30-word sets drawn from the
embedding vocabulary with the 1000 most frequent rows excluded.
"""
import csv
import sys
from pathlib import Path

import numpy as np

DATA = Path(__file__).resolve().parents[2] / "data"


def load(path, dim=300):
    words, rows = {}, []
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                continue
            w = parts[0].lower()
            if w in words:
                continue
            words[w] = len(rows)
            rows.append(np.asarray(parts[1:], dtype=np.float64))
    return words, np.vstack(rows)


def keywords(path):
    with open(path, newline="", encoding="utf-8") as f:
        return {r["label"]: r["keywords"].split() for r in csv.DictReader(f)}


def mean_vector(words, table, kws):
    idx = sorted({words[k] for k in kws if k in words})
    return table[idx].sum(axis=0) / len(idx)


def cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def main():
    words, table = load(sys.argv[1])
    a = keywords(DATA / "keywords_umd.csv")
    b = keywords(DATA / "keywords_headroom.csv")
    for label in a:
        print(f"{label},{cosine(mean_vector(words, table, a[label]), mean_vector(words, table, b[label])):.17g}")
    rng = np.random.default_rng(1)
    pool = np.arange(1000, len(table))
    sims = []
    for _ in range(1000):
        pick = rng.choice(pool, size=60, replace=False)
        sims.append(cosine(table[pick[:30]].mean(axis=0), table[pick[30:]].mean(axis=0)))
    print(f"baseline,{np.mean(sims):.6f}")


if __name__ == "__main__":
    main()
