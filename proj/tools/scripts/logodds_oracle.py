"""Writes randomized log-odds fixtures with independently computed expectations.

Usage: python3 tools/scripts/logodds_oracle.py > tests/data/logodds_oracle.json
"""
import json
import random
from fractions import Fraction

import mpmath

mpmath.mp.dps = 50


def prior(reference, scale, eps=Fraction(1, 100)):
    total = sum(reference) + eps * len(reference)
    return [Fraction(scale) * (c + eps) / total for c in reference]


def expectations(yi, yj, alpha, scale):
    ni, nj = sum(yi), sum(yj)
    out = []
    for a, i, j in zip(alpha, yi, yj):
        a = mpmath.mpf(a.numerator) / a.denominator
        odds_i = (i + a) / (ni + scale - i - a)
        odds_j = (j + a) / (nj + scale - j - a)
        delta = mpmath.log(odds_i / odds_j)
        var = 1 / (i + a) + 1 / (j + a)
        out.append([float(delta), float(var), float(delta / mpmath.sqrt(var))])
    return out


def main():
    rng = random.Random(20240611)
    fixtures = []
    for _ in range(25):
        k = rng.randint(3, 9)
        names = [f"c{n}" for n in range(k)]
        reference = [rng.randint(0, 5000) for _ in range(k)]
        scale = rng.choice([10, 100, 500, 2000])
        yi = [rng.randint(0, 300) for _ in range(k)]
        yj = [rng.randint(0, 300) for _ in range(k)]
        alpha = prior(reference, scale)
        fixtures.append({
            "names": names,
            "reference": reference,
            "scale": scale,
            "counts_i": yi,
            "counts_j": yj,
            "expected": expectations(yi, yj, alpha, scale),
        })
    print(json.dumps(fixtures, indent=1))


if __name__ == "__main__":
    main()
