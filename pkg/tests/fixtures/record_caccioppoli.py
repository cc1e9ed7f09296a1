"""Record the largest Caccioppoli ratio over random draws on the 1D p=3 benchmark.

Run from the repository root:  python3 tests/fixtures/record_caccioppoli.py
"""
import json
from pathlib import Path

import numpy as np

from vreg import builtins as BI
from vreg import fields as F
from vreg import integrands as I
from vreg import regularity as R
from vreg import solver as S

SEED = 7
DRAWS = 20


def draws(seed=SEED, count=DRAWS):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        x = rng.uniform(0.1, 0.9)
        rad = rng.uniform(0.03, 0.1)
        A = rng.uniform(-0.5, 0.5)
        yield x, rad, ([[A]], [rng.normal()])


def benchmark(n=257):
    g = F.make_grid([0, 1], n)
    pb = S.ProblemSpec(I.p_energy(3, mu=0, weight=1 / 3), g, forcing=1.0)
    u = F.sample(g, lambda x: BI.plaplace_1d(3).u(x)[..., 0])
    return pb, u


def ratios():
    pb, u = benchmark()
    return [R.caccioppoli_ratio(u, pb, [x], rad, a, M=2)["ratio"] for x, rad, a in draws()]


if __name__ == "__main__":
    r = ratios()
    out = {"seed": SEED, "draws": DRAWS, "max_ratio": max(r), "min_ratio": min(r)}
    path = Path(__file__).with_name("caccioppoli.json")
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(json.dumps(out, indent=2))
