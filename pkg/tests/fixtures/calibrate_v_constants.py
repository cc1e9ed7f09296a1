"""Brute-force calibration of the V-function inequality constants.

Run once; writes v_constants.json next to this file.  The tests draw fresh
samples with other seeds and check them against these constants.

    python3 tests/fixtures/calibrate_v_constants.py
"""
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))
import vlemmas as L  # noqa: E402

COUNT = 200_000
MARGIN = 1.1     # headroom over the sampled extreme


def calibrate(seed=12345):
    rng = np.random.default_rng(seed)
    out = {"count": COUNT, "margin": MARGIN, "seed": seed, "constants": {}}
    for p in L.P_VALUES:
        z1, mu = L.draw(rng, COUNT)
        z2, _ = L.draw(rng, COUNT)
        # near-diagonal pairs probe the small |z1 - z2| regime
        z3 = z1 + 1e-3 * L.draw(rng, COUNT)[0]
        d = np.concatenate([L.difference_ratio(p, z1, z2, mu), L.difference_ratio(p, z1, z3, mu)])
        a = L.additivity_ratio(p, z1, z2, mu)
        lam = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), COUNT))
        h_lo, h_hi = L.homogeneity_ratios(p, z1, lam, mu)
        young = {str(dl): float(L.young_ratio(p, z1, z2, mu, dl).max()) for dl in L.DELTAS}
        q = p + 1.0
        c = L.comparison_ratio(p, q, z1, mu)
        out["constants"][str(p)] = {
            "difference_lower": float(d.min() / MARGIN),
            "difference_upper": float(d.max() * MARGIN),
            "additivity": float(a.max() * MARGIN),
            "homogeneity_min": float(h_lo.min()),
            "homogeneity_max": float(h_hi.max()),
            "young": float(max(young.values()) * MARGIN),
            "young_per_delta": young,
            "comparison_q": q,
            "comparison": float(c.max() * MARGIN),
        }
    return out


if __name__ == "__main__":
    res = calibrate()
    path = Path(__file__).with_name("v_constants.json")
    path.write_text(json.dumps(res, indent=2, sort_keys=True) + "\n")
    print(json.dumps(res["constants"], indent=1))
