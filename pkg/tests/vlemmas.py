"""Sampled ratios for the pointwise V-function inequalities.

Each function returns the array of ratios whose supremum is the constant of
the corresponding inequality.  Shared by the tests and by the fixture
calibration script.
"""
import numpy as np

from vreg.integrands import v_transform

P_VALUES = (1.5, 2.0, 3.0, 4.0)
MUS = (0.0, 0.5, 1.0)
DELTAS = (0.5, 0.1)


def sq(a):
    return np.sum(a * a, axis=(-2, -1))


def draw(rng, count, shape=(2, 2), lo=1e-3, hi=10.0):
    """Random matrices with log-uniform norms in [lo, hi] and random mu."""
    d = rng.standard_normal((count,) + shape)
    d /= np.sqrt(sq(d))[:, None, None]
    r = np.exp(rng.uniform(np.log(lo), np.log(hi), count))
    mu = rng.choice(MUS, count)
    return d * r[:, None, None], mu


def _v(p, mu, z):
    # per-sample mu, grouped so each v_transform call is vectorised
    out = np.empty_like(z)
    for m in np.unique(mu):
        sel = mu == m
        out[sel] = v_transform(p, m, z[sel])
    return out


def difference_ratio(p, z1, z2, mu):
    num = sq(_v(p, mu, z1) - _v(p, mu, z2))
    den = (mu ** 2 + sq(z1) + sq(z2)) ** ((p - 2) / 2) * sq(z1 - z2)
    return num / den


def additivity_ratio(p, z1, z2, mu):
    return sq(_v(p, mu, z1 + z2)) / (sq(_v(p, mu, z1)) + sq(_v(p, mu, z2)))


def homogeneity_ratios(p, z, lam, mu):
    """|V(lam z)|^2 / |V(z)|^2 divided by min and by max of {lam^2, lam^p}."""
    r = sq(_v(p, mu, lam[:, None, None] * z)) / sq(_v(p, mu, z))
    lo = np.minimum(lam ** 2, lam ** p)
    hi = np.maximum(lam ** 2, lam ** p)
    return r / lo, r / hi


def young_ratio(p, z, w, mu, delta):
    pc = p / (p - 1)
    lhs = np.abs(np.sum(z * w, axis=(-2, -1))) - delta * sq(_v(p, mu, z))
    rhs = delta ** (1 - min(2.0, p)) * sq(_v(pc, mu ** (p - 1), w))
    return np.maximum(lhs, 0.0) / rhs


def comparison_ratio(p, q, z, mu):
    vp = sq(_v(p, mu, z))
    return sq(_v(q, mu, z)) / (vp + vp ** (q / p))
