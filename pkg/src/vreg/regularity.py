"""Excess energy, excess-decay profiles and epsilon-regularity classification.

Balls are intersected with the box: Omega_R(x) is the set of cells whose
centre lies within distance R of x.
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import integrands as I
from .errors import InvalidArgument
from .fields import GridFunction, discrete_gradient, fmt

MIN_CELLS = 4


def _cell_data(u: GridFunction):
    g = u.grid
    c = g.cell_centers().reshape(-1, g.dim)
    Du = discrete_gradient(u)
    Du = Du.reshape((-1,) + Du.shape[-2:])
    return c, Du


def _ball(c, x, R):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    sel = np.linalg.norm(c - x, axis=-1) <= R
    if sel.sum() < MIN_CELLS:
        raise InvalidArgument(f"Omega_R(x) holds {int(sel.sum())} cells; need {MIN_CELLS}")
    return sel


def _v_excess(Du, p, mu):
    mean = Du.mean(axis=0)
    V = I.v_transform(p, mu, Du - mean)
    return float(np.mean(np.sum(V * V, axis=(-2, -1)))), mean


def excess(u: GridFunction, x, R: float, beta: float, p: float, mu: float = 0.0) -> float:
    """E(x,R) = mean over Omega_R(x) of |V_p(Du - (Du)_R)|^2, plus R^(2 beta)."""
    c, Du = _cell_data(u)
    sel = _ball(c, x, R)
    ve, _ = _v_excess(Du[sel], p, mu)
    return ve + R ** (2 * beta)


@dataclass
class ExcessProfile:
    center: tuple
    radii: list
    excess_values: list
    mean_gradients: list
    beta: float
    fitted_decay: Optional[float]
    consistent: Optional[bool]
    warnings: list = field(default_factory=list)

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["R", "excess", "mean_grad_norm"])
        for R, E, g in zip(self.radii, self.excess_values, self.mean_gradients):
            wr.writerow([fmt(R), fmt(E), fmt(np.linalg.norm(g))])
        return buf.getvalue()


def excess_decay_profile(u: GridFunction, x, R0: float, tau: float = 0.25, steps: int = 4,
                         beta: float = 0.5, p: float = 2.0, mu: float = 0.0) -> ExcessProfile:
    if not 0 < tau <= 0.25:
        raise InvalidArgument("tau must lie in (0, 1/4]")
    c, Du = _cell_data(u)
    radii, vals, means, warn = [], [], [], []
    for k in range(steps + 1):
        R = R0 * tau ** k
        try:
            sel = _ball(c, x, R)
        except InvalidArgument:
            warn.append(f"profile truncated at k={k}: ball of radius {R:.3g} is below the lattice")
            warnings.warn(warn[-1])
            break
        ve, mean = _v_excess(Du[sel], p, mu)
        radii.append(R)
        vals.append(ve + R ** (2 * beta))
        means.append(mean)
    slope = None
    consistent = None
    if len(radii) >= 2:
        slope = float(np.polyfit(np.log(radii), np.log(vals), 1)[0])
        consistent = bool(slope >= 2 * beta - 0.2)
    return ExcessProfile(tuple(np.atleast_1d(x).tolist()), radii, vals, means, beta, slope,
                         consistent, warn)


@dataclass
class ClassificationMap:
    sample_points: np.ndarray
    labels: list
    excess_min: list
    R_at_min: list
    thresholds: dict

    @property
    def regular(self):
        return np.array([lab == "regular" for lab in self.labels])

    def to_csv(self):
        dim = self.sample_points.shape[1]
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["x", "y"][:dim] + ["label", "excess_min", "R_at_min"])
        for x, lab, e, r in zip(self.sample_points, self.labels, self.excess_min, self.R_at_min):
            wr.writerow([fmt(v) for v in x] + [lab, fmt(e), fmt(r)])
        return buf.getvalue()


def _integrand_params(problem):
    spec = getattr(problem, "integrand", problem)
    return spec.params


def probe_radii(grid, R0, count=None):
    """R0/2, R0/4, ... down to the smallest ball that still holds MIN_CELLS cells."""
    hmin = float(np.max(grid.spacing))
    out = []
    R = R0 / 2
    while R >= hmin * (1.0 if grid.dim == 2 else 2.0) and (count is None or len(out) < count):
        out.append(R)
        R /= 2
    return out


def classify_points(u: GridFunction, problem, epsilon: float, M: float, R0: float,
                    beta: float, sample, radii: Optional[Sequence[float]] = None) -> ClassificationMap:
    """Regular iff for some tested R < R0 the mean gradient is at most M and the
    V-excess (without R^(2 beta)) is below epsilon^2."""
    if epsilon <= 0 or M <= 0 or R0 <= 0:
        raise InvalidArgument("thresholds must be positive")
    P = _integrand_params(problem)
    c, Du = _cell_data(u)
    pts = np.asarray(sample, dtype=float).reshape(-1, u.grid.dim)
    radii = list(radii) if radii is not None else probe_radii(u.grid, R0)
    radii = [R for R in radii if R < R0]
    labels, emin, rmin = [], [], []
    for x in pts:
        best, best_R, regular = np.inf, np.nan, False
        for R in radii:
            sel = np.linalg.norm(c - x, axis=-1) <= R
            if sel.sum() < MIN_CELLS:
                continue
            ve, mean = _v_excess(Du[sel], P.p, P.mu)
            if ve < best:
                best, best_R = ve, R
            if np.linalg.norm(mean) <= M and ve < epsilon ** 2:
                regular = True
        labels.append("regular" if regular else "singular-candidate")
        emin.append(float(best))
        rmin.append(float(best_R))
    return ClassificationMap(pts, labels, emin, rmin,
                             {"epsilon": epsilon, "M": M, "R0": R0, "beta": beta})


def _affine(a, dim, m):
    if callable(a):
        raise InvalidArgument("pass the affine map as (A, b)")
    A, b = a
    A = np.asarray(A, dtype=float).reshape(m, dim)
    b = np.asarray(b, dtype=float).reshape(m)
    return A, b


def _cell_values(u):
    v = u.values
    if u.grid.dim == 1:
        return 0.5 * (v[1:] + v[:-1])
    return 0.25 * (v[1:, 1:] + v[:-1, 1:] + v[1:, :-1] + v[:-1, :-1])


def caccioppoli_ratio(u: GridFunction, problem, x, R: float, a, M: float = np.inf,
                      forcing_sup: float = 0.0, neumann_sup: float = 0.0) -> dict:
    """Left side and right-side groups of a Caccioppoli inequality, no constants.

    lhs       mean over Omega_{R/2} of |V_p(D(u - a))|^2
    lower     mean over Omega_R of |V_p((w - (w)_R)/R)|^2, w = u - a
    data      |V_{p', mu^{p-1}}(R^alpha L)|^2, L = 1 + sup|f| R^{1-alpha} + sup|g_N|
    power     lower^(q/p)
    """
    P = _integrand_params(problem)
    g = u.grid
    A, b = _affine(a, g.dim, u.components)
    if np.linalg.norm(A) > M:
        raise InvalidArgument("|Da| exceeds the declared bound M")
    c = g.cell_centers().reshape(-1, g.dim)
    Du = discrete_gradient(u).reshape(-1, u.components, g.dim)
    w = _cell_values(u).reshape(-1, u.components) - (c @ A.T + b)
    half = _ball(c, x, R / 2)
    full = _ball(c, x, R)
    Vl = I.v_transform(P.p, P.mu, Du[half] - A)
    lhs = float(np.mean(np.sum(Vl * Vl, axis=(-2, -1))))
    wr = w[full] - w[full].mean(axis=0)
    Vr = I.v_transform(P.p, P.mu, (wr / R)[:, :, None])
    lower = float(np.mean(np.sum(Vr * Vr, axis=(-2, -1))))
    L = 1.0 + forcing_sup * R ** (1 - P.alpha) + neumann_sup
    Vd = I.v_transform(P.p_conj, P.mu ** (P.p - 1), np.array([[R ** P.alpha * L]]))
    data = float(np.sum(Vd * Vd))
    power = lower ** (P.q / P.p)
    rhs = {"lower_order": lower, "data": data, "power": power}
    tot = lower + data + power
    return {"lhs": lhs, "rhs_terms": rhs, "ratio": lhs / tot if tot > 0 else np.inf}
