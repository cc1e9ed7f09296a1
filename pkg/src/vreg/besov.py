"""Difference-quotient Besov seminorms and log-log decay fits.

For a field v on a lattice, a direction e and a length h the probe measures
||Delta_{h e} v||_{L^p(Omega^h)} (first or second differences), where Omega^h
is the set of nodes whose whole stencil stays in the box.  The decay slope in
h estimates the smoothness index s of B^{s,p}_infty.
"""
from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import integrands as I
from .errors import InvalidArgument
from .fields import (ALIGN_TOL, GridFunction, GridSpec, cell_field, diff_array,
                     discrete_gradient, extend, fmt)

SATURATION_MARGIN = 0.05
ANISOTROPY_WARN = 0.15
MIN_RETAINED = 0.5


@dataclass(frozen=True)
class BesovProbe:
    s: float = 0.5
    p_norm: float = 2.0
    directions: Optional[tuple] = None   # integer lattice vectors; default axes (+ diagonals in 2-D)
    h_set: Optional[tuple] = None        # lengths; default dyadic from width/8
    order: int = 1
    J: int = 6

    def __post_init__(self):
        if self.order not in (1, 2):
            raise InvalidArgument("order must be 1 or 2")
        if self.p_norm < 1:
            raise InvalidArgument("p_norm must be >= 1")
        if not 0 < self.s < 2:
            raise InvalidArgument("s must lie in (0, 2)")


@dataclass
class BesovEstimate:
    slope: float
    r_squared: float
    per_direction: dict
    seminorm_at: dict
    saturated: bool
    seminorm: float = 0.0
    table: list = field(default_factory=list)   # (direction, h, seminorm)
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "slope": self.slope,
            "r_squared": self.r_squared,
            "per_direction": dict(self.per_direction),
            "seminorm_at": {fmt(k): v for k, v in sorted(self.seminorm_at.items())},
            "saturated": self.saturated,
            "seminorm": self.seminorm,
            "warnings": list(self.warnings),
        }

    def table_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["direction", "h", "seminorm"])
        for d, h, v in self.table:
            wr.writerow([d, fmt(h), fmt(v)])
        return buf.getvalue()


def default_directions(dim):
    if dim == 1:
        return ((1,),)
    return ((1, 0), (0, 1), (1, 1), (1, -1))


def default_h_set(grid: GridSpec, J: int = 6):
    """Dyadic lengths H0 2^-j, H0 = width/8, snapped to whole lattice steps.

    With equal spacings each length is rounded to the nearest multiple of the
    spacing (duplicates and zero steps dropped); otherwise only lengths that
    are exact multiples of every spacing are kept.
    """
    H0 = float(np.min(grid.width)) / 8
    sp = grid.spacing
    out = []
    if np.allclose(sp, sp[0], rtol=1e-12):
        for j in range(J + 1):
            k = int(np.floor(H0 / 2 ** j / sp[0] + 1e-9))
            if k >= 1 and (not out or k * sp[0] < out[-1] - 1e-15):
                out.append(k * sp[0])
        return tuple(out)
    for j in range(J + 1):
        h = H0 / 2 ** j
        k = h / sp
        if np.all(np.abs(k - np.round(k)) <= ALIGN_TOL * np.maximum(1, k)) and np.all(np.round(k) >= 1):
            out.append(h)
    return tuple(out)


def _dir_name(e):
    return "(" + ",".join(str(int(c)) for c in e) + ")"


def _lp_norm(d, p, grid_spacing, sizes):
    """Trapezoid L^p norm over the node box of the given sizes."""
    w = None
    for ax, n in enumerate(sizes):
        wa = np.full(n, grid_spacing[ax])
        if n > 1:
            wa[0] = wa[-1] = wa[0] / 2
        w = wa if w is None else np.multiply.outer(w, wa)
    mag = np.sqrt(np.sum(d * d, axis=-1))
    if np.isinf(p):
        return float(mag.max()) if mag.size else 0.0
    return float(np.sum(w * mag ** p) ** (1 / p))


def _measure(v: GridFunction, probe: BesovProbe):
    """Per (direction, h): (|h vec|, norm of differences, retained fraction)."""
    g = v.grid
    dirs = probe.directions or default_directions(g.dim)
    hs = probe.h_set or default_h_set(g, probe.J)
    if not hs:
        raise InvalidArgument("no lattice-aligned shifts in the probe")
    out = []
    warn = []
    total = np.prod(g.resolution)
    for e in dirs:
        e = np.asarray(e, dtype=float)
        if e.shape != (g.dim,):
            raise InvalidArgument("direction has the wrong dimension")
        for h in hs:
            if h > np.min(g.width) / 3 + 1e-12:
                raise InvalidArgument(f"shift {h} exceeds a third of the domain width")
            vec = h * e
            k = vec / g.spacing
            kr = np.round(k)
            if np.any(np.abs(k - kr) > ALIGN_TOL * np.maximum(1, np.abs(k))):
                raise InvalidArgument(f"shift {vec} is not lattice aligned")
            kr = kr.astype(int)
            try:
                d, win = diff_array(v.values, kr, probe.order)
            except InvalidArgument:
                warn.append(f"empty shifted domain for h={h:g} along {_dir_name(e)}; skipped")
                continue
            sizes = [b - a for a, b in win]
            if min(sizes) < 1:
                warn.append(f"empty shifted domain for h={h:g} along {_dir_name(e)}; skipped")
                continue
            frac = np.prod(sizes) / total
            nrm = _lp_norm(d, probe.p_norm, g.spacing, sizes)
            out.append((_dir_name(e), float(np.linalg.norm(vec)), nrm, frac))
    for w_ in warn:
        warnings.warn(w_)
    return out, warn


def seminorm(v: GridFunction, probe: BesovProbe) -> float:
    """max over shifts and directions of |h|^-s ||Delta_h v||_{L^p(Omega^h)}."""
    rows, _ = _measure(v, probe)
    vals = [n / hh ** probe.s for _, hh, n, _ in rows]
    return float(max(vals)) if vals else 0.0


def decay_fit(v: GridFunction, probe: BesovProbe) -> BesovEstimate:
    rows, warn = _measure(v, probe)
    table = [(d, hh, n / hh ** probe.s) for d, hh, n, _ in rows]
    semi_at = {}
    for d, hh, n, _ in rows:
        semi_at[hh] = max(semi_at.get(hh, 0.0), n / hh ** probe.s)
    usable = [r for r in rows if r[3] >= MIN_RETAINED]
    semi = max(semi_at.values()) if semi_at else 0.0
    if len({r[1] for r in usable}) < 4 and not all(r[2] == 0 for r in usable):
        raise InvalidArgument("fewer than 4 usable shifts (Omega^h must keep half the cells)")
    if all(r[2] == 0 for r in usable):
        return BesovEstimate(float("inf"), 1.0, {}, semi_at, False, 0.0, table, warn)
    per = {}
    Xs, Ys, groups = [], [], []
    for d in dict.fromkeys(r[0] for r in usable):
        pts = [(np.log(r[1]), np.log(r[2])) for r in usable if r[0] == d and r[2] > 0]
        if len(pts) < 2:
            per[d] = float("inf")
            continue
        x, y = np.array(pts).T
        per[d] = float(np.polyfit(x, y, 1)[0])
        Xs.append(x)
        Ys.append(y)
        groups.append(d)
    finite = [s for s in per.values() if np.isfinite(s)]
    slope = float(np.mean(finite)) if finite else float("inf")
    # r^2 of the common-slope model with one intercept per direction
    ss_res = ss_tot = 0.0
    for x, y in zip(Xs, Ys):
        c = np.mean(y - slope * x)
        ss_res += float(np.sum((y - slope * x - c) ** 2))
        ss_tot += float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    r2 = float(min(1.0, max(0.0, r2)))
    if len(finite) > 1 and max(finite) - min(finite) > ANISOTROPY_WARN:
        msg = f"anisotropic decay: per-direction slopes span {max(finite) - min(finite):.3f}"
        warn.append(msg)
        warnings.warn(msg)
    sat = bool(slope >= probe.order - SATURATION_MARGIN)
    return BesovEstimate(slope, r2, per, semi_at, sat, semi, table, warn)


def v_field(u: GridFunction, integrand: I.IntegrandSpec) -> GridFunction:
    """V_{p,mu}(Du) on the cell-centre lattice, components flattened to m*n."""
    P = integrand.params
    Du = discrete_gradient(u)
    V = I.v_transform(P.p, P.mu, Du)
    return cell_field(u.grid, V.reshape(V.shape[:-2] + (-1,)))


def v_field_regularity(u: GridFunction, integrand: I.IntegrandSpec, probe: Optional[BesovProbe] = None,
                       boundary_handling: str = "interior-shrink", face=None,
                       window=None) -> BesovEstimate:
    """Measured Besov exponent of V_{p,mu}(Du) at p_norm = 2.

    Reflect modes extend u across ``face`` (default: the single tagged face of
    the grid) before differentiating.  ``window`` optionally restricts the
    V-field to a sub-box [(a, b), ...] of cell centres.
    """
    probe = probe or BesovProbe(s=0.5, p_norm=2.0)
    if probe.p_norm != 2:
        probe = BesovProbe(probe.s, 2.0, probe.directions, probe.h_set, probe.order, probe.J)
    if boundary_handling not in ("interior-shrink", "odd-reflect", "even-reflect"):
        raise InvalidArgument("boundary_handling must be interior-shrink, odd-reflect or even-reflect")
    if boundary_handling != "interior-shrink":
        if face is None:
            tagged = [f for f, _ in u.grid.boundary_tags]
            if len(tagged) != 1:
                raise InvalidArgument("reflection needs a face (grid has no single tagged face)")
            face = tagged[0]
        u = extend(u, face, "odd" if boundary_handling == "odd-reflect" else "even")
    V = v_field(u, integrand)
    if window is not None:
        V = restrict(V, window)
    return decay_fit(V, probe)


def restrict(v: GridFunction, window) -> GridFunction:
    """Sub-box of a field; ``window`` is [(a, b), ...] in coordinates."""
    g = v.grid
    sl = []
    ext = []
    for ax, (a, b) in zip(g.axes(), window):
        idx = np.flatnonzero((ax >= a - 1e-12) & (ax <= b + 1e-12))
        if idx.size < 3:
            raise InvalidArgument("window holds fewer than 3 nodes per axis")
        sl.append(slice(idx[0], idx[-1] + 1))
        ext.append((ax[idx[0]], ax[idx[-1]]))
    return GridFunction(GridSpec(tuple(ext), tuple(s.stop - s.start for s in sl)), v.values[tuple(sl)])


def estimate_json(est: BesovEstimate) -> str:
    from .solver import _jsonable
    return json.dumps(_jsonable(est.to_dict()), sort_keys=True, indent=2)
