"""Fields on uniform rectangular lattices (1-D and 2-D).

Node values of a ``GridFunction`` have shape ``(*resolution, m)``.  Cell
fields (e.g. discrete gradients) live at cell centres and have shape
``(*(resolution - 1), ...)``.
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import InvalidArgument, UnsupportedError

FACES = {"x-": (0, 0), "x+": (0, 1), "y-": (1, 0), "y+": (1, 1)}
TAGS = ("dirichlet", "neumann")
ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    extent: tuple          # ((a1, b1), (a2, b2), ...)
    resolution: tuple      # nodes per axis
    boundary_tags: tuple = ()   # ((face, tag), ...), missing faces are dirichlet
    corner_mode: bool = False

    def __post_init__(self):
        ext = tuple(tuple(float(v) for v in e) for e in self.extent)
        res = tuple(int(r) for r in np.atleast_1d(self.resolution))
        object.__setattr__(self, "extent", ext)
        object.__setattr__(self, "resolution", res)
        if len(ext) not in (1, 2) or len(ext) != len(res):
            raise InvalidArgument("grid must be 1-D or 2-D with one resolution per axis")
        for (a, b), r in zip(ext, res):
            if not (np.isfinite(a) and np.isfinite(b) and b > a):
                raise InvalidArgument(f"bad axis extent [{a}, {b}]")
            if r < 3:
                raise InvalidArgument("need at least 3 nodes per axis")
        tags = dict(self.boundary_tags)
        for f, t in tags.items():
            if f not in self.faces:
                raise InvalidArgument(f"unknown face '{f}' for a {self.dim}-D grid")
            if t not in TAGS:
                raise InvalidArgument(f"unknown boundary tag '{t}'")
        object.__setattr__(self, "boundary_tags", tuple(sorted(tags.items())))

    @property
    def dim(self):
        return len(self.extent)

    @property
    def faces(self):
        return [f for f, (ax, _) in FACES.items() if ax < self.dim]

    @property
    def spacing(self):
        return np.array([(b - a) / (r - 1) for (a, b), r in zip(self.extent, self.resolution)])

    @property
    def width(self):
        return np.array([b - a for a, b in self.extent])

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def cell_shape(self):
        return tuple(r - 1 for r in self.resolution)

    def tag(self, face):
        return dict(self.boundary_tags).get(face, "dirichlet")

    def axes(self):
        return [np.linspace(a, b, r) for (a, b), r in zip(self.extent, self.resolution)]

    def coords(self):
        """Node coordinates, shape (*resolution, dim)."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def cell_axes(self):
        return [0.5 * (ax[1:] + ax[:-1]) for ax in self.axes()]

    def cell_centers(self):
        return np.stack(np.meshgrid(*self.cell_axes(), indexing="ij"), axis=-1)

    def cell_grid(self):
        """The lattice formed by the cell centres."""
        h = self.spacing
        ext = tuple((a + d / 2, b - d / 2) for (a, b), d in zip(self.extent, h))
        return GridSpec(ext, tuple(r - 1 for r in self.resolution))

    def node_weights(self):
        """Tensor trapezoid weights; they sum to the box volume."""
        ws = []
        for ax in self.axes():
            w = np.full(ax.size, ax[1] - ax[0])
            w[0] = w[-1] = w[0] / 2
            ws.append(w)
        out = ws[0]
        for w in ws[1:]:
            out = np.multiply.outer(out, w)
        return out

    def face_index(self, face):
        ax, side = FACES[face]
        idx = [slice(None)] * self.dim
        idx[ax] = -1 if side else 0
        return tuple(idx)

    def face_weights(self, face):
        """Trapezoid weights along a face, shape of the node lattice (zeros off the face)."""
        ax, _ = FACES[face]
        w = np.zeros(self.resolution)
        if self.dim == 1:
            w[self.face_index(face)] = 1.0
            return w
        other = 1 - ax
        t = self.axes()[other]
        fw = np.full(t.size, t[1] - t[0])
        fw[0] = fw[-1] = fw[0] / 2
        w[self.face_index(face)] = fw
        return w

    def boundary_mask(self):
        m = np.zeros(self.resolution, dtype=bool)
        for f in self.faces:
            m[self.face_index(f)] = True
        return m


def make_grid(extent, resolution, tags=None, corner_mode=False) -> GridSpec:
    if np.ndim(extent) == 1:
        extent = (tuple(extent),)
    resolution = tuple(np.broadcast_to(np.atleast_1d(resolution), (len(extent),)))
    return GridSpec(tuple(extent), resolution, tuple((tags or {}).items()), corner_mode)


@dataclass(frozen=True)
class GridFunction:
    grid: GridSpec
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape == self.grid.resolution:
            v = v[..., None]
        if v.shape[:-1] != self.grid.resolution:
            raise InvalidArgument(f"values shape {v.shape} does not match grid {self.grid.resolution}")
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("field values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def components(self):
        return self.values.shape[-1]

    @property
    def scalar(self):
        """Values without the component axis (requires m = 1)."""
        if self.components != 1:
            raise InvalidArgument("field is not scalar")
        return self.values[..., 0]

    def with_values(self, values):
        return GridFunction(self.grid, values, dict(self.meta))


def sample(grid: GridSpec, f: Callable, components: Optional[int] = None) -> GridFunction:
    """Evaluate f(x) at every node; x has shape (..., dim)."""
    x = grid.coords()
    v = np.asarray(f(x), dtype=float)
    if v.shape == grid.resolution:
        v = v[..., None]
    if components is not None and v.shape[-1] != components:
        raise InvalidArgument("sampled field has the wrong number of components")
    return GridFunction(grid, v)


# gradient and quadrature ----------------------------------------------------

def discrete_gradient(u: GridFunction) -> np.ndarray:
    """Cell-centred gradient, shape (*cells, m, n); exact for affine fields."""
    g = u.grid
    v = u.values
    h = g.spacing
    if g.dim == 1:
        d = (v[1:] - v[:-1]) / h[0]
        return d[..., None]
    dx = 0.5 * ((v[1:, :-1] - v[:-1, :-1]) + (v[1:, 1:] - v[:-1, 1:])) / h[0]
    dy = 0.5 * ((v[:-1, 1:] - v[:-1, :-1]) + (v[1:, 1:] - v[1:, :-1])) / h[1]
    return np.stack([dx, dy], axis=-1)


def cell_field(grid: GridSpec, values) -> GridFunction:
    """Wrap cell-centred values as a field on the cell-centre lattice."""
    values = np.asarray(values, dtype=float)
    cg = grid.cell_grid()
    values = values.reshape(cg.resolution + (-1,))
    return GridFunction(cg, values)


def integrate(field, grid: Optional[GridSpec] = None, rule: Optional[str] = None):
    """Quadrature over the box or its boundary.

    rule 'cell'     midpoint rule on a cell-centred array (or callable)
    rule 'node'     trapezoid rule on node values
    rule 'lattice'  plain lattice sum times cell volume (telescoping-exact)
    rule 'boundary' integral over the boundary: callable at face midpoints,
                    or node values with trapezoid weights along each face
    """
    if isinstance(field, GridFunction):
        grid = field.grid
        vals = field.values
        rule = rule or "node"
    else:
        if grid is None:
            raise InvalidArgument("integrate needs a grid for raw arrays")
        if callable(field):
            if rule == "boundary":
                return _boundary_callable(field, grid)
            vals = np.asarray(field(grid.cell_centers()), dtype=float)
            rule = rule or "cell"
        else:
            vals = np.asarray(field, dtype=float)
        if rule is None:
            if vals.shape[:grid.dim] == grid.cell_shape:
                rule = "cell"
            elif vals.shape[:grid.dim] == grid.resolution:
                rule = "node"
            else:
                raise InvalidArgument("array matches neither cells nor nodes")
    d = grid.dim
    if rule == "cell":
        return _squeeze(vals.sum(axis=tuple(range(d))) * grid.cell_volume)
    if rule == "lattice":
        return _squeeze(vals.sum(axis=tuple(range(d))) * grid.cell_volume)
    if rule == "node":
        w = grid.node_weights().reshape(grid.resolution + (1,) * (vals.ndim - d))
        return _squeeze((w * vals).sum(axis=tuple(range(d))))
    if rule == "boundary":
        tot = 0.0
        for f in grid.faces:
            w = grid.face_weights(f).reshape(grid.resolution + (1,) * (vals.ndim - d))
            tot = tot + (w * vals).sum(axis=tuple(range(d)))
        return _squeeze(tot)
    raise InvalidArgument(f"unknown quadrature rule '{rule}'")


def _boundary_callable(f, grid):
    if grid.dim == 1:
        a, b = grid.extent[0]
        return _squeeze(np.asarray(f(np.array([[a]])))[0] + np.asarray(f(np.array([[b]])))[0])
    tot = 0.0
    (a0, b0), (a1, b1) = grid.extent
    cx, cy = grid.cell_axes()
    hx, hy = grid.spacing
    for pts, h in ((np.stack([cx, np.full_like(cx, a1)], -1), hx),
                   (np.stack([cx, np.full_like(cx, b1)], -1), hx),
                   (np.stack([np.full_like(cy, a0), cy], -1), hy),
                   (np.stack([np.full_like(cy, b0), cy], -1), hy)):
        tot = tot + np.asarray(f(pts), dtype=float).sum(axis=0) * h
    return _squeeze(tot)


def _squeeze(v):
    v = np.asarray(v)
    if v.ndim == 0:
        return float(v)
    if v.shape == (1,):
        return float(v[0])
    return v


# shifts ---------------------------------------------------------------------

def lattice_steps(grid: GridSpec, h) -> np.ndarray:
    """Integer lattice steps of the displacement h; raises if h is off-lattice."""
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.shape != (grid.dim,):
        raise InvalidArgument(f"shift must have {grid.dim} components")
    k = h / grid.spacing
    kr = np.round(k)
    if np.any(np.abs(k - kr) > ALIGN_TOL * np.maximum(1, np.abs(k))):
        raise InvalidArgument(f"shift {h} is not a multiple of the grid spacing")
    return kr.astype(int)


def shift_difference(u: GridFunction, h, order: int = 1) -> GridFunction:
    """Delta_h u (order 1) or u(x+h)+u(x-h)-2u(x) (order 2) on the shrunken box."""
    if order not in (1, 2):
        raise InvalidArgument("order must be 1 or 2")
    g = u.grid
    k = lattice_steps(g, h)
    return _shift_steps(u, k, order)


def diff_array(v: np.ndarray, k, order: int):
    """Raw lattice differences of node values ``v`` (grid axes first).

    Returns the difference array and the index window (start, stop) per axis
    of the nodes where it is defined.
    """
    k = np.asarray(k, dtype=int)
    dim = k.size
    res = np.array(v.shape[:dim])
    if np.any(np.abs(k) * order >= res - 1 + (order == 1)):
        raise InvalidArgument("shift is not smaller than the domain")
    win = []
    for ax in range(dim):
        kk = int(k[ax])
        if order == 1:
            win.append((max(0, -kk), res[ax] - max(0, kk)))
        else:
            win.append((abs(kk), res[ax] - abs(kk)))

    def take(off):
        return v[tuple(slice(s + o, e + o) for (s, e), o in zip(win, off))]

    zero = np.zeros_like(k)
    if order == 1:
        d = take(k) - take(zero)
    else:
        d = take(k) + take(-k) - 2 * take(zero)
    return d, win


def _shift_steps(u, k, order):
    g = u.grid
    d, win = diff_array(u.values, k, order)
    axes = g.axes()
    ext = tuple((axes[ax][s], axes[ax][e - 1]) for ax, (s, e) in enumerate(win))
    sizes = tuple(e - s for s, e in win)
    if min(sizes) < 3:
        raise InvalidArgument("shifted domain has fewer than 3 nodes per axis")
    sub = GridSpec(ext, sizes)
    return GridFunction(sub, d, {"omega_h": ext, "offset": tuple(s for s, _ in win)})


# extensions -----------------------------------------------------------------

def _face_name(face, dim):
    if isinstance(face, str):
        if face not in FACES or FACES[face][0] >= dim:
            raise InvalidArgument(f"unknown face '{face}'")
        return face
    nrm = np.asarray(face, dtype=float)
    if nrm.shape != (dim,):
        raise InvalidArgument("face normal has the wrong dimension")
    nz = np.flatnonzero(np.abs(nrm) > 1e-12)
    if nz.size != 1:
        raise UnsupportedError("only axis-aligned faces can be reflected")
    ax = int(nz[0])
    # an outward normal pointing in -e_ax is the lower face
    return ("x", "y")[ax] + ("+" if nrm[ax] > 0 else "-")


def extend(u: GridFunction, face, parity: str) -> GridFunction:
    """Reflect u across a flat face onto the doubled box (2N-1 nodes on that axis)."""
    if parity not in ("odd", "even", "zero"):
        raise InvalidArgument("parity must be odd, even or zero")
    g = u.grid
    face = _face_name(face, g.dim)
    ax, side = FACES[face]
    v = np.moveaxis(u.values, ax, 0)
    if parity == "odd":
        trace = v[-1] if side else v[0]
        scale = max(1.0, float(np.max(np.abs(v))))
        if np.max(np.abs(trace)) > 1e-8 * scale:
            warnings.warn("odd extension of a field with non-zero trace; the result jumps across the face")
    body = v[:-1] if side else v[1:]
    mirror = body[::-1]
    if parity == "odd":
        mirror = -mirror
    elif parity == "zero":
        mirror = np.zeros_like(mirror)
    w = np.concatenate([v, mirror]) if side else np.concatenate([mirror, v])
    w = np.moveaxis(w, 0, ax)
    a, b = g.extent[ax]
    ext = list(g.extent)
    ext[ax] = (a, 2 * b - a) if side else (2 * a - b, b)
    res = list(g.resolution)
    res[ax] = 2 * res[ax] - 1
    tags = dict(g.boundary_tags)
    tags.pop(face, None)
    newg = GridSpec(tuple(ext), tuple(res), tuple(tags.items()), g.corner_mode)
    return GridFunction(newg, w, {"extended": face, "parity": parity})


# smoothing ------------------------------------------------------------------

def _disk_rule(nr=6, nt=16):
    r, wr = np.polynomial.legendre.leggauss(nr)
    r = 0.5 * (r + 1)
    wr = 0.5 * wr * r           # area element r dr
    t = 2 * np.pi * (np.arange(nt) + 0.5) / nt
    pts = np.stack([np.outer(r, np.cos(t)).ravel(), np.outer(r, np.sin(t)).ravel()], -1)
    w = np.repeat(wr, nt) * (2 * np.pi / nt)
    return pts, w / w.sum()


def smoothing_radius(x, center, r_prime, s_prime):
    d = np.linalg.norm(np.asarray(x) - np.asarray(center), axis=-1)
    return 0.5 * np.maximum(0.0, np.minimum(d - r_prime, s_prime - d))


def smooth_annulus(u: GridFunction, center, r_prime: float, s_prime: float) -> GridFunction:
    """Average u over B_theta(x)(x), theta(x) = max(0, min(|x-c|-r', s'-|x-c|))/2.

    The average is a fixed cubature of the piecewise (bi)linear interpolant of
    u over the ball, so affine fields are reproduced exactly when the ball stays
    inside the box.  Nodes with theta = 0 keep their value.
    """
    g = u.grid
    c = np.atleast_1d(np.asarray(center, dtype=float))
    if c.shape != (g.dim,):
        raise InvalidArgument("center has the wrong dimension")
    if not 0 < r_prime < s_prime:
        raise InvalidArgument("need 0 < r' < s'")
    dist = min(min(ci - a, b - ci) for ci, (a, b) in zip(c, g.extent))
    if s_prime >= dist:
        raise InvalidArgument("annulus leaves the domain")
    x = g.coords()
    th = smoothing_radius(x, c, r_prime, s_prime)
    act = th > 0
    out = np.array(u.values)
    if not act.any():
        return GridFunction(g, out)
    xa = x[act]
    ta = th[act]
    if g.dim == 1:
        t, w = np.polynomial.legendre.leggauss(8)
        pts = xa[:, 0][:, None] + ta[:, None] * t[None, :]
        ax = g.axes()[0]
        for j in range(u.components):
            vals = np.interp(pts, ax, u.values[:, j])
            out[act, j] = vals @ w / w.sum()
    else:
        dp, w = _disk_rule()
        pts = xa[:, None, :] + ta[:, None, None] * dp[None, :, :]
        interp = RegularGridInterpolator(tuple(g.axes()), u.values, method="linear")
        vals = interp(pts.reshape(-1, 2)).reshape(pts.shape[0], pts.shape[1], -1)
        out[act] = np.einsum("kqj,q->kj", vals, w)
    return GridFunction(g, out, {"smoothed": (tuple(c), r_prime, s_prime)})


# cancellation identity --------------------------------------------------------

def _parities(parity):
    if isinstance(parity, str):
        return parity, parity
    ps, pt = parity
    return ps, pt


def cancellation_check(sigma, tau, h: float, parity="even", spacing: Optional[float] = None) -> float:
    """Residual of the two-slab cancellation identity for same-parity pairs.

    sigma and tau are samples on a lattice symmetric about 0 (odd length), or
    1-D GridFunctions on such a lattice.  The returned value is

        | int_0^h sigma(x) (tau(x-h) - tau(x)) dx
          - int_{-h}^0 sigma(x) (tau(x+h) - tau(x)) dx |,

    the difference of the two boundary slabs produced by integrating
    Delta_h(sigma Delta_{-h} tau) and Delta_{-h}(sigma Delta_h tau) over a
    half-space.  It vanishes when sigma, tau are both even or both odd.
    """
    ps, pt = _parities(parity)
    for p in (ps, pt):
        if p not in ("odd", "even"):
            raise InvalidArgument("parity must be 'odd' or 'even'")
    if ps != pt:
        raise InvalidArgument("sigma and tau must be declared with the same parity")
    s_vals, dx = _symmetric_samples(sigma, spacing)
    t_vals, dx2 = _symmetric_samples(tau, spacing)
    if s_vals.shape != t_vals.shape or abs(dx - dx2) > 1e-14 * dx:
        raise InvalidArgument("sigma and tau must share a lattice")
    N = (s_vals.size - 1) // 2
    k = abs(h) / dx
    if abs(k - round(k)) > ALIGN_TOL * max(1.0, k):
        raise InvalidArgument("h is not a multiple of the spacing")
    k = int(round(k))
    if k == 0 or k > N / 2:
        raise InvalidArgument("need 0 < |h| <= s/2")
    sign = 1 if ps == "even" else -1
    scale_s = max(float(np.max(np.abs(s_vals))), 1e-300)
    scale_t = max(float(np.max(np.abs(t_vals))), 1e-300)
    for vals, sc in ((s_vals, scale_s), (t_vals, scale_t)):
        if np.max(np.abs(vals - sign * vals[::-1])) > 1e-8 * sc:
            warnings.warn(f"samples are not {ps} to within 1e-8 of their scale")
    i = np.arange(k + 1)
    w = np.full(k + 1, dx)
    w[0] = w[-1] = dx / 2
    c = N  # index of x = 0
    right = s_vals[c + i] * (t_vals[c + i - k] - t_vals[c + i])
    left = s_vals[c - i] * (t_vals[c - i + k] - t_vals[c - i])
    return float(abs(np.sum(w * right) - np.sum(w * left)))


def _symmetric_samples(f, spacing):
    if isinstance(f, GridFunction):
        g = f.grid
        if g.dim != 1:
            raise InvalidArgument("cancellation_check works on 1-D fields")
        a, b = g.extent[0]
        if abs(a + b) > 1e-12 * (b - a) or g.resolution[0] % 2 == 0:
            raise InvalidArgument("field must be sampled symmetrically about 0")
        return f.scalar, float(g.spacing[0])
    v = np.asarray(f, dtype=float).ravel()
    if v.size % 2 == 0 or v.size < 5:
        raise InvalidArgument("need an odd number (>= 5) of symmetric samples")
    if spacing is None:
        spacing = 1.0
    return v, float(spacing)


# serialisation ----------------------------------------------------------------

def fmt(x: float) -> str:
    return format(float(x), ".17g")


def to_csv(u: GridFunction) -> str:
    g = u.grid
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    names = ["x", "y"][:g.dim]
    wr.writerow(names + ["component_index", "value"])
    x = g.coords().reshape(-1, g.dim)
    v = u.values.reshape(-1, u.components)
    for xi, vi in zip(x, v):
        for j, val in enumerate(vi):
            wr.writerow([fmt(c) for c in xi] + [j, fmt(val)])
    return buf.getvalue()


def write_csv(u: GridFunction, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(to_csv(u))


def read_csv(path, grid: GridSpec) -> GridFunction:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head, rows = rows[0], rows[1:]
    d = len(head) - 2
    if d != grid.dim:
        raise InvalidArgument("CSV dimension does not match grid")
    m = 1 + max(int(r[d]) for r in rows)
    vals = np.array([float(r[d + 1]) for r in rows]).reshape(grid.resolution + (m,))
    return GridFunction(grid, vals)
