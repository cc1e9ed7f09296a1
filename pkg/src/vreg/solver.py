"""Minimisation of the regularised functional

    E_eps(u) = int F(x, Du) + eps |Du|^q dx - int f.u dx + int_{Neumann} g_N.u

over continuous piecewise (bi)linear fields on a uniform lattice, with an
eps -> 0 continuation and a Lavrentiev-gap probe.

Discretisation: 1-D uses one midpoint per cell (Du is cellwise constant);
2-D uses Q1 elements with 2x2 Gauss points, which avoids the checkerboard
null mode of the single-point gradient.  Loads use trapezoid node weights.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import integrands as I
from .errors import InvalidArgument
from .fields import GridFunction, GridSpec, FACES

MU_FLOOR = 1e-8


@dataclass(frozen=True)
class ProblemSpec:
    integrand: I.IntegrandSpec
    grid: GridSpec
    forcing: object = 0.0            # number, callable f(x), or GridFunction
    dirichlet_data: object = None    # None (zero), number, callable, or GridFunction
    neumann_data: object = None      # None, callable g(x), or {face: callable}
    mode: str = "dirichlet"          # dirichlet | neumann | mixed

    def __post_init__(self):
        if self.mode not in ("dirichlet", "neumann", "mixed"):
            raise InvalidArgument("mode must be dirichlet, neumann or mixed")
        if self.integrand.params.n != self.grid.dim:
            raise InvalidArgument("integrand dimension does not match the grid")


@dataclass
class SolverConfig:
    epsilon0: float = 0.1
    rho: float = 0.5
    k_max: int = 12
    max_iterations: int = 5000
    gradient_tolerance: float = 1e-9
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    refresh: int = 20
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise InvalidArgument("rho must lie in (0, 1)")
        if self.epsilon0 <= 0 or self.gradient_tolerance <= 0 or self.max_iterations < 1:
            raise InvalidArgument("tolerances and epsilon0 must be positive")
        if not 0 < self.shrink < 1 or not 0 < self.sufficient_decrease < 1:
            raise InvalidArgument("line-search parameters must lie in (0, 1)")

    def schedule(self):
        return [self.epsilon0 * self.rho ** k for k in range(self.k_max + 1)]


@dataclass
class SolveReport:
    final_energy: float
    regularized_energy_trace: list
    el_residual: float
    iterations: list
    stress_qprime_norm: float
    converged: bool
    epsilon_trace: list = field(default_factory=list)
    q_energy_trace: list = field(default_factory=list)
    cauchy_trace: list = field(default_factory=list)
    relaxed_estimate: Optional[float] = None
    richardson_estimate: Optional[float] = None
    q_energy_decay_slope: Optional[float] = None
    flags: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_dict(self):
        d = {
            "final_energy": self.final_energy,
            "el_residual": self.el_residual,
            "epsilon_trace": list(self.epsilon_trace),
            "converged": self.converged,
            "regularized_energy_trace": list(self.regularized_energy_trace),
            "iterations": list(self.iterations),
            "stress_qprime_norm": self.stress_qprime_norm,
            "q_energy_trace": list(self.q_energy_trace),
            "cauchy_trace": list(self.cauchy_trace),
            "relaxed_estimate": self.relaxed_estimate,
            "richardson_estimate": self.richardson_estimate,
            "q_energy_decay_slope": self.q_energy_decay_slope,
            "flags": list(self.flags),
            "notes": list(self.notes),
        }
        return d

    def to_json(self):
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True, indent=2)


def _jsonable(o):
    if isinstance(o, dict):
        return {k: _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        o = float(o)
        if math.isnan(o) or math.isinf(o):
            return str(o)
        return float(format(o, ".17g"))
    if isinstance(o, np.integer):
        return int(o)
    return o


# discretisation -----------------------------------------------------------------

class Discretization:
    """Quadrature points, gradient operators and loads for one problem."""

    def __init__(self, problem: ProblemSpec):
        self.problem = problem
        g = problem.grid
        self.grid = g
        self.m = problem.integrand.params.m
        self.n = g.dim
        self.N = int(np.prod(g.resolution))
        self._build_gradient()
        self._build_boundary()
        self._build_loads()
        self.h1 = self.stiffness(np.ones(self.nq)) + sp.diags(self.node_w)
        self._h1_lu = splu(self.h1[self.free][:, self.free].tocsc())

    def _build_gradient(self):
        g = self.grid
        h = g.spacing
        idx = np.arange(self.N).reshape(g.resolution)
        if g.dim == 1:
            nc = g.resolution[0] - 1
            rows = np.repeat(np.arange(nc), 2)
            cols = np.stack([idx[:-1], idx[1:]], -1).ravel()
            vals = np.tile([-1.0 / h[0], 1.0 / h[0]], nc)
            self.G = [sp.csr_matrix((vals, (rows, cols)), shape=(nc, self.N))]
            self.xq = g.cell_centers().reshape(-1, 1)
            self.wq = np.full(nc, h[0])
        else:
            nx, ny = g.resolution[0] - 1, g.resolution[1] - 1
            gp = 0.5 + np.array([-1.0, 1.0]) / (2 * np.sqrt(3.0))
            i00 = idx[:-1, :-1].ravel()
            i10 = idx[1:, :-1].ravel()
            i01 = idx[:-1, 1:].ravel()
            i11 = idx[1:, 1:].ravel()
            ncell = nx * ny
            ax0, ax1 = g.axes()
            X0 = ax0[:-1][:, None].repeat(ny, 1).ravel()
            Y0 = ax1[:-1][None, :].repeat(nx, 0).ravel()
            Gx_r, Gx_c, Gx_v, Gy_v = [], [], [], []
            pts, rowoff = [], 0
            for xi in gp:
                for eta in gp:
                    r = rowoff + np.arange(ncell)
                    cols = np.stack([i00, i10, i01, i11], -1)
                    vx = np.stack([-(1 - eta) * np.ones(ncell), (1 - eta) * np.ones(ncell),
                                   -eta * np.ones(ncell), eta * np.ones(ncell)], -1) / h[0]
                    vy = np.stack([-(1 - xi) * np.ones(ncell), -xi * np.ones(ncell),
                                   (1 - xi) * np.ones(ncell), xi * np.ones(ncell)], -1) / h[1]
                    Gx_r.append(np.repeat(r, 4))
                    Gx_c.append(cols.ravel())
                    Gx_v.append(vx.ravel())
                    Gy_v.append(vy.ravel())
                    pts.append(np.stack([X0 + xi * h[0], Y0 + eta * h[1]], -1))
                    rowoff += ncell
            rows = np.concatenate(Gx_r)
            cols = np.concatenate(Gx_c)
            self.G = [sp.csr_matrix((np.concatenate(Gx_v), (rows, cols)), shape=(rowoff, self.N)),
                      sp.csr_matrix((np.concatenate(Gy_v), (rows, cols)), shape=(rowoff, self.N))]
            self.xq = np.concatenate(pts)
            self.wq = np.full(rowoff, h[0] * h[1] / 4)
        self.nq = self.wq.size
        self.GT = [Gj.T.tocsr() for Gj in self.G]

    def _build_boundary(self):
        g = self.grid
        pr = self.problem
        fixed = np.zeros(g.resolution, dtype=bool)
        self.neumann_faces = []
        for f in g.faces:
            tag = {"dirichlet": "dirichlet", "neumann": "neumann"}.get(pr.mode) or g.tag(f)
            if tag == "dirichlet":
                fixed[g.face_index(f)] = True
            else:
                self.neumann_faces.append(f)
        self.fixed = fixed.ravel()
        self.free = np.flatnonzero(~self.fixed)
        self.pure_neumann = not self.fixed.any()
        x = g.coords().reshape(-1, g.dim)
        self.x_nodes = x
        self.U_fixed = _node_values(pr.dirichlet_data, g, self.m)[self.fixed]

    def _build_loads(self):
        g = self.grid
        pr = self.problem
        self.node_w = g.node_weights().ravel()
        fvals = _node_values(pr.forcing, g, self.m)
        self.f_nodes = fvals
        b = self.node_w[:, None] * fvals
        gb = np.zeros((self.N, self.m))
        for face in self.neumann_faces:
            gv = _neumann_values(pr.neumann_data, face, g, self.m)
            gb += g.face_weights(face).ravel()[:, None] * gv
        self.g_load = gb
        self.b = b - gb
        if self.pure_neumann:
            fi = b.sum(axis=0)
            gi = gb.sum(axis=0)
            scale = max(1.0, float(np.abs(b).sum()), float(np.abs(gb).sum()))
            if np.any(np.abs(fi - gi) > 1e-10 * scale):
                raise InvalidArgument(
                    f"Neumann data violate compatibility: int f = {fi}, int g_N = {gi}")

    # --- algebra
    def gradient(self, U):
        """Du at quadrature points, shape (nq, m, n)."""
        return np.stack([Gj @ U for Gj in self.G], axis=-1)

    def divergence(self, S):
        """Adjoint of ``gradient`` weighted by the quadrature weights."""
        out = np.zeros((self.N, self.m))
        for j, GTj in enumerate(self.GT):
            out += GTj @ (self.wq[:, None] * S[..., j])
        return out

    def stiffness(self, w):
        K = None
        for Gj, GTj in zip(self.G, self.GT):
            Kj = GTj @ sp.diags(self.wq * w) @ Gj
            K = Kj if K is None else K + Kj
        return K.tocsr()

    def assemble(self, free_vals):
        U = np.empty((self.N, self.m))
        U[self.fixed] = self.U_fixed
        U[self.free] = free_vals
        return U

    def to_field(self, U):
        return GridFunction(self.grid, U.reshape(self.grid.resolution + (self.m,)))

    def from_field(self, u):
        if u.grid.resolution != self.grid.resolution:
            raise InvalidArgument("field does not conform to the problem grid")
        return np.array(u.values.reshape(self.N, -1), dtype=float)

    def mean(self, U):
        return (self.node_w[:, None] * U).sum(axis=0) / self.node_w.sum()

    def h1_dual(self, R):
        Rf = R[self.free]
        Z = self._h1_lu.solve(Rf)
        return float(np.sqrt(max(0.0, np.sum(Rf * Z))))


def _node_values(data, grid, m):
    N = int(np.prod(grid.resolution))
    if data is None:
        return np.zeros((N, m))
    if isinstance(data, GridFunction):
        if data.grid.resolution != grid.resolution:
            raise InvalidArgument("data field does not match the problem grid")
        return np.array(data.values.reshape(N, -1), dtype=float)
    if callable(data):
        x = grid.coords().reshape(N, grid.dim)
        v = np.asarray(data(x), dtype=float)
        return np.broadcast_to(v.reshape(N, -1), (N, m)).copy()
    v = np.asarray(data, dtype=float)
    return np.broadcast_to(v, (N, m)).copy()


def _neumann_values(data, face, grid, m):
    N = int(np.prod(grid.resolution))
    if data is None:
        return np.zeros((N, m))
    if isinstance(data, dict):
        data = data.get(face)
        if data is None:
            return np.zeros((N, m))
    return _node_values(data, grid, m)


def _effective_integrand(problem, notes):
    spec = problem.integrand
    if spec.params.mu == 0:
        notes.append(f"mu = 0 shifted to {MU_FLOOR:g} for a C^1 energy")
        spec = I.with_mu(spec, MU_FLOOR)
    return spec


# energy ------------------------------------------------------------------------

class Energy:
    def __init__(self, disc: Discretization, spec: I.IntegrandSpec):
        self.d = disc
        self.spec = spec

    def value(self, U, Du=None):
        Du = self.d.gradient(U) if Du is None else Du
        F = I._eval(self.spec, self.d.xq, Du)
        return float(np.sum(self.d.wq * F) - np.sum(self.d.b * U))

    def stress(self, U, Du=None):
        Du = self.d.gradient(U) if Du is None else Du
        return I._grad(self.spec, self.d.xq, Du)

    def grad(self, U, Du=None):
        S = self.stress(U, Du)
        return self.d.divergence(S) - self.d.b

    def curvature_weights(self, U):
        """Secant curvature <dF(z), z>/|z|^2 at each quadrature point."""
        Du = self.d.gradient(U)
        S = I._grad(self.spec, self.d.xq, Du)
        zz = np.sum(Du * Du, axis=(-2, -1))
        sz = np.sum(S * Du, axis=(-2, -1))
        t = 1e-6
        e = np.zeros_like(Du)
        e[..., 0, 0] = t
        F0 = I._eval(self.spec, self.d.xq, np.zeros_like(Du))
        c0 = (I._eval(self.spec, self.d.xq, e) + I._eval(self.spec, self.d.xq, -e) - 2 * F0) / t ** 2
        w = np.where(zz > 1e-24, sz / np.where(zz > 1e-24, zz, 1.0), c0)
        w = np.where(np.isfinite(w) & (w > 0), w, 0.0)
        top = float(w.max()) if w.size else 1.0
        floor = max(top * 1e-6, 1e-300)
        if top <= 0:
            w = np.ones_like(w)
        return np.maximum(w, floor)


def discrete_energy(problem: ProblemSpec, u: GridFunction, epsilon: float = 0.0) -> float:
    """E_eps(u) on the problem lattice (mu = 0 is evaluated as given)."""
    d = Discretization(problem)
    spec = I.regularized(problem.integrand, epsilon) if epsilon > 0 else problem.integrand
    return Energy(d, spec).value(d.from_field(u))


# optimiser ---------------------------------------------------------------------

def _precond(disc, energy, U):
    w = energy.curvature_weights(U)
    K = disc.stiffness(w)
    Kf = K[disc.free][:, disc.free]
    if disc.pure_neumann:
        scale = float(Kf.diagonal().mean())
        Kf = Kf + sp.diags(1e-8 * scale / disc.node_w.mean() * disc.node_w[disc.free])
    return splu(Kf.tocsc())


def _minimize(disc, energy, U0, cfg, trace_energy=None):
    """Preconditioned Polak-Ribiere CG with Armijo backtracking on free nodes."""
    free = disc.free
    U = U0.copy()
    if disc.pure_neumann:
        U -= disc.mean(U)
    Du = disc.gradient(U)
    E = energy.value(U, Du)
    Gfull = energy.grad(U, Du)
    g = Gfull[free]
    res = disc.h1_dual(Gfull)
    lu = _precond(disc, energy, U)
    y = lu.solve(g)
    d = -y
    gy_old = float(np.sum(g * y))
    alpha = 1.0
    it = 0
    since = 0
    c1 = cfg.sufficient_decrease
    while res > cfg.gradient_tolerance and it < cfg.max_iterations:
        it += 1
        if disc.pure_neumann:
            d -= (disc.node_w[free, None] * d).sum(0) / disc.node_w.sum()
        gd = float(np.sum(g * d))
        if gd >= 0:
            d = -y
            gd = -float(np.sum(g * y))
            if gd >= 0:
                break
        D = np.zeros((disc.N, disc.m))
        D[free] = d
        DD = disc.gradient(D)

        def phi(a):
            Ua = U + a * D
            Dua = Du + a * DD
            return Ua, Dua, energy.value(Ua, Dua)

        def accept(a):
            Ua, Dua, Ea = phi(a)
            if Ea <= E + c1 * a * gd:
                return True, (Ua, Dua, Ea)
            # convexity certificate: phi'(a) <= c1 phi'(0) implies the Armijo bound
            ga = energy.grad(Ua, Dua)[free]
            if float(np.sum(ga * d)) <= c1 * gd:
                return True, (Ua, Dua, Ea)
            return False, None

        a = min(1.0, 2 * alpha) if it > 1 else 1.0
        ok, st = accept(a)
        if ok:
            for _ in range(30):
                ok2, st2 = accept(2 * a)
                if not ok2 or st2[2] > st[2]:
                    break
                a, st = 2 * a, st2
        else:
            for _ in range(80):
                a *= cfg.shrink
                ok, st = accept(a)
                if ok:
                    break
        if not ok:
            break
        alpha = a
        U, Du, E = st
        if trace_energy is not None:
            trace_energy.append(E)
        Gfull = energy.grad(U, Du)
        g_new = Gfull[free]
        res = disc.h1_dual(Gfull)
        since += 1
        restart = since >= cfg.refresh
        if restart:
            lu = _precond(disc, energy, U)
            since = 0
        y_new = lu.solve(g_new)
        gy_new = float(np.sum(g_new * y_new))
        if restart or gy_old <= 0:
            beta = 0.0
        else:
            beta = max(0.0, float(np.sum(g_new * (y_new - y))) / gy_old)
        d = -y_new + beta * d
        g, y, gy_old = g_new, y_new, gy_new
    if disc.pure_neumann:
        U -= disc.mean(U)
    E = energy.value(U)
    return U, E, res, it, res <= cfg.gradient_tolerance


def _stress_norm(disc, energy, U, qc):
    S = energy.stress(U)
    s = np.sqrt(np.sum(S * S, axis=(-2, -1)))
    return float(np.sum(disc.wq * s ** qc) ** (1 / qc))


def _q_energy(disc, U, q):
    Du = disc.gradient(U)
    return float(np.sum(disc.wq * np.sum(Du * Du, axis=(-2, -1)) ** (q / 2)))


def minimize_regularized(problem: ProblemSpec, epsilon: float, config: Optional[SolverConfig] = None,
                         warm_start: Optional[GridFunction] = None, _disc=None):
    config = config or SolverConfig()
    if not np.isfinite(epsilon) or epsilon <= 0:
        raise InvalidArgument("epsilon must be > 0")
    notes = []
    spec = _effective_integrand(problem, notes)
    disc = _disc or Discretization(problem)
    energy = Energy(disc, I.regularized(spec, epsilon))
    if warm_start is not None:
        U0 = disc.from_field(warm_start)
        U0[disc.fixed] = disc.U_fixed
    else:
        U0 = disc.assemble(np.zeros((disc.free.size, disc.m)))
    trace = []
    U, E, res, it, conv = _minimize(disc, energy, U0, config, trace)
    if not conv:
        notes.append(f"not converged: residual {res:.3e} after {it} iterations")
    qc = spec.params.q_conj
    rep = SolveReport(
        final_energy=E,
        regularized_energy_trace=[E],
        el_residual=res,
        iterations=[it],
        stress_qprime_norm=_stress_norm(disc, energy, U, qc),
        converged=bool(conv),
        epsilon_trace=[float(epsilon)],
        q_energy_trace=[epsilon * _q_energy(disc, U, spec.params.q)],
        flags=[] if conv else ["not-converged"],
        notes=notes,
    )
    rep._energy_steps = trace
    return disc.to_field(U), rep


def relax_continuation(problem: ProblemSpec, config: Optional[SolverConfig] = None):
    config = config or SolverConfig()
    disc = Discretization(problem)
    notes = []
    spec = _effective_integrand(problem, notes)
    q = spec.params.q
    p = spec.params.p
    u = None
    energies, iters, qes, cauchy, eps_used = [], [], [], [], []
    conv = True
    rep = None
    prevU = None
    for eps in config.schedule():
        u, rep = minimize_regularized(problem, eps, config, u, _disc=disc)
        U = disc.from_field(u)
        energies.append(rep.final_energy)
        iters.append(rep.iterations[0])
        qes.append(rep.q_energy_trace[0])
        eps_used.append(eps)
        conv = conv and rep.converged
        if prevU is not None:
            dD = disc.gradient(U - prevU)
            cauchy.append(float(np.sum(disc.wq * np.sum(dD * dD, axis=(-2, -1)) ** (p / 2)) ** (1 / p)))
        prevU = U
    U = disc.from_field(u)
    relaxed = energies[-1] - qes[-1]
    rich = _richardson(energies)
    slope = _decay_slope(eps_used, qes)
    flags = [] if conv else ["not-converged"]
    if slope is not None and slope >= 0:
        flags.append("q-energy eps*int|Du|^q does not decay along the schedule: possible Lavrentiev effect")
    for k in range(1, len(energies)):
        if energies[k] > energies[k - 1] + 1e-10 * max(1.0, abs(energies[k - 1])):
            flags.append(f"energy trace increased at step {k}")
            break
    out = SolveReport(
        final_energy=energies[-1],
        regularized_energy_trace=energies,
        el_residual=rep.el_residual,
        iterations=iters,
        stress_qprime_norm=rep.stress_qprime_norm,
        converged=bool(conv),
        epsilon_trace=eps_used,
        q_energy_trace=qes,
        cauchy_trace=cauchy,
        relaxed_estimate=relaxed,
        richardson_estimate=rich,
        q_energy_decay_slope=slope,
        flags=flags,
        notes=notes + [n for n in rep.notes if n not in notes],
    )
    return u, out


def _richardson(E):
    """Limit of E_k = E0 + c rho^{rk} from the last three values, or None."""
    if len(E) < 3:
        return None
    e0, e1, e2 = E[-3:]
    d1, d2 = e1 - e0, e2 - e1
    if d1 == 0:
        return float(e2)
    t = d2 / d1
    if not 0 < t < 1:
        return None
    return float(e2 + d2 * t / (1 - t))


def _decay_slope(eps, vals):
    """Slope of log(vals) against log(1/eps); negative means decay as eps -> 0."""
    v = np.asarray(vals, dtype=float)
    e = np.asarray(eps, dtype=float)
    ok = v > 0
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(1 / e[ok]), np.log(v[ok]), 1)[0])


def el_residual(problem: ProblemSpec, u: GridFunction, epsilon: float = 0.0):
    """(H^1-dual norm of the discrete Euler-Lagrange residual, L^{q'} norm of the stress)."""
    notes = []
    spec = _effective_integrand(problem, notes)
    if epsilon > 0:
        spec = I.regularized(spec, epsilon)
    disc = Discretization(problem)
    energy = Energy(disc, spec)
    U = disc.from_field(u)
    res = disc.h1_dual(energy.grad(U))
    return res, _stress_norm(disc, energy, U, problem.integrand.params.q_conj)


# gap probe ---------------------------------------------------------------------

@dataclass
class ClosedForm:
    """A competitor given in closed form with its gradient.

    u(x) -> (..., m) and grad(x) -> (..., m, n) for x of shape (..., n).
    """
    u: Callable
    grad: Callable
    singular_points: Sequence = ()


@dataclass
class GapReport:
    relaxed_estimate: float
    competitor_energy: float
    gap_indicator: Optional[float]
    tolerance: float
    gap_detected: bool
    competitor_diverged: bool = False
    quadrature_levels: list = field(default_factory=list)
    solve: Optional[dict] = None

    def to_dict(self):
        return {
            "relaxed_estimate": self.relaxed_estimate,
            "competitor_energy": self.competitor_energy,
            "gap_indicator": self.gap_indicator,
            "tolerance": self.tolerance,
            "gap_detected": self.gap_detected,
            "competitor_diverged": self.competitor_diverged,
            "quadrature_levels": list(self.quadrature_levels),
            "solve": self.solve,
        }


def _gauss(k=4):
    t, w = np.polynomial.legendre.leggauss(k)
    return 0.5 * (t + 1), 0.5 * w


def _cells_rule(boxes, k=4):
    """Tensor Gauss points/weights for a list of boxes [(lo, hi), ...]."""
    t, w = _gauss(k)
    lo = np.array([b[0] for b in boxes])
    hi = np.array([b[1] for b in boxes])
    dim = lo.shape[1]
    if dim == 1:
        pts = lo[:, None, :] + (hi - lo)[:, None, :] * t[None, :, None]
        wts = (hi - lo)[:, 0][:, None] * w[None, :]
    else:
        T = np.stack(np.meshgrid(t, t, indexing="ij"), -1).reshape(-1, 2)
        W = np.outer(w, w).ravel()
        pts = lo[:, None, :] + (hi - lo)[:, None, :] * T[None]
        wts = np.prod(hi - lo, axis=1)[:, None] * W[None]
    return pts.reshape(-1, dim), wts.ravel()


def _split(box):
    lo, hi = np.asarray(box[0]), np.asarray(box[1])
    mid = 0.5 * (lo + hi)
    out = []
    dim = lo.size
    for corner in range(2 ** dim):
        bits = [(corner >> j) & 1 for j in range(dim)]
        a = np.where(bits, mid, lo)
        b = np.where(bits, hi, mid)
        out.append((a, b))
    return out


def _contains(box, pts):
    lo, hi = box
    return any(np.all(lo - 1e-14 <= s) and np.all(s <= hi + 1e-14) for s in pts)


def competitor_energy(problem: ProblemSpec, comp: ClosedForm, base: int = 32,
                      max_level: int = 40, rtol: float = 1e-9):
    """Energy of a closed-form competitor by nested refinement at singular points.

    Returns (value, diverged, level_values).
    """
    g = problem.grid
    spec = problem.integrand
    m = spec.params.m
    sing = [np.atleast_1d(np.asarray(s, dtype=float)) for s in comp.singular_points]

    def density(x):
        Du = np.asarray(comp.grad(x), dtype=float).reshape(x.shape[0], m, g.dim)
        uu = np.asarray(comp.u(x), dtype=float).reshape(x.shape[0], -1)
        fx = _eval_data(problem.forcing, x, m)
        return I._eval(spec, x, Du) - np.sum(fx * uu, axis=-1)

    axes = [np.linspace(a, b, base + 1) for a, b in g.extent]
    if g.dim == 1:
        boxes = [(np.array([axes[0][i]]), np.array([axes[0][i + 1]])) for i in range(base)]
    else:
        boxes = [(np.array([axes[0][i], axes[1][j]]), np.array([axes[0][i + 1], axes[1][j + 1]]))
                 for i in range(base) for j in range(base)]
    smooth = [b for b in boxes if not _contains(b, sing)]
    hot = [b for b in boxes if _contains(b, sing)]
    pts, wts = _cells_rule(smooth) if smooth else (np.zeros((0, g.dim)), np.zeros(0))
    total_smooth = float(np.sum(wts * density(pts))) if smooth else 0.0
    total_smooth += _neumann_energy(problem, comp)
    levels = []
    acc = 0.0   # contribution of settled sub-boxes
    value = None
    diverged = False
    for L in range(max_level + 1):
        if hot:
            hp, hw = _cells_rule(hot)
            hot_val = float(np.sum(hw * density(hp)))
        else:
            hot_val = 0.0
        levels.append(total_smooth + acc + hot_val)
        if not hot:
            value = levels[-1]
            break
        if L >= 2:
            d1 = levels[-2] - levels[-3]
            d2 = levels[-1] - levels[-2]
            if abs(d2) <= rtol * max(1.0, abs(levels[-1])):
                value = levels[-1]
                break
            if L >= 6:
                r = [abs(levels[-i] - levels[-i - 1]) for i in (1, 2, 3)]
                if r[0] >= 0.999 * r[1] and r[1] >= 0.999 * r[2]:
                    diverged = True
                    break
        new_hot = []
        for b in hot:
            for c in _split(b):
                if _contains(c, sing):
                    new_hot.append(c)
                else:
                    cp, cw = _cells_rule([c])
                    acc += float(np.sum(cw * density(cp)))
        hot = new_hot
    if value is None and not diverged:
        d1 = levels[-2] - levels[-3]
        d2 = levels[-1] - levels[-2]
        t = d2 / d1 if d1 != 0 else 0.0
        value = levels[-1] + (d2 * t / (1 - t) if 0 < t < 1 else 0.0)
    return (float("inf") if diverged else float(value)), diverged, levels


def _eval_data(data, x, m):
    if data is None:
        return np.zeros((x.shape[0], m))
    if callable(data):
        return np.broadcast_to(np.asarray(data(x), dtype=float).reshape(x.shape[0], -1), (x.shape[0], m))
    if isinstance(data, GridFunction):
        raise InvalidArgument("closed-form competitors need closed-form forcing")
    return np.broadcast_to(np.asarray(data, dtype=float), (x.shape[0], m))


def _neumann_energy(problem, comp):
    if problem.mode == "dirichlet" or problem.neumann_data is None:
        return 0.0
    g = problem.grid
    m = problem.integrand.params.m
    tot = 0.0
    t, w = _gauss(8)
    for face in g.faces:
        tag = "neumann" if problem.mode == "neumann" else g.tag(face)
        if tag != "neumann":
            continue
        data = problem.neumann_data
        if isinstance(data, dict):
            data = data.get(face)
            if data is None:
                continue
        ax, side = FACES[face]
        if g.dim == 1:
            x = np.array([[g.extent[0][side]]])
            wt = np.array([1.0])
        else:
            o = 1 - ax
            a, b = g.extent[o]
            s = a + (b - a) * np.linspace(0, 1, 65)
            xs = (s[:-1, None] + (s[1:] - s[:-1])[:, None] * t[None]).ravel()
            wt = ((s[1:] - s[:-1])[:, None] * w[None]).ravel()
            x = np.zeros((xs.size, 2))
            x[:, o] = xs
            x[:, ax] = g.extent[ax][side]
        gv = _eval_data(data, x, m)
        uu = np.asarray(comp.u(x), dtype=float).reshape(x.shape[0], -1)
        tot += float(np.sum(wt * np.sum(gv * uu, -1)))
    return tot


def gap_probe(problem: ProblemSpec, competitor, config: Optional[SolverConfig] = None,
              rel_tol: float = 5e-3) -> GapReport:
    config = config or SolverConfig()
    u, rep = relax_continuation(problem, config)
    relaxed = rep.relaxed_estimate
    levels = []
    if isinstance(competitor, GridFunction):
        ce = discrete_energy(problem, competitor)
        diverged = False
    elif isinstance(competitor, ClosedForm):
        ce, diverged, levels = competitor_energy(problem, competitor)
    else:
        raise InvalidArgument("competitor must be a GridFunction or a ClosedForm")
    tol = rel_tol * max(1.0, abs(ce)) if np.isfinite(ce) else float("nan")
    ind = None if diverged else relaxed - ce
    return GapReport(
        relaxed_estimate=relaxed,
        competitor_energy=ce,
        gap_indicator=ind,
        tolerance=tol,
        gap_detected=bool(ind is not None and ind > tol),
        competitor_diverged=diverged,
        quadrature_levels=levels,
        solve=rep.to_dict(),
    )
