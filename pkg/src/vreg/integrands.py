"""Convex integrands F(x, z) with (p,q)-growth.

Points ``x`` have shape ``(..., n)`` and gradients ``z`` have shape
``(..., m, n)``; leading dimensions broadcast.  A 1-D ``z`` is read as a
single row (m = 1) and a scalar as a 1x1 matrix.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import InvalidArgument

KINDS = ("p-energy", "double-phase", "radial-modulated", "shifted",
         "regularized", "user-defined")


@dataclass(frozen=True)
class GrowthParams:
    p: float
    q: float
    alpha: float = 1.0
    mu: float = 0.0
    nu: float = 0.1
    Lambda: float = 1.0
    n: int = 1
    m: int = 1

    def __post_init__(self):
        vals = (self.p, self.q, self.alpha, self.mu, self.nu, self.Lambda)
        if not all(np.isfinite(v) for v in vals):
            raise InvalidArgument("growth parameters must be finite")
        if not 1 < self.p <= self.q:
            raise InvalidArgument(f"need 1 < p <= q, got p={self.p}, q={self.q}")
        if not 0 < self.alpha <= 1:
            raise InvalidArgument(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.mu < 0:
            raise InvalidArgument("mu must be >= 0")
        if not 0 < self.nu <= self.Lambda:
            raise InvalidArgument("need 0 < nu <= Lambda")
        if self.n not in (1, 2, 3) or self.m < 1:
            raise InvalidArgument("n must be 1, 2 or 3 and m >= 1")

    @property
    def p_conj(self):
        return self.p / (self.p - 1)

    @property
    def q_conj(self):
        return self.q / (self.q - 1)


@dataclass(frozen=True)
class Coefficient:
    """Spatial weight a(x) >= 0 with a declared Hoelder exponent."""
    func: Callable[[np.ndarray], np.ndarray]
    holder: float = 1.0
    name: str = "custom"

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)


def constant_coefficient(c: float) -> Coefficient:
    return Coefficient(lambda x: np.full(np.shape(x)[:-1], float(c)), 1.0, f"const({c})")


def power_coefficient(alpha: float, scale: float = 1.0) -> Coefficient:
    """a(x) = scale * |x|^alpha."""
    return Coefficient(lambda x: scale * np.linalg.norm(x, axis=-1) ** alpha,
                       alpha, f"{scale}|x|^{alpha}")


def step_coefficient(jump: float = 1.0, at: float = 0.0) -> Coefficient:
    """Jump of size ``jump`` across the hyperplane x_1 = at (not Hoelder)."""
    return Coefficient(lambda x: np.where(x[..., 0] > at, jump, 0.0), 1.0, "step")


def checkerboard_coefficient(alpha: float, scale: float = 1.0) -> Coefficient:
    """Vanishes on the quadrants x1*x2 <= 0, grows like dist^alpha elsewhere.

    a(x) = scale * min(|x1|, |x2|)^alpha on {x1 x2 > 0}; this is the distance to
    the zero set raised to alpha, hence alpha-Hoelder.
    """
    def a(x):
        x1, x2 = x[..., 0], x[..., 1]
        d = np.minimum(np.abs(x1), np.abs(x2))
        return np.where(x1 * x2 > 0, scale * d ** alpha, 0.0)
    return Coefficient(a, alpha, "checkerboard")


@dataclass(frozen=True)
class IntegrandSpec:
    params: GrowthParams
    kind: str = "p-energy"
    coefficient: Optional[Coefficient] = None
    base: Optional["IntegrandSpec"] = None
    shift_point: Optional[np.ndarray] = None
    epsilon: Optional[float] = None
    weight: float = 1.0
    func: Optional[Callable] = field(default=None, compare=False)
    grad: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown integrand kind '{self.kind}'")
        if self.kind in ("double-phase", "radial-modulated") and self.coefficient is None:
            raise InvalidArgument(f"{self.kind} needs a coefficient a(x)")
        if self.kind in ("shifted", "regularized") and self.base is None:
            raise InvalidArgument(f"{self.kind} needs a base integrand")
        if self.kind == "regularized":
            if self.epsilon is None or not np.isfinite(self.epsilon) or self.epsilon <= 0:
                raise InvalidArgument("regularized integrand needs epsilon > 0")
        if self.kind == "user-defined" and self.func is None:
            raise InvalidArgument("user-defined integrand needs func")
        if not np.isfinite(self.weight) or self.weight <= 0:
            raise InvalidArgument("weight must be a positive finite number")

    # convenience so specs can be used like callables
    def __call__(self, x, z):
        return eval(self, x, z)


# constructors ---------------------------------------------------------------

def p_energy(p, mu=0.0, n=1, m=1, weight=1.0, nu=None, Lambda=None, alpha=1.0):
    nu = nu if nu is not None else 0.5 * min(1.0, p - 1) * weight
    Lambda = Lambda if Lambda is not None else weight * max(1.0, 1 + mu) ** p
    return IntegrandSpec(GrowthParams(p, p, alpha, mu, min(nu, Lambda), Lambda, n, m),
                         "p-energy", weight=weight)


def double_phase(p, q, coefficient, mu=0.0, n=1, m=1, nu=None, Lambda=None):
    nu = nu if nu is not None else 0.5 * min(1.0, p - 1)
    Lambda = Lambda if Lambda is not None else 2.0 * max(1.0, 1 + mu) ** q
    return IntegrandSpec(GrowthParams(p, q, coefficient.holder, mu, nu, Lambda, n, m),
                         "double-phase", coefficient=coefficient)


def radial_modulated(p, coefficient, mu=0.0, n=1, m=1, nu=None, Lambda=None):
    nu = nu if nu is not None else 0.1
    Lambda = Lambda if Lambda is not None else 2.0 * max(1.0, 1 + mu) ** p
    return IntegrandSpec(GrowthParams(p, p, coefficient.holder, mu, nu, Lambda, n, m),
                         "radial-modulated", coefficient=coefficient)


def user_defined(params, func, grad=None):
    return IntegrandSpec(params, "user-defined", func=func, grad=grad)


# array plumbing -------------------------------------------------------------

def _as_z(z):
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        z = z.reshape(1, 1)
    elif z.ndim == 1:
        z = z[None, :]
    return z


def _as_x(x, n):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != n:
        if n == 1:
            x = x[..., None]
        else:
            raise InvalidArgument(f"x must have trailing dimension {n}")
    return x


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise InvalidArgument("non-finite input")


def _sqnorm(z):
    return np.sum(z * z, axis=(-2, -1))


def _e(p, mu, z):
    """Normalised radial energy (mu^2+|z|^2)^{p/2} - mu^p."""
    return (mu * mu + _sqnorm(z)) ** (p / 2) - mu ** p


def _de(p, mu, z):
    t = mu * mu + _sqnorm(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(t > 0, p * t ** ((p - 2) / 2), 0.0)
    return c[..., None, None] * z


def _coef(spec, x, shape):
    return np.broadcast_to(spec.coefficient(x), shape)


# evaluation -----------------------------------------------------------------

def _eval(spec, x, z):
    P = spec.params
    k = spec.kind
    if k == "p-energy":
        return spec.weight * _e(P.p, P.mu, z)
    if k == "double-phase":
        a = _coef(spec, x, z.shape[:-2])
        return spec.weight * (_e(P.p, P.mu, z) + a * _e(P.q, P.mu, z))
    if k == "radial-modulated":
        a = _coef(spec, x, z.shape[:-2])
        return spec.weight * a * _e(P.p, P.mu, z)
    if k == "regularized":
        return _eval(spec.base, x, z) + spec.epsilon * _sqnorm(z) ** (P.q / 2)
    if k == "shifted":
        z0 = np.broadcast_to(spec.shift_point, z.shape)
        g0 = _grad(spec.base, x, z0)
        return (_eval(spec.base, x, z + z0) - _eval(spec.base, x, z0)
                - np.sum(g0 * z, axis=(-2, -1)))
    # user-defined
    return spec.weight * np.asarray(spec.func(x, z), dtype=float)


def _grad(spec, x, z):
    P = spec.params
    k = spec.kind
    if k == "p-energy":
        return spec.weight * _de(P.p, P.mu, z)
    if k == "double-phase":
        a = _coef(spec, x, z.shape[:-2])
        return spec.weight * (_de(P.p, P.mu, z) + a[..., None, None] * _de(P.q, P.mu, z))
    if k == "radial-modulated":
        a = _coef(spec, x, z.shape[:-2])
        return spec.weight * a[..., None, None] * _de(P.p, P.mu, z)
    if k == "regularized":
        t = _sqnorm(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(t > 0, P.q * t ** ((P.q - 2) / 2), 0.0)
        return _grad(spec.base, x, z) + spec.epsilon * c[..., None, None] * z
    if k == "shifted":
        z0 = np.broadcast_to(spec.shift_point, z.shape)
        return _grad(spec.base, x, z + z0) - _grad(spec.base, x, z0)
    if spec.grad is not None:
        return spec.weight * np.asarray(spec.grad(x, z), dtype=float)
    return spec.weight * _fd_grad(lambda zz: np.asarray(spec.func(x, zz), dtype=float), z)


def _fd_grad(f, z, rel=1e-6):
    g = np.zeros(np.broadcast_shapes(z.shape))
    m, n = z.shape[-2:]
    for i in range(m):
        for j in range(n):
            h = rel * np.maximum(1.0, np.abs(z[..., i, j]))
            zp = z.copy(); zp[..., i, j] += h
            zm = z.copy(); zm[..., i, j] -= h
            g[..., i, j] = (f(zp) - f(zm)) / (2 * h)
    return g


def _prepare(spec, x, z):
    z = _as_z(z)
    x = _as_x(x, spec.params.n)
    _check_finite(x, z)
    lead = np.broadcast_shapes(x.shape[:-1], z.shape[:-2])
    z = np.broadcast_to(z, lead + z.shape[-2:]).astype(float)
    x = np.broadcast_to(x, lead + x.shape[-1:])
    return x, z


def eval(spec: IntegrandSpec, x, z):
    """F(x, z)."""
    x, z = _prepare(spec, x, z)
    out = _eval(spec, x, z)
    return float(out) if out.ndim == 0 else out


def grad_z(spec: IntegrandSpec, x, z):
    """The z-gradient of F, same shape as (broadcast) z."""
    x, z = _prepare(spec, x, z)
    return _grad(spec, x, z)


def v_transform(p, mu, z):
    """V_{p,mu}(z) = (mu^2+|z|^2)^{(p-2)/4} z."""
    if p < 1 or mu < 0:
        raise InvalidArgument("v_transform needs p >= 1 and mu >= 0")
    z = _as_z(z)
    _check_finite(z)
    t = mu * mu + _sqnorm(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(t > 0, t ** ((p - 2) / 4), 0.0)
    return c[..., None, None] * z


def shifted(spec: IntegrandSpec, z0) -> IntegrandSpec:
    z0 = _as_z(z0)
    _check_finite(z0)
    P = spec.params
    if z0.shape != (P.m, P.n):
        raise InvalidArgument(f"shift point must be {P.m}x{P.n}")
    return IntegrandSpec(P, "shifted", base=spec, shift_point=z0.copy())


def regularized(spec: IntegrandSpec, epsilon: float) -> IntegrandSpec:
    if not np.isfinite(epsilon) or epsilon <= 0:
        raise InvalidArgument(f"epsilon must be > 0, got {epsilon}")
    return IntegrandSpec(spec.params, "regularized", base=spec, epsilon=float(epsilon))


def with_mu(spec: IntegrandSpec, mu: float) -> IntegrandSpec:
    """Copy of ``spec`` with the shift parameter replaced throughout the tree."""
    base = with_mu(spec.base, mu) if spec.base is not None else None
    return replace(spec, params=replace(spec.params, mu=mu), base=base)


def root_params(spec: IntegrandSpec) -> GrowthParams:
    return spec.params


def is_autonomous(spec: IntegrandSpec) -> bool:
    if spec.kind in ("double-phase", "radial-modulated", "user-defined"):
        return False
    if spec.base is not None:
        return is_autonomous(spec.base)
    return True


# sampled verification --------------------------------------------------------

@dataclass
class HypothesisCheck:
    name: str
    worst_ratio: float
    bound: float
    passed: bool
    note: str = ""


@dataclass
class VerificationReport:
    checks: dict
    fenchel_constant: float
    coercivity_constant: float
    passed: bool
    warnings: list

    def to_dict(self):
        return {
            "passed": self.passed,
            "fenchel_constant": self.fenchel_constant,
            "coercivity_constant": self.coercivity_constant,
            "warnings": list(self.warnings),
            "checks": {k: {"worst_ratio": c.worst_ratio, "bound": c.bound,
                           "passed": c.passed, "note": c.note}
                       for k, c in sorted(self.checks.items())},
        }


SLACK = 1.05


def sample_gradients(rng, count, m, n, lo=1e-3, hi=1e3):
    """Random m x n matrices with log-uniform Frobenius norm in [lo, hi]."""
    d = rng.standard_normal((count, m, n))
    d /= np.linalg.norm(d, axis=(1, 2), keepdims=True)
    r = np.exp(rng.uniform(np.log(lo), np.log(hi), count))
    return d * r[:, None, None]


def _vsq_grad(p, mu, z):
    t = mu * mu + _sqnorm(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(t > 0, t ** ((p - 2) / 2) + (p - 2) / 2 * t ** ((p - 4) / 2) * _sqnorm(z), 0.0)
    return 2 * c[..., None, None] * z


def _worst(r):
    r = r[np.isfinite(r)]
    return float(r.max()) if r.size else 0.0


def _refine_pair(f, x, y, steps=60):
    """Shrink [x, y] by bisection, keeping the half with the larger jump of f."""
    for _ in range(steps):
        mid = 0.5 * (x + y)
        if np.allclose(mid, x) or np.allclose(mid, y):
            break
        if np.linalg.norm(f(x) - f(mid)) >= np.linalg.norm(f(mid) - f(y)):
            y = mid
        else:
            x = mid
    return x, y


def verify_growth(spec: IntegrandSpec, sample_count: int = 1000, seed: int = 0,
                  domain=None) -> VerificationReport:
    """Sample the structure hypotheses and report worst constant ratios.

    Checks: convexity of F - nu |V|^2 (monotone-pair form), the q-growth bound,
    x-Hoelder bounds for F and its gradient, and a Fenchel-type lower bound.
    """
    P = spec.params
    rng = np.random.default_rng(seed)
    domain = np.asarray(domain if domain is not None else [[-1.0, 1.0]] * P.n, dtype=float)
    lo, hi = domain[:, 0], domain[:, 1]
    N = int(sample_count)
    warn = []
    if P.mu == 0:
        warn.append("mu = 0: V-function and integrand are not smooth at z = 0")
        warnings.warn(warn[-1])

    x = lo + (hi - lo) * rng.random((N, P.n))
    y = lo + (hi - lo) * rng.random((N, P.n))
    z = sample_gradients(rng, N, P.m, P.n)
    w = sample_gradients(rng, N, P.m, P.n)
    checks = {}

    def safe(f):
        with np.errstate(all="ignore"):
            try:
                return f(), ""
            except (FloatingPointError, OverflowError, ValueError) as exc:
                return None, f"sampling failed: {exc}"

    # H1: <dF(z) - dF(w), z - w> >= nu <d|V|^2(z) - d|V|^2(w), z - w>
    def h1():
        dF = np.sum((_grad(spec, x, z) - _grad(spec, x, w)) * (z - w), axis=(-2, -1))
        dV = np.sum((_vsq_grad(P.p, P.mu, z) - _vsq_grad(P.p, P.mu, w)) * (z - w), axis=(-2, -1))
        return P.nu * dV / dF
    r, note = safe(h1)
    checks["H1"] = _mk("H1", r, 1.0, note)

    q = P.q
    growth = (1 + _sqnorm(z)) ** (q / 2)

    r, note = safe(lambda: np.abs(_eval(spec, x, z)) / growth)
    checks["H2"] = _mk("H2", r, P.Lambda, note)

    def holder_ratio(values_fn, power):
        dist = np.linalg.norm(x - y, axis=-1)
        base = values_fn(x, y)
        ratio = base / (dist ** P.alpha * (1 + _sqnorm(z)) ** power)
        # sharpen the worst few pairs: a jump shows up as an exploding ratio
        order = np.argsort(np.nan_to_num(ratio, nan=-1.0))[-5:]
        best = _worst(ratio)
        for i in order:
            zi = z[i]
            f = lambda pt: _eval(spec, pt[None], zi[None])[0] if values_fn is _dF else _grad(spec, pt[None], zi[None])[0]
            a, b = _refine_pair(f, x[i].copy(), y[i].copy())
            d = np.linalg.norm(a - b)
            if d == 0:
                continue
            num = np.linalg.norm(np.atleast_1d(f(a) - f(b)))
            best = max(best, num / (d ** P.alpha * (1 + _sqnorm(zi)) ** power))
        return np.array([best])

    def _dF(a, b):
        return np.abs(_eval(spec, a, z) - _eval(spec, b, z))

    def _dG(a, b):
        return np.linalg.norm((_grad(spec, a, z) - _grad(spec, b, z)).reshape(N, -1), axis=-1)

    r, note = safe(lambda: holder_ratio(_dF, q / 2))
    checks["H3"] = _mk("H3", r, P.Lambda, note)
    r, note = safe(lambda: holder_ratio(_dG, (q - 1) / 2))
    checks["H4"] = _mk("H4", r, P.Lambda, note)

    # Fenchel-type lower bound dF.z >= c (|z|^p + |dF|^{q'} - 1)
    def fenchel():
        g = _grad(spec, x, z)
        lhs = np.sum(g * z, axis=(-2, -1))
        rhs = _sqnorm(z) ** (P.p / 2) + _sqnorm(g) ** (P.q_conj / 2) - 1
        ok = rhs > 0
        return lhs[ok] / rhs[ok]
    r, note = safe(fenchel)
    fen = float(np.min(r)) if r is not None and r.size else float("nan")
    if note:
        warn.append("Fenchel: " + note)

    def coercive():
        F = _eval(spec, x, z)
        s = _sqnorm(z) ** (P.p / 2)
        ok = s > 1
        return (F[ok] + 1) / s[ok]
    r, note = safe(coercive)
    coe = float(np.min(r)) if r is not None and r.size else float("nan")

    passed = all(c.passed for c in checks.values()) and np.isfinite(fen) and fen > 0
    return VerificationReport(checks, fen, coe, bool(passed), warn)


def _mk(name, r, bound, note):
    if r is None:
        return HypothesisCheck(name, float("nan"), bound, False, note)
    r = np.asarray(r, dtype=float)
    bad = ~np.isfinite(r)
    worst = _worst(r)
    if bad.any() and not note:
        note = f"{int(bad.sum())} non-finite samples"
        worst = float("inf") if np.isinf(r).any() else worst
    passed = bool(np.isfinite(worst) and worst <= bound * SLACK and not bad.any())
    return HypothesisCheck(name, worst, bound, passed, note)
