"""Closed-form regularity exponents, q-bounds and the delta_k bootstrap.

Everything here is plain arithmetic on the growth exponents (n, p, q, alpha)
and the data exponent beta.  The auxiliary epsilon that shrinks Sobolev
exponents in the bootstrap is taken to its one-sided limit 0.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from .errors import InvalidArgument

INF = math.inf


@dataclass(frozen=True)
class Scenario:
    n: int
    p: float
    q: float
    alpha: float = 1.0
    beta: Optional[float] = None
    data_class: str = "base"          # "base" or "strong"
    fine_index: float = INF           # Besov fine index of the data, 1 or inf
    bc: str = "dirichlet"             # dirichlet | neumann | mixed
    radial: bool = False
    autonomous: bool = False
    g_regularity: Optional[float] = None
    homogeneous_boundary: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise InvalidArgument("n must be >= 1")
        if not 1 < self.p <= self.q:
            raise InvalidArgument(f"need 1 < p <= q, got p={self.p}, q={self.q}")
        if not 0 < self.alpha <= 1:
            raise InvalidArgument("alpha must lie in (0, 1]")
        if self.data_class not in ("base", "strong"):
            raise InvalidArgument("data_class must be 'base' or 'strong'")
        if self.data_class == "strong":
            if self.beta is None or not self.alpha <= self.beta <= 2:
                raise InvalidArgument("strong data class needs beta in [alpha, 2]")
        if self.bc not in ("dirichlet", "neumann", "mixed"):
            raise InvalidArgument("bc must be dirichlet, neumann or mixed")

    @property
    def p_conj(self):
        return self.p / (self.p - 1)

    @property
    def strong(self):
        return self.data_class == "strong" and self.p >= 2


def _div(a, b):
    return a / b if b > 0 else INF


def q_range(sc: Scenario) -> dict:
    """The four named upper bounds for q and whether sc.q lies strictly below each."""
    n, p, a = sc.n, sc.p, sc.alpha
    sob = _div(n * p, n - 1)
    bounds = {
        "basic": (n + a) * p / n,
        "apriori": _div(n * p, n - a),
        "autonomous": max(sob, p + 1),
        "partial_regularity": min(sob, p + 1),
    }
    return {"bounds": bounds, "satisfied": {k: sc.q < v for k, v in bounds.items()}}


def _delta(sc):
    if sc.strong:
        return min(sc.p_conj * sc.beta / 2, sc.alpha)
    return sc.alpha / 2 * min(2.0, sc.p_conj)


def singular_dim_bound(sc: Scenario) -> float:
    if sc.strong:
        b = sc.n - min(2 * sc.alpha, sc.p_conj * sc.beta)
    else:
        b = sc.n - sc.alpha * min(2.0, sc.p_conj)
    return max(0.0, b)


@dataclass
class BoundaryCondition:
    holds: bool
    inequality: str
    rule: str


def boundary_regularity_condition(sc: Scenario) -> BoundaryCondition:
    a, pc = sc.alpha, sc.p_conj
    if sc.autonomous:
        return BoundaryCondition(True, "x-independent integrand (alpha = 1)", "autonomous")
    if sc.bc == "neumann" and not sc.homogeneous_boundary:
        if sc.beta is None:
            return BoundaryCondition(False, "beta required for inhomogeneous Neumann data",
                                     "neumann-inhomogeneous")
        rhs = max(0.5, 1 / pc)
        ok = a > 0.5 and sc.beta > rhs
        return BoundaryCondition(ok, f"alpha={a:g} > 1/2 and beta={sc.beta:g} > {rhs:g}",
                                 "neumann-inhomogeneous")
    if sc.strong:
        ok = a > 0.5 and sc.beta > 1 / pc
        return BoundaryCondition(ok, f"alpha={a:g} > 1/2 and beta={sc.beta:g} > {1 / pc:g}",
                                 "strong-data")
    rhs = max(0.5, 1 / pc)
    return BoundaryCondition(a > rhs, f"alpha={a:g} > max(1/2, 1/p')={rhs:g}", "base")


@dataclass
class ExponentReport:
    q_upper_bounds: dict
    delta_predicted: float
    delta_neumann_cap: Optional[str]
    singular_dim_bound: float
    boundary_regular_condition: bool
    boundary_inequality: str
    applicable: list
    kappa_infinity: float

    def to_dict(self):
        return asdict(self)


def predicted_delta(sc: Scenario) -> ExponentReport:
    qr = q_range(sc)
    b = qr["bounds"]
    applicable = []
    if sc.q < b["basic"]:
        applicable.append("besov-basic")
    if sc.q < b["apriori"]:
        applicable.append("apriori")
    if sc.autonomous and sc.q < b["autonomous"]:
        applicable.append("autonomous")
    if sc.q < b["partial_regularity"]:
        applicable.append("partial-regularity")
    cap = None
    if sc.bc == "neumann" and sc.radial and not sc.homogeneous_boundary:
        cap = "delta0 > 1/2 exists but is not quantified; prediction is min(delta, delta0)"
    bc = boundary_regularity_condition(sc)
    return ExponentReport(
        q_upper_bounds=b,
        delta_predicted=_delta(sc),
        delta_neumann_cap=cap,
        singular_dim_bound=singular_dim_bound(sc),
        boundary_regular_condition=bc.holds,
        boundary_inequality=bc.inequality,
        applicable=applicable,
        kappa_infinity=kappa_infinity(sc),
    )


# bootstrap --------------------------------------------------------------------

def kappa_infinity(sc: Scenario) -> float:
    n, p, q, a = sc.n, sc.p, sc.q, sc.alpha
    if p >= 2 and not sc.strong:
        pc = sc.p_conj
        den = p * (n * p - n * q + a * pc * q)
        return a * pc * q / den if den > 0 else INF
    d = p / q - (n - 2 * a) / n
    return 0.5 + (q - p) / (2 * q) / d if d > 0 else INF


def _inv_tau1(n, d):
    # 1/tau_1 with tau_1 = 2n/(n-2d); beyond the embedding threshold tau_1 = inf
    return max(0.0, (n - 2 * d) / (2 * n))


def _inv_xi(n, d):
    return max(0.0, (n - 2 * d) / n)


def _branch_quantities(sc, d):
    """(1/tau1, 1/tau2, sigma, threshold) at regularity level d."""
    n, p, q = sc.n, sc.p, sc.q
    it1 = _inv_tau1(n, d)
    if p >= 2 and not sc.strong:
        it2 = p / 2 - (q - 1) * it1
        thr = n * (q - p) / (2 * (q - 1)) if q > 1 else INF
    else:
        it2 = 1 - (2 * q / p - 1) * it1
        thr = n * (q - p) / (2 * q - p)
    sigma = d + n * (it2 - 0.5)
    return it1, it2, sigma, thr


def case_a_by_threshold(sc: Scenario, d: float) -> bool:
    return d < _branch_quantities(sc, d)[3]


def case_a_by_tau(sc: Scenario, d: float) -> bool:
    """Case (a) read off tau_2: it holds when 1/tau_2 < 1/2, i.e. tau_2 > 2."""
    return _branch_quantities(sc, d)[1] < 0.5


def _kappa_k(sc, d_prev):
    n, p, q = sc.n, sc.p, sc.q
    ixi = _inv_xi(n, d_prev)
    if p >= 2 and not sc.strong:
        den = p / q - ixi
        theta = (q - p) / (q * (q - 1)) / den if den > 0 else INF
        return 1 / p + (q - 1) * theta / p, theta, ixi
    den = p / q - ixi
    theta = (q - p) / (2 * q) / den if den > 0 else INF
    return 0.5 + theta, theta, ixi


def _update(sc, d_outer, s):
    """One application of the gain rule with sigma = s."""
    a, p = sc.alpha, sc.p
    m = min(d_outer, s)
    if sc.strong:
        return min(1.0, sc.beta / 2 + m / p, a / 2 + m / 2)
    return a / 2 + m / max(2.0, p)


@dataclass
class IterationTrace:
    deltas: list = field(default_factory=list)
    inner: list = field(default_factory=list)      # per outer step, list of delta_{k,j}
    j0: list = field(default_factory=list)
    branch: list = field(default_factory=list)
    tau1: list = field(default_factory=list)
    tau2: list = field(default_factory=list)
    sigma: list = field(default_factory=list)
    eps: list = field(default_factory=list)
    kappa_sequence: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    xi: list = field(default_factory=list)
    kappa_infinity: float = INF
    limit: float = float("nan")
    applicable: bool = True
    note: str = ""

    def to_dict(self):
        return asdict(self)


def iterate_deltas(sc: Scenario, k_max: int = 80, inner_max: int = 10000) -> IterationTrace:
    tr = IterationTrace(kappa_infinity=kappa_infinity(sc))
    bound = q_range(sc)["bounds"]["apriori"]
    if not sc.q < bound:
        tr.applicable = False
        tr.note = f"q={sc.q:g} is not below np/(n-alpha)={bound:g}; the bootstrap does not close"
        return tr
    d = sc.alpha / 2
    tr.deltas.append(d)
    for k in range(k_max):
        it1, it2, s, thr = _branch_quantities(sc, d)
        tr.tau1.append(1 / it1 if it1 > 0 else INF)
        tr.tau2.append(1 / it2 if it2 > 0 else INF)
        tr.sigma.append(s)
        tr.eps.append(0.0)
        kap, th, ixi = _kappa_k(sc, d)
        tr.kappa_sequence.append(kap)
        tr.theta.append(th)
        tr.xi.append(1 / ixi if ixi > 0 else INF)
        target = _update(sc, d, d)
        if s >= d:
            tr.branch.append("b")
            tr.inner.append([d])
            tr.j0.append(0)
            new = target
        else:
            tr.branch.append("a")
            seq = [d]
            dj = d
            j = 0
            while True:
                sj = _branch_quantities(sc, dj)[2]
                nxt = min(target, _update(sc, d, sj))
                j += 1
                seq.append(nxt)
                if nxt >= target:
                    break
                if nxt <= dj or j >= inner_max:
                    tr.applicable = False
                    tr.note = f"inner iteration stalled at step {k}"
                    tr.inner.append(seq)
                    tr.j0.append(j)
                    tr.limit = d
                    return tr
                dj = nxt
            tr.inner.append(seq)
            tr.j0.append(j)
            new = target
        tr.deltas.append(new)
        if abs(new - d) < 1e-15:
            d = new
            break
        d = new
    tr.limit = d
    return tr


# embedding --------------------------------------------------------------------

@dataclass
class EmbeddingResult:
    applicable: bool
    holds: Optional[bool]
    detail: str


def embedding_check(s, p, s1, p1, q_fine=INF, q1_fine=INF, n=1) -> EmbeddingResult:
    if not (1 <= p <= p1 and 0 < s1 < s < 2):
        return EmbeddingResult(False, None, "needs 1 <= p <= p1 and 0 < s1 < s < 2")
    lhs = s - n / p
    rhs = s1 - n / p1
    strict = q_fine > q1_fine
    ok = lhs > rhs if strict else lhs >= rhs
    op = ">" if strict else ">="
    return EmbeddingResult(True, bool(ok), f"{lhs:.6g} {op} {rhs:.6g}")
