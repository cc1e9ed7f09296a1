"""``vreg`` experiment runner.

Usage::

    vreg <kind> [--config FILE] [--preset NAME] [--out DIR] [--KEY VALUE ...]
    vreg run FILE [--out DIR] [--KEY VALUE ...]
    vreg presets

Config files hold ``key = value`` lines grouped under ``[section]`` headers.
Keys before the first header belong to ``[experiment]``.  Command-line
``--key value`` or ``--section.key value`` pairs override file values; a bare
key resolves to the first section of the experiment kind that declares it.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import besov as B
from . import builtins as BI
from . import exponents as X
from . import fields as F
from . import integrands as I
from . import regularity as R
from . import solver as S
from .errors import ConfigError, InvalidArgument, VregError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

KINDS = ("solve", "besov", "exponents", "excess", "classify", "gap", "verify-integrand")


def _floats(s):
    return tuple(float(t) for t in s.replace(",", " ").split())


def _ints(s):
    return tuple(int(t) for t in s.replace(",", " ").split())


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _optfloat(s):
    return None if s.strip().lower() in ("", "none") else float(s)


# section -> key -> converter
SCHEMA = {
    "experiment": {"kind": str, "seed": int, "output": str},
    "integrand": {"type": str, "p": float, "q": float, "mu": float, "weight": float,
                  "alpha": float, "coefficient": str, "scale": float, "m": int},
    "grid": {"extent": _floats, "resolution": _ints, "tags": str, "corner_mode": _bool},
    "problem": {"forcing": str, "dirichlet": str, "mode": str, "epsilon": float,
                "continuation": _bool},
    "solver": {"epsilon0": float, "rho": float, "k_max": int, "max_iterations": int,
               "gradient_tolerance": float},
    "besov": {"field": str, "s": float, "p_norm": float, "order": int, "J": int,
              "boundary_handling": str, "face": str, "window": _floats},
    "scenario": {"n": int, "p": float, "q": float, "alpha": float, "beta": _optfloat,
                 "data_class": str, "fine_index": float, "bc": str, "radial": _bool,
                 "autonomous": _bool, "homogeneous_boundary": _bool, "k_max": int},
    "regularity": {"points": str, "center": _floats, "epsilon": float, "M": float,
                   "R0": float, "beta": _optfloat, "tau": float, "steps": int},
    "gap": {"competitor": str, "rel_tol": float},
    "verify": {"samples": int, "domain": _floats},
}

DEFAULTS = {
    "experiment": {"seed": "0", "output": "vreg-out"},
    "integrand": {"type": "p_energy", "p": "2", "mu": "0", "weight": "1", "alpha": "1",
                  "coefficient": "constant", "scale": "1", "m": "1"},
    "grid": {"extent": "0 1", "resolution": "129", "corner_mode": "false"},
    "problem": {"forcing": "0", "dirichlet": "none", "mode": "dirichlet", "epsilon": "1e-8",
                "continuation": "false"},
    "solver": {},
    "besov": {"field": "solution", "s": "0.5", "p_norm": "2", "order": "1", "J": "6",
              "boundary_handling": "interior-shrink"},
    "scenario": {"alpha": "1", "data_class": "base", "fine_index": "inf", "bc": "dirichlet",
                 "radial": "false", "autonomous": "false", "homogeneous_boundary": "true",
                 "k_max": "80"},
    "regularity": {"epsilon": "0.1", "M": "2", "R0": "0.25", "tau": "0.25", "steps": "4"},
    "gap": {"competitor": "solution", "rel_tol": "5e-3"},
    "verify": {"samples": "1000"},
}

# sections in bare-key resolution order
KIND_SECTIONS = {
    "solve": ("experiment", "integrand", "grid", "problem", "solver"),
    "besov": ("experiment", "besov", "integrand", "grid", "problem", "solver"),
    "exponents": ("experiment", "scenario"),
    "excess": ("experiment", "regularity", "integrand", "grid", "problem", "solver"),
    "classify": ("experiment", "regularity", "integrand", "grid", "problem", "solver"),
    "gap": ("experiment", "gap", "integrand", "grid", "problem", "solver"),
    "verify-integrand": ("experiment", "integrand", "verify"),
}


@dataclass
class Config:
    raw: dict = field(default_factory=dict)        # section -> key -> (text, line)

    def set(self, section, key, text, line=None):
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", line=line)
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key in [{section}]", line=line, field=key)
        self.raw.setdefault(section, {})[key] = (text, line)

    def has(self, section, key):
        return key in self.raw.get(section, {})

    def get(self, section, key, default=None):
        if key in self.raw.get(section, {}):
            text, line = self.raw[section][key]
        elif key in DEFAULTS.get(section, {}):
            text, line = DEFAULTS[section][key], None
        else:
            if default is not None:
                return default
            raise ConfigError(f"missing required field in [{section}]", field=key)
        try:
            return SCHEMA[section][key](text)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cannot parse {text!r}: {exc}", line=line, field=key) from None

    def opt(self, section, key):
        if key in self.raw.get(section, {}) or key in DEFAULTS.get(section, {}):
            return self.get(section, key)
        return None


def parse_config(text: str, cfg: Config | None = None) -> Config:
    cfg = cfg or Config()
    section = "experiment"
    for no, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("["):
            if not s.endswith("]"):
                raise ConfigError("unterminated section header", line=no)
            section = s[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", line=no)
            continue
        if "=" not in s:
            raise ConfigError("expected 'key = value'", line=no)
        k, v = (t.strip() for t in s.split("=", 1))
        cfg.set(section, k, v, no)
    return cfg


def preset_names():
    root = resources.files("vreg") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def preset_text(name: str) -> str:
    root = resources.files("vreg") / "presets"
    f = root / f"{name}.cfg"
    if not f.is_file():
        raise ConfigError(f"unknown preset '{name}' (available: {', '.join(preset_names())})",
                          field="preset")
    return f.read_text()


def _apply_overrides(cfg: Config, kind: str, pairs):
    order = KIND_SECTIONS.get(kind, tuple(SCHEMA))
    for key, val in pairs:
        if "." in key:
            sec, k = key.split(".", 1)
        else:
            sec = next((s for s in order if key in SCHEMA[s]), None)
            k = key
            if sec is None:
                raise ConfigError("unknown command-line option", field=key)
        cfg.set(sec, k, val)


def _split_pairs(extra):
    pairs = []
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError("missing value", field=key)
            val = extra[i + 1]
            i += 2
        pairs.append((key.replace("-", "_"), val))
    return pairs


# builders ---------------------------------------------------------------------

def build_grid(cfg: Config) -> F.GridSpec:
    ext = cfg.get("grid", "extent")
    if len(ext) not in (2, 4):
        raise ConfigError("extent needs 2 (1-D) or 4 (2-D) numbers", field="extent")
    dim = len(ext) // 2
    extent = [(ext[2 * i], ext[2 * i + 1]) for i in range(dim)]
    res = cfg.get("grid", "resolution")
    if len(res) == 1:
        res = res * dim
    if len(res) != dim:
        raise ConfigError("resolution does not match extent", field="resolution")
    tags = None
    if cfg.has("grid", "tags"):
        tags = {}
        for item in cfg.get("grid", "tags").split():
            face, _, tag = item.partition(":")
            tags[face] = tag
    try:
        return F.make_grid(extent if dim > 1 else extent[0], res if dim > 1 else res[0], tags,
                           cfg.get("grid", "corner_mode"))
    except InvalidArgument as exc:
        raise ConfigError(str(exc), field="grid") from None


def build_integrand(cfg: Config, n: int) -> I.IntegrandSpec:
    g = lambda k: cfg.get("integrand", k)
    t = g("type").replace("-", "_")
    try:
        if t == "p_energy":
            return I.p_energy(g("p"), g("mu"), n, g("m"), g("weight"), alpha=g("alpha"))
        coef = BI.coefficient(g("coefficient"), g("alpha"), g("scale"))
        if t == "double_phase":
            return I.double_phase(g("p"), g("q"), coef, g("mu"), n, g("m"))
        if t == "radial_modulated":
            return I.radial_modulated(g("p"), coef, g("mu"), n, g("m"))
    except InvalidArgument as exc:
        raise ConfigError(str(exc), field="integrand") from None
    raise ConfigError(f"unknown integrand type '{t}'", field="type")


def build_problem(cfg: Config) -> S.ProblemSpec:
    grid = build_grid(cfg)
    spec = build_integrand(cfg, grid.dim)
    try:
        return S.ProblemSpec(spec, grid, BI.forcing(cfg.get("problem", "forcing")),
                             BI.boundary_data(cfg.get("problem", "dirichlet")),
                             mode=cfg.get("problem", "mode"))
    except InvalidArgument as exc:
        raise ConfigError(str(exc), field="problem") from None


def build_solver_config(cfg: Config) -> S.SolverConfig:
    kw = {k: cfg.get("solver", k) for k in SCHEMA["solver"] if cfg.has("solver", k)}
    kw["seed"] = cfg.get("experiment", "seed")
    try:
        return S.SolverConfig(**kw)
    except InvalidArgument as exc:
        raise ConfigError(str(exc), field="solver") from None


def build_scenario(cfg: Config) -> X.Scenario:
    g = lambda k: cfg.get("scenario", k)
    try:
        return X.Scenario(g("n"), g("p"), g("q"), g("alpha"), cfg.opt("scenario", "beta"),
                          g("data_class"), g("fine_index"), g("bc"), g("radial"),
                          g("autonomous"), None, g("homogeneous_boundary"))
    except InvalidArgument as exc:
        raise ConfigError(str(exc), field="scenario") from None


def _solve(cfg: Config):
    problem = build_problem(cfg)
    sc = build_solver_config(cfg)
    if cfg.get("problem", "continuation"):
        u, rep = S.relax_continuation(problem, sc)
    else:
        u, rep = S.minimize_regularized(problem, cfg.get("problem", "epsilon"), sc)
    return problem, u, rep


def _points(cfg: Config, grid: F.GridSpec):
    spec = cfg.opt("regularity", "points") or "lattice:8"
    name, _, rest = spec.partition(":")
    name = name.strip().lower()
    try:
        if name == "linspace":
            a, b, k = rest.split(":")
            return np.linspace(float(a), float(b), int(k))[:, None]
        if name == "lattice":
            step = int(rest or 1)
            pts = grid.coords().reshape(-1, grid.dim)
            idx = np.stack(np.meshgrid(*[np.arange(r) for r in grid.resolution], indexing="ij"),
                           -1).reshape(-1, grid.dim)
            return pts[np.all(idx % step == 0, axis=1)]
        if name == "list":
            return np.array([_floats(p) for p in rest.split(";")])
    except ValueError:
        pass
    raise ConfigError(f"cannot parse sample points {spec!r}", field="points")


# output -----------------------------------------------------------------------

class Writer:
    def __init__(self, out: Path):
        self.out = out
        self.files = {}

    def text(self, name, content):
        self.out.mkdir(parents=True, exist_ok=True)
        data = content.encode("utf-8")
        (self.out / name).write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()

    def json(self, name, obj):
        self.text(name, json.dumps(S._jsonable(obj), sort_keys=True, indent=2) + "\n")

    def manifest(self, kind, seed):
        self.json("manifest.json", {"kind": kind, "seed": seed,
                                    "files": dict(sorted(self.files.items()))})


def _table(d: dict) -> str:
    rows = [(k, v) for k, v in d.items() if not isinstance(v, (dict, list))]
    for k, v in d.items():
        if isinstance(v, dict):
            rows += [(f"{k}.{kk}", vv) for kk, vv in v.items()]
        elif isinstance(v, list):
            rows.append((k, ", ".join(str(x) for x in v)))
    w = max(len(k) for k, _ in rows)
    fmtv = lambda v: F.fmt(v) if isinstance(v, float) else str(v)
    return "\n".join(f"{k.ljust(w)}  {fmtv(v)}" for k, v in rows) + "\n"


# experiments ------------------------------------------------------------------

def run_solve(cfg, w):
    _, u, rep = _solve(cfg)
    w.json("report.json", rep.to_dict())
    w.text("solution.csv", F.to_csv(u))
    return {"final_energy": rep.final_energy, "el_residual": rep.el_residual,
            "converged": rep.converged}


def _probe(cfg):
    g = lambda k: cfg.get("besov", k)
    try:
        return B.BesovProbe(s=g("s"), p_norm=g("p_norm"), order=g("order"), J=g("J"))
    except InvalidArgument as exc:
        raise ConfigError(str(exc), field="besov") from None


def run_besov(cfg, w):
    probe = _probe(cfg)
    src = cfg.get("besov", "field")
    window = cfg.opt("besov", "window")
    if window is not None:
        window = [(window[2 * i], window[2 * i + 1]) for i in range(len(window) // 2)]
    if src == "solution":
        problem, u, rep = _solve(cfg)
        est = B.v_field_regularity(u, problem.integrand, probe, cfg.get("besov", "boundary_handling"),
                                   cfg.opt("besov", "face"), window)
        w.json("solve.json", rep.to_dict())
    else:
        grid = build_grid(cfg)
        try:
            v = F.sample(grid, BI.sample_field(src))
        except InvalidArgument as exc:
            raise ConfigError(str(exc), field="field") from None
        bh = cfg.get("besov", "boundary_handling")
        if bh != "interior-shrink":
            face = cfg.opt("besov", "face") or grid.faces[0]
            v = F.extend(v, face, {"odd-reflect": "odd", "even-reflect": "even"}.get(bh, bh))
        if window is not None:
            v = B.restrict(v, window)
        est = B.decay_fit(v, probe)
    w.json("besov.json", est.to_dict())
    w.text("besov_table.csv", est.table_csv())
    return {"slope": est.slope, "r_squared": est.r_squared, "saturated": est.saturated}


def run_exponents(cfg, w):
    sc = build_scenario(cfg)
    rep = X.predicted_delta(sc)
    tr = X.iterate_deltas(sc, cfg.get("scenario", "k_max"))
    w.json("exponents.json", {"report": rep.to_dict(), "iteration": tr.to_dict()})
    out = rep.to_dict()
    out["iteration_limit"] = tr.limit
    out["iteration_applicable"] = tr.applicable
    w.text("exponents.txt", _table(out))
    return out


def _beta(cfg, problem):
    b = cfg.opt("regularity", "beta")
    return b if b is not None else problem.integrand.params.alpha / 2


def run_excess(cfg, w):
    problem, u, rep = _solve(cfg)
    P = problem.integrand.params
    center = cfg.opt("regularity", "center")
    if center is None:
        raise ConfigError("excess needs a center point", field="center")
    try:
        prof = R.excess_decay_profile(u, center, cfg.get("regularity", "R0"),
                                      cfg.get("regularity", "tau"), cfg.get("regularity", "steps"),
                                      _beta(cfg, problem), P.p, P.mu)
    except InvalidArgument as exc:
        raise ConfigError(str(exc), field="regularity") from None
    w.text("excess_profile.csv", prof.to_csv())
    summary = {"center": list(prof.center), "fitted_decay": prof.fitted_decay,
               "consistent": prof.consistent, "beta": prof.beta, "warnings": prof.warnings}
    w.json("excess.json", summary)
    return summary


def run_classify(cfg, w):
    problem, u, rep = _solve(cfg)
    pts = _points(cfg, problem.grid)
    g = lambda k: cfg.get("regularity", k)
    try:
        cm = R.classify_points(u, problem, g("epsilon"), g("M"), g("R0"), _beta(cfg, problem), pts)
    except InvalidArgument as exc:
        raise ConfigError(str(exc), field="regularity") from None
    w.text("classification.csv", cm.to_csv())
    summary = {"points": len(cm.labels), "regular": int(cm.regular.sum()),
               "singular_candidates": int((~cm.regular).sum()), "thresholds": cm.thresholds}
    w.json("classification.json", summary)
    return summary


def run_gap(cfg, w):
    problem = build_problem(cfg)
    sc = build_solver_config(cfg)
    comp = BI.competitor(cfg.get("gap", "competitor"))
    if comp == "solution":
        comp, _ = S.relax_continuation(problem, sc)
    rep = S.gap_probe(problem, comp, sc, cfg.get("gap", "rel_tol"))
    w.json("gap.json", rep.to_dict())
    return {"gap_indicator": rep.gap_indicator, "tolerance": rep.tolerance,
            "gap_detected": rep.gap_detected, "competitor_diverged": rep.competitor_diverged}


def run_verify(cfg, w):
    n = len(cfg.get("verify", "domain")) // 2 if cfg.has("verify", "domain") else 1
    spec = build_integrand(cfg, n)
    dom = cfg.opt("verify", "domain")
    domain = None if dom is None else [(dom[2 * i], dom[2 * i + 1]) for i in range(n)]
    rep = I.verify_growth(spec, cfg.get("verify", "samples"), cfg.get("experiment", "seed"), domain)
    w.json("verification.json", rep.to_dict())
    return {"passed": rep.passed, "fenchel_constant": rep.fenchel_constant}


RUNNERS = {"solve": run_solve, "besov": run_besov, "exponents": run_exponents,
           "excess": run_excess, "classify": run_classify, "gap": run_gap,
           "verify-integrand": run_verify}


def run(cfg: Config, out_dir=None):
    """Run one experiment; returns (summary dict, output directory, manifest files)."""
    if not cfg.has("experiment", "kind"):
        raise ConfigError("missing required field", field="kind")
    kind = cfg.get("experiment", "kind")
    if kind not in RUNNERS:
        line = cfg.raw["experiment"]["kind"][1]
        raise ConfigError(f"unknown kind '{kind}' (one of {', '.join(KINDS)})", line=line, field="kind")
    out = Path(out_dir or cfg.get("experiment", "output"))
    w = Writer(out)
    summary = RUNNERS[kind](cfg, w)
    w.manifest(kind, cfg.get("experiment", "seed"))
    return summary, out, w.files


def _parser():
    ap = argparse.ArgumentParser(prog="vreg", description="(p,q)-growth variational experiments",
                                 allow_abbrev=False)
    ap.add_argument("command", help="experiment kind, 'run' (config file) or 'presets'")
    ap.add_argument("file", nargs="?", help="config file for 'run'")
    ap.add_argument("--config", help="config file")
    ap.add_argument("--preset", help="named in-repo preset")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("-q", "--quiet", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = _parser()
    args, extra = ap.parse_known_args(argv)
    try:
        if args.command == "presets":
            print("\n".join(preset_names()))
            return EXIT_OK
        cfg = Config()
        if args.preset:
            parse_config(preset_text(args.preset), cfg)
        path = args.file if args.command == "run" else args.config
        if args.command == "run" and not path:
            raise ConfigError("'run' needs a config file")
        if path:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
            parse_config(text, cfg)
        if args.command != "run":
            if args.command not in KINDS:
                raise ConfigError(f"unknown command '{args.command}'", field="kind")
            cfg.set("experiment", "kind", args.command)
        kind = cfg.get("experiment", "kind") if cfg.has("experiment", "kind") else None
        _apply_overrides(cfg, kind, _split_pairs(extra))
        with warnings.catch_warnings():
            if args.quiet:
                warnings.simplefilter("ignore")
            summary, out, _ = run(cfg, args.out)
    except ConfigError as exc:
        print(f"vreg: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (VregError, FloatingPointError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"vreg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if not args.quiet:
        print(_table(summary), end="")
        print(f"artifacts: {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
