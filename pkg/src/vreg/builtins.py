"""Named forcings, boundary data, coefficients and closed-form competitors.

Config files refer to these by name, so every experiment is a plain text
fixture.  Each parser accepts a number or ``name[:arg[:arg...]]``.
"""
from __future__ import annotations

import numpy as np

from . import integrands as I
from .errors import InvalidArgument
from .solver import ClosedForm


def _split(spec: str):
    head, *args = str(spec).strip().split(":")
    try:
        vals = [float(a) for a in args]
    except ValueError:
        raise InvalidArgument(f"bad numeric argument in '{spec}'") from None
    return head.strip().lower(), vals


def _number(spec):
    try:
        return float(spec)
    except (TypeError, ValueError):
        return None


def forcing(spec):
    """0 | <number> | step[:at] | cosine (product of cos(pi x_i))."""
    v = _number(spec)
    if v is not None:
        return v
    name, args = _split(spec)
    if name == "step":
        at = args[0] if args else 0.0
        return lambda x: np.sign(x[..., 0] - at)
    if name == "cosine":
        return lambda x: np.prod(np.cos(np.pi * x), axis=-1)
    raise InvalidArgument(f"unknown forcing '{spec}'")


def plaplace_1d(p: float) -> ClosedForm:
    """Minimiser of int |u'|^p/p - u on (0,1) with zero boundary values."""
    e = p / (p - 1)

    def u(x):
        return (1 / e) * (0.5 ** e - np.abs(x[..., 0] - 0.5) ** e)

    def du(x):
        t = x[..., 0] - 0.5
        return (-np.sign(t) * np.abs(t) ** (1 / (p - 1)))[..., None, None]

    return ClosedForm(lambda x: u(x)[..., None], du, [(0.5,)])


def plaplace_1d_energy(p: float) -> float:
    """Energy int |u'|^p/p - u of plaplace_1d(p)."""
    e = p / (p - 1)
    # |u'|^p = |t|^e and the Euler-Lagrange equation give E = (1/p - 1) int |t|^e
    integral = 2 * 0.5 ** (e + 1) / (e + 1)
    return (1 / p - 1) * integral


def angular(x):
    """Angle profile: 1 on quadrant I, 0 on quadrant III, linear in between."""
    th = np.arctan2(x[..., 1], x[..., 0])
    return np.clip(np.where(th >= 0, 2 - 2 * th / np.pi, 1 + 2 * th / np.pi), 0.0, 1.0)


def angular_competitor() -> ClosedForm:
    def u(x):
        return angular(x)[..., None]

    def du(x):
        x1, x2 = x[..., 0], x[..., 1]
        r2 = x1 * x1 + x2 * x2
        th = np.arctan2(x2, x1)
        s = np.where((th > np.pi / 2), -2 / np.pi, np.where((th < 0) & (th > -np.pi / 2), 2 / np.pi, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.stack([-x2 / r2, x1 / r2], axis=-1) * s[..., None]
        return np.where(r2[..., None] > 0, g, 0.0)[..., None, :]

    return ClosedForm(u, du, [(0.0, 0.0)])


def boundary_data(spec):
    """Dirichlet data: none | <number> | plaplace:p | angular."""
    if spec is None or str(spec).strip().lower() in ("", "none", "zero"):
        return None
    v = _number(spec)
    if v is not None:
        return v
    name, args = _split(spec)
    if name == "plaplace":
        cf = plaplace_1d(args[0] if args else 2.0)
        return lambda x: cf.u(x)
    if name == "angular":
        return lambda x: angular(x)
    raise InvalidArgument(f"unknown boundary data '{spec}'")


def competitor(spec):
    """plaplace:p | angular | solution (the solver output itself)."""
    name, args = _split(spec)
    if name == "plaplace":
        return plaplace_1d(args[0] if args else 2.0)
    if name == "angular":
        return angular_competitor()
    if name == "solution":
        return "solution"
    raise InvalidArgument(f"unknown competitor '{spec}'")


def coefficient(spec, alpha: float = 1.0, scale: float = 1.0):
    name, args = _split(spec)
    if name == "constant":
        return I.constant_coefficient(args[0] if args else scale)
    if name == "power":
        return I.power_coefficient(alpha, scale)
    if name == "step":
        return I.step_coefficient(scale, args[0] if args else 0.0)
    if name == "checkerboard":
        return I.checkerboard_coefficient(alpha, scale)
    raise InvalidArgument(f"unknown coefficient '{spec}'")


def sample_field(spec):
    """Closed-form fields for direct Besov probes: power:gamma | constant[:c] | affine."""
    name, args = _split(spec)
    if name == "power":
        g = args[0] if args else 0.5
        return lambda x: np.abs(x[..., 0]) ** g
    if name == "constant":
        c = args[0] if args else 1.0
        return lambda x: np.full(x.shape[:-1], c)
    if name == "affine":
        return lambda x: 1.0 + np.sum(x * (np.arange(x.shape[-1]) + 1.0), axis=-1)
    raise InvalidArgument(f"unknown field '{spec}'")


__all__ = ["forcing", "boundary_data", "competitor", "coefficient", "sample_field",
           "plaplace_1d", "plaplace_1d_energy", "angular", "angular_competitor"]
