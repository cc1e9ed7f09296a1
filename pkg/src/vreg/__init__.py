"""Numerical laboratory for convex variational problems with (p,q)-growth."""
from . import besov, builtins, exponents, fields, integrands, regularity, solver
from .errors import ConfigError, InvalidArgument, UnsupportedError, VregError

__version__ = "0.1.0"

__all__ = ["besov", "builtins", "exponents", "fields", "integrands", "regularity", "solver",
           "ConfigError", "InvalidArgument", "UnsupportedError", "VregError"]
