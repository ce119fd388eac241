"""Exception types shared by the library and the command line front end."""
from __future__ import annotations


class NumericalFailure(RuntimeError):
    """A quadrature or estimation routine failed to reach its tolerance."""


class PreconditionError(ValueError):
    """An input violates a documented precondition."""


class ConfigError(ValueError):
    """An experiment configuration is malformed or names something unknown."""
