"""Discrete dyadic harmonic analysis for bi-parameter singular integral forms."""
from __future__ import annotations

__version__ = "0.1.0"

from .dyadic import DyadicInterval, DyadicRectangle, diam_union, family, rect_family  # noqa: E402
from .errors import ConfigError, NumericalFailure, PreconditionError  # noqa: E402
from .signals import (  # noqa: E402
    BumpSpec,
    HaarCoeffs,
    Signal1D,
    Signal2D,
    StepFunction,
    haar_forward,
    haar_inverse,
    make_bump,
)
from .square_functions import (  # noqa: E402
    ShiftSpec,
    double_modified_square_fn,
    double_square_fn,
    identity_spec,
    injective_spec,
    modified_square_fn,
    shift_op,
    square_fn,
)

__all__ = [
    "__version__",
    "DyadicInterval", "DyadicRectangle", "diam_union", "family", "rect_family",
    "ConfigError", "NumericalFailure", "PreconditionError",
    "BumpSpec", "HaarCoeffs", "Signal1D", "Signal2D", "StepFunction",
    "haar_forward", "haar_inverse", "make_bump",
    "ShiftSpec", "double_modified_square_fn", "double_square_fn", "identity_spec", "injective_spec",
    "modified_square_fn", "shift_op", "square_fn",
]
