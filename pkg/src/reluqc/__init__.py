"""Quadratic constraints for repeated ReLU and the SDP certificates built on them."""

from .core import (
    DimensionError,
    PatternCapError,
    QcMatrix,
    SignPattern,
    enumerate_sign_patterns,
    flipped_relu,
    householder,
    inc_qc_form,
    leaky,
    qc_form,
    relu,
    sign_scale,
    sign_scale_inc,
)
from .io import InputError

__version__ = "0.1.0"

__all__ = [
    "DimensionError",
    "InputError",
    "PatternCapError",
    "QcMatrix",
    "SignPattern",
    "__version__",
    "enumerate_sign_patterns",
    "flipped_relu",
    "householder",
    "inc_qc_form",
    "leaky",
    "qc_form",
    "relu",
    "sign_scale",
    "sign_scale_inc",
]
