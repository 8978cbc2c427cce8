"""Adaptive stack filters for speckled (SAR) imagery.

Design of stack filters from training regions, classical Lee/Frost
despeckling, G0 speckle simulation, Q/beta quality indexes and Gaussian
maximum-likelihood classification.
"""

from .errors import ContractViolation, DomainError, FormatError
from .image import (
    BinaryImage,
    QuantizedImage,
    Rect,
    RegionOfInterest,
    Window,
    read_pgm,
    reconstruct,
    threshold,
    threshold_stack,
    window_pattern,
    write_pgm,
)
from .stackfilter import (
    PositiveBooleanFunction,
    Statistic,
    TrainingCosts,
    accumulate_costs,
    apply,
    fit_monotone,
    is_monotone,
    iterate,
    make_desired,
    to_dnf,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryImage",
    "ContractViolation",
    "DomainError",
    "FormatError",
    "PositiveBooleanFunction",
    "QuantizedImage",
    "Rect",
    "RegionOfInterest",
    "Statistic",
    "TrainingCosts",
    "Window",
    "accumulate_costs",
    "apply",
    "fit_monotone",
    "is_monotone",
    "iterate",
    "make_desired",
    "read_pgm",
    "reconstruct",
    "threshold",
    "threshold_stack",
    "to_dnf",
    "train",
    "window_pattern",
    "write_pgm",
]
