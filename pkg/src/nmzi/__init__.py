"""Simulation and analysis of weak traces in a nested Mach-Zehnder interferometer."""

from .optics import (
    MIRRORS,
    MirrorPerturbation,
    NmziConfig,
    Ratios,
    SignConvention,
    SplitRatio,
    detector_power_exact,
    detector_power_linearized,
    finite_difference_gradient,
    first_order_coefficients,
    equal_intensity_ratios,
    path_amplitudes,
    propagate,
)

__version__ = "0.1.0"
