from src.zograd.estimator import (
    ZerothOrderError,
    ZoConfig,
    estimate_input_gradient,
    exact_input_gradient,
    sample_unit_sphere,
)

__all__ = [
    "ZerothOrderError",
    "ZoConfig",
    "estimate_input_gradient",
    "exact_input_gradient",
    "sample_unit_sphere",
]
