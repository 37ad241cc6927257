"""Averaged Riemannian metrics and conformal vector fields of Minkowski/Finsler norms."""

from ._backend import BACKEND
from .diffquad import HessianStrategy, build_sphere_quadrature, hessian_p2, indicatrix_integral
from .errors import (DegenerateSamplingError, FinslerError, FlowEscapeError, InvalidNormError,
                     NotPositiveDefiniteError, NumericalFailure)
from .metric import averaged_form, averaged_metric_field
from .norms import (Callback, Euclidean, EvenPNorm, FinslerField, LinearPullback, Randers, Scaled,
                    norm_from_spec, norm_to_spec, validate_norm)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "HessianStrategy", "build_sphere_quadrature", "hessian_p2", "indicatrix_integral",
    "DegenerateSamplingError", "FinslerError", "FlowEscapeError", "InvalidNormError",
    "NotPositiveDefiniteError", "NumericalFailure", "averaged_form", "averaged_metric_field",
    "Callback", "Euclidean", "EvenPNorm", "FinslerField", "LinearPullback", "Randers", "Scaled",
    "norm_from_spec", "norm_to_spec", "validate_norm",
]
