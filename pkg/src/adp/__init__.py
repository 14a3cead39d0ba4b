"""Automated selection of directional dependence plots for black-box models."""
from ._accel import backend_name
from .bounds import BoxBound, GaussianDensity, line_box_interval, line_density_interval, plot_interval
from .core import Dataset, Direction, Interval, SampledCurve, UtilitySpec, givens_rotate, make_direction
from .curves import PlotProblem, instance_curve, latent_curve, pdp_curve, transform_curve
from .errors import ADPError
from .models import ModelHandle, SyntheticSinModel, load_model, make_random_nonmonotone_model
from .optimizer import (
    GcpConfig,
    GcpTrace,
    best_axis_direction,
    gcp_optimize,
    optimize_over_instances,
    random_direction_baseline,
)
from .utilities import contrast_utility, property_utility, variance_utility

__version__ = "0.1.0"

__all__ = [
    "ADPError", "BoxBound", "Dataset", "Direction", "GaussianDensity", "GcpConfig", "GcpTrace",
    "Interval", "ModelHandle", "PlotProblem", "SampledCurve", "SyntheticSinModel", "UtilitySpec",
    "backend_name", "best_axis_direction", "contrast_utility", "gcp_optimize", "givens_rotate",
    "instance_curve", "latent_curve", "line_box_interval", "line_density_interval", "load_model",
    "make_direction", "make_random_nonmonotone_model", "optimize_over_instances", "pdp_curve",
    "plot_interval", "property_utility", "random_direction_baseline", "transform_curve",
    "variance_utility",
]
