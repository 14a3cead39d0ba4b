"""Plot utilities: how far a curve is from a reference curve or class."""
from __future__ import annotations

import numpy as np

from .core import SampledCurve, UtilitySpec
from .errors import LengthMismatch, UnsupportedCombination
from .fits import (
    ReferenceFit,
    discrete_loss,
    fit_constant_mean,
    fit_curve,
    fit_rows,
    loss_rows,
)
from .models import ModelHandle, constant_contrast, flip_attribute_contrast, taylor_contrast

__all__ = [
    "discrete_loss",
    "variance_utility",
    "contrast_utility",
    "property_utility",
    "build_contrast",
    "curve_utility",
    "utility_rows",
]


def variance_utility(curve: SampledCurve, normalize: bool = True) -> float:
    return discrete_loss(curve.fs, fit_constant_mean(curve).hs, curve.ts, "squared", normalize)


def contrast_utility(curve: SampledCurve, contrast: SampledCurve, loss: str = "squared",
                     normalize: bool = True) -> float:
    """Loss between a curve and the same plot drawn for a contrast model."""
    if contrast.ts.shape != curve.ts.shape or not np.array_equal(contrast.ts, curve.ts):
        raise LengthMismatch("contrast curve must be sampled on the identical grid")
    return discrete_loss(curve.fs, contrast.fs, curve.ts, loss, normalize)


def property_utility(curve: SampledCurve, fit_kind: str, loss: str = "squared", params=None,
                     normalize: bool = True):
    """Smallest loss to the class ``fit_kind``; returns ``(value, ReferenceFit)``."""
    fit = fit_curve(curve, fit_kind, loss, params, normalize)
    return fit.achieved_loss, fit


def build_contrast(spec: UtilitySpec, m: ModelHandle, x0=None) -> ModelHandle | None:
    """Contrast model for ``spec`` at target ``x0``.

    Returns ``None`` for property utilities and for the constant-mean
    (variance) contrast, whose reference comes from the curve itself.
    """
    if spec.kind != "contrast" or spec.reference == "constant_mean":
        return None
    ref = spec.reference
    if ref == "model":
        return spec.contrast_model
    if ref == "flip":
        return flip_attribute_contrast(m, spec.param_dict["attr"])
    if x0 is None:
        raise UnsupportedCombination(f"the {ref!r} contrast is defined relative to a target instance")
    if ref == "constant":
        return constant_contrast(m, x0)
    if ref == "taylor":
        return taylor_contrast(m, x0, spec.param_dict.get("h"))
    raise UnsupportedCombination(f"unknown contrast {ref!r}")


def curve_utility(curve: SampledCurve, spec: UtilitySpec, contrast: SampledCurve | None = None):
    """Utility of one curve plus the reference values drawn as the dotted line.

    Returns ``(value, ReferenceFit)``.
    """
    if spec.kind == "property":
        return property_utility(curve, spec.reference, spec.loss, spec.param_dict, spec.normalize)
    if spec.reference == "constant_mean":
        fit = fit_constant_mean(curve, spec.loss, spec.normalize)
        return fit.achieved_loss, fit
    if contrast is None:
        raise UnsupportedCombination(f"{spec.reference!r} contrast needs a contrast curve")
    value = contrast_utility(curve, contrast, spec.loss, spec.normalize)
    return value, ReferenceFit(contrast.fs, f"contrast:{spec.reference}", value, {})


def utility_rows(Fs, lengths, spec: UtilitySpec, Gs=None) -> np.ndarray:
    """Utilities of many equally spaced, equal-length curves at once.

    ``Gs`` holds the contrast curves row by row for contrast utilities that
    need one.
    """
    Fs = np.asarray(Fs, dtype=np.float64)
    if spec.kind == "property":
        Hs = fit_rows(Fs, lengths, spec.reference, spec.loss, spec.param_dict, spec.normalize)
    elif spec.reference == "constant_mean":
        Hs = fit_rows(Fs, lengths, "constant_mean")
    else:
        if Gs is None:
            raise UnsupportedCombination(f"{spec.reference!r} contrast needs contrast curves")
        Hs = np.asarray(Gs, dtype=np.float64)
    return loss_rows(Fs, Hs, lengths, spec.loss, spec.normalize)
