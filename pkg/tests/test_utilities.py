import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adp.bounds import BoxBound
from adp.core import Interval, SampledCurve, UtilitySpec, grid, make_direction
from adp.curves import PlotProblem
from adp.errors import LengthMismatch, UnsupportedCombination
from adp.models import SyntheticSinModel, linear_model
from adp.optimizer import score_directions
from adp.utilities import (
    build_contrast,
    contrast_utility,
    curve_utility,
    property_utility,
    utility_rows,
    variance_utility,
)

from oracles import monotone_best

SPECS = [UtilitySpec.variance(), UtilitySpec.linear(), UtilitySpec.monotonic(),
         UtilitySpec.linear(loss="absolute"), UtilitySpec.monotonic(loss="absolute"),
         UtilitySpec.lipschitz(1.0)]


def unit_curve(fn, k=201, a=0.0, b=1.0):
    ts = grid(Interval(a, b), k)
    return SampledCurve(ts, fn(ts), Interval(a, b))


def test_variance_examples():
    assert variance_utility(unit_curve(lambda t: np.full_like(t, 3.0))) == 0.0
    assert variance_utility(unit_curve(lambda t: t)) == pytest.approx(1 / 12, abs=1e-4)


def test_variance_equals_constant_mean_contrast():
    c = unit_curve(lambda t: np.sin(5 * t) + t ** 2, k=77)
    mean = np.trapezoid(c.fs, c.ts) / (c.ts[-1] - c.ts[0])
    ref = SampledCurve(c.ts, np.full(c.k, mean), c.interval)
    assert abs(variance_utility(c) - contrast_utility(c, ref)) < 1e-12


def test_contrast_examples():
    c = unit_curve(np.cos)
    assert contrast_utility(c, c) == 0.0
    flat = unit_curve(lambda t: np.full_like(t, 2.0))
    assert contrast_utility(flat, flat) == 0.0
    with pytest.raises(LengthMismatch):
        contrast_utility(c, unit_curve(np.cos, k=11))


def test_property_examples():
    assert property_utility(unit_curve(np.exp), "isotonic")[0] == 0.0
    u, fit = property_utility(unit_curve(lambda t: np.cos(3 * t), a=-1.0, b=1.0), "isotonic")
    assert u > 0.01 and fit.fit_kind == "isotonic"
    assert property_utility(unit_curve(lambda t: 3 * t - 1), "linear")[0] < 1e-28
    with pytest.raises(UnsupportedCombination):
        property_utility(unit_curve(np.sin), "lipschitz", "absolute", {"L": 1.0})


def test_cos3t_against_oracle():
    c = unit_curve(lambda t: np.cos(3 * t), k=9, a=-1.0, b=1.0)
    _, best, _ = monotone_best(c.fs)
    assert abs(property_utility(c, "isotonic")[0] - best) < 1e-12


@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=40), st.sampled_from(SPECS),
       st.floats(-5, 5), st.floats(0.01, 10))
def test_utilities_nonnegative_and_reversal_invariant(values, spec, a, width):
    fs = np.array(values)
    ts = grid(Interval(a, a + width), len(values), force_odd=False)
    c = SampledCurve(ts, fs, Interval(a, a + width))
    u, _ = curve_utility(c, spec)
    r, _ = curve_utility(c.reversed(), spec)
    assert u >= 0.0
    assert abs(u - r) <= 1e-10 * max(1.0, abs(u))


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.reference}-{s.loss}")
def test_zero_iff_in_class(spec):
    members = {"constant_mean": lambda t: np.full_like(t, -2.0),
               "linear": lambda t: 4 * t + 1,
               "isotonic": lambda t: np.floor(4 * t) + t,
               "lipschitz": lambda t: 0.5 * np.sin(t)}
    non = lambda t: np.cos(6 * t)  # noqa: E731
    assert curve_utility(unit_curve(members[spec.reference], a=-1.0), spec)[0] < 1e-10
    assert curve_utility(unit_curve(non, a=-1.0), spec)[0] > 1e-3


def test_grid_refinement_sin_model():
    m = SyntheticSinModel.random(10, 0)
    box = BoxBound(-np.ones(10), np.ones(10))
    v = make_direction({0: 1.0, 1: 0.5, 4: -0.3}, 10)
    for spec in (UtilitySpec.variance(), UtilitySpec.monotonic(), UtilitySpec.linear()):
        coarse = score_directions(PlotProblem(m, np.zeros(10), box=box, k=101), [v], spec)[0]
        fine = score_directions(PlotProblem(m, np.zeros(10), box=box, k=201), [v], spec)[0]
        assert abs(coarse - fine) < 0.01 * fine


def test_build_contrast_kinds():
    m = linear_model([1.0, 2.0])
    x0 = np.array([0.5, 0.5])
    assert build_contrast(UtilitySpec.variance(), m, x0) is None
    assert build_contrast(UtilitySpec.monotonic(), m, x0) is None
    assert build_contrast(UtilitySpec.constant_contrast(), m, x0)([9.0, 9.0]) == 1.5
    other = linear_model([0.0, 1.0])
    assert build_contrast(UtilitySpec.model_contrast(other), m, x0) is other
    assert build_contrast(UtilitySpec.flip(0), m, x0)([0.0, 0.0]) == 1.0
    assert build_contrast(UtilitySpec.taylor(), m, x0)([1.0, 1.0]) == pytest.approx(3.0)
    with pytest.raises(UnsupportedCombination):
        build_contrast(UtilitySpec.taylor(), m, None)


def test_taylor_contrast_zero_for_affine_model():
    m = linear_model([1.0, -2.0, 0.5])
    P = PlotProblem(m, np.zeros(3), box=BoxBound(-np.ones(3), np.ones(3)), k=31)
    spec = UtilitySpec.taylor()
    g = build_contrast(spec, m, P.x0)
    u = score_directions(P, [make_direction(np.ones(3))], spec, g)[0]
    assert u < 1e-16


def test_utility_rows_matches_curve_utility(rng):
    k = 41
    Fs = np.cumsum(rng.normal(size=(10, k)), axis=1)
    Gs = rng.normal(size=(10, k))
    lengths = rng.uniform(0.5, 3.0, size=10)
    for spec in SPECS + [UtilitySpec.constant_contrast()]:
        rows = utility_rows(Fs, lengths, spec, Gs)
        for r in range(10):
            iv = Interval(0.0, lengths[r])
            c = SampledCurve(np.linspace(0.0, lengths[r], k), Fs[r], iv)
            g = SampledCurve(c.ts, Gs[r], iv)
            single = curve_utility(c, spec, g)[0]
            assert rows[r] == pytest.approx(single, rel=1e-9, abs=1e-12)
    with pytest.raises(UnsupportedCombination):
        utility_rows(Fs, lengths, UtilitySpec.constant_contrast())


def test_unnormalized_scales_with_length():
    ts = grid(Interval(0.0, 2.0), 101)
    c = SampledCurve(ts, ts ** 2, Interval(0.0, 2.0))
    spec = UtilitySpec("property", "linear", normalize=False)
    raw = curve_utility(c, spec)[0]
    assert raw == pytest.approx(2.0 * curve_utility(c, UtilitySpec.linear())[0], rel=1e-12)
