import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fluidlevel.calibrate import (
    P2V,
    SCHEMA_FIELDS,
    V2P,
    CalibrationModel,
    CalibrationPoint,
    error_report,
    estimate_volume,
    evaluate,
    fit_linear_2pt,
    fit_poly_ls,
    invert,
    pick_region_points,
    residual_sum_of_squares,
    select_calibration_points,
)
from fluidlevel.errors import (
    DegeneratePoints,
    InsufficientPoints,
    ModelFormatError,
    NotMonotone,
    OutOfRange,
    RankDeficient,
    RegionNotCovered,
)
from fluidlevel.simulate import MeniscusProfile, Region, effective_perimeter, region_of
from fluidlevel.vision import measure_frame
from fluidlevel.simulate import render_frame

PROFILE = MeniscusProfile()


def pts(pairs, direction=V2P):
    """Points from (x, y) pairs in the given direction's axes."""
    if direction == V2P:
        return [CalibrationPoint(v, p) for v, p in pairs]
    return [CalibrationPoint(v, p) for p, v in pairs]


def line_model(direction=V2P):
    return fit_linear_2pt(CalibrationPoint(0.5, 80.0), CalibrationPoint(2.0, 140.0), direction)


class TestLinear2pt:
    def test_example(self):
        m = line_model()
        assert m.coefficients == pytest.approx((60.0, 40.0))
        assert m.valid_range == (0.5, 2.0)
        assert m.kind == "linear_2pt" and m.order == 1 and m.points_used == 2

    def test_evaluate(self):
        assert evaluate(line_model(), 1.25) == (pytest.approx(110.0), False)

    def test_equal_volumes(self):
        with pytest.raises(DegeneratePoints):
            fit_linear_2pt(CalibrationPoint(1.0, 80.0), CalibrationPoint(1.0, 90.0))

    def test_p2v_direction(self):
        m = line_model(P2V)
        assert m.coefficients == pytest.approx((-1.5, 1 / 40))
        assert m.valid_range == (80.0, 140.0)

    @given(st.floats(0, 5), st.floats(1, 500), st.floats(0, 5), st.floats(1, 500))
    def test_passes_through_both(self, v1, p1, v2, p2):
        assume(abs(v1 - v2) > 1e-3)
        m = fit_linear_2pt(CalibrationPoint(v1, p1), CalibrationPoint(v2, p2))
        assert evaluate(m, v1).value == pytest.approx(p1, rel=1e-9, abs=1e-9)
        assert evaluate(m, v2).value == pytest.approx(p2, rel=1e-9, abs=1e-9)


class TestPolyLS:
    def test_interpolation_example(self):
        m = fit_poly_ls(pts([(0, 1), (1, 3), (2, 7)]), 2, V2P)
        assert m.coefficients == pytest.approx((1, 1, 1), abs=1e-12)

    def test_collinear(self):
        data = [(x, 3.5 * x - 2.0) for x in np.linspace(10, 100, 10)]
        m = fit_poly_ls(pts(data, P2V), 1, P2V)
        assert m.coefficients == pytest.approx((-2.0, 3.5), rel=1e-12)
        assert math.sqrt(residual_sum_of_squares(m, pts(data, P2V))) < 1e-9

    def test_insufficient(self):
        with pytest.raises(InsufficientPoints):
            fit_poly_ls(pts([(10, 1), (11, 2), (12, 3)], P2V), 3)

    def test_duplicate_abscissae(self):
        with pytest.raises(RankDeficient):
            fit_poly_ls([CalibrationPoint(v, p) for v, p in
                         [(1, 10), (2, 10), (3, 20), (4, 20)]], 2, P2V)

    def test_invalid_order(self):
        with pytest.raises(ValueError):
            fit_poly_ls(pts([(0, 1), (1, 2)]), 0)

    @settings(max_examples=60, deadline=None)
    @given(order=st.integers(1, 5), seed=st.integers(0, 10_000))
    def test_interpolates_exactly(self, order, seed):
        rng = np.random.default_rng(seed)
        x = np.sort(rng.uniform(50, 400, order + 1))
        assume(np.min(np.diff(x)) > 5)
        y = rng.uniform(0.1, 3.0, order + 1)
        m = fit_poly_ls(pts(zip(x, y), P2V), order, P2V)
        for xi, yi in zip(x, y):
            assert evaluate(m, xi).value == pytest.approx(yi, rel=1e-9, abs=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(order=st.integers(1, 5), n=st.integers(8, 40), seed=st.integers(0, 10_000))
    def test_residual_orthogonality(self, order, n, seed):
        rng = np.random.default_rng(seed)
        x = rng.uniform(100, 300, n)
        y = rng.uniform(0, 3, n)
        m = fit_poly_ls(pts(zip(x, y), P2V), order, P2V)
        resid = np.array([evaluate(m, xi).value for xi in x]) - y
        # columns of the design matrix on the same centred/scaled abscissa
        t = (x - 0.5 * (x.max() + x.min())) / (0.5 * (x.max() - x.min()))
        for k in range(order + 1):
            col = t ** k
            assert abs(col @ resid) < 1e-8 * np.linalg.norm(col) * max(np.linalg.norm(y), 1)

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(8, 40), seed=st.integers(0, 10_000))
    def test_rss_nonincreasing_in_order(self, n, seed):
        rng = np.random.default_rng(seed)
        points = pts(zip(rng.uniform(100, 300, n), rng.uniform(0, 3, n)), P2V)
        rss = [residual_sum_of_squares(fit_poly_ls(points, k, P2V), points) for k in range(1, 6)]
        for lo, hi in zip(rss[1:], rss[:-1]):
            assert lo <= hi * (1 + 1e-9) + 1e-18

    def test_matches_numpy_lstsq(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(100, 300, 30)
        y = 1.0 + 1e-6 * (x - 150) ** 3 + rng.normal(0, 0.01, 30)
        m = fit_poly_ls(pts(zip(x, y), P2V), 3, P2V)
        ref = np.polynomial.polynomial.Polynomial.fit(x, y, 3)
        grid = np.linspace(100, 300, 17)
        ours = [evaluate(m, g).value for g in grid]
        assert ours == pytest.approx(ref(grid), rel=1e-8, abs=1e-10)


class TestSelection:
    def sweep(self):
        vols = np.linspace(0.2, 2.5, 21)
        return [(float(v), 100 + 40 * float(v)) for v in vols]

    def test_grid_example(self):
        chosen = select_calibration_points(self.sweep(), PROFILE)
        vols = [p.volume for p in chosen]
        assert len(chosen) == 6
        assert sum(v < 0.5 for v in vols) == 2
        assert sum(0.5 <= v < 2.2 for v in vols) == 2
        assert sum(2.2 <= v <= 2.5 for v in vols) == 2
        assert [p.region for p in chosen] == [Region.A] * 2 + [Region.B] * 2 + [Region.C] * 2

    def test_quartile_choice(self):
        vols = [v for v, _ in self.sweep() if 0.5 <= v < 2.2]
        chosen = pick_region_points(self.sweep(), PROFILE, Region.B)
        lo, hi = min(vols), max(vols)
        for p, frac in zip(chosen, (0.25, 0.75)):
            target = lo + frac * (hi - lo)
            assert abs(p.volume - target) == pytest.approx(min(abs(v - target) for v in vols))

    def test_only_region_b(self):
        with pytest.raises(RegionNotCovered):
            select_calibration_points([(v, 100 + v) for v in np.linspace(0.6, 2.0, 10)], PROFILE)

    def test_boundaries_half_open(self):
        sweep = [(v, 100 + 40 * v) for v in (0.2, 0.3, 0.5, 1.0, 2.2, 2.4, 2.6)]
        chosen = select_calibration_points(sweep, PROFILE)
        assert [p.volume for p in chosen] == [0.2, 0.3, 0.5, 1.0, 2.2, 2.4]
        assert region_of(0.5, PROFILE) is Region.B and region_of(2.2, PROFILE) is Region.C

    def test_repeated_volumes_averaged(self):
        sweep = [(0.1, 90.0), (0.1, 92.0), (0.4, 95.0)]
        (a, b) = pick_region_points(sweep, PROFILE, Region.A)
        assert (a.volume, a.perimeter) == (0.1, 91.0)
        assert b.volume == 0.4


class TestEvaluateInvert:
    def test_poly_value(self):
        m = CalibrationModel("poly_ls", 2, V2P, (1, 1, 1), (0, 3))
        assert evaluate(m, 2.0) == (7.0, False)

    def test_range_ends_in_range(self):
        m = line_model()
        assert not evaluate(m, 0.5).extrapolated
        assert not evaluate(m, 2.0).extrapolated

    def test_extrapolation_flag(self):
        m = line_model()
        e = evaluate(m, 3.0)
        assert e.extrapolated and e.value == pytest.approx(180.0)

    def test_invert_line(self):
        assert invert(line_model(), 110.0) == pytest.approx(1.25, abs=1e-9)

    def test_not_monotone(self):
        m = CalibrationModel("poly_ls", 2, V2P, (0, 0, 1), (-1, 1))
        with pytest.raises(NotMonotone):
            invert(m, 0.5)

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            invert(line_model(), 200.0)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        # monotone cubic: positive derivative everywhere
        c1, c3 = rng.uniform(10, 50), rng.uniform(0.1, 5)
        m = CalibrationModel("poly_ls", 3, V2P, (rng.uniform(50, 100), c1, 0.0, c3), (0.1, 2.5))
        for x in rng.uniform(0.1, 2.5, 100):
            assert invert(m, evaluate(m, x).value) == pytest.approx(x, abs=1e-6)

    def test_estimate_volume_both_directions(self):
        v2p, p2v = line_model(V2P), line_model(P2V)
        for p in (80.0, 100.0, 140.0):
            assert estimate_volume(v2p, p).value == pytest.approx(estimate_volume(p2v, p).value)

    def test_estimate_volume_extrapolates_line(self):
        e = estimate_volume(line_model(V2P), 180.0)
        assert e.extrapolated and e.value == pytest.approx(3.0)


class TestErrorReport:
    def model(self):
        data = [(p, 0.01 * p - 0.5 + 1e-5 * (p - 150) ** 2) for p in np.linspace(100, 300, 12)]
        return fit_poly_ls(pts(data, P2V), 2, P2V)

    def test_self_consistency(self):
        m = self.model()
        truth = [(evaluate(m, p).value, p) for p in np.linspace(110, 290, 20)]
        rep = error_report(m, truth, PROFILE)
        assert rep.mean_abs_error == pytest.approx(0, abs=1e-9)
        assert rep.max_abs_error == pytest.approx(0, abs=1e-9)

    def test_constant_offset(self):
        m = self.model()
        shifted = CalibrationModel(m.kind, m.order, m.direction,
                                   (m.coefficients[0] + 0.05,) + m.coefficients[1:], m.valid_range)
        truth = [(evaluate(m, p).value, p) for p in np.linspace(110, 290, 20)]
        rep = error_report(shifted, truth)
        assert rep.mean_abs_error == pytest.approx(50.0, rel=1e-9)
        assert rep.max_abs_error == pytest.approx(50.0, rel=1e-9)
        assert all(e == pytest.approx(50.0) for e in rep.errors_ul)

    @settings(max_examples=30)
    @given(st.lists(st.tuples(st.floats(0.1, 3), st.floats(90, 320)), min_size=1, max_size=30))
    def test_aggregates(self, truth):
        rep = error_report(self.model(), truth, PROFILE)
        assert rep.max_abs_error == pytest.approx(max(abs(e) for e in rep.errors_ul))
        assert rep.max_abs_error >= rep.mean_abs_error - 1e-9 >= -1e-9
        assert sum(n for n, _, _ in rep.per_region.values()) == len(truth)

    def test_empty(self):
        with pytest.raises(ValueError):
            error_report(self.model(), [])


class TestSchema:
    def test_round_trip(self):
        m = fit_poly_ls(pts([(100, 0.1), (150, 0.9), (200, 1.6), (260, 2.3)], P2V), 2, P2V,
                        well_id="w1")
        text = m.to_json()
        assert list(json.loads(text)) == list(SCHEMA_FIELDS)
        assert CalibrationModel.from_json(text) == m

    def test_unknown_field(self):
        doc = line_model().to_dict()
        doc["extra"] = 1
        with pytest.raises(ModelFormatError):
            CalibrationModel.from_dict(doc)

    def test_missing_field(self):
        doc = line_model().to_dict()
        del doc["valid_range"]
        with pytest.raises(ModelFormatError):
            CalibrationModel.from_dict(doc)

    @pytest.mark.parametrize("key,value", [("version", 2), ("kind", "spline"),
                                           ("coefficients", [1.0]), ("valid_range", [2, 1])])
    def test_bad_values(self, key, value):
        doc = line_model().to_dict()
        doc[key] = value
        with pytest.raises(ModelFormatError):
            CalibrationModel.from_dict(doc)

    def test_not_json(self):
        with pytest.raises(ModelFormatError):
            CalibrationModel.from_json("{nope")


class TestSimulatorLinearity:
    def test_region_b_two_point_prediction(self, scene):
        vols = np.linspace(0.55, 2.15, 12)
        measured = [(v, measure_frame(render_frame(scene, v)).perimeter) for v in vols]
        m = fit_linear_2pt(CalibrationPoint(*measured[2]), CalibrationPoint(*measured[-3]))
        for v, p in measured:
            assert evaluate(m, v).value == pytest.approx(p, rel=1e-3)

    def test_region_b_model_exactly_linear(self, scene):
        vols = np.linspace(0.5, 2.19, 30)
        m = fit_linear_2pt(CalibrationPoint(0.8, effective_perimeter(scene, 0.8)),
                           CalibrationPoint(1.9, effective_perimeter(scene, 1.9)))
        for v in vols:
            assert evaluate(m, v).value == pytest.approx(effective_perimeter(scene, v), rel=1e-12)
