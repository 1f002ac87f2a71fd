import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grushin_weyl.errors import InvalidParameter, MeasureExponentNonIntegrable, NonPositiveScale
from grushin_weyl.geometry import GridSpec, GrushinParams, Point, dilate, rectangle_measure, to_conformal
from grushin_weyl.volumes import (
    G_of_tau,
    ball_bracket,
    ball_volume,
    ball_volume_constant,
    box_constant,
    box_volume,
    f_ratio_with_error,
    hausdorff_measure_singular,
    ratio_table,
    sublevel_measure,
    unit_ball_inverse,
    unweighted_area_near_axis,
)


@given(st.sampled_from([0.25, 0.5, 0.75]), st.integers(5, 16), st.floats(0, 5), st.floats(0.01, 2))
def test_box_volume_is_clipped_rectangle(alpha, n, r0, s):
    p = GrushinParams(alpha, n)
    k = p.snowflake_exponent
    expected = rectangle_measure(p, (max(r0 - s, 0.0), r0 + s), (-s**k, s**k))
    assert box_volume(p, r0, s).value == pytest.approx(expected, rel=1e-12)


def test_box_constant_matches_scaled_box():
    p = GrushinParams(0.5, 9)
    # box at distance r0 >> s: 2 s * 2 s^k * c_m r0^q to leading order
    r0, s = 1e3, 1e-2
    leading = 4 * s ** p.snowflake_exponent * s * r0 ** p.weight_exponent
    assert box_volume(p, r0, s).value == pytest.approx(leading, rel=1e-3)
    assert box_constant(p) == pytest.approx(4 / 8)


def test_sublevel_of_vertical_coordinate_is_exact_on_node_lines():
    p = GrushinParams(0.5, 9)
    grid = GridSpec.covering(p, (0.0, 2.0), (0.0, 1.0), resolution=20)
    y = grid.y_nodes
    values = np.broadcast_to(y[:, None], (grid.ny + 1, grid.nx + 1)).copy()
    level = float(y[10])
    r_level = float((p.snowflake_exponent * level ** (1 / p.snowflake_exponent)))
    v_width = grid.nx * grid.hx * p.snowflake_exponent ** (2 * p.alpha)
    expected = rectangle_measure(p, (0.0, r_level), (0.0, v_width))
    assert sublevel_measure(p, grid, values, level) == pytest.approx(expected, rel=1e-12)


def test_ball_volume_rejects_bad_radius():
    p = GrushinParams(0.5, 9)
    with pytest.raises(NonPositiveScale):
        ball_volume(p, Point(1.0), 0.0)
    with pytest.raises(MeasureExponentNonIntegrable):
        ball_volume(GrushinParams(1.0, 3), Point(1.0), 0.5)


@pytest.mark.parametrize("r0,s", [(10.0, 0.1), (2.0, 0.5), (1.0, 0.3)])
def test_ball_inside_bracket(r0, s):
    p = GrushinParams(0.5, 9)
    vol = ball_volume(p, Point(r0), s)
    lo, hi = ball_bracket(p, r0, s)
    assert lo <= vol.value <= hi
    assert vol.error_estimate < 0.05 * vol.value


def test_bracket_needs_distance_from_axis():
    with pytest.raises(InvalidParameter):
        ball_bracket(GrushinParams(0.5, 9), 0.5, 0.5)


def test_ball_volume_is_translation_invariant_in_v():
    p = GrushinParams(0.5, 9)
    a = ball_volume(p, Point(2.0, 0.0), 0.5)
    b = ball_volume(p, Point(2.0, 7.0), 0.5)
    assert a.value == pytest.approx(b.value, rel=1e-3)


def test_ball_volume_scales_under_dilation():
    p = GrushinParams(0.5, 9)
    lam = 2.0
    small = ball_volume(p, Point(1.0, 0.0), 0.4)
    big = ball_volume(p, dilate(p, Point(1.0, 0.0), lam), 0.4 * lam)
    ratio = big.value / (lam**p.homogeneous_dimension * small.value)
    assert ratio == pytest.approx(1.0, abs=small.error_estimate / small.value + big.error_estimate / big.value)


def test_axis_balls_scale_exactly():
    p = GrushinParams(0.5, 9)
    one = ball_volume(p, Point(0.0), 1.0)
    two = ball_volume(p, Point(0.0), 2.0)
    assert two.value / one.value == pytest.approx(2**p.homogeneous_dimension, rel=0.02)


def test_f_asymptote_far_from_axis():
    p = GrushinParams(0.5, 9)
    tau = 0.02
    f, err = f_ratio_with_error(p, 1 / tau)
    assert f * math.pi / (4 * tau) == pytest.approx(1.0, abs=0.03)
    assert err < 0.03 * f


def test_ball_reconstruction_from_G():
    p = GrushinParams(0.5, 9)
    r0, s = 2.0, 0.2
    G = G_of_tau(p, s / r0)
    vol = ball_volume(p, Point(r0), s)
    assert 1 / unit_ball_inverse(p, r0, s, G) == pytest.approx(vol.value, rel=0.02)


def test_G_vanishes_on_axis():
    assert G_of_tau(GrushinParams(0.5, 9), math.inf, f_value=1.0) == 0.0
    with pytest.raises(InvalidParameter):
        G_of_tau(GrushinParams(0.5, 9), 0.0)


def test_ratio_table_sorted():
    table = ratio_table(GrushinParams(0.5, 9), [0.2, 0.1], resolution=48)
    assert list(table.tau_values) == [0.1, 0.2]
    assert np.all(table.f_values > 0)


def test_unit_ball_constants():
    assert ball_volume_constant(2) == pytest.approx(math.pi)
    assert ball_volume_constant(3) == pytest.approx(4 * math.pi / 3)
    assert ball_volume_constant(1) == pytest.approx(2.0)


@given(st.floats(0.5, 3.0), st.floats(0.5, 4.0), st.floats(0.1, 10.0))
def test_hausdorff_measure_uniform_cover(k, C, length):
    value = hausdorff_measure_singular(None, k, C, length)
    assert value == pytest.approx(ball_volume_constant(k) * (C / 2) ** k * length)
    assert hausdorff_measure_singular(None, k, C, 2 * length) == pytest.approx(2 * value)


def test_unweighted_area_is_logarithmic_for_critical_alpha():
    assert unweighted_area_near_axis(0.5, 1e-3) == pytest.approx(-math.log(1e-3), rel=1e-8)
    assert unweighted_area_near_axis(0.25, 0.01) == pytest.approx(2 * (1 - 0.1), rel=1e-8)
