import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grushin_weyl.errors import InvalidParameter, NoPlateau, TailDominates
from grushin_weyl.geometry import GrushinParams
from grushin_weyl.heat import (
    HSource,
    covering_period,
    covering_sum_circle,
    covering_tail,
    diagonal_heat_kernel,
    h_function,
    half_plane_kernel,
    heat_trace,
    karamata_limits,
    log_fit,
    modal_heat_kernel,
    t_min,
    tail_bound,
    trace_constant,
)
from grushin_weyl.spectrum import Space, Spectrum, WarpProfile


def axis_kernel_oracle(t):
    """H(0, 0, t) for alpha = 1/2, n = 9 on the half-plane.

    Each v-frequency xi sees the 4-dimensional isotropic oscillator; Mehler's
    formula at the origin times the area 2 pi^2 of S^3 integrates over xi
    (with the integral of x^2 / sinh^2 x over the line equal to pi^2 / 3)
    to pi / (96 t^3).
    """
    return math.pi / (96.0 * t**3)


@pytest.mark.parametrize("t", [1.0, 0.5])
def test_axis_kernel_matches_closed_form(critical, t):
    value = float(half_plane_kernel(critical, [0.0], t)[0])
    assert value == pytest.approx(axis_kernel_oracle(t), rel=1e-3)


def test_heat_trace_of_finite_spectrum():
    spec = Spectrum.from_values([0.0, 1.0, 3.0], [1, 2, 1], complete_below=math.inf)
    series = heat_trace(spec, [0.5, 2.0])
    np.testing.assert_allclose(series.t_values, [2.0, 0.5])
    np.testing.assert_allclose(series.Z_values, [1 + 2 * math.exp(-2) + math.exp(-6),
                                                 1 + 2 * math.exp(-0.5) + math.exp(-1.5)])
    np.testing.assert_array_equal(series.truncation_error, 0.0)


def test_heat_trace_refuses_small_times():
    spec = Spectrum.from_values(np.arange(1, 1001, dtype=float), complete_below=1000.0)
    assert t_min(spec) == pytest.approx(0.025)
    with pytest.raises(TailDominates):
        heat_trace(spec, [0.01])
    with pytest.raises(InvalidParameter):
        heat_trace(spec, [0.0])


def test_tail_bound_dominates_true_tail():
    lam = np.arange(1, 20001, dtype=float)
    cut = Spectrum.from_values(lam[lam <= 2000.0], complete_below=2000.0)
    for t in [0.0125, 0.02, 0.05]:
        true_tail = np.exp(-lam[lam > 2000.0] * t).sum()
        assert 0 < true_tail <= float(tail_bound(cut, t))


def test_trace_identity_on_doubled_space():
    p = GrushinParams(0.5, 9, period=1.0)
    warp = WarpProfile(0.5)
    r = np.linspace(0.0, 3.0, 601)
    kernel = modal_heat_kernel(p, Space.XDOUBLE, 2000.0, r_values=r)
    for t in [0.02, 0.05]:
        integral = np.trapezoid(kernel.diagonal(t) * warp.density(r, 9), r) * p.c_m * p.period * 2
        assert integral == pytest.approx(kernel.trace(t), rel=2e-3)


def test_band_traces_add_up():
    p = GrushinParams(0.5, 9, period=1.0)
    kernel = modal_heat_kernel(p, Space.YTILDE, 1000.0, bands=[(0.0, 1.0), (1.0, 3.0)])
    t = 0.05
    assert kernel.band_trace(t).sum() == pytest.approx(kernel.trace(t), rel=1e-10)


def test_smooth_point_kernel_is_euclidean():
    # away from the axis H ~ 1/(4 pi t) per unit Riemannian area; the measure density
    # relative to Riemannian area at r = 2.5 on the plateau is density / h (per copy)
    p = GrushinParams(0.5, 9, period=1.0)
    warp = WarpProfile(0.5)
    t = 0.002
    H = diagonal_heat_kernel(p, Space.XDOUBLE, 2.5, t)
    rho = float(warp.density(2.5, 9)) / float(warp.h(2.5))
    assert t * H * 4 * math.pi * rho == pytest.approx(1.0, abs=5e-3)


def test_h_tends_to_euclidean_value_far_from_axis(critical):
    # a small ball sees a flat weighted plane: pi s^2 rho times 1 / (4 pi s^2 rho)
    value = h_function(critical, 1.0, 0.01)
    assert value.source is HSource.TRANSPORTED
    assert value.representative == pytest.approx((5.0, 0.05))
    assert value.h == pytest.approx(0.25, rel=0.01)


def test_h_on_axis_is_scale_invariant(critical):
    a = h_function(critical, 0.0, 0.5).h
    b = h_function(critical, 0.0, 1.0).h
    assert a == pytest.approx(b, rel=0.01)


def test_h_rejects_bad_arguments(critical):
    with pytest.raises(InvalidParameter):
        h_function(critical, -1.0, 1.0)
    with pytest.raises(InvalidParameter):
        h_function(critical, 1.0, 0.0)


def test_covering_period_rule(critical):
    assert covering_period(critical, 1.0, 0.1) == pytest.approx(0.8 * 1.4)
    assert covering_period(critical, 1.0, 0.1, v_length=5.0) == 5.0


@given(st.floats(0.01, 1.0), st.floats(0, 1), st.floats(0, 1))
def test_theta_identity(t, x, y):
    lattice, fourier = covering_sum_circle(t, x, y, terms=50)
    assert lattice == pytest.approx(fourier, rel=1e-10, abs=1e-12)


def test_covering_tail_decreases_with_scale(critical):
    first = covering_tail(critical, 0.0, 0.3, resolution=48)
    values = [covering_tail(critical, 0.0, s, distances=first.distances).bound for s in (0.3, 0.2, 0.1)]
    assert values[0] > values[1] > values[2] > 0
    assert np.all(np.diff(first.distances) > 0)


@given(st.floats(0.5, 3.0), st.floats(-2, 2), st.floats(-1, 1))
def test_log_fit_recovers_exact_data(a, b, c):
    s = np.geomspace(0.01, 0.1, 9)
    fit = log_fit(s, a * -np.log(s) + b + c * s)
    assert fit.slope == pytest.approx(a, abs=1e-9)
    assert fit.intercept == pytest.approx(b, abs=1e-9)


def test_trace_constant(critical):
    assert trace_constant(critical) == 2.0


def test_karamata_linear_spectrum():
    # lambda_j = j: N ~ lambda, Z ~ 1/t, ratio Gamma(2) = 1
    spec = Spectrum.from_values(np.arange(1, 10001, dtype=float), complete_below=1e4)
    result = karamata_limits(spec, 2.0, "power")
    assert result.ratio == pytest.approx(1.0, abs=1e-3)
    assert result.counting_limit == pytest.approx(1.0, abs=1e-3)


def test_karamata_reports_missing_plateau():
    lam = np.concatenate([np.arange(1, 1001, dtype=float), 1000 + np.arange(1, 100001, dtype=float) ** 0.5])
    spec = Spectrum.from_values(np.sort(lam), complete_below=float(lam.max()))
    with pytest.raises(NoPlateau):
        karamata_limits(spec, 2.0, "power", tolerance=0.01)


def test_karamata_limit_ignores_constant_shift():
    beta = 2.5
    lam = np.arange(1, int(1e4**1.25) + 1, dtype=float) ** (2 / beta)
    plain = karamata_limits(Spectrum.from_values(lam, complete_below=1e4), beta, "power")
    shifted = karamata_limits(Spectrum.from_values(lam + 3.0, complete_below=1e4 + 3.0), beta, "power")
    assert shifted.heat_limit == pytest.approx(plain.heat_limit, rel=0.01)
    assert shifted.counting_limit == pytest.approx(plain.counting_limit, rel=0.01)
