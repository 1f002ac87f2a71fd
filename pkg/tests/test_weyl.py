import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from grushin_weyl.errors import InvalidParameter, NoPlateau
from grushin_weyl.geometry import GrushinParams
from grushin_weyl.spectrum import Spectrum, assemble_spectrum, ideal_model_spectrum
from grushin_weyl.weyl import (
    WeylLaw,
    default_window,
    flat_torus_spectrum,
    localized_count,
    localized_counts,
    regular_weyl_oracle,
    unit_ball_volume,
    weyl_fit,
)


def test_unit_ball_volumes():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert regular_weyl_oracle(2, 4 * math.pi**2) == pytest.approx(math.pi)


def test_torus_spectrum_by_enumeration():
    spec = flat_torus_spectrum([2 * math.pi, 2 * math.pi], 5.0)
    # m1^2 + m2^2 <= 5
    assert spec.lam.tolist() == [0.0, 1.0, 2.0, 4.0, 5.0]
    assert spec.mult.tolist() == [1, 4, 4, 4, 8]


def test_power_fit_of_exact_power_spectrum():
    spec = Spectrum.from_values(np.arange(1, 100001, dtype=float) ** (2 / 3), complete_below=100001 ** (2 / 3))
    fit = weyl_fit(spec, WeylLaw.POWER, beta=3.0)
    assert fit.leading_coefficient == pytest.approx(1.0, rel=0.01)
    assert fit.plateau_ok


def test_fit_report_withholds_coefficient_without_plateau():
    spec = ideal_model_spectrum(1e4)
    fit = weyl_fit(spec, WeylLaw.POWER, beta=2.0, strict=False)
    assert not fit.plateau_ok
    assert fit.report()["leading_coefficient"] is None
    with pytest.raises(NoPlateau):
        weyl_fit(spec, WeylLaw.POWER, beta=2.0)


def test_fit_argument_checks():
    spec = ideal_model_spectrum(1e3)
    with pytest.raises(InvalidParameter):
        weyl_fit(spec, WeylLaw.POWER)
    with pytest.raises(InvalidParameter):
        weyl_fit(spec, WeylLaw.REGULAR)
    with pytest.raises(InvalidParameter):
        weyl_fit(spec, WeylLaw.LOG_CORRECTED, window=(10.0, 2e3))
    assert default_window(spec) == pytest.approx((90.0, 900.0))


@given(st.floats(0.05, 0.95))
def test_localized_counts_bounded_by_total(eps):
    spec = _small_localized_spectrum()
    lam = np.linspace(0, 400, 9)
    m = localized_counts(spec, eps, lam)
    assert np.all(m <= spec.counting(lam))
    assert np.all(np.diff(m) >= 0)


def test_empty_region_counts_everything():
    p = GrushinParams(0.5, 9, period=1.0)
    assert localized_count(p, "Xdouble", None, 0.5, 300.0) == assemble_spectrum(p, "Xdouble", 300.0).counting(300.0)


def test_localized_counts_need_masses():
    with pytest.raises(InvalidParameter):
        localized_counts(ideal_model_spectrum(100.0), 0.5, [50.0])


_cache = {}


def _small_localized_spectrum():
    if "spec" not in _cache:
        _cache["spec"] = assemble_spectrum(GrushinParams(0.5, 9, period=1.0), "Xdouble", 400.0,
                                           localization_radius=0.25)
    return _cache["spec"]


def test_doubled_and_single_cylinder_share_the_leading_term():
    # the doubled space has twice the measure, so its log-law coefficient is twice the single one
    p = GrushinParams(0.5, 9, period=1.0)
    double = weyl_fit(assemble_spectrum(p, "Xdouble", 1e4, workers=4), "log_corrected", strict=False)
    single = weyl_fit(assemble_spectrum(p, "Ytilde", 1e4, workers=4), "log_corrected", strict=False)
    assert double.leading_coefficient / 2 == pytest.approx(single.leading_coefficient, rel=0.02)
