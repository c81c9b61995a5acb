import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import erfc

from egmc.analytic import (AnalyticCurve, ChannelGeometry, alpha_analytic_1d,
                           cumulative_absorbed, discretize, hit_rate,
                           peak_time, pdf_pseudo_real)
from egmc.analytic import _pdf_formula

GEOM = ChannelGeometry(R=10.0, L=30.0, D=80.0)


def test_geometry_validation():
    with pytest.raises(ValueError):
        ChannelGeometry(R=30.0, L=20.0, D=80.0)
    with pytest.raises(ValueError):
        ChannelGeometry(R=0.0, L=20.0, D=80.0)
    with pytest.raises(ValueError):
        ChannelGeometry(R=10.0, L=30.0, D=0.0)


def test_hit_rate_peaks_at_gap_squared_over_6d():
    # oracle: dense numerical scan around the analytic maximiser
    t_star = GEOM.gap ** 2 / (6.0 * GEOM.D)
    assert peak_time(GEOM) == pytest.approx(t_star)
    ts = np.linspace(0.01, 10.0, 20_000)
    scan_peak = ts[np.argmax(hit_rate(GEOM, ts))]
    assert scan_peak == pytest.approx(t_star, rel=2e-3)
    assert t_star == pytest.approx(5.0 / 6.0)


def test_hit_rate_limits():
    assert hit_rate(GEOM, 0.0) == 0.0
    assert hit_rate(GEOM, 1e-6) < 1e-30
    assert hit_rate(GEOM, 1e9) < 1e-12
    with pytest.raises(ValueError):
        hit_rate(GEOM, -1.0)


def test_cumulative_limits_and_monotonicity():
    assert cumulative_absorbed(GEOM, 0.0) == 0.0
    # erfc(0) = 1 forces the R/L asymptote
    assert cumulative_absorbed(GEOM, 1e15) == pytest.approx(GEOM.R / GEOM.L, rel=1e-6)
    ts = np.linspace(0.0, 50.0, 500)
    values = cumulative_absorbed(GEOM, ts)
    assert np.all(np.diff(values) >= 0.0)
    assert np.all(values <= GEOM.R / GEOM.L + 1e-15)
    with pytest.raises(ValueError):
        cumulative_absorbed(GEOM, -0.5)


def test_quadrature_of_hit_rate_matches_cumulative():
    total, _ = integrate.quad(lambda t: hit_rate(GEOM, t), 0.0, 100.0, limit=200)
    expected = cumulative_absorbed(GEOM, 100.0)
    assert abs(total / expected - 1.0) < 1e-6


def test_hit_rate_is_derivative_of_cumulative():
    for t in (0.3, 1.0, 5.0, 20.0):
        h = 1e-5 * t
        deriv = (cumulative_absorbed(GEOM, t + h) - cumulative_absorbed(GEOM, t - h)) / (2 * h)
        assert deriv == pytest.approx(hit_rate(GEOM, t), rel=1e-4)


def test_pdf_vanishes_on_the_boundary():
    for t in (0.1, 1.0, 10.0):
        assert pdf_pseudo_real(GEOM, GEOM.R, t) == 0.0


def test_pdf_domain_errors():
    with pytest.raises(ValueError):
        pdf_pseudo_real(GEOM, GEOM.R - 0.1, 1.0)
    with pytest.raises(ValueError):
        pdf_pseudo_real(GEOM, 15.0, 0.0)


def test_boundary_flux_matches_hit_rate():
    # central finite difference of the image-sink formula, step 1e-3 um
    h = 1e-3
    for t in (0.5, 1.0, 3.0):
        grad = (_pdf_formula(GEOM, GEOM.R + h, t)
                - _pdf_formula(GEOM, GEOM.R - h, t)) / (2.0 * h)
        flux = 4.0 * math.pi * GEOM.R ** 2 * GEOM.D * grad
        assert flux == pytest.approx(hit_rate(GEOM, t), rel=1e-4)


def test_probability_conservation():
    for t in (0.5, 1.0, 5.0):
        survival, _ = integrate.quad(
            lambda r: pdf_pseudo_real(GEOM, r, t) * 4.0 * math.pi * r ** 2,
            GEOM.R, np.inf, limit=200)
        assert survival + cumulative_absorbed(GEOM, t) == pytest.approx(1.0, abs=1e-5)


def test_alpha_analytic_value():
    assert alpha_analytic_1d() == pytest.approx(math.sqrt(math.pi) / 2.0, abs=1e-6)


def test_alpha_analytic_intermediate_integrals():
    # the two erfc moments have known closed forms
    i0, _ = integrate.quad(erfc, 0.0, 8.0)
    i1, _ = integrate.quad(lambda x: x * erfc(x), 0.0, 8.0)
    assert i0 == pytest.approx(1.0 / math.sqrt(math.pi), abs=1e-8)
    assert i1 == pytest.approx(0.25, abs=1e-8)


def test_discretize_telescopes_to_cumulative():
    curve = discretize(GEOM, dt=0.02, n_steps=300)
    assert curve.per_step_fraction.sum() == pytest.approx(
        cumulative_absorbed(GEOM, 300 * 0.02), rel=1e-12)
    assert np.all(curve.per_step_fraction >= 0.0)
    assert curve.times[0] == pytest.approx(0.02)
    assert curve.times[-1] == pytest.approx(6.0)


def test_discretize_single_step():
    curve = discretize(GEOM, dt=0.7, n_steps=1)
    assert curve.per_step_fraction[0] == pytest.approx(cumulative_absorbed(GEOM, 0.7))
    assert curve.cumulative[0] == pytest.approx(cumulative_absorbed(GEOM, 0.7))


def test_discretize_validation():
    with pytest.raises(ValueError):
        discretize(GEOM, dt=0.0, n_steps=10)
    with pytest.raises(ValueError):
        discretize(GEOM, dt=0.1, n_steps=0)


@settings(deadline=None, max_examples=50)
@given(R=st.floats(0.5, 40.0), gap=st.floats(0.5, 200.0),
       D=st.floats(1.0, 1000.0), dt=st.floats(1e-4, 10.0),
       n=st.integers(1, 50))
def test_discretize_properties(R, gap, D, dt, n):
    geom = ChannelGeometry(R=R, L=R + gap, D=D)
    curve = discretize(geom, dt=dt, n_steps=n)
    assert isinstance(curve, AnalyticCurve)
    assert np.all(curve.per_step_fraction >= 0.0)
    assert np.all(np.diff(curve.cumulative) >= 0.0)
    assert curve.cumulative[-1] <= R / (R + gap) + 1e-12
    assert curve.per_step_fraction.sum() == pytest.approx(curve.cumulative[-1], rel=1e-9, abs=1e-300)
