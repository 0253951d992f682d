import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandsup import (BandConfig, BandWindow, DegenerateBandError, PowerSpectrum, SpectrumDomainError,
                     band_normalization, evaluate_spectrum, full_field_lambda,
                     second_spectral_moment, window_eval)
from bandsup.spectrum import partition_of_unity_defect

import oracle_values as ov

WINDOWS = [BandWindow("smooth-bump"), BandWindow("raised-cosine"), BandWindow("indicator")]


# -- PowerSpectrum ----------------------------------------------------------

def test_power_law_example():
    assert evaluate_spectrum(PowerSpectrum(alpha=2.5), 10) == pytest.approx(10 ** -2.5, rel=1e-15)
    assert evaluate_spectrum(PowerSpectrum(alpha=2.5), 10) == pytest.approx(3.16228e-3, rel=1e-6)


@pytest.mark.parametrize("alpha", [2.01, 2.5, 3.0, 7.0])
def test_degree_one_is_one(alpha):
    assert evaluate_spectrum(PowerSpectrum(alpha=alpha), 1) == 1.0


def test_rational_g_example():
    spec = PowerSpectrum(alpha=3.0, g_numerator=(1.0, 1.0), g_denominator=(0.0, 1.0))
    assert evaluate_spectrum(spec, 4) == pytest.approx(0.01953125, rel=1e-15)


def test_array_input():
    out = evaluate_spectrum(PowerSpectrum(), np.arange(1, 6))
    assert out.shape == (5,)
    np.testing.assert_allclose(out, np.arange(1, 6) ** -2.5, rtol=1e-15)


def test_below_validity_names_degree():
    spec = PowerSpectrum(ell_min_valid=3)
    with pytest.raises(SpectrumDomainError, match="l=2"):
        evaluate_spectrum(spec, 2)


def test_alpha_must_exceed_two():
    with pytest.raises(ValueError, match="alpha"):
        PowerSpectrum(alpha=2.0)


def test_denominator_root_rejected():
    with pytest.raises(ValueError, match="vanishes at integer degree 3"):
        PowerSpectrum(g_numerator=(1.0,), g_denominator=(-3.0, 1.0))


def test_nonpositive_g_rejected():
    with pytest.raises(ValueError, match="positive"):
        PowerSpectrum(g_numerator=(-5.0, 1.0))


def test_admissibility_bounds_recorded():
    spec = PowerSpectrum(g_numerator=(1.0, 1.0), g_denominator=(0.0, 1.0))
    g = spec.G(np.arange(1, 4097))
    assert 0 < spec.c1 < g.min() and g.max() < spec.c2
    with pytest.raises(ValueError, match="admissibility"):
        PowerSpectrum(g_numerator=(1.0, 1.0), g_denominator=(0.0, 1.0), c1=1.5)


@given(st.integers(1, 2000), st.floats(2.05, 6.0))
def test_spectrum_strictly_decreasing_for_constant_g(ell, alpha):
    spec = PowerSpectrum(alpha=alpha, g_numerator=(2.0,))
    assert evaluate_spectrum(spec, ell + 1) < evaluate_spectrum(spec, ell)


# -- windows ----------------------------------------------------------------

@pytest.mark.parametrize("w", WINDOWS, ids=lambda w: w.kind)
@pytest.mark.parametrize("t", [0.0, 0.25, 0.4999, 2.0001, 3.0, 100.0])
def test_window_zero_outside_support(w, t):
    assert window_eval(w, t) == 0.0


def test_bump_peak_value():
    # exp(1 - 1/(1 - 0)) = 1 times the amplitude
    assert window_eval(BandWindow(), 1.0) == 1.0
    assert window_eval(BandWindow("smooth-bump", {"amplitude": 2.5}), 1.0) == 2.5
    assert window_eval(BandWindow("raised-cosine"), 1.0) == 1.0


@pytest.mark.parametrize("w", WINDOWS[:2], ids=lambda w: w.kind)
def test_smooth_windows_nonnegative_and_continuous(w):
    t = np.linspace(0.0, 2.5, 20001)
    b = window_eval(w, t)
    assert np.all(b >= 0)
    assert np.max(np.abs(np.diff(b))) < 2e-3


@pytest.mark.parametrize("edge,sign", [(0.5, 1.0), (2.0, -1.0)])
def test_bump_edge_derivatives_vanish(edge, sign):
    # one-sided finite differences of orders 1-3 from inside the support
    w = BandWindow()
    for h in (1e-3, 5e-4):
        b = [window_eval(w, edge + sign * k * h) for k in range(4)]
        d1 = (b[1] - b[0]) / h
        d2 = (b[2] - 2 * b[1] + b[0]) / h ** 2
        d3 = (b[3] - 3 * b[2] + 3 * b[1] - b[0]) / h ** 3
        assert max(abs(d1), abs(d2), abs(d3)) < 1e-10


def test_negative_window_argument_rejected():
    with pytest.raises(ValueError):
        window_eval(BandWindow(), -0.1)


def test_window_validation():
    with pytest.raises(ValueError, match="unknown window kind"):
        BandWindow("gaussian")
    with pytest.raises(ValueError, match="inside"):
        BandWindow("indicator", {"lo": 0.3, "hi": 1.0})
    with pytest.raises(ValueError, match="nonnegative"):
        BandWindow("smooth-bump", {"amplitude": -1})


# -- BandConfig -------------------------------------------------------------

@pytest.mark.parametrize("j", range(1, 12))
def test_band_config(j):
    cfg = BandConfig(j)
    assert cfg.ell_j == 2 ** j
    assert cfg.band == (2 ** (j - 1), 2 ** (j + 1))
    assert cfg.degree == 2 * cfg.ell_j
    assert cfg.ells[0] == 2 ** (j - 1) and cfg.ells[-1] == 2 ** (j + 1)


@pytest.mark.parametrize("j", [0, -1, 2.5])
def test_band_config_rejects_bad_scale(j):
    with pytest.raises(ValueError):
        BandConfig(j)


# -- normalization and spectral moments -------------------------------------

def test_single_term_normalization():
    # C_2 = 0.1 with alpha = 2.5 means G = 0.1 * 2^2.5
    spec = PowerSpectrum(alpha=2.5, g_numerator=(0.1 * 2 ** 2.5,))
    w = BandWindow.single_degree(2, 1)
    assert band_normalization(spec, w, BandConfig(1)) == pytest.approx(5 / (4 * math.pi) * 0.1, rel=1e-14)
    assert band_normalization(spec, w, BandConfig(1)) == pytest.approx(0.0397887, rel=1e-6)


def test_zero_window_is_degenerate(spec):
    w = BandWindow("smooth-bump", {"amplitude": 0.0})
    with pytest.raises(DegenerateBandError):
        band_normalization(spec, w, BandConfig(4))
    with pytest.raises(DegenerateBandError):
        second_spectral_moment(spec, w, BandConfig(4))


def test_bump_normalization_oracle(spec, bump):
    assert band_normalization(spec, bump, BandConfig(4)) == pytest.approx(ov.BAND_NORM_J4, rel=1e-12)


def test_single_degree_moment(spec):
    assert second_spectral_moment(spec, BandWindow.single_degree(16, 4), BandConfig(4)) == pytest.approx(136.0, rel=1e-14)


def test_two_degree_moment():
    # (2l + 1) C_l equal on {2, 3}: C_l = l^-3 * l^3 / (2l + 1)
    spec = PowerSpectrum(alpha=3.0, g_numerator=(0.0, 0.0, 0.0, 1.0), g_denominator=(1.0, 2.0))
    w = BandWindow("indicator", {"lo": 1.0, "hi": 1.5})
    assert second_spectral_moment(spec, w, BandConfig(1)) == pytest.approx(4.5, rel=1e-14)


def test_bump_moment_oracle(spec, bump):
    assert second_spectral_moment(spec, bump, BandConfig(5)) == pytest.approx(ov.LAMBDA_J5, rel=1e-12)


@pytest.mark.parametrize("j", range(2, 11))
def test_moment_weighted_mean_bracket(spec, j):
    cfg = BandConfig(j)
    lo, hi = cfg.band
    for w in WINDOWS:
        lam = second_spectral_moment(spec, w, cfg)
        assert lo * (lo + 1) / 2 <= lam <= hi * (hi + 1) / 2
    lam = second_spectral_moment(spec, BandWindow("indicator"), cfg)
    assert 2 ** (2 * (j - 1) - 1) <= lam <= 2 ** (2 * (j + 1))


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(2, 9), st.sampled_from(["smooth-bump", "raised-cosine", "indicator"]))
def test_normalization_scales_as_c_squared(c, j, kind):
    spec, w, cfg = PowerSpectrum(), BandWindow(kind), BandConfig(j)
    base = band_normalization(spec, w, cfg)
    assert band_normalization(spec, w.scaled(c), cfg) == pytest.approx(c * c * base, rel=1e-14)
    assert second_spectral_moment(spec, w.scaled(c), cfg) == pytest.approx(
        second_spectral_moment(spec, w, cfg), rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-6, 1.0), st.integers(2, 9))
def test_normalization_monotone_in_window(c, j):
    spec, cfg = PowerSpectrum(), BandConfig(j)
    bump = BandWindow()
    # c * bump <= bump <= indicator pointwise, same support
    small = band_normalization(spec, bump.scaled(c), cfg)
    mid = band_normalization(spec, bump, cfg)
    big = band_normalization(spec, BandWindow("indicator"), cfg)
    assert small <= mid * (1 + 1e-15) and mid <= big


# -- full-field lambda ------------------------------------------------------

def test_full_lambda_null_spectrum():
    assert full_field_lambda(PowerSpectrum.null(), 50) == 0.0


def test_full_lambda_constructed_unit():
    spec = PowerSpectrum(alpha=2.5, g_numerator=(4 * math.pi / 3,))
    assert full_field_lambda(spec, 1) == pytest.approx(1.0, rel=1e-15)


def test_full_lambda_oracle():
    assert full_field_lambda(PowerSpectrum(alpha=3.0), 100) == pytest.approx(ov.FULL_LAMBDA_ALPHA3_100, rel=1e-13)


def test_full_lambda_monotone():
    spec = PowerSpectrum(alpha=3.5)
    vals = [full_field_lambda(spec, n) for n in range(1, 200, 7)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_full_lambda_domain():
    with pytest.raises(SpectrumDomainError):
        full_field_lambda(PowerSpectrum(ell_min_valid=5), 3)


def test_partition_of_unity_is_informational():
    # the bump family is not a partition of unity; the routine only reports the defect
    assert partition_of_unity_defect(BandWindow(), 256) > 0.0
    assert math.isfinite(partition_of_unity_defect(BandWindow("raised-cosine"), 256))
