import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsoqkd.errors import DomainError, NoBoundaryError
from fsoqkd.turbulence import (
    BeamGeometry,
    TurbulenceParams,
    aoa_variance,
    aperture_ratio,
    beam_wander_variance,
    boundary_distance,
    diffraction_radius,
    interruption_fraction,
    long_term_radius,
    rytov_variance,
    turbulence_stats,
)

# Reference values from a 30-digit mpmath evaluation of the closed forms.
B = BeamGeometry()
AVG, STRONG, EXTREME = TurbulenceParams(1e-15), TurbulenceParams(1e-14), TurbulenceParams(1e-13)
VACUUM = TurbulenceParams(0.0)

cn2s = st.floats(min_value=1e-18, max_value=1e-12)
ranges = st.floats(min_value=1.0, max_value=10e3)


@pytest.mark.parametrize(
    "t, L, expected",
    [
        (AVG, 2450.0, 0.207458244783064891702),
        (STRONG, 1650.0, 1.00503250702970324336),
    ],
)
def test_rytov_reference(t, L, expected):
    assert rytov_variance(t, B, L) == pytest.approx(expected, rel=1e-12)


def test_rytov_vacuum():
    assert rytov_variance(VACUUM, B, 1234.0) == 0.0


@pytest.mark.parametrize("bad", [-1.0, float("nan")])
def test_negative_range_rejected(bad):
    with pytest.raises(DomainError):
        rytov_variance(AVG, B, bad)


def test_negative_cn2_rejected():
    with pytest.raises(DomainError):
        TurbulenceParams(-1e-15)


def test_diffraction_radius():
    assert diffraction_radius(B, 0.0) == 0.020
    assert B.rayleigh_range == pytest.approx(1478.396542865785, rel=1e-12)
    assert diffraction_radius(B, 2450.0) == pytest.approx(0.0387107976693030769, rel=1e-12)
    assert diffraction_radius(B, 1650.0) == pytest.approx(0.0299707941787449203, rel=1e-12)


def test_long_term_radius_reference():
    assert long_term_radius(AVG, B, 2450.0) == pytest.approx(0.0413286875518106078, rel=1e-12)
    assert long_term_radius(STRONG, B, 1650.0) == pytest.approx(0.0396072976832206595, rel=1e-12)
    assert long_term_radius(VACUUM, B, 1000.0) == diffraction_radius(B, 1000.0)


def test_wander_reference():
    assert beam_wander_variance(STRONG, B, 1650.0) == pytest.approx(4.00488945899084710e-4, rel=1e-12)
    assert beam_wander_variance(AVG, B, 300.0) == pytest.approx(2.40714618121162861e-7, rel=1e-12)
    assert beam_wander_variance(VACUUM, B, 300.0) == 0.0


def test_aoa_reference():
    assert aoa_variance(STRONG, 0.08, 1650.0) == pytest.approx(1.11432943922958789e-10, rel=1e-12)
    assert aoa_variance(AVG, 0.08, 300.0) == pytest.approx(2.02605352587197799e-12, rel=1e-12)
    assert aoa_variance(VACUUM, 0.08, 300.0) == 0.0
    with pytest.raises(DomainError):
        aoa_variance(AVG, 0.0, 300.0)


def test_zero_beam_radius_rejected():
    with pytest.raises(DomainError):
        BeamGeometry(w0=0.0)


def test_interruption_reference():
    assert interruption_fraction(STRONG, B, 1650.0, 0.04) == pytest.approx(
        0.0184053018764356443, rel=1e-12
    )
    assert interruption_fraction(VACUUM, B, 1650.0, 0.04) == 0.0
    assert interruption_fraction(STRONG, B, 1650.0, 1e6) == 0.0


def test_interruption_matches_centroid_sampling():
    rng = np.random.default_rng(7)
    var = beam_wander_variance(STRONG, B, 1650.0)
    xy = rng.normal(scale=math.sqrt(var / 2), size=(1_000_000, 2))
    frac = np.mean(np.hypot(xy[:, 0], xy[:, 1]) > 0.04)
    p = interruption_fraction(STRONG, B, 1650.0, 0.04)
    se = math.sqrt(p * (1 - p) / len(xy))
    assert abs(frac - p) < 3 * se


def test_aperture_ratio_reference():
    assert aperture_ratio(AVG, B, 2450.0, 0.08) == pytest.approx(0.967850719911080311, rel=1e-12)
    assert aperture_ratio(STRONG, B, 1650.0, 0.08) == pytest.approx(1.00991489800491251, rel=1e-12)
    assert aperture_ratio(AVG, B, 0.0, 0.08) == 2.0


@pytest.mark.parametrize(
    "t, expected",
    [(AVG, 2353.39371831957397), (STRONG, 1667.58522892190273), (EXTREME, 855.331234590156979)],
)
def test_boundary_reference(t, expected):
    L = boundary_distance(t, B, 0.08)
    assert float(L) == pytest.approx(expected, rel=1e-6)
    assert not L.saturated
    assert aperture_ratio(t, B, float(L), 0.08) == pytest.approx(1.0, rel=1e-5)


def test_boundary_no_region():
    with pytest.raises(NoBoundaryError):
        boundary_distance(AVG, B, 0.04)


def test_boundary_saturates_at_cap():
    # Huge aperture: ratio never reaches 1 within the cap.
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        L = boundary_distance(VACUUM, B, 10.0, max_range_m=5000.0)
    assert L.saturated and float(L) == 5000.0
    assert any(issubclass(w.category, RuntimeWarning) for w in rec)


def test_vacuum_boundary_is_diffraction_limit():
    # W(L) = D/2 at L = z_R sqrt(3) when there is no turbulence.
    L = boundary_distance(VACUUM, B, 0.08)
    assert float(L) == pytest.approx(B.rayleigh_range * math.sqrt(3), rel=1e-6)


def test_stats_bundle_vacuum_collapse():
    s = turbulence_stats(VACUUM, B, 800.0, 0.08)
    assert s.rytov_var == s.wander_var == s.aoa_var == 0.0
    assert s.w_lt == s.w_diff >= B.w0
    assert s.weak_fluctuation


def test_strong_regime_flagged():
    s = turbulence_stats(EXTREME, B, 2000.0, 0.08)
    assert not s.weak_fluctuation


@given(cn2s, ranges)
def test_wander_scales_as_cube(cn2, L):
    t = TurbulenceParams(cn2)
    assert beam_wander_variance(t, B, 2 * L) / beam_wander_variance(t, B, L) == pytest.approx(8, rel=1e-12)


@given(cn2s, ranges)
def test_aoa_linear_in_range(cn2, L):
    t = TurbulenceParams(cn2)
    assert aoa_variance(t, 0.08, 3 * L) == pytest.approx(3 * aoa_variance(t, 0.08, L), rel=1e-12)


@given(cn2s, ranges, st.floats(min_value=1.01, max_value=10))
def test_monotone_in_range_and_cn2(cn2, L, f):
    t, t2 = TurbulenceParams(cn2), TurbulenceParams(cn2 * f)
    for fn in (rytov_variance, beam_wander_variance):
        assert fn(t, B, L * f) > fn(t, B, L)
        assert fn(t2, B, L) > fn(t, B, L)
    assert interruption_fraction(t, B, L * f, 0.04) >= interruption_fraction(t, B, L, 0.04)
    assert interruption_fraction(t2, B, L, 0.04) >= interruption_fraction(t, B, L, 0.04)
    assert aperture_ratio(t, B, L * f, 0.08) < aperture_ratio(t, B, L, 0.08)
    assert aperture_ratio(t2, B, L, 0.08) < aperture_ratio(t, B, L, 0.08)


@given(cn2s, ranges)
def test_radius_ordering(cn2, L):
    t = TurbulenceParams(cn2)
    assert long_term_radius(t, B, L) >= diffraction_radius(B, L) >= B.w0


@settings(max_examples=30)
@given(st.floats(min_value=1e-16, max_value=1e-13))
def test_boundary_root_consistency(cn2):
    t = TurbulenceParams(cn2)
    L = float(boundary_distance(t, B, 0.08))
    assert aperture_ratio(t, B, L, 0.08) == pytest.approx(1.0, rel=1e-5)
    assert aperture_ratio(t, B, 0.99 * L, 0.08) > 1.0
