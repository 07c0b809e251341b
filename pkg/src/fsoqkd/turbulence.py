"""
Second-order turbulence statistics for a collimated Gaussian beam.

Weak-fluctuation Kolmogorov closed forms (Andrews & Phillips) for a horizontal
path with constant Cn^2:

    rytov variance      1.23 Cn^2 k^(7/6) L^(11/6)
    long-term radius    W sqrt(1 + 1.33 sigma_R^2 Lambda^(5/6)),  Lambda = 2L / (k W^2)
    beam wander         <r_c^2> = 2.42 Cn^2 L^3 W0^(-1/3)
    angle of arrival    <beta_a^2> = 2.91 Cn^2 L D^(-1/3)

The forms are evaluated regardless of whether sigma_R^2 < 1; callers can check
``TurbulenceStats.weak_fluctuation``.

All lengths in metres, angles in radians, Cn^2 in m^(-2/3).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from scipy.optimize import bisect

from .errors import DomainError, NoBoundaryError

# Representative regimes (m^-2/3)
CN2_AVERAGE = 1e-15
CN2_STRONG = 1e-14
CN2_EXTREME = 1e-13
REGIMES = {"average": CN2_AVERAGE, "strong": CN2_STRONG, "extreme": CN2_EXTREME}

RYTOV_COEFF = 1.23
LT_SPREAD_COEFF = 1.33
WANDER_COEFF = 2.42
AOA_COEFF = 2.91


@dataclass(frozen=True)
class TurbulenceParams:
    cn2: float = CN2_AVERAGE

    def __post_init__(self):
        if not math.isfinite(self.cn2) or self.cn2 < 0:
            raise DomainError(f"cn2 must be a finite value >= 0, got {self.cn2!r}")


@dataclass(frozen=True)
class BeamGeometry:
    """Transmitted Gaussian beam; ``w0`` is the 1/e^2 intensity radius."""

    w0: float = 0.020
    wavelength: float = 850e-9
    collimated: bool = True

    def __post_init__(self):
        if not self.w0 > 0:
            raise DomainError(f"w0 must be > 0, got {self.w0!r}")
        if not self.wavelength > 0:
            raise DomainError(f"wavelength must be > 0, got {self.wavelength!r}")
        if not self.collimated:
            raise DomainError("only collimated launch is modelled (collimated=True)")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def rayleigh_range(self) -> float:
        return math.pi * self.w0**2 / self.wavelength


@dataclass(frozen=True)
class TurbulenceStats:
    rytov_var: float
    w_diff: float
    w_lt: float
    wander_var: float
    aoa_var: float
    lambda_param: float

    @property
    def weak_fluctuation(self) -> bool:
        return self.rytov_var <= 1.0


def _check_range(range_m: float) -> None:
    if not range_m >= 0:
        raise DomainError(f"range_m must be >= 0, got {range_m!r}")


def rytov_variance(t: TurbulenceParams, b: BeamGeometry, range_m: float) -> float:
    """Plane-wave Rytov variance sigma_R^2 (dimensionless)."""
    _check_range(range_m)
    return RYTOV_COEFF * t.cn2 * b.wavenumber ** (7 / 6) * range_m ** (11 / 6)


def diffraction_radius(b: BeamGeometry, range_m: float) -> float:
    """Free-space 1/e^2 radius of the collimated beam at ``range_m``."""
    _check_range(range_m)
    return b.w0 * math.sqrt(1.0 + (range_m / b.rayleigh_range) ** 2)


def fresnel_ratio(b: BeamGeometry, range_m: float) -> float:
    """Receiver-plane Fresnel ratio Lambda = 2L / (k W^2)."""
    w = diffraction_radius(b, range_m)
    return 2.0 * range_m / (b.wavenumber * w**2)


def long_term_radius(t: TurbulenceParams, b: BeamGeometry, range_m: float) -> float:
    """
    Long-term beam radius W_LT.

    Combines diffraction, small-scale spreading and beam wander into the spot
    size seen over long averaging times.
    """
    w = diffraction_radius(b, range_m)
    spread = LT_SPREAD_COEFF * rytov_variance(t, b, range_m) * fresnel_ratio(b, range_m) ** (5 / 6)
    return w * math.sqrt(1.0 + spread)


def beam_wander_variance(t: TurbulenceParams, b: BeamGeometry, range_m: float) -> float:
    """Centroid displacement variance <r_c^2> (m^2, both axes combined)."""
    _check_range(range_m)
    return WANDER_COEFF * t.cn2 * range_m**3 * b.w0 ** (-1 / 3)


def aoa_variance(t: TurbulenceParams, aperture_diameter_m: float, range_m: float) -> float:
    """Angle-of-arrival variance <beta_a^2> (rad^2) over an aperture of diameter D."""
    if not aperture_diameter_m > 0:
        raise DomainError(f"aperture_diameter_m must be > 0, got {aperture_diameter_m!r}")
    _check_range(range_m)
    return AOA_COEFF * t.cn2 * range_m * aperture_diameter_m ** (-1 / 3)


def rayleigh_tail(radius: float, total_variance: float) -> float:
    """P(|r| > radius) for an isotropic 2-D Gaussian with E|r|^2 = total_variance."""
    if total_variance <= 0:
        return 0.0
    return math.exp(-(radius**2) / total_variance)


def interruption_fraction(
    t: TurbulenceParams, b: BeamGeometry, range_m: float, capture_radius_m: float
) -> float:
    """
    Fraction of time the wandering beam centroid falls outside the capture radius.

    The centroid is modelled as zero-mean isotropic Gaussian with per-axis
    variance <r_c^2>/2, so the outage probability is exp(-a^2 / <r_c^2>).
    """
    if not capture_radius_m > 0:
        raise DomainError(f"capture_radius_m must be > 0, got {capture_radius_m!r}")
    return rayleigh_tail(capture_radius_m, beam_wander_variance(t, b, range_m))


def aperture_ratio(
    t: TurbulenceParams, b: BeamGeometry, range_m: float, receiver_aperture_diameter_m: float
) -> float:
    """Receiver aperture diameter over long-term beam diameter 2 W_LT."""
    if not receiver_aperture_diameter_m > 0:
        raise DomainError(
            f"receiver_aperture_diameter_m must be > 0, got {receiver_aperture_diameter_m!r}"
        )
    return receiver_aperture_diameter_m / (2.0 * long_term_radius(t, b, range_m))


class BoundaryDistance(float):
    """A distance in metres; ``saturated`` is True when the search hit its range cap."""

    saturated: bool

    def __new__(cls, value: float, saturated: bool = False):
        obj = super().__new__(cls, value)
        obj.saturated = saturated
        return obj

    def __reduce__(self):
        return (BoundaryDistance, (float(self), self.saturated))


def boundary_distance(
    t: TurbulenceParams,
    b: BeamGeometry,
    receiver_aperture_diameter_m: float,
    max_range_m: float = 100e3,
    rtol: float = 1e-7,
) -> BoundaryDistance:
    """
    Distance at which the long-term beam diameter equals the receiver aperture.

    Beyond it receiver-side compensation loses light; emitter pre-compensation
    is required.

    Parameters
    ----------
    max_range_m : float
        Search cap. If the ratio still exceeds 1 there, ``max_range_m`` is
        returned with ``saturated=True`` and a warning is issued.
    rtol : float
        Relative tolerance of the bisection.

    Raises
    ------
    NoBoundaryError
        If the ratio is already <= 1 at the transmitter.
    """

    def f(L):
        return aperture_ratio(t, b, L, receiver_aperture_diameter_m) - 1.0

    if f(0.0) <= 0:
        raise NoBoundaryError(
            "aperture ratio <= 1 at zero range; receiver compensation region is empty"
        )
    if f(max_range_m) > 0:
        warnings.warn(
            f"no boundary within {max_range_m:g} m (cn2={t.cn2:g}); search saturated",
            RuntimeWarning,
            stacklevel=2,
        )
        return BoundaryDistance(max_range_m, saturated=True)

    # Grow the bracket geometrically so bisection starts near the root.
    lo, hi = 0.0, 1.0
    while f(hi) > 0:
        lo, hi = hi, min(2.0 * hi, max_range_m)
    root = bisect(f, lo, hi, xtol=1e-12, rtol=rtol, maxiter=500)
    return BoundaryDistance(root)


def turbulence_stats(
    t: TurbulenceParams, b: BeamGeometry, range_m: float, receiver_aperture_diameter_m: float
) -> TurbulenceStats:
    """All second-order statistics at one range, bundled."""
    return TurbulenceStats(
        rytov_var=rytov_variance(t, b, range_m),
        w_diff=diffraction_radius(b, range_m),
        w_lt=long_term_radius(t, b, range_m),
        wander_var=beam_wander_variance(t, b, range_m),
        aoa_var=aoa_variance(t, receiver_aperture_diameter_m, range_m),
        lambda_param=fresnel_ratio(b, range_m),
    )
