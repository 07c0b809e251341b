"""Static link budget: aperture capture, path and optics loss, fibre field of view, sky background."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import constants

from .errors import DomainError
from .turbulence import BeamGeometry


@dataclass(frozen=True)
class LinkConfig:
    """
    Geometry and optics of the horizontal link.

    ``focal_length_m``, ``optics_efficiency`` and the attenuation default are
    engineering assumptions, not measured system values.
    """

    range_m: float = 300.0
    tx_beam: BeamGeometry = field(default_factory=BeamGeometry)
    rx_aperture_diameter_m: float = 0.08
    atm_attenuation_db_per_km: float = 3.0
    optics_efficiency: float = 0.5
    fiber_core_diameter_m: float = 62.5e-6
    focal_length_m: float = 2.0
    spectral_filter_fwhm_nm: float = 0.8

    def __post_init__(self):
        for name in ("range_m", "rx_aperture_diameter_m", "fiber_core_diameter_m",
                     "focal_length_m", "spectral_filter_fwhm_nm"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be > 0, got {v!r}")
        if not self.atm_attenuation_db_per_km >= 0:
            raise DomainError(
                f"atm_attenuation_db_per_km must be >= 0, got {self.atm_attenuation_db_per_km!r}"
            )
        if not 0.0 <= self.optics_efficiency <= 1.0:
            raise DomainError(f"optics_efficiency must lie in [0, 1], got {self.optics_efficiency!r}")

    @property
    def rx_aperture_radius_m(self) -> float:
        return 0.5 * self.rx_aperture_diameter_m


@dataclass(frozen=True)
class BackgroundEnvironment:
    sky_radiance: float = 0.0  # W m^-2 sr^-1 nm^-1 at the data wavelength
    label: str = "night"

    def __post_init__(self):
        if not self.sky_radiance >= 0:
            raise DomainError(f"sky_radiance must be >= 0, got {self.sky_radiance!r}")


def geometric_coupling(w_lt_m: float, rx_aperture_diameter_m: float) -> float:
    """Power fraction of a centred Gaussian spot (1/e^2 radius w_lt) inside a circular aperture."""
    if not (w_lt_m > 0 and rx_aperture_diameter_m > 0):
        raise DomainError("beam radius and aperture diameter must be > 0")
    a = 0.5 * rx_aperture_diameter_m
    return -math.expm1(-2.0 * a**2 / w_lt_m**2)


def atmospheric_transmittance(attenuation_db_per_km: float, range_m: float) -> float:
    return 10.0 ** (-attenuation_db_per_km * (range_m / 1000.0) / 10.0)


def fiber_fov_halfangle(link: LinkConfig) -> float:
    """Half-angle field of view set by the fibre core at the focal plane (rad)."""
    return link.fiber_core_diameter_m / (2.0 * link.focal_length_m)


def total_transmittance(link: LinkConfig, w_lt_m: float) -> float:
    return (
        geometric_coupling(w_lt_m, link.rx_aperture_diameter_m)
        * atmospheric_transmittance(link.atm_attenuation_db_per_km, link.range_m)
        * link.optics_efficiency
    )


def photon_energy(wavelength_m: float) -> float:
    return constants.h * constants.c / wavelength_m


def background_count_rate(
    link: LinkConfig, env: BackgroundEnvironment, detector_efficiency: float
) -> float:
    """
    Detected sky-background photon rate (counts/s) collected by the receiver.

    Radiance x filter width x aperture area x fibre solid angle, converted to
    photons and scaled by optics and detector efficiency. This is the rate
    before the 50/50 splitter and analysing polarisers.
    """
    if not 0.0 <= detector_efficiency <= 1.0:
        raise DomainError(f"detector_efficiency must lie in [0, 1], got {detector_efficiency!r}")
    area = math.pi * link.rx_aperture_radius_m**2
    solid_angle = math.pi * fiber_fov_halfangle(link) ** 2
    power = env.sky_radiance * link.spectral_filter_fwhm_nm * area * solid_angle
    return (
        power * link.optics_efficiency * detector_efficiency
        / photon_energy(link.tx_beam.wavelength)
    )
