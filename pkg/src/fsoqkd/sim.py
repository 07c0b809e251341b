"""
End-to-end scenario runs and parameter sweeps.

A run chains turbulence statistics -> link budget -> wander / tracking loop ->
per-slot fade mask -> B92 Monte Carlo. Sub-seeds come from the master seed by
a labelled hash, so every component draws from its own stream and results do
not depend on execution order.
"""
from __future__ import annotations

import hashlib
import math
import typing
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

from . import b92, channel, tracking, turbulence
from .b92 import DetectorModel, PulseSource, TransmissionStats
from .channel import BackgroundEnvironment, LinkConfig
from .config import ConfigError, from_dict, replace_path, scalar_paths, to_dict
from .errors import DomainError
from .tracking import LoopResult, TrackingLoopConfig, WanderProcess
from .turbulence import TurbulenceParams, TurbulenceStats


@dataclass(frozen=True)
class Scenario:
    link: LinkConfig = field(default_factory=LinkConfig)
    turbulence: TurbulenceParams = field(default_factory=TurbulenceParams)
    source: PulseSource = field(default_factory=PulseSource)
    detector: DetectorModel = field(default_factory=DetectorModel)
    background: BackgroundEnvironment = field(
        default_factory=lambda: BackgroundEnvironment(sky_radiance=1e-3, label="post-sunset")
    )
    tracking: TrackingLoopConfig | None = None
    duration_s: float = 0.1
    master_seed: int = 0
    n_slots: int = 10_000_000
    wander_bandwidth_hz: float = 100.0
    wander_sample_rate_hz: float = 10e3

    def __post_init__(self):
        if not self.duration_s > 0:
            raise DomainError(f"duration_s must be > 0, got {self.duration_s!r}")
        if not self.n_slots > 0:
            raise DomainError(f"n_slots must be > 0, got {self.n_slots!r}")
        if self.master_seed < 0:
            raise DomainError(f"master_seed must be >= 0, got {self.master_seed!r}")
        if self.tracking is not None and self.tracking.loop_rate_hz > self.wander_sample_rate_hz:
            raise DomainError(
                "wander_sample_rate_hz must be >= tracking.loop_rate_hz "
                f"({self.wander_sample_rate_hz} < {self.tracking.loop_rate_hz})"
            )


@dataclass(frozen=True)
class SimResult:
    stats: TransmissionStats
    availability: float
    loop: LoopResult | None
    derived_turbulence: TurbulenceStats
    transmittance: float
    config_echo: dict
    assumption_flags: tuple[str, ...]


ASSUMPTIONS = (
    "focal_length_m is an assumed receiver value",
    "detector efficiency, dark rate, dead time and gate are assumed values",
    "secret key rate uses an asymptotic (1 + f_ec) h2(Q) penalty with f_ec = 1.2",
    "sync channel modelled as a perfect clock",
)


def derive_seed(master_seed: int, label: str, index: int = 0) -> int:
    """Platform-stable 64-bit sub-seed for a named component."""
    h = hashlib.sha256(f"{master_seed}/{label}/{index}".encode()).digest()
    return int.from_bytes(h[:8], "little")


def scenario_from_dict(data: dict) -> Scenario:
    return from_dict(Scenario, data)


def focal_plane_wander_rms(stats: TurbulenceStats, link: LinkConfig) -> float:
    """Per-axis rms spot displacement on the fibre face from angle-of-arrival jitter."""
    return link.focal_length_m * math.sqrt(stats.aoa_var / 2.0)


def run_scenario(s: Scenario, detect_workers: int = 1) -> SimResult:
    try:
        return _run(s, detect_workers)
    except DomainError as exc:
        raise DomainError(f"scenario (seed={s.master_seed}, range={s.link.range_m} m): {exc}") from exc


def _run(s: Scenario, detect_workers: int) -> SimResult:
    link = s.link
    stats = turbulence.turbulence_stats(s.turbulence, link.tx_beam, link.range_m,
                                        link.rx_aperture_diameter_m)
    T = channel.total_transmittance(link, stats.w_lt)
    bg = channel.background_count_rate(link, s.background, s.detector.efficiency)
    flags = list(ASSUMPTIONS)
    if not stats.weak_fluctuation:
        flags.append(f"rytov variance {stats.rytov_var:.3g} > 1: weak-fluctuation forms extrapolated")

    wander = WanderProcess(
        rms=focal_plane_wander_rms(stats, link),
        bandwidth_hz=s.wander_bandwidth_hz,
        sample_rate_hz=s.wander_sample_rate_hz,
        duration_s=s.duration_s,
        seed=derive_seed(s.master_seed, "wander"),
    )
    loop = None
    if s.tracking is not None:
        loop = tracking.closed_loop_sim(wander, s.tracking)
        residual, residual_rate = loop.residual_series, loop.loop_rate_hz
    else:
        residual, residual_rate = tracking.generate_wander(wander), wander.sample_rate_hz

    n = s.n_slots
    slot_rate = n / s.duration_s
    if slot_rate < s.source.clock_rate_hz:
        flags.append(
            f"{n} simulated slots spread over {s.duration_s} s for fades; "
            "rates scaled by clock_rate / slots"
        )
    mask, availability = tracking.residual_to_fade_mask(
        residual, residual_rate, 0.5 * link.fiber_core_diameter_m, slot_rate, n
    )

    alice = b92.alice_generate(n, derive_seed(s.master_seed, "alice"), s.source)
    det = b92.channel_detect(alice, T, bg, s.detector, s.source,
                             fade_mask=None if mask.all() else mask,
                             seed=derive_seed(s.master_seed, "detect"), workers=detect_workers)
    tx = b92.transmission_stats(alice, det, s.source, bg)
    return SimResult(
        stats=tx,
        availability=availability,
        loop=loop,
        derived_turbulence=stats,
        transmittance=T,
        config_echo=to_dict(s),
        assumption_flags=tuple(flags),
    )


def rerun(result: SimResult) -> SimResult:
    """Re-execute a result from its echoed configuration."""
    return run_scenario(scenario_from_dict(result.config_echo))


def sweep_paths() -> list[str]:
    return scalar_paths(Scenario)


def _field_type(path: str):
    cls = Scenario
    parts = path.split(".")
    for name in parts:
        tp = typing.get_type_hints(cls)[name]
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if args and len(args) == 1:
            tp = args[0]
        cls = tp
    return cls


def with_value(s: Scenario, path: str, value) -> Scenario:
    valid = sweep_paths()
    if path not in valid:
        raise ConfigError(f"unknown sweep parameter; valid paths: {', '.join(valid)}", path)
    tp = _field_type(path)
    v = int(value) if tp is int else float(value)
    return replace_path(s, path, v)


def analytic_row(s: Scenario) -> dict[str, Any]:
    """Closed-form turbulence and strategy columns, no Monte Carlo."""
    link = s.link
    b = link.tx_beam
    st = turbulence.turbulence_stats(s.turbulence, b, link.range_m, link.rx_aperture_diameter_m)
    strat = tracking.select_strategy(s.turbulence, b, link)
    return {
        "rytov_var": st.rytov_var,
        "w_diff_m": st.w_diff,
        "w_lt_m": st.w_lt,
        "wander_var_m2": st.wander_var,
        "aoa_var_rad2": st.aoa_var,
        "interruption_fraction": turbulence.interruption_fraction(
            s.turbulence, b, link.range_m, link.rx_aperture_radius_m),
        "aperture_ratio": strat.aperture_ratio,
        "boundary_m": strat.boundary_m,
        "strategy": str(strat.strategy),
    }


@dataclass(frozen=True)
class SweepRow:
    value: float
    scenario: Scenario
    result: SimResult | None = None
    analytic: dict | None = None


def sweep(
    s: Scenario,
    parameter_path: str,
    values: Sequence[float],
    analytic_only: bool = False,
    workers: int = 1,
) -> list[SweepRow]:
    """
    Evaluate the scenario at each value of one scalar field.

    Every row keeps the scenario's master seed (paired seeds), so differences
    between rows come from the swept field alone. Rows are returned in input
    order whatever ``workers`` is.
    """
    if len(values) == 0:
        raise ConfigError("sweep values must be non-empty", parameter_path)
    scenarios = [with_value(s, parameter_path, v) for v in values]

    def one(sc_v):
        sc, v = sc_v
        if analytic_only:
            return SweepRow(value=v, scenario=sc, analytic=analytic_row(sc))
        return SweepRow(value=v, scenario=sc, result=run_scenario(sc))

    jobs = list(zip(scenarios, values))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(one, jobs))
    return [one(j) for j in jobs]
