"""
Beam-wander tracking: PSD -> PID -> FSM closed loop, fade masks, strategy choice.

The loop works in focal-plane displacement units (metres). Angle-of-arrival
statistics convert to that plane through the receiver focal length.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import signal
from scipy.linalg import expm
from scipy.optimize import brentq

from .channel import LinkConfig
from .errors import DomainError, NoBoundaryError
from .turbulence import BeamGeometry, TurbulenceParams, aperture_ratio, boundary_distance

MAX_RECEIVER_COMPENSATION_RANGE_M = 3000.0
DIVERGENCE_FACTOR = 10.0


class CompensationStrategy(enum.Enum):
    RECEIVER = "ReceiverCompensation"
    EMITTER_PRECOMPENSATION = "EmitterPreCompensation"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class WanderProcess:
    rms: float  # per-axis standard deviation
    bandwidth_hz: float = 100.0
    sample_rate_hz: float = 10e3
    duration_s: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.rms >= 0:
            raise DomainError(f"rms must be >= 0, got {self.rms!r}")
        if not self.bandwidth_hz > 0:
            raise DomainError(f"bandwidth_hz must be > 0, got {self.bandwidth_hz!r}")
        if not self.sample_rate_hz >= 10 * self.bandwidth_hz:
            raise DomainError(
                f"sample_rate_hz ({self.sample_rate_hz}) must be >= 10 x bandwidth_hz "
                f"({self.bandwidth_hz})"
            )
        if not self.duration_s > 0:
            raise DomainError(f"duration_s must be > 0, got {self.duration_s!r}")

    @property
    def n_samples(self) -> int:
        return max(1, int(round(self.duration_s * self.sample_rate_hz)))


@dataclass(frozen=True)
class PIDGains:
    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(g) for g in (self.kp, self.ki, self.kd)):
            raise DomainError("PID gains must be finite")


@dataclass(frozen=True)
class TrackingLoopConfig:
    """
    Tracking loop parameters (placeholders; no hardware values are published).

    ``pid=None`` means: tune with :func:`ziegler_nichols_gains` at run time.
    ``mode=EMITTER_PRECOMPENSATION`` degrades the sensed wander by the
    correlation factor exp(-round_trip_delay_s / coherence_time_s).
    """

    pid: PIDGains | None = None
    loop_rate_hz: float = 10e3
    psd_noise_rms: float = 0.5e-6
    fsm_bandwidth_hz: float = 500.0
    fsm_range: float = 200e-6
    fsm_slew_limit: float = 0.5
    mode: CompensationStrategy = CompensationStrategy.RECEIVER
    round_trip_delay_s: float = 0.0
    coherence_time_s: float = 10e-3

    def __post_init__(self):
        for name in ("loop_rate_hz", "fsm_bandwidth_hz", "fsm_range", "fsm_slew_limit",
                     "coherence_time_s"):
            v = getattr(self, name)
            if not v > 0:
                raise DomainError(f"{name} must be > 0, got {v!r}")
        if not self.psd_noise_rms >= 0:
            raise DomainError(f"psd_noise_rms must be >= 0, got {self.psd_noise_rms!r}")
        if not self.round_trip_delay_s >= 0:
            raise DomainError(f"round_trip_delay_s must be >= 0, got {self.round_trip_delay_s!r}")
        object.__setattr__(self, "mode", CompensationStrategy(self.mode))

    @property
    def precomp_correlation(self) -> float:
        if self.mode is CompensationStrategy.RECEIVER:
            return 1.0
        return math.exp(-self.round_trip_delay_s / self.coherence_time_s)

    def resolved_gains(self) -> PIDGains:
        return self.pid if self.pid is not None else ziegler_nichols_gains(self)


@dataclass(frozen=True)
class LoopResult:
    time_s: np.ndarray
    wander_series: np.ndarray  # (n, 2) at loop ticks
    residual_series: np.ndarray  # (n, 2)
    rms_residual: float  # radial rms
    open_loop_rms: float
    rejection_db: float
    saturation_fraction: float
    diverged: bool
    gains: PIDGains
    config: TrackingLoopConfig
    loop_rate_hz: float


def radial_rms(series: np.ndarray) -> float:
    series = np.asarray(series, dtype=float)
    return float(np.sqrt(np.mean(np.sum(series**2, axis=-1))))


# ---------------------------------------------------------------- wander


def ou_coefficient(bandwidth_hz: float, sample_rate_hz: float) -> float:
    """AR(1) pole of a sampled Ornstein-Uhlenbeck process with the given 3 dB corner."""
    return math.exp(-2.0 * math.pi * bandwidth_hz / sample_rate_hz)


def generate_wander(p: WanderProcess) -> np.ndarray:
    """
    Two independent stationary AR(1) axes, shape (n_samples, 2).

    x[n+1] = a x[n] + rms sqrt(1 - a^2) w[n], with x[0] drawn from the
    stationary distribution, so every sample has variance rms^2.
    """
    n = p.n_samples
    if p.rms == 0:
        return np.zeros((n, 2))
    rng = np.random.default_rng(p.seed)
    a = ou_coefficient(p.bandwidth_hz, p.sample_rate_hz)
    w = rng.standard_normal((n, 2))
    drive = p.rms * math.sqrt(1.0 - a * a) * w
    drive[0] = p.rms * w[0]
    return signal.lfilter([1.0], [1.0, -a], drive, axis=0)


# ---------------------------------------------------------------- PID


@dataclass
class PIDState:
    """Two-axis PID memory: rectangular integrator and previous error."""

    gains: PIDGains
    integral: np.ndarray = field(default_factory=lambda: np.zeros(2))
    prev_error: np.ndarray = field(default_factory=lambda: np.zeros(2))


def pid_step(state: PIDState, error, dt: float, hold_integrator=False) -> np.ndarray:
    """
    One controller update; returns the command.

    ``hold_integrator`` (per axis or scalar) freezes integration on axes whose
    actuator saturated on the previous step (anti-windup).
    """
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt!r}")
    e = np.broadcast_to(np.asarray(error, dtype=float), state.integral.shape)
    state.integral = np.where(hold_integrator, state.integral, state.integral + e * dt)
    g = state.gains
    u = g.kp * e + g.ki * state.integral + g.kd * (e - state.prev_error) / dt
    state.prev_error = e.copy()
    return u


# ---------------------------------------------------------------- FSM


@lru_cache(maxsize=64)
def _fsm_discrete(bandwidth_hz: float, dt: float):
    """Exact ZOH discretisation of x'' = wn^2 (u - x) - 2 wn x'."""
    wn = 2.0 * math.pi * bandwidth_hz
    A = np.array([[0.0, 1.0], [-wn * wn, -2.0 * wn]])
    B = np.array([[0.0], [wn * wn]])
    M = np.zeros((3, 3))
    M[:2, :2] = A * dt
    M[:2, 2:] = B * dt
    E = expm(M)
    return E[:2, :2], E[:2, 2]


@dataclass
class FSMState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(2))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    steps: int = 0
    saturated_steps: int = 0
    last_saturated: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=bool))

    @property
    def saturation_fraction(self) -> float:
        return self.saturated_steps / self.steps if self.steps else 0.0


def fsm_step(
    state: FSMState,
    command,
    dt: float,
    bandwidth_hz: float,
    range_limit: float = math.inf,
    slew_limit: float = math.inf,
) -> np.ndarray:
    """
    Advance the critically damped mirror by ``dt`` toward ``command``.

    The unconstrained update is slew-limited and then clamped to
    +/- ``range_limit``. A step counts as saturated if either limit acted on
    any axis.
    """
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt!r}")
    Ad, Bd = _fsm_discrete(float(bandwidth_hz), float(dt))
    u = np.asarray(command, dtype=float)
    x, v = state.position, state.velocity
    new_x = Ad[0, 0] * x + Ad[0, 1] * v + Bd[0] * u
    new_v = Ad[1, 0] * x + Ad[1, 1] * v + Bd[1] * u

    max_dx = slew_limit * dt
    dx = new_x - x
    slewed = np.abs(dx) > max_dx
    if slewed.any():
        new_x = np.where(slewed, x + np.clip(dx, -max_dx, max_dx), new_x)
        new_v = np.where(slewed, np.clip(new_v, -slew_limit, slew_limit), new_v)
    clamped = np.abs(new_x) > range_limit
    if clamped.any():
        new_x = np.clip(new_x, -range_limit, range_limit)
        new_v = np.where(clamped, 0.0, new_v)

    sat = slewed | clamped
    state.position, state.velocity = new_x, new_v
    state.steps += 1
    state.saturated_steps += int(sat.any())
    state.last_saturated = sat
    return new_x


# ---------------------------------------------------------------- tuning


def _plant_tf(cfg: TrackingLoopConfig):
    """Discrete mirror transfer function at the loop rate (numerator, denominator in z)."""
    wn = 2.0 * math.pi * cfg.fsm_bandwidth_hz
    num, den, _ = signal.cont2discrete(([wn * wn], [1.0, 2.0 * wn, wn * wn]),
                                       1.0 / cfg.loop_rate_hz, method="zoh")
    return np.atleast_1d(np.squeeze(num)), den


def _pid_tf(g: PIDGains, dt: float):
    """C(z) = kp + ki dt z/(z-1) + kd/dt (z-1)/z, as polynomials in z."""
    # Common denominator z (z - 1)
    num = (np.array([g.kp, -g.kp, 0.0])
           + g.ki * dt * np.array([1.0, 0.0, 0.0])
           + g.kd / dt * np.array([1.0, -2.0, 1.0]))
    den = np.array([1.0, -1.0, 0.0])
    return num, den


def ultimate_gain(cfg: TrackingLoopConfig) -> tuple[float, float]:
    """Proportional gain and oscillation period at the discrete loop's stability limit."""
    num, den = _plant_tf(cfg)
    T = 1.0 / cfg.loop_rate_hz

    def G(w):
        z = np.exp(1j * w * T)
        return np.polyval(num, z) / np.polyval(den, z)

    # The sampled plant reaches -pi exactly at Nyquist; slower mirrors cross
    # -pi earlier. Bracket the first crossing on a grid, then solve Im G = 0.
    ws = np.linspace(1e-6, math.pi / T * (1 - 1e-9), 4001)
    ph = np.unwrap(np.angle(G(ws)))
    below = np.flatnonzero(ph <= -math.pi)
    if len(below) == 0:
        wu = math.pi / T
    else:
        k = int(below[0])
        wu = brentq(lambda w: G(w).imag, ws[k - 1], ws[k], xtol=1e-14, rtol=1e-15)
    zu = np.exp(1j * wu * T)
    ku = 1.0 / abs(np.polyval(num, zu) / np.polyval(den, zu))
    return float(ku), 2.0 * math.pi / wu


ZN_RULES = {
    "classic": (0.6, 1.2, 0.075),
    "some-overshoot": (0.33, 0.66, 0.11),
    "no-overshoot": (0.2, 0.4, 0.066),
}


def ziegler_nichols_gains(cfg: TrackingLoopConfig, rule: str = "no-overshoot") -> PIDGains:
    """
    Ziegler-Nichols ultimate-gain tuning against the sampled mirror model.

    kp = a Ku, ki = b Ku / Tu, kd = c Ku Tu with (a, b, c) from ``ZN_RULES``.
    The default "no-overshoot" row keeps margin for measurement noise and the
    mirror's slew and range limits.
    """
    a, b, c = ZN_RULES[rule]
    ku, tu = ultimate_gain(cfg)
    return PIDGains(kp=a * ku, ki=b * ku / tu, kd=c * ku * tu)


def closed_loop_poles(cfg: TrackingLoopConfig, gains: PIDGains) -> np.ndarray:
    pn, pd = _plant_tf(cfg)
    cn, cd = _pid_tf(gains, 1.0 / cfg.loop_rate_hz)
    return np.roots(np.polyadd(np.polymul(pd, cd), np.polymul(pn, cn)))


def sensitivity(cfg: TrackingLoopConfig, gains: PIDGains, freq_hz) -> np.ndarray:
    """|1 / (1 + C G)| of the linear loop at the given frequencies."""
    pn, pd = _plant_tf(cfg)
    cn, cd = _pid_tf(gains, 1.0 / cfg.loop_rate_hz)
    z = np.exp(2j * math.pi * np.asarray(freq_hz, dtype=float) / cfg.loop_rate_hz)
    L = (np.polyval(pn, z) * np.polyval(cn, z)) / (np.polyval(pd, z) * np.polyval(cd, z))
    return np.abs(1.0 / (1.0 + L))


# ---------------------------------------------------------------- closed loop


def closed_loop_sim(w: WanderProcess, c: TrackingLoopConfig) -> LoopResult:
    """
    Run the tracking loop against a generated wander record.

    Each loop tick the PSD reads (wander - mirror) plus Gaussian noise, the PID
    turns that into a mirror command, and the mirror advances one tick. The
    residual is recorded before the mirror moves. Wander samples are held
    between loop ticks.
    """
    if c.loop_rate_hz > w.sample_rate_hz:
        raise DomainError(
            f"loop_rate_hz ({c.loop_rate_hz}) must not exceed sample_rate_hz ({w.sample_rate_hz})"
        )
    wander = generate_wander(w)
    dt = 1.0 / c.loop_rate_hz
    n_ticks = max(1, int(math.floor(w.duration_s * c.loop_rate_hz)))
    t = np.arange(n_ticks) * dt
    idx = np.minimum((np.arange(n_ticks) * w.sample_rate_hz / c.loop_rate_hz).astype(np.int64),
                     len(wander) - 1)
    truth = wander[idx]

    gains = c.resolved_gains()
    rng = np.random.default_rng(np.random.SeedSequence(w.seed, spawn_key=(1,)))
    noise = c.psd_noise_rms * rng.standard_normal((n_ticks, 2))
    sensed = truth
    rho = c.precomp_correlation
    if rho < 1.0:
        # Emitter pre-compensation sees a partially decorrelated copy of the channel.
        other = generate_wander(WanderProcess(
            rms=w.rms, bandwidth_hz=w.bandwidth_hz, sample_rate_hz=w.sample_rate_hz,
            duration_s=w.duration_s, seed=int(np.random.SeedSequence(w.seed, spawn_key=(2,))
                                              .generate_state(1)[0])))
        sensed = rho * truth + math.sqrt(1.0 - rho * rho) * other[idx]

    pid = PIDState(gains)
    fsm = FSMState()
    residual = np.empty_like(truth)
    for k in range(n_ticks):
        mirror = fsm.position
        residual[k] = truth[k] - mirror
        measured = sensed[k] - mirror + noise[k]
        u = pid_step(pid, measured, dt, hold_integrator=fsm.last_saturated)
        fsm_step(fsm, u, dt, c.fsm_bandwidth_hz, c.fsm_range, c.fsm_slew_limit)

    open_rms = radial_rms(truth)
    closed_rms = radial_rms(residual)
    if closed_rms > 0 and open_rms > 0:
        rejection = 20.0 * math.log10(open_rms / closed_rms)
    elif open_rms == closed_rms:
        rejection = 0.0
    else:
        rejection = math.inf if closed_rms == 0 else -math.inf
    return LoopResult(
        time_s=t,
        wander_series=truth,
        residual_series=residual,
        rms_residual=closed_rms,
        open_loop_rms=open_rms,
        rejection_db=rejection,
        saturation_fraction=fsm.saturation_fraction,
        diverged=bool(closed_rms > DIVERGENCE_FACTOR * open_rms) if open_rms > 0 else False,
        gains=gains,
        config=c,
        loop_rate_hz=c.loop_rate_hz,
    )


def residual_to_fade_mask(
    residual: np.ndarray,
    loop_rate_hz: float,
    capture_radius: float,
    slot_rate_hz: float,
    n_slots: int,
) -> tuple[np.ndarray, float]:
    """
    Map loop-rate residuals onto slots (zero-order hold).

    Returns a per-slot mask that is True where the spot lies within
    ``capture_radius``, and the available fraction of slots.
    """
    if not capture_radius > 0:
        raise DomainError(f"capture_radius must be > 0, got {capture_radius!r}")
    residual = np.asarray(residual, dtype=float)
    inside = np.hypot(residual[:, 0], residual[:, 1]) <= capture_radius
    tick = np.floor(np.arange(n_slots) * (loop_rate_hz / slot_rate_hz)).astype(np.int64)
    mask = inside[np.minimum(tick, len(inside) - 1)]
    return mask, float(np.mean(mask)) if n_slots else 1.0


# ---------------------------------------------------------------- strategy


@dataclass(frozen=True)
class StrategyRationale:
    strategy: CompensationStrategy
    range_m: float
    aperture_ratio: float
    boundary_m: float
    max_receiver_range_m: float
    failed_condition: str | None  # None when receiver compensation is selected


def select_strategy(
    t: TurbulenceParams,
    b: BeamGeometry,
    link: LinkConfig,
    max_receiver_range_m: float = MAX_RECEIVER_COMPENSATION_RANGE_M,
) -> StrategyRationale:
    """
    Receiver compensation while the long-term spot fits the aperture and the
    path is short enough; emitter pre-compensation otherwise.
    """
    D = link.rx_aperture_diameter_m
    ratio = aperture_ratio(t, b, link.range_m, D)
    try:
        boundary = float(boundary_distance(t, b, D))
    except NoBoundaryError:
        boundary = 0.0
    if link.range_m > boundary:
        failed = "long-term beam diameter exceeds receiver aperture"
    elif link.range_m > max_receiver_range_m:
        failed = f"range exceeds {max_receiver_range_m:g} m receiver-compensation limit"
    else:
        failed = None
    strategy = (CompensationStrategy.RECEIVER if failed is None
                else CompensationStrategy.EMITTER_PRECOMPENSATION)
    return StrategyRationale(strategy, link.range_m, ratio, boundary, max_receiver_range_m, failed)
