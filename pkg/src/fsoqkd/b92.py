"""
B92 two-state protocol: source, photon-level detection Monte Carlo, sifting,
QBER and secret key rate.

Receiver layout: a 50/50 splitter feeds two analysing polarisers, each with a
SPAD behind it. Channel ``i`` has its polariser orthogonal to the state that
encodes bit ``1 - i``, so a click on channel ``i`` alone announces bit ``i``.

Random streams are derived per fixed-size block of slots (block index as the
spawn key), so the sampled detections do not depend on how many workers run
the blocks.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

QBER_ABORT_THRESHOLD = 0.08
F_EC = 1.2
BLOCK_SLOTS = 1 << 20

# Unpolarised background: half goes each way at the splitter, half of that passes a polariser.
BACKGROUND_FRACTION_PER_DETECTOR = 0.25


@dataclass(frozen=True)
class PulseSource:
    clock_rate_hz: float = 1e9
    mu: float = 0.1
    state_angles_rad: tuple[float, float] = (0.0, math.pi / 4)
    # None means ideal polarisers (no leakage).
    extinction_ratio_db: float | None = 30.0

    def __post_init__(self):
        if not self.clock_rate_hz > 0:
            raise DomainError(f"clock_rate_hz must be > 0, got {self.clock_rate_hz!r}")
        if not self.mu > 0:
            raise DomainError(f"mu must be > 0, got {self.mu!r}")
        if len(self.state_angles_rad) != 2:
            raise DomainError("state_angles_rad must hold exactly two angles")
        object.__setattr__(self, "state_angles_rad", tuple(float(a) for a in self.state_angles_rad))
        if self.extinction_ratio_db is not None and not self.extinction_ratio_db > 0:
            raise DomainError(
                f"extinction_ratio_db must be > 0 or None, got {self.extinction_ratio_db!r}"
            )

    @property
    def leakage(self) -> float:
        """Transmission probability through a crossed polariser."""
        if self.extinction_ratio_db is None:
            return 0.0
        return 10.0 ** (-self.extinction_ratio_db / 10.0)

    def polarizer_axes(self) -> tuple[float, float]:
        """Analyser axis per channel: channel i is crossed with the state of bit 1 - i."""
        a0, a1 = self.state_angles_rad
        return (a1 + math.pi / 2, a0 + math.pi / 2)


@dataclass(frozen=True)
class DetectorModel:
    # Assumed Si SPAD figures; chosen so the default 300 m link clears 1 Mbps.
    efficiency: float = 0.5
    dark_count_rate_hz: float = 500.0
    dead_time_s: float = 50e-9
    gate_window_s: float = 1e-9

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise DomainError(f"efficiency must lie in [0, 1], got {self.efficiency!r}")
        if not self.dark_count_rate_hz >= 0:
            raise DomainError(f"dark_count_rate_hz must be >= 0, got {self.dark_count_rate_hz!r}")
        if not self.dead_time_s >= 0:
            raise DomainError(f"dead_time_s must be >= 0, got {self.dead_time_s!r}")
        if not self.gate_window_s > 0:
            raise DomainError(f"gate_window_s must be > 0, got {self.gate_window_s!r}")


@dataclass(frozen=True)
class AliceSequence:
    bits: np.ndarray  # uint8, one per slot
    angles: np.ndarray  # polarisation angle per slot (rad)

    def __len__(self):
        return len(self.bits)


@dataclass(frozen=True)
class Detections:
    """Clicks that survived dead time, sorted by (slot, channel)."""

    slots: np.ndarray  # int64
    channels: np.ndarray  # uint8
    n_slots: int

    def __len__(self):
        return len(self.slots)


@dataclass(frozen=True)
class SiftedKey:
    alice: np.ndarray
    bob: np.ndarray
    slots: np.ndarray

    def __len__(self):
        return len(self.alice)

    @property
    def n_errors(self) -> int:
        return int(np.count_nonzero(self.alice != self.bob))


@dataclass(frozen=True)
class QberResult:
    value: float | None  # None when no sifted bits exist
    abort: bool
    n_pairs: int
    n_errors: int

    @property
    def status(self) -> str:
        if self.value is None:
            return "insufficient data"
        return "abort" if self.abort else "ok"


@dataclass(frozen=True)
class TransmissionStats:
    slots_sent: int
    detection_slots: int
    conclusive_count: int
    error_count: int
    qber: float | None
    abort: bool
    sifted_rate_bps: float
    secret_key_rate_bps: float
    background_rate_hz: float


def _as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def alice_generate(n_slots: int, seed, source: PulseSource = PulseSource()) -> AliceSequence:
    """Uniform random bits, bit b sent in polarisation ``source.state_angles_rad[b]``."""
    if n_slots <= 0:
        raise DomainError(f"n_slots must be > 0, got {n_slots!r}")
    rng = np.random.default_rng(_as_seed_sequence(seed))
    bits = rng.integers(0, 2, size=n_slots, dtype=np.uint8)
    angles = np.asarray(source.state_angles_rad)[bits]
    return AliceSequence(bits=bits, angles=angles)


def polarizer_transmission(photon_angle, axis: float, leakage: float):
    """Malus's law with finite extinction: (1 - eps) cos^2 + eps sin^2."""
    c2 = np.cos(np.asarray(photon_angle) - axis) ** 2
    return (1.0 - leakage) * c2 + leakage * (1.0 - c2)


def _detect_block(angles, survive, noise_p, axes, leakage, mu, seed_seq):
    """Raw (pre-dead-time) click indicators for one block of slots, shape (n, 2)."""
    sig_seq, noise_seq = seed_seq.spawn(2)
    sig = np.random.default_rng(sig_seq)
    noise = np.random.default_rng(noise_seq)
    n = len(angles)

    photons = sig.poisson(mu, size=n)
    arrived = sig.binomial(photons, survive)
    to_ch0 = sig.binomial(arrived, 0.5)
    to_ch1 = arrived - to_ch0
    pass0 = sig.binomial(to_ch0, polarizer_transmission(angles, axes[0], leakage))
    pass1 = sig.binomial(to_ch1, polarizer_transmission(angles, axes[1], leakage))

    # Inverse-CDF coupling: with a fixed stream, raising the noise rate only adds clicks.
    u = noise.random((n, 2))
    clicks = u < noise_p
    clicks[:, 0] |= pass0 > 0
    clicks[:, 1] |= pass1 > 0
    return clicks


def apply_dead_time(slots: np.ndarray, dead_slots: float) -> np.ndarray:
    """Keep clicks at least ``dead_slots`` after the last kept click (non-paralysable)."""
    if dead_slots <= 0 or len(slots) == 0:
        return np.ones(len(slots), dtype=bool)
    keep = np.zeros(len(slots), dtype=bool)
    last = -math.inf
    for i, s in enumerate(slots.tolist()):
        if s - last >= dead_slots:
            keep[i] = True
            last = s
    return keep


def channel_detect(
    alice: AliceSequence,
    transmittance: float,
    background_rate_hz: float,
    det: DetectorModel,
    src: PulseSource,
    fade_mask: np.ndarray | None = None,
    seed=0,
    workers: int = 1,
) -> Detections:
    """
    Photon-level detection Monte Carlo.

    Per slot: Poisson(mu) photons, each surviving with probability
    ``transmittance * efficiency`` (zero in faded slots), routed 50/50 to the
    two analysers and passed with Malus's-law probability. Dark counts and a
    quarter of ``background_rate_hz`` (receiver-wide, pre-splitter) arrive at
    each detector within the gate window. Dead time then suppresses clicks per
    detector.

    ``fade_mask`` is True where the signal reaches the fibre.
    """
    if not 0.0 <= transmittance <= 1.0:
        raise DomainError(f"transmittance must lie in [0, 1], got {transmittance!r}")
    if not background_rate_hz >= 0:
        raise DomainError(f"background_rate_hz must be >= 0, got {background_rate_hz!r}")
    n = len(alice)
    if fade_mask is not None and len(fade_mask) != n:
        raise DomainError(f"fade_mask length {len(fade_mask)} != slot count {n}")

    survive_p = transmittance * det.efficiency
    noise_rate = det.dark_count_rate_hz + BACKGROUND_FRACTION_PER_DETECTOR * background_rate_hz
    noise_p = -math.expm1(-noise_rate * det.gate_window_s)
    axes = src.polarizer_axes()
    root = _as_seed_sequence(seed)

    starts = range(0, n, BLOCK_SLOTS)

    def run(i_start):
        i, start = i_start
        stop = min(start + BLOCK_SLOTS, n)
        if fade_mask is None:
            survive = survive_p
        else:
            survive = np.where(np.asarray(fade_mask[start:stop], dtype=bool), survive_p, 0.0)
        block_seq = np.random.SeedSequence(root.entropy, spawn_key=root.spawn_key + (i,))
        clicks = _detect_block(alice.angles[start:stop], survive, noise_p, axes, src.leakage,
                               src.mu, block_seq)
        s, c = np.nonzero(clicks)
        return s.astype(np.int64) + start, c.astype(np.uint8)

    jobs = list(enumerate(starts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]

    slots = np.concatenate([p[0] for p in parts]) if parts else np.empty(0, np.int64)
    chans = np.concatenate([p[1] for p in parts]) if parts else np.empty(0, np.uint8)

    dead_slots = det.dead_time_s * src.clock_rate_hz
    keep = np.zeros(len(slots), dtype=bool)
    for ch in (0, 1):
        idx = np.flatnonzero(chans == ch)
        keep[idx] = apply_dead_time(slots[idx], dead_slots)
    return Detections(slots=slots[keep], channels=chans[keep], n_slots=n)


def sift(alice: AliceSequence, detections: Detections) -> SiftedKey:
    """Keep slots where exactly one channel fired; Bob's bit is that channel index."""
    slots, chans = detections.slots, detections.channels
    if len(slots) and (slots.min() < 0 or slots.max() >= len(alice)):
        raise DomainError("detections reference slots outside the Alice sequence")
    uniq, first, counts = np.unique(slots, return_index=True, return_counts=True)
    single = counts == 1
    kept = uniq[single]
    return SiftedKey(alice=alice.bits[kept], bob=chans[first[single]], slots=kept)


def qber(key: SiftedKey, threshold: float = QBER_ABORT_THRESHOLD) -> QberResult:
    """Error fraction of the sifted key; abort when strictly above ``threshold``."""
    n = len(key)
    errors = key.n_errors
    if n == 0:
        return QberResult(value=None, abort=False, n_pairs=0, n_errors=0)
    q = errors / n
    return QberResult(value=q, abort=q > threshold, n_pairs=n, n_errors=errors)


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p!r}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def secret_key_rate(sifted_rate_bps: float, qber_value: float, f_ec: float = F_EC) -> float:
    """Asymptotic key rate after an entropy penalty of (1 + f_ec) h2(Q) per sifted bit."""
    if not 0.0 <= qber_value <= 0.5:
        raise DomainError(f"qber must lie in [0, 0.5], got {qber_value!r}")
    return sifted_rate_bps * max(0.0, 1.0 - (1.0 + f_ec) * binary_entropy(qber_value))


def transmission_stats(
    alice: AliceSequence,
    detections: Detections,
    src: PulseSource,
    background_rate_hz: float,
    threshold: float = QBER_ABORT_THRESHOLD,
) -> TransmissionStats:
    """Sift, estimate QBER, and scale counts to per-second rates at the source clock."""
    key = sift(alice, detections)
    q = qber(key, threshold)
    n = len(alice)
    sifted_rate = len(key) * src.clock_rate_hz / n
    if q.value is None or q.abort:
        skr = 0.0
    else:
        skr = secret_key_rate(sifted_rate, min(q.value, 0.5))
    return TransmissionStats(
        slots_sent=n,
        detection_slots=int(len(np.unique(detections.slots))),
        conclusive_count=len(key),
        error_count=q.n_errors,
        qber=q.value,
        abort=q.abort,
        sifted_rate_bps=sifted_rate,
        secret_key_rate_bps=skr,
        background_rate_hz=background_rate_hz,
    )
