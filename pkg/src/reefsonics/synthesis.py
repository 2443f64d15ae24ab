"""Per-voice sound generators for the two layers of the soundscape.

Crackles - the snapping-shrimp surrogate. AD1 draws random impulses whose
per-sample probability follows the density control, shaped by a fixed
2nd-order band-pass on the 2-20 kHz snap band; AD2 uses the same event
law to trigger grains from a sample bank.

Bubbles - the photosynthesis surrogate. AD1 is one FM partial per voice
(carrier = partial_index * f0) whose modulator ratio slides from harmonic
toward the golden ratio and whose index grows with PAR; AD2 plays short
"ping" grains on a jittered pulse train. Both scale linearly with the
daily PAR value.

Every generator is a pure function of its parameters and the RNG stream
handed in; control inputs accept scalars or per-sample arrays so callers
can ramp values inside a block without zipper noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import signal

from . import wavio
from .errors import EmptyBank

TWO_PI = 2.0 * math.pi
GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0

#: Modulation index reached at PAR = 1 (0 at PAR = 0: a pure partial).
FM_INDEX_MAX = 4.0

#: Snap energy band (Hz); the band-pass is a single resonant biquad at the
#: log midpoint with a broad Q, not a brick wall.
CRACKLE_BAND_HZ = (2000.0, 20000.0)
CRACKLE_CENTER_HZ = 6300.0
CRACKLE_Q = 0.7

GRAIN_MAX_SECONDS = 0.25

#: Base ping rate for the sample-based bubbles, and the uniform jitter
#: applied to each inter-onset interval (+/-50% keeps the mean at 1/rate).
PING_RATE_HZ = 2.0
PING_JITTER = 0.5

#: Stride mixed into per-voice seeds; any large odd 64-bit constant works.
VOICE_SEED_STRIDE = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


@dataclass
class MonoBlock:
    """A block of mono samples at a known rate; nominal range [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class FmState:
    """Oscillator phases carried across blocks, wrapped to [0, 2*pi)."""

    carrier_phase: float = 0.0
    modulator_phase: float = 0.0


@dataclass
class CrackleState:
    """Band-pass ring spilling past a block edge, carried to the next block."""

    tail: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class GrainBank:
    """Short source snippets for the sample-based engines.

    Every grain is peak-normalized to at most 1 and no longer than
    GRAIN_MAX_SECONDS at `sample_rate`.
    """

    grains: list[np.ndarray]
    sample_rate: int
    source: str  # "file" | "synthetic"


def voice_seed(master_seed: int, cluster_id: int) -> int:
    """Per-voice stream seed: master XOR (cluster_id * large odd constant).

    Keeps each voice's audio independent of how voices are scheduled
    across render workers.
    """
    return (int(master_seed) ^ ((int(cluster_id) * VOICE_SEED_STRIDE) & _MASK64)) & _MASK64


def voice_streams(master_seed: int, cluster_id: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (crackle, bubble) generators for one voice."""
    crackle_seq, bubble_seq = np.random.SeedSequence(voice_seed(master_seed, cluster_id)).spawn(2)
    return np.random.default_rng(crackle_seq), np.random.default_rng(bubble_seq)


@lru_cache(maxsize=8)
def _crackle_ba(sample_rate: int) -> tuple[np.ndarray, np.ndarray]:
    return signal.iirpeak(CRACKLE_CENTER_HZ, CRACKLE_Q, fs=sample_rate)


@lru_cache(maxsize=8)
def _crackle_kernel(sample_rate: int) -> np.ndarray:
    """Per-impulse response: 2-sample widening kernel through the band-pass.

    The broad-Q resonator rings below 1e-16 of its peak within ~50 samples,
    so the truncated impulse response applied per event is the band-pass to
    machine precision. Splatting it at sparse events also never feeds the
    IIR recursion near-zero values, which would otherwise limit-cycle in
    denormal arithmetic and stall the render.
    """
    b, a = _crackle_ba(sample_rate)
    probe = np.zeros(512)
    probe[0] = 1.0
    ring = signal.lfilter(b, a, np.convolve(np.array([1.0, 1.0]), probe)[:512])
    keep = np.flatnonzero(np.abs(ring) > np.abs(ring).max() * 1e-16)[-1] + 1
    return ring[:keep]


def _block_length(duration: float, sample_rate: int) -> int:
    n = round(duration * sample_rate)
    if n < 0:
        raise ValueError("duration must be >= 0")
    return n


def _per_sample(value, n: int) -> np.ndarray:
    """Broadcast a scalar or length-n control array to n samples."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"control array has shape {arr.shape}, expected ({n},)")
    return arr


def impulse_event_indices(
    density_hz,
    duration: float,
    rng: np.random.Generator,
    sample_rate: int,
) -> np.ndarray:
    """Sample indices of the random impulse events in one block.

    Each sample is an event with probability density/sample_rate, so counts
    over an interval T follow (to within the Bernoulli approximation) a
    Poisson law with mean density*T. Exposed separately so event statistics
    can be tested without decoding audio.
    """
    n = _block_length(duration, sample_rate)
    p = np.clip(_per_sample(density_hz, n) / sample_rate, 0.0, 1.0)
    return np.flatnonzero(rng.random(n) < p)


def crackle_step(
    density_hz,
    gain,
    duration: float,
    rng: np.random.Generator,
    *,
    sample_rate: int,
    filter_state: CrackleState | None = None,
) -> MonoBlock:
    """Random band-passed impulses at the given density (AD1 crackles).

    Impulse amplitudes are uniform in [0.25, 1] with random sign, scaled by
    `gain`; each impulse is widened to two samples and shaped by the fixed
    snap-band resonator (its truncated impulse response, see
    _crackle_kernel). `density_hz` and `gain` may be scalars or per-sample
    arrays. Pass a CrackleState to let rings near the block edge continue
    into the next block.
    """
    n = _block_length(duration, sample_rate)
    events = impulse_event_indices(density_hz, duration, rng, sample_rate)
    gain_arr = _per_sample(gain, n)
    kernel = _crackle_kernel(sample_rate)

    out = np.zeros(n + len(kernel) - 1)
    if filter_state is not None and len(filter_state.tail):
        out[: len(filter_state.tail)] += filter_state.tail
    if len(events):
        amps = rng.uniform(0.25, 1.0, len(events))
        signs = np.where(rng.random(len(events)) < 0.5, -1.0, 1.0)
        for event, amp in zip(events, amps * signs * gain_arr[events]):
            out[event: event + len(kernel)] += amp * kernel
    if filter_state is not None:
        filter_state.tail = out[n:].copy()

    samples = np.clip(out[:n], -1.0, 1.0)
    return MonoBlock(samples=samples, sample_rate=sample_rate)


def grain_step(
    rate_hz,
    bank: GrainBank,
    gain,
    duration: float,
    rng: np.random.Generator,
    *,
    sample_rate: int,
) -> MonoBlock:
    """Trigger bank grains by the same random event law (AD2 crackles).

    Each trigger starts a uniformly chosen grain at the trigger sample,
    scaled by `gain` (per-sample gains are read at the trigger);
    overlapping grains sum and the result saturates at [-1, 1]. Grains
    running past the block end are truncated.
    """
    _check_bank(bank, sample_rate)
    n = _block_length(duration, sample_rate)
    onsets = impulse_event_indices(rate_hz, duration, rng, sample_rate)
    gain_arr = _per_sample(gain, n)

    out = np.zeros(n)
    if len(onsets):
        picks = rng.integers(0, len(bank.grains), len(onsets))
        for onset, pick in zip(onsets, picks):
            grain = bank.grains[pick]
            m = min(len(grain), n - onset)
            out[onset:onset + m] += grain[:m] * gain_arr[onset]
    np.clip(out, -1.0, 1.0, out=out)
    return MonoBlock(samples=out, sample_rate=sample_rate)


#: Voices processed per inner pass of fm_partial_bank: keeps temporaries a
#: few MB so the allocator recycles warm pages instead of faulting fresh
#: ones on every chunk of a long render.
_FM_GROUP = 16


def fm_partial_bank(
    carrier_phase: np.ndarray,
    modulator_phase: np.ndarray,
    partial_indices: np.ndarray,
    par: np.ndarray,
    amp: np.ndarray,
    f0: float,
    *,
    sample_rate: int,
    out: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Render a bank of FM partials at once, one row per voice.

    Row v: amp * par * sin(theta_c + I * sin(theta_m)) with carrier
    fc = partial_indices[v] * f0, modulator fc * (1 + par * (golden - 1)),
    and index I = FM_INDEX_MAX * par. `par` is (voices, n) per-sample;
    `amp` broadcasts against it ((voices, 1) or (voices, n)). Rows whose
    carrier reaches Nyquist render silent and keep their phases. Returns
    (samples, carrier_phase, modulator_phase) with advanced, wrapped
    phases; `out` may supply a reusable (voices, n) result buffer.

    The renderer drives all voices through this one call; the elementwise
    arithmetic is identical to a voice-at-a-time loop.
    """
    if f0 <= 0:
        raise ValueError("f0 must be > 0")
    partial_indices = np.asarray(partial_indices)
    if np.any(partial_indices < 1):
        raise ValueError("partial_index must be >= 1")
    n_voices, n = par.shape
    fc = partial_indices * float(f0)
    alive = fc < sample_rate / 2
    if out is None:
        out = np.empty((n_voices, n))
    next_carrier = carrier_phase.copy()
    next_modulator = modulator_phase.copy()
    if n == 0:
        return out, next_carrier, next_modulator

    k = np.arange(n)
    for lo in range(0, n_voices, _FM_GROUP):
        rows = slice(lo, min(lo + _FM_GROUP, n_voices))
        par_g = np.clip(par[rows], 0.0, 1.0)
        fc_g = fc[rows]
        fm = fc_g[:, None] * (1.0 + par_g * (GOLDEN_RATIO - 1.0))
        index = FM_INDEX_MAX * par_g

        theta_c = carrier_phase[rows, None] + ((TWO_PI * fc_g)[:, None] / sample_rate) * k
        fm_cumsum = np.cumsum(fm, axis=1)
        theta_m = modulator_phase[rows, None] + (TWO_PI / sample_rate) * np.hstack(
            [np.zeros((fm.shape[0], 1)), fm_cumsum[:, :-1]]
        )

        out[rows] = amp[rows] * par_g * np.sin(theta_c + index * np.sin(theta_m))
        next_carrier[rows] = (
            carrier_phase[rows] + TWO_PI * fc_g * n / sample_rate
        ) % TWO_PI
        next_modulator[rows] = (
            modulator_phase[rows] + (TWO_PI / sample_rate) * fm_cumsum[:, -1]
        ) % TWO_PI

    out[~alive] = 0.0
    next_carrier[~alive] = carrier_phase[~alive]
    next_modulator[~alive] = modulator_phase[~alive]
    return out, next_carrier, next_modulator


def bubble_fm_step(
    state: FmState,
    partial_index: int,
    par_daily,
    f0: float,
    amp,
    duration: float,
    *,
    sample_rate: int,
) -> MonoBlock:
    """One FM partial: carrier at partial_index * f0, PAR-driven spectrum.

    At par = 0 the voice is silent and the formula degenerates to a pure
    sine; rising PAR slides the modulator toward the golden ratio and the
    index toward FM_INDEX_MAX, away from harmonicity. Phases persist in
    `state` so consecutive blocks are continuous. A carrier at or above
    Nyquist yields silence (the caller counts such muted voices).
    """
    n = _block_length(duration, sample_rate)
    par = _per_sample(par_daily, n)
    amp_arr = _per_sample(amp, n)
    out, next_c, next_m = fm_partial_bank(
        np.array([state.carrier_phase]),
        np.array([state.modulator_phase]),
        np.array([partial_index]),
        par[None, :],
        amp_arr[None, :],
        f0,
        sample_rate=sample_rate,
    )
    state.carrier_phase = float(next_c[0])
    state.modulator_phase = float(next_m[0])
    return MonoBlock(samples=out[0], sample_rate=sample_rate)


def ping_onset_times(
    duration: float,
    rng: np.random.Generator,
    rate_hz: float = PING_RATE_HZ,
    jitter: float = PING_JITTER,
) -> list[float]:
    """Onset times of the jittered ping train within [0, duration).

    Inter-onset intervals are (1/rate) * U[1-jitter, 1+jitter]; the uniform
    jitter leaves the mean interval at exactly 1/rate.
    """
    base = 1.0 / rate_hz
    times: list[float] = []
    t = base * (1.0 + jitter * (2.0 * rng.random() - 1.0))
    while t < duration:
        times.append(t)
        t += base * (1.0 + jitter * (2.0 * rng.random() - 1.0))
    return times


def bubble_sample_step(
    bank: GrainBank,
    par_daily,
    amp,
    duration: float,
    rng: np.random.Generator,
    *,
    sample_rate: int,
) -> MonoBlock:
    """Sparse sample pings whose loudness follows the daily PAR (AD2 bubbles)."""
    _check_bank(bank, sample_rate)
    n = _block_length(duration, sample_rate)
    par = np.clip(_per_sample(par_daily, n), 0.0, 1.0)
    amp_arr = _per_sample(amp, n)

    out = np.zeros(n)
    for t in ping_onset_times(duration, rng):
        onset = min(int(t * sample_rate), n - 1)
        grain = bank.grains[int(rng.integers(0, len(bank.grains)))]
        level = amp_arr[onset] * par[onset]
        m = min(len(grain), n - onset)
        out[onset:onset + m] += grain[:m] * level
    np.clip(out, -1.0, 1.0, out=out)
    return MonoBlock(samples=out, sample_rate=sample_rate)


def _check_bank(bank: GrainBank, sample_rate: int) -> None:
    if not bank.grains:
        raise EmptyBank("grain bank has no grains")
    if bank.sample_rate != sample_rate:
        raise ValueError(
            f"bank sample rate {bank.sample_rate} != render rate {sample_rate}"
        )


def make_synthetic_grains(seed: int, kind: str, *, sample_rate: int) -> GrainBank:
    """Deterministic stand-in grains when no recordings are supplied.

    "snap": 8 exponentially decaying noise bursts (3-10 ms) through the
    crackle band-pass. "ping": 8 decaying sine bursts (30-80 ms, 1-4 kHz)
    with a short raised-cosine attack. All grains are peak-normalized.
    """
    if kind not in ("snap", "ping"):
        raise ValueError(f"unknown grain kind {kind!r}")
    rng = np.random.default_rng(seed)
    grains: list[np.ndarray] = []
    for _ in range(8):
        if kind == "snap":
            length = rng.uniform(0.003, 0.010)
            n = max(8, round(length * sample_rate))
            t = np.arange(n) / sample_rate
            x = rng.standard_normal(n) * np.exp(-t / (length / 5.0))
            b, a = _crackle_ba(sample_rate)
            x = signal.lfilter(b, a, x)
        else:
            length = rng.uniform(0.030, 0.080)
            freq = rng.uniform(1000.0, 4000.0)
            n = round(length * sample_rate)
            t = np.arange(n) / sample_rate
            x = np.sin(TWO_PI * freq * t) * np.exp(-t / (length / 5.0))
            attack = min(n, max(1, round(0.002 * sample_rate)))
            x[:attack] *= 0.5 * (1.0 - np.cos(math.pi * np.arange(attack) / attack))
        peak = np.max(np.abs(x))
        if peak > 0:
            x = x / peak
        grains.append(x)
    return GrainBank(grains=grains, sample_rate=sample_rate, source="synthetic")


def load_grain_bank(directory: str | Path, *, sample_rate: int) -> GrainBank:
    """Load every *.wav under `directory` (sorted by name) as a grain bank.

    Files may be 16/32-bit PCM or float WAV at any rate; the first channel
    is taken, linearly resampled to `sample_rate`, truncated to
    GRAIN_MAX_SECONDS, and peak-normalized.
    """
    directory = Path(directory)
    paths = sorted(directory.glob("*.wav"))
    if not paths:
        raise EmptyBank(f"no .wav files in {directory}")
    grains = []
    max_len = round(GRAIN_MAX_SECONDS * sample_rate)
    for path in paths:
        src_rate, channels = wavio.read_wav(path)
        x = np.asarray(channels[0], dtype=float)
        if np.issubdtype(channels.dtype, np.integer):
            x = x / float(2 ** (8 * channels.dtype.itemsize - 1))
        if src_rate != sample_rate:
            n_out = max(1, round(len(x) * sample_rate / src_rate))
            x = np.interp(
                np.arange(n_out) * (src_rate / sample_rate),
                np.arange(len(x)),
                x,
            )
        x = x[:max_len]
        peak = np.max(np.abs(x))
        if peak > 0:
            x = x / peak
        grains.append(x)
    return GrainBank(grains=grains, sample_rate=sample_rate, source="file")
