"""Offline render driver: daily parameter updates through to finished audio.

For every day the per-voice controls (impulse density from the bleach ramp,
PAR level for the bubbles) are ramped linearly across the step from the
previous day's values, both layers are synthesized per voice, encoded at
the voice's fixed direction, and mixed in ascending cluster-id order. A
fade tail rendered with final-day parameters closes the piece, then the
mix is peak-normalized uniformly across channels.

Voices may render on a thread pool; each owns its RNG streams and
oscillator/filter state, and accumulation order is fixed, so the output is
bit-identical for any worker count.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import wavio
from .ambisonics import (
    AmbisonicBlock,
    N_CHANNELS,
    decode_project,
    load_speaker_layout,
    sh_coeffs,
    stereo_downmix,
)
from .errors import ConfigInvalid, EmptyDataset
from .mapping import Timeline, bleach_to_density
from .synthesis import (
    CrackleState,
    GrainBank,
    MonoBlock,
    bubble_sample_step,
    crackle_step,
    fm_partial_bank,
    grain_step,
    load_grain_bank,
    make_synthetic_grains,
    voice_streams,
)

log = logging.getLogger(__name__)

SUPPORTED_RATES = (44100, 48000, 96000)
MODES = ("ad1", "ad2")
LAYERS = ("crackles", "bubbles")

#: Nominal per-layer level before the 1/sqrt(voices) bus scale; two layers
#: at 0.5 keep a single voice within full scale ahead of normalization.
LAYER_GAIN = 0.5


@dataclass
class RenderConfig:
    """Every knob of one render run."""

    sample_rate: int = 48000
    step_seconds: float = 1.0
    n_days: int = 78
    fade_seconds: float = 5.0
    mode: str = "ad1"
    master_seed: int = 0
    f0_hz: float = 55.0
    depth_boost_db: float = 6.0
    peak_target_dbfs: float = -1.0
    grain_dir: str | None = None
    solo: str | None = None  # test hook: "crackles" | "bubbles"
    workers: int = 1
    ambix_path: str | None = None
    stereo_path: str | None = None
    report_path: str | None = None
    layout_path: str | None = None
    decoded_path: str | None = None

    def validate(self) -> None:
        if self.sample_rate not in SUPPORTED_RATES:
            raise ConfigInvalid(f"sample_rate must be one of {SUPPORTED_RATES}")
        if not self.step_seconds > 0:
            raise ConfigInvalid("step_seconds must be > 0")
        if round(self.step_seconds * self.sample_rate) < 1:
            raise ConfigInvalid("step_seconds too short for the sample rate")
        if self.fade_seconds < 0:
            raise ConfigInvalid("fade_seconds must be >= 0")
        if self.n_days < 1:
            raise ConfigInvalid("n_days must be >= 1")
        if self.mode not in MODES:
            raise ConfigInvalid(f"mode must be one of {MODES}")
        if self.solo not in (None, *LAYERS):
            raise ConfigInvalid(f"solo must be one of {LAYERS}")
        if self.workers < 1:
            raise ConfigInvalid("workers must be >= 1")
        if not self.f0_hz > 0:
            raise ConfigInvalid("f0_hz must be > 0")


@dataclass
class RenderReport:
    """Reproducibility record written next to the audio outputs.

    `rms_db` holds the RMS of each layer's omnidirectional (W) mix at the
    output level, None for silent layers; `content_digest` is the SHA-256
    of the interleaved float32 samples; `crackle_events_expected` lists
    the analytic per-day impulse counts summed over voices.
    """

    duration_s: float
    total_frames: int
    peak_before_norm: float
    muted_voices: int
    rms_db: dict
    config: dict
    content_digest: str
    crackle_events_expected: list[float] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


class _VoiceBank:
    """All per-voice state for one render, vectorized where the math allows.

    Crackle and (AD2) bubble randomness is drawn voice by voice from
    streams seeded by (master_seed, cluster_id) alone, so neither worker
    count nor scheduling order can change the audio. The rng-free FM bank
    runs as one vectorized call across voices.
    """

    def __init__(self, voices, config: RenderConfig, snap_bank, ping_bank):
        self.voices = voices
        self.config = config
        self.snap_bank = snap_bank
        self.ping_bank = ping_bank

        streams = [voice_streams(config.master_seed, v.cluster_id) for v in voices]
        self.crackle_rngs = [s[0] for s in streams]
        self.bubble_rngs = [s[1] for s in streams]
        self.crackle_states = [CrackleState() for _ in voices]
        self.carrier_phase = np.zeros(len(voices))
        self.modulator_phase = np.zeros(len(voices))

        self.coeffs = sh_coeffs(
            np.array([v.azimuth_rad for v in voices]),
            np.array([v.elevation_rad for v in voices]),
        )  # (voices, 16)
        self.partials = np.array([v.partial_index for v in voices])
        self.gains = LAYER_GAIN * np.array([v.depth_gain for v in voices])
        self.bleach_targets = np.array([v.bleach_target for v in voices])
        self.par_norms = np.array([v.par_norm for v in voices])
        self.muted = (
            (config.mode == "ad1")
            & (self.partials * config.f0_hz >= config.sample_rate / 2)
        )

        # chunk-sized work matrices, reused every step to stay page-warm;
        # the layer buffers start (and in solo runs stay) all-zero
        n_step = round(config.step_seconds * config.sample_rate)
        shape = (len(voices), n_step)
        self._density = np.empty(shape)
        self._par = np.empty(shape)
        self._crackles = np.zeros(shape)
        self._bubbles = np.zeros(shape)
        self._mono = np.empty(shape)
        self._bus = np.empty((N_CHANNELS, n_step))

    def _ramp_into(self, out: np.ndarray, prev: np.ndarray, cur: np.ndarray) -> None:
        n = out.shape[1]
        t = (np.arange(n) + 1.0) / n
        np.multiply((cur - prev)[:, None], t[None, :], out=out)
        out += prev[:, None]

    def controls(self, day: int | None, n: int) -> tuple[np.ndarray, np.ndarray]:
        """(density, par) per voice and sample; fade tail holds final values."""
        n_days = self.config.n_days
        density = self._density[:, :n]
        par = self._par[:, :n]
        if day is None:
            final = bleach_to_density(self.bleach_targets)
            self._ramp_into(density, final, final)
            self._ramp_into(par, self.par_norms, self.par_norms)
        else:
            b_prev = self.bleach_targets * (day / n_days)
            b_cur = self.bleach_targets * ((day + 1) / n_days)
            self._ramp_into(density, bleach_to_density(b_prev), bleach_to_density(b_cur))
            self._ramp_into(par, self.par_norms * (day / n_days),
                            self.par_norms * ((day + 1) / n_days))
        return density, par

    def crackle_rows(self, density: np.ndarray, n: int, pool) -> np.ndarray:
        """One crackle row per voice; rng draws stay within each voice."""
        cfg = self.config
        duration = n / cfg.sample_rate
        rows = self._crackles[:, :n]
        if cfg.solo == "bubbles":
            return rows  # buffer is never written in solo runs: all zeros

        def one(i: int) -> None:
            if cfg.mode == "ad1":
                block = crackle_step(
                    density[i], self.gains[i], duration, self.crackle_rngs[i],
                    sample_rate=cfg.sample_rate, filter_state=self.crackle_states[i],
                )
            else:
                block = grain_step(
                    density[i], self.snap_bank, self.gains[i], duration,
                    self.crackle_rngs[i], sample_rate=cfg.sample_rate,
                )
            rows[i] = block.samples

        indices = range(len(self.voices))
        if pool is not None:
            list(pool.map(one, indices))
        else:
            for i in indices:
                one(i)
        return rows

    def bubble_rows(self, par: np.ndarray, n: int, pool) -> np.ndarray:
        cfg = self.config
        rows = self._bubbles[:, :n]
        if cfg.solo == "crackles":
            return rows  # all zeros, see crackle_rows
        if cfg.mode == "ad1":
            _, self.carrier_phase, self.modulator_phase = fm_partial_bank(
                self.carrier_phase, self.modulator_phase, self.partials,
                par, self.gains[:, None], cfg.f0_hz, sample_rate=cfg.sample_rate,
                out=rows,
            )
            return rows
        duration = n / cfg.sample_rate

        def one(i: int) -> None:
            rows[i] = bubble_sample_step(
                self.ping_bank, par[i], self.gains[i], duration,
                self.bubble_rngs[i], sample_rate=cfg.sample_rate,
            ).samples

        indices = range(len(self.voices))
        if pool is not None:
            list(pool.map(one, indices))
        else:
            for i in indices:
                one(i)
        return rows


def _load_banks(config: RenderConfig) -> tuple[GrainBank | None, GrainBank | None]:
    if config.mode != "ad2":
        return None, None
    if config.grain_dir is None:
        return (
            make_synthetic_grains(config.master_seed, "snap", sample_rate=config.sample_rate),
            make_synthetic_grains(config.master_seed, "ping", sample_rate=config.sample_rate),
        )
    root = Path(config.grain_dir)
    snap_dir = root / "snaps" if (root / "snaps").is_dir() else root
    ping_dir = root / "pings" if (root / "pings").is_dir() else root
    return (
        load_grain_bank(snap_dir, sample_rate=config.sample_rate),
        load_grain_bank(ping_dir, sample_rate=config.sample_rate),
    )


def render(config: RenderConfig, timeline: Timeline) -> tuple[AmbisonicBlock, RenderReport]:
    """Run the full offline render; returns the 16-channel mix and its report.

    Each day step is round(step_seconds * sample_rate) frames and the fade
    tail round(fade_seconds * sample_rate), keeping day boundaries frame
    aligned; with the default timing the total is exact. Voices whose FM
    carrier reaches Nyquist are muted, counted, and warned about, never
    fatal.
    """
    config.validate()
    if not timeline.voices:
        raise EmptyDataset("timeline has no voices")
    if timeline.n_days != config.n_days:
        raise ConfigInvalid(
            f"timeline spans {timeline.n_days} days but config says {config.n_days}"
        )

    sr = config.sample_rate
    n_step = round(config.step_seconds * sr)
    n_fade = round(config.fade_seconds * sr)
    total = config.n_days * n_step + n_fade

    snap_bank, ping_bank = _load_banks(config)
    bank = _VoiceBank(timeline.voices, config, snap_bank, ping_bank)
    if bank.muted.any():
        log.warning("%d voice(s) muted: FM carrier at or above Nyquist",
                    int(bank.muted.sum()))
    n_voices = len(timeline.voices)
    scale = 1.0 / math.sqrt(n_voices)

    mix = np.zeros((N_CHANNELS, total))
    layer_w = {layer: np.zeros(total) for layer in LAYERS}  # omni per-layer mix
    events_per_day: list[float] = []

    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        def run_step(day: int | None, start: int, n: int) -> None:
            density, par = bank.controls(day, n)
            crackles = bank.crackle_rows(density, n, pool)
            bubbles = bank.bubble_rows(par, n, pool)

            layer_w["crackles"][start:start + n] += crackles.sum(axis=0) * scale
            layer_w["bubbles"][start:start + n] += bubbles.sum(axis=0) * scale
            mono = bank._mono[:, :n]
            np.add(crackles, bubbles, out=mono)
            bus = np.matmul(bank.coeffs.T, mono, out=bank._bus[:, :n])
            bus *= scale
            mix[:, start:start + n] += bus
            if day is not None:
                if config.solo == "bubbles":
                    events_per_day.append(0.0)
                else:
                    events_per_day.append(
                        math.fsum((density.sum(axis=1) / sr).tolist())
                    )

        for day in range(config.n_days):
            run_step(day, day * n_step, n_step)
        fade_start = config.n_days * n_step
        while fade_start < total:  # tail in step-sized chunks, states flow on
            n = min(n_step, total - fade_start)
            run_step(None, fade_start, n)
            fade_start += n
    finally:
        if pool is not None:
            pool.shutdown()

    if n_fade:
        envelope = 1.0 - (np.arange(n_fade) + 1.0) / n_fade  # last frame exactly 0
        mix[:, -n_fade:] *= envelope
        for layer in LAYERS:
            layer_w[layer][-n_fade:] *= envelope

    peak = float(np.max(np.abs(mix))) if mix.size else 0.0
    block = AmbisonicBlock(channels=mix, sample_rate=sr)
    block = peak_normalize(block, config.peak_target_dbfs)
    norm_scale = 10.0 ** (config.peak_target_dbfs / 20.0) / peak if peak > 0 else 1.0

    rms_db = {}
    for layer in LAYERS:
        energy = float(np.mean((layer_w[layer] * norm_scale) ** 2)) if total else 0.0
        rms_db[layer] = 10.0 * math.log10(energy) if energy > 0 else None

    report = RenderReport(
        duration_s=config.n_days * config.step_seconds + config.fade_seconds,
        total_frames=total,
        peak_before_norm=peak,
        muted_voices=int(bank.muted.sum()),
        rms_db=rms_db,
        config={k: (str(v) if isinstance(v, Path) else v) for k, v in asdict(config).items()},
        content_digest=content_digest(block),
        crackle_events_expected=events_per_day,
    )
    return block, report


def peak_normalize(block: AmbisonicBlock, target_dbfs: float) -> AmbisonicBlock:
    """Scale all channels uniformly so the peak hits the dBFS target.

    Silent blocks pass through unchanged.
    """
    peak = float(np.max(np.abs(block.channels))) if block.channels.size else 0.0
    if peak == 0.0:
        return block
    scale = 10.0 ** (target_dbfs / 20.0) / peak
    return AmbisonicBlock(channels=block.channels * scale, sample_rate=block.sample_rate)


def content_digest(block: AmbisonicBlock) -> str:
    """SHA-256 hex of the interleaved float32 samples (what the WAV stores)."""
    interleaved = np.ascontiguousarray(block.channels.astype(np.float32).T)
    return hashlib.sha256(interleaved.tobytes()).hexdigest()


def write_wav(path: str | Path, block, sample_rate: int | None = None) -> None:
    """Write a block (AmbisonicBlock or channels-first array) as float32 WAV."""
    if isinstance(block, AmbisonicBlock):
        wavio.write_wav(path, block.channels, block.sample_rate)
    elif isinstance(block, MonoBlock):
        wavio.write_wav(path, block.samples, block.sample_rate)
    else:
        if sample_rate is None:
            raise ValueError("sample_rate required for bare arrays")
        wavio.write_wav(path, np.asarray(block), sample_rate)


def render_to_files(config: RenderConfig, timeline: Timeline) -> RenderReport:
    """Render and write every output named in the config; returns the report."""
    block, report = render(config, timeline)
    if config.ambix_path:
        write_wav(config.ambix_path, block)
    if config.stereo_path:
        write_wav(config.stereo_path, stereo_downmix(block), block.sample_rate)
    if config.layout_path and config.decoded_path:
        layout = load_speaker_layout(config.layout_path)
        write_wav(config.decoded_path, decode_project(block, layout), block.sample_rate)
    if config.report_path:
        Path(config.report_path).write_text(report.to_json() + "\n")
    return report
