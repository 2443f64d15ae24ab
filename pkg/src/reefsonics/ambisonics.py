"""Order-3 ambisonic encoding, bus mixing, and decoding (AmbiX convention).

Channels follow ACN ordering (index = l*l + l + m) with SN3D normalization;
azimuth is theta in [-pi, pi] (0 = front, positive left) and elevation is
phi in [-pi/2, pi/2]. The spherical harmonics are evaluated from their
closed-form associated-Legendre expressions up to degree 3.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigInvalid, LengthMismatch
from .synthesis import MonoBlock

ORDER = 3
N_CHANNELS = (ORDER + 1) ** 2  # 16

#: Spherical-harmonic degree l of each ACN channel.
ACN_DEGREE = np.array([int(math.isqrt(acn)) for acn in range(N_CHANNELS)])

#: Per-channel factor turning SN3D coefficients into orthonormal N3D.
SN3D_TO_N3D = np.sqrt(2.0 * ACN_DEGREE + 1.0)

_SQRT3_2 = math.sqrt(3.0) / 2.0
_SQRT15_2 = math.sqrt(15.0) / 2.0
_SQRT3_8 = math.sqrt(3.0 / 8.0)
_SQRT5_8 = math.sqrt(5.0 / 8.0)


def sh_coeffs(azimuth, elevation) -> np.ndarray:
    """Real spherical harmonics to degree 3 at (azimuth, elevation).

    Accepts scalars or broadcastable arrays; returns shape (..., 16) in ACN
    order with SN3D normalization, so channel 0 is identically 1.
    """
    az = np.asarray(azimuth, dtype=float)
    el = np.asarray(elevation, dtype=float)
    az, el = np.broadcast_arrays(az, el)

    st, ct = np.sin(az), np.cos(az)
    s2t, c2t = np.sin(2.0 * az), np.cos(2.0 * az)
    s3t, c3t = np.sin(3.0 * az), np.cos(3.0 * az)
    sp, cp = np.sin(el), np.cos(el)
    s2p = np.sin(2.0 * el)
    sp2 = sp * sp
    cp2 = cp * cp
    cp3 = cp2 * cp

    return np.stack(
        [
            np.ones_like(az),                      # 0  W
            cp * st,                               # 1  Y
            sp,                                    # 2  Z
            cp * ct,                               # 3  X
            _SQRT3_2 * cp2 * s2t,                  # 4  V
            _SQRT3_2 * s2p * st,                   # 5  T
            0.5 * (3.0 * sp2 - 1.0),               # 6  R
            _SQRT3_2 * s2p * ct,                   # 7  S
            _SQRT3_2 * cp2 * c2t,                  # 8  U
            _SQRT5_8 * cp3 * s3t,                  # 9  Q
            _SQRT15_2 * sp * cp2 * s2t,            # 10 O
            _SQRT3_8 * cp * (5.0 * sp2 - 1.0) * st,  # 11 M
            0.5 * sp * (5.0 * sp2 - 3.0),          # 12 K
            _SQRT3_8 * cp * (5.0 * sp2 - 1.0) * ct,  # 13 L
            _SQRT15_2 * sp * cp2 * c2t,            # 14 N
            _SQRT5_8 * cp3 * c3t,                  # 15 P
        ],
        axis=-1,
    )


@dataclass
class AmbisonicBlock:
    """16 equal-length channel rows of samples at a common rate."""

    channels: np.ndarray  # shape (16, n_frames)
    sample_rate: int

    def __post_init__(self):
        self.channels = np.atleast_2d(np.asarray(self.channels))
        if self.channels.shape[0] != N_CHANNELS:
            raise ValueError(
                f"expected {N_CHANNELS} channels, got {self.channels.shape[0]}"
            )

    @property
    def n_frames(self) -> int:
        return self.channels.shape[1]


def encode(block: MonoBlock, coeffs: np.ndarray) -> AmbisonicBlock:
    """Distribute a mono block over the 16 channels: channel c = coeffs[c] * x."""
    coeffs = np.asarray(coeffs, dtype=float).reshape(N_CHANNELS)
    return AmbisonicBlock(
        channels=coeffs[:, np.newaxis] * np.asarray(block.samples)[np.newaxis, :],
        sample_rate=block.sample_rate,
    )


def mix(blocks: Sequence[AmbisonicBlock]) -> AmbisonicBlock:
    """Channelwise sum in the given order (callers pass ascending cluster id).

    The fixed summation order makes the result exactly reproducible.
    """
    if not blocks:
        raise ValueError("nothing to mix")
    first = blocks[0]
    out = first.channels.astype(float).copy()
    for b in blocks[1:]:
        if b.n_frames != first.n_frames or b.sample_rate != first.sample_rate:
            raise LengthMismatch("mixed blocks must share length and sample rate")
        out += b.channels
    return AmbisonicBlock(channels=out, sample_rate=first.sample_rate)


@dataclass(frozen=True)
class SpeakerLayout:
    """Decoder target: speaker directions in radians plus display names."""

    directions: tuple[tuple[float, float], ...]
    names: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.directions)


def load_speaker_layout(path: str | Path) -> SpeakerLayout:
    """Read a layout JSON: [{name, azimuth_deg, elevation_deg}, ...]."""
    entries = json.loads(Path(path).read_text())
    if not isinstance(entries, list) or not entries:
        raise ConfigInvalid(f"layout {path}: expected a non-empty JSON array")
    directions, names = [], []
    for i, e in enumerate(entries):
        try:
            az = math.radians(float(e["azimuth_deg"]))
            el = math.radians(float(e["elevation_deg"]))
            name = str(e.get("name", f"spk{i}"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigInvalid(f"layout {path}: bad entry {i}: {exc}") from None
        if not (-math.pi <= az <= math.pi and -math.pi / 2 <= el <= math.pi / 2):
            raise ConfigInvalid(f"layout {path}: entry {i} angles out of range")
        directions.append((az, el))
        names.append(name)
    return SpeakerLayout(directions=tuple(directions), names=tuple(names))


def decode_project(block: AmbisonicBlock, layout: SpeakerLayout) -> np.ndarray:
    """Sampling (projective) decode to the layout; returns (n_speakers, n).

    Speaker gains are the N3D harmonics at the speaker direction applied to
    the N3D-converted signal; per SN3D channel that collapses to a (2l+1)
    weight. The 1/num_speakers scale keeps dense layouts from clipping.
    """
    dirs = np.asarray(layout.directions, dtype=float)
    harmonics = sh_coeffs(dirs[:, 0], dirs[:, 1])  # (S, 16), SN3D
    gains = harmonics * (SN3D_TO_N3D ** 2)[np.newaxis, :]
    return (gains @ block.channels) / len(layout)


def stereo_downmix(block: AmbisonicBlock) -> np.ndarray:
    """First-order virtual cardioids at azimuth +/-45 deg; returns (2, n)."""
    w = block.channels[0]
    y = block.channels[1]
    x = block.channels[3]
    angles = (math.pi / 4.0, -math.pi / 4.0)
    return np.stack([0.5 * (w + math.cos(a) * x + math.sin(a) * y) for a in angles])
