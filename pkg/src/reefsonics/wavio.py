"""Multichannel RIFF/WAVE I/O, IEEE float32, channels-first arrays."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile


def write_wav(path: str | Path, channels: np.ndarray, sample_rate: int) -> None:
    """Write `channels` (n_channels, n_frames) as interleaved float32 WAV.

    The float round trip is lossless: read_wav returns the same bits.
    Raises OSError when the parent directory does not exist.
    """
    path = Path(path)
    if not path.parent.exists():
        raise FileNotFoundError(f"parent directory does not exist: {path.parent}")
    channels = np.atleast_2d(np.asarray(channels))
    data = np.ascontiguousarray(channels.astype(np.float32, copy=False).T)
    wavfile.write(path, int(sample_rate), data)


def read_wav(path: str | Path) -> tuple[int, np.ndarray]:
    """Read a WAV file; returns (sample_rate, channels) channels-first.

    The sample dtype is whatever the file stores (int16/int32/float32...);
    scaling integer PCM to [-1, 1] is up to the caller.
    """
    sample_rate, data = wavfile.read(path)
    if data.ndim == 1:
        data = data[:, np.newaxis]
    return int(sample_rate), data.T
