"""Field-to-synthesis-parameter mapping: the sonification dataframe.

Cluster coordinates are stretched from the dataset bounding box onto the
full sphere (azimuth [-pi, pi], elevation [-pi/2, pi/2]); keeping global
Earth coordinates would collapse every source into a near-single point.
Depth and PAR are normalized by the observation-level ranges so cluster
means always land inside [0, 1]; bleach percent maps to [0, 1] by /100.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .clustering import ClusterPoint
from .errors import DegenerateRange, EmptyDataset, IndexOutOfRange
from .ingest import BBox

log = logging.getLogger(__name__)

#: Impulse densities (events/second) at the healthy and fully-bleached ends.
DENSITY_HEALTHY_HZ = 0.471
DENSITY_BLEACHED_HZ = 0.023

#: Default depth boost at the deepest observation, in dB (0 dB at shallowest).
DEFAULT_DEPTH_BOOST_DB = 6.0


@dataclass(frozen=True)
class VoiceParams:
    """Synthesis control values for one cluster on one day."""

    azimuth_rad: float
    elevation_rad: float
    depth_norm: float
    par_norm: float
    bleach_frac: float
    density_hz: float
    depth_gain: float
    partial_index: int


@dataclass(frozen=True)
class ClusterVoice:
    """Static per-cluster mapping results; daily values derive from these."""

    cluster_id: int
    azimuth_rad: float
    elevation_rad: float
    depth_norm: float
    par_norm: float
    bleach_target: float
    depth_gain: float
    partial_index: int


@dataclass(frozen=True)
class Timeline:
    """All voices plus the day count; immutable once built."""

    n_days: int
    voices: tuple[ClusterVoice, ...]

    def params(self, voice_index: int, day: int) -> VoiceParams:
        """Control values of one voice on one day (0-based)."""
        v = self.voices[voice_index]
        bleach = daily_value(v.bleach_target, day, self.n_days)
        return VoiceParams(
            azimuth_rad=v.azimuth_rad,
            elevation_rad=v.elevation_rad,
            depth_norm=v.depth_norm,
            par_norm=daily_value(v.par_norm, day, self.n_days),
            bleach_frac=bleach,
            density_hz=bleach_to_density(bleach),
            depth_gain=v.depth_gain,
            partial_index=v.partial_index,
        )


def unit_normalize(x: float, lo: float, hi: float) -> float:
    """Map x from [lo, hi] to [0, 1], clamped at both ends."""
    if not lo < hi:
        raise DegenerateRange(f"range [{lo}, {hi}] has no width")
    return min(1.0, max(0.0, (x - lo) / (hi - lo)))


def geo_to_angles(lat_deg: float, lon_deg: float, bbox: BBox) -> tuple[float, float]:
    """Stretch a position from the bbox to full-sphere angles in radians.

    Longitude maps linearly onto azimuth [-pi, pi], latitude onto elevation
    [-pi/2, pi/2]; positions outside the box clamp to its edge.
    """
    azimuth = -math.pi + 2.0 * math.pi * unit_normalize(lon_deg, bbox.lon_min, bbox.lon_max)
    elevation = -0.5 * math.pi + math.pi * unit_normalize(lat_deg, bbox.lat_min, bbox.lat_max)
    return azimuth, elevation


def bleach_to_density(bleach_frac: float) -> float:
    """Exponentially interpolate impulse density, decreasing with bleaching.

    density(0) = 0.471 Hz (healthy), density(1) = 0.023 Hz (fully bleached).
    """
    ratio = DENSITY_BLEACHED_HZ / DENSITY_HEALTHY_HZ
    return DENSITY_HEALTHY_HZ * ratio ** bleach_frac


def depth_gain(depth_norm: float, boost_db: float = DEFAULT_DEPTH_BOOST_DB) -> float:
    """Linear gain boosting deeper clusters: 0 dB at 0 up to +boost_db at 1."""
    return 10.0 ** (boost_db * depth_norm / 20.0)


def daily_value(target: float, day: int, n_days: int) -> float:
    """Linear ramp value on `day`, reaching `target` exactly on the last day."""
    if not 0 <= day < n_days:
        raise IndexOutOfRange(f"day {day} outside 0..{n_days - 1}")
    return target * ((day + 1) / n_days)


def build_timeline(
    clusters: Sequence[ClusterPoint],
    bbox: BBox,
    n_days: int,
    depth_boost_db: float = DEFAULT_DEPTH_BOOST_DB,
) -> Timeline:
    """Derive the static per-voice parameters for every cluster.

    `bbox` must be the observation-level box (not recomputed from cluster
    means); degenerate dimensions are widened before use. The FM partial
    index is the 1-based rank of the cluster in label order.
    """
    if not clusters:
        raise EmptyDataset("no clusters to map")
    if n_days < 1:
        raise ValueError("n_days must be >= 1")
    box = bbox.widened()
    clamped = 0
    voices = []
    for i, c in enumerate(clusters):
        if not (box.lat_min <= c.lat_deg <= box.lat_max and box.lon_min <= c.lon_deg <= box.lon_max):
            clamped += 1
        azimuth, elevation = geo_to_angles(c.lat_deg, c.lon_deg, box)
        voices.append(
            ClusterVoice(
                cluster_id=i,
                azimuth_rad=azimuth,
                elevation_rad=elevation,
                depth_norm=unit_normalize(c.depth_m, box.depth_min, box.depth_max),
                par_norm=unit_normalize(c.par, box.par_min, box.par_max),
                bleach_target=min(1.0, max(0.0, c.bleach_pct / 100.0)),
                depth_gain=depth_gain(
                    unit_normalize(c.depth_m, box.depth_min, box.depth_max), depth_boost_db
                ),
                partial_index=i + 1,
            )
        )
    if clamped:
        log.warning("%d cluster position(s) outside the bbox were clamped", clamped)
    return Timeline(n_days=n_days, voices=tuple(voices))


DATAFRAME_HEADER = (
    "cluster_id", "azimuth_rad", "elevation_rad", "depth_norm", "par_norm",
    "bleach_frac_target", "density_hz_day0", "density_hz_final", "depth_gain",
    "partial_index",
)


def dataframe_rows(timeline: Timeline) -> list[tuple]:
    """Rows of the inspectable sonification dataframe CSV."""
    rows = []
    for v in timeline.voices:
        day0 = bleach_to_density(daily_value(v.bleach_target, 0, timeline.n_days))
        final = bleach_to_density(v.bleach_target)
        rows.append((
            v.cluster_id, repr(v.azimuth_rad), repr(v.elevation_rad),
            repr(v.depth_norm), repr(v.par_norm), repr(v.bleach_target),
            repr(day0), repr(final), repr(v.depth_gain), v.partial_index,
        ))
    return rows


def timeline_from_dataframe(rows: Iterable[dict], n_days: int) -> Timeline:
    """Rebuild a Timeline from parsed dataframe CSV rows (dicts by header)."""
    voices = []
    for row in rows:
        voices.append(
            ClusterVoice(
                cluster_id=int(row["cluster_id"]),
                azimuth_rad=float(row["azimuth_rad"]),
                elevation_rad=float(row["elevation_rad"]),
                depth_norm=float(row["depth_norm"]),
                par_norm=float(row["par_norm"]),
                bleach_target=float(row["bleach_frac_target"]),
                depth_gain=float(row["depth_gain"]),
                partial_index=int(row["partial_index"]),
            )
        )
    if not voices:
        raise EmptyDataset("dataframe has no voices")
    return Timeline(n_days=n_days, voices=tuple(voices))
