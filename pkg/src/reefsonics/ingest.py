"""Observation ingestion: CSV parsing, validation, bounding boxes, synthetic data.

The on-disk format is plain RFC-4180 CSV with a header row. A schema map
translates the five semantic fields (lat, lon, depth, bleach, par) to the
column names actually present in the file, so arbitrarily-named tabular
exports can be ingested without editing them.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import BadValue, EmptyDataset, MissingColumn

log = logging.getLogger(__name__)

FIELDS = ("lat", "lon", "depth", "bleach", "par")

#: Default schema: column names equal the semantic field names.
DEFAULT_SCHEMA: dict[str, str] = {name: name for name in FIELDS}


@dataclass(frozen=True)
class Observation:
    """One validated record: position, depth, bleach percentage, PAR.

    Invariants: lat in [-90, 90], lon in [-180, 180], depth > 0,
    bleach_pct in [0, 100], par >= 0. PAR carries no unit here and is
    treated as a dimensionless nonnegative scalar.
    """

    lat_deg: float
    lon_deg: float
    depth_m: float
    bleach_pct: float
    par: float


@dataclass(frozen=True)
class BBox:
    """Componentwise min/max over a dataset (axis-aligned, degrees/meters)."""

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    depth_min: float
    depth_max: float
    par_min: float
    par_max: float

    def widened(self, pad: float = 0.5) -> "BBox":
        """Return a copy with any zero-width dimension expanded by +/-pad.

        Keeps downstream rescaling well defined for degenerate single-valued
        datasets; nondegenerate dimensions are returned unchanged.
        """
        def fix(lo: float, hi: float) -> tuple[float, float]:
            return (lo - pad, hi + pad) if lo == hi else (lo, hi)

        lat = fix(self.lat_min, self.lat_max)
        lon = fix(self.lon_min, self.lon_max)
        depth = fix(self.depth_min, self.depth_max)
        par = fix(self.par_min, self.par_max)
        return BBox(lat[0], lat[1], lon[0], lon[1], depth[0], depth[1], par[0], par[1])


#: Default box for the synthetic generator: a few degrees of tropical
#: archipelago, reef-survey depths, and an arbitrary nonnegative PAR span
#: (normalization is dataset-relative anyway).
DEFAULT_SYNTH_BBOX = BBox(
    lat_min=18.9, lat_max=22.3,
    lon_min=-159.8, lon_max=-154.8,
    depth_min=0.6, depth_max=29.8,
    par_min=0.0, par_max=60.0,
)

# (low, high, low_inclusive) validation bounds per semantic field
_BOUNDS = {
    "lat": (-90.0, 90.0, True),
    "lon": (-180.0, 180.0, True),
    "depth": (0.0, math.inf, False),
    "bleach": (0.0, 100.0, True),
    "par": (0.0, math.inf, True),
}


def _parse_field(row: Sequence[str], index: int, field: str, row_num: int) -> float:
    if index >= len(row) or row[index].strip() == "":
        raise BadValue(f"row {row_num}: missing value for '{field}'", row=row_num, field=field)
    text = row[index].strip()
    try:
        value = float(text)
    except ValueError:
        raise BadValue(
            f"row {row_num}: non-numeric value {text!r} for '{field}'",
            row=row_num, field=field,
        ) from None
    lo, hi, lo_inclusive = _BOUNDS[field]
    ok = math.isfinite(value) and (value >= lo if lo_inclusive else value > lo) and value <= hi
    if not ok:
        raise BadValue(
            f"row {row_num}: value {value!r} out of range for '{field}'",
            row=row_num, field=field,
        )
    return value


def parse_observations(
    csv_text: str,
    schema: Mapping[str, str] | None = None,
    *,
    skip_bad_rows: bool = False,
    bad_rows: list[BadValue] | None = None,
) -> list[Observation]:
    """Parse CSV text into a list of validated observations, order preserved.

    Rows with missing, non-numeric, or out-of-range fields raise
    :class:`BadValue` carrying the 1-based data row number. With
    ``skip_bad_rows`` they are dropped (and appended to ``bad_rows`` when a
    list is supplied) instead of raising; data loss is never silent.

    Raises MissingColumn if the schema names a column absent from the
    header, and EmptyDataset if no valid data rows remain.
    """
    schema = dict(DEFAULT_SCHEMA if schema is None else schema)
    for field in FIELDS:
        if field not in schema:
            raise MissingColumn(f"schema does not map semantic field '{field}'")

    reader = csv.reader(io.StringIO(csv_text))
    header = next(reader, None)
    if header is None:
        raise EmptyDataset("CSV has no header row")
    header = [h.strip() for h in header]

    col_index: dict[str, int] = {}
    for field in FIELDS:
        column = schema[field]
        if column not in header:
            raise MissingColumn(f"column {column!r} (field '{field}') not in header {header}")
        col_index[field] = header.index(column)

    observations: list[Observation] = []
    row_num = 0
    for row in reader:
        if not row or all(cell.strip() == "" for cell in row):
            continue  # blank line, not a data row
        row_num += 1
        try:
            values = {field: _parse_field(row, col_index[field], field, row_num) for field in FIELDS}
        except BadValue as exc:
            if not skip_bad_rows:
                raise
            log.warning("skipping bad row: %s", exc)
            if bad_rows is not None:
                bad_rows.append(exc)
            continue
        observations.append(
            Observation(
                lat_deg=values["lat"],
                lon_deg=values["lon"],
                depth_m=values["depth"],
                bleach_pct=values["bleach"],
                par=values["par"],
            )
        )
    if not observations:
        raise EmptyDataset("no valid data rows")
    return observations


def observations_to_csv(observations: Sequence[Observation], schema: Mapping[str, str] | None = None) -> str:
    """Serialize observations back to CSV with round-trip exact floats."""
    schema = dict(DEFAULT_SCHEMA if schema is None else schema)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([schema[field] for field in FIELDS])
    for obs in observations:
        writer.writerow([
            repr(obs.lat_deg), repr(obs.lon_deg), repr(obs.depth_m),
            repr(obs.bleach_pct), repr(obs.par),
        ])
    return out.getvalue()


def compute_bbox(observations: Sequence[Observation]) -> BBox:
    """Componentwise min/max over all observations."""
    if not observations:
        raise EmptyDataset("cannot compute bounding box of an empty dataset")
    lats = [o.lat_deg for o in observations]
    lons = [o.lon_deg for o in observations]
    depths = [o.depth_m for o in observations]
    pars = [o.par for o in observations]
    return BBox(
        lat_min=min(lats), lat_max=max(lats),
        lon_min=min(lons), lon_max=max(lons),
        depth_min=min(depths), depth_max=max(depths),
        par_min=min(pars), par_max=max(pars),
    )


def dataset_stats(observations: Sequence[Observation]) -> dict:
    """Summary dict written as the JSON sidecar next to a validated CSV."""
    bbox = compute_bbox(observations)
    bleaches = [o.bleach_pct for o in observations]
    return {
        "count": len(observations),
        "bbox": {
            "lat": [bbox.lat_min, bbox.lat_max],
            "lon": [bbox.lon_min, bbox.lon_max],
            "depth": [bbox.depth_min, bbox.depth_max],
            "par": [bbox.par_min, bbox.par_max],
        },
        "field_ranges": {
            "lat": [bbox.lat_min, bbox.lat_max],
            "lon": [bbox.lon_min, bbox.lon_max],
            "depth": [bbox.depth_min, bbox.depth_max],
            "bleach": [min(bleaches), max(bleaches)],
            "par": [bbox.par_min, bbox.par_max],
        },
    }


def bbox_from_stats(stats: Mapping) -> BBox:
    """Rebuild a BBox from a stats sidecar dict."""
    box = stats["bbox"]
    return BBox(
        lat_min=float(box["lat"][0]), lat_max=float(box["lat"][1]),
        lon_min=float(box["lon"][0]), lon_max=float(box["lon"][1]),
        depth_min=float(box["depth"][0]), depth_max=float(box["depth"][1]),
        par_min=float(box["par"][0]), par_max=float(box["par"][1]),
    )


def generate_synthetic_dataset(
    seed: int,
    n: int,
    bbox: BBox | None = None,
    n_blobs: int = 12,
) -> list[Observation]:
    """Deterministically generate `n` observations grouped in Gaussian blobs.

    Positions cluster around `n_blobs` uniformly placed centers (sigma =
    1.5% of each axis span, clipped to the box) so density clustering finds
    structure; depth and PAR are uniform over the box ranges and bleach is
    uniform over [0, 100]. Pure in (seed, n, bbox, n_blobs).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n_blobs < 1:
        raise ValueError("n_blobs must be >= 1")
    box = DEFAULT_SYNTH_BBOX if bbox is None else bbox
    rng = np.random.default_rng(seed)

    lat_span = box.lat_max - box.lat_min
    lon_span = box.lon_max - box.lon_min
    centers_lat = rng.uniform(box.lat_min, box.lat_max, n_blobs)
    centers_lon = rng.uniform(box.lon_min, box.lon_max, n_blobs)
    blob = rng.integers(0, n_blobs, n)
    lat = centers_lat[blob] + rng.normal(0.0, 0.015 * lat_span, n)
    lon = centers_lon[blob] + rng.normal(0.0, 0.015 * lon_span, n)
    lat = np.clip(lat, box.lat_min, box.lat_max)
    lon = np.clip(lon, box.lon_min, box.lon_max)

    depth = rng.uniform(box.depth_min, box.depth_max, n)
    bleach = rng.uniform(0.0, 100.0, n)
    par = rng.uniform(box.par_min, box.par_max, n)

    return [
        Observation(
            lat_deg=float(lat[i]), lon_deg=float(lon[i]), depth_m=float(depth[i]),
            bleach_pct=float(bleach[i]), par=float(par[i]),
        )
        for i in range(n)
    ]
