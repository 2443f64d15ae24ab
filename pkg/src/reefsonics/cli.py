"""Command-line pipeline: ingest -> cluster -> map -> render.

Each stage writes its artifact plus a JSON sidecar carrying the config
digest, so every intermediate is inspectable and mismatched reruns are
detectable. `pipeline` chains all stages from one JSON config; the
individual subcommands run stages against existing artifacts.

Exit codes: 0 ok, 2 config error, 3 I/O error, 4 data validation error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .clustering import ClusterPoint, aggregate, extract_clusters, optics_run, reachability_rows
from .errors import (
    ConfigInvalid,
    DataError,
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_IO,
    EXIT_OK,
    SonificationError,
)
from .ingest import (
    DEFAULT_SCHEMA,
    bbox_from_stats,
    dataset_stats,
    generate_synthetic_dataset,
    observations_to_csv,
    parse_observations,
)
from .mapping import (
    DATAFRAME_HEADER,
    DEFAULT_DEPTH_BOOST_DB,
    Timeline,
    build_timeline,
    dataframe_rows,
    timeline_from_dataframe,
)
from .renderer import RenderConfig, render_to_files

log = logging.getLogger(__name__)

CLUSTER_HEADER = ("cluster_id", "lat", "lon", "depth", "bleach", "par", "member_count")
REACHABILITY_HEADER = ("index", "point_id", "reachability")

DEFAULT_EPS_DEG = 0.05  # location threshold in degrees; tune per dataset


@dataclass
class PipelineConfig:
    """Everything `pipeline` needs, loadable from one JSON file.

    Defaults: min_samples 2, 78 days of 1 s steps, 5 s fade. Either
    `input_csv` or `synthetic` must be provided.
    """

    workdir: str = "work"
    input_csv: str | None = None
    schema: dict = field(default_factory=lambda: dict(DEFAULT_SCHEMA))
    skip_bad_rows: bool = False
    synthetic: dict | None = None  # {"seed": int, "n": int, "blobs": int}
    min_samples: int = 2
    eps: float = DEFAULT_EPS_DEG
    n_days: int = 78
    depth_boost_db: float = DEFAULT_DEPTH_BOOST_DB
    mode: str = "ad1"  # "ad1" | "ad2" | "both"
    render: RenderConfig = field(default_factory=RenderConfig)

    def validate(self) -> None:
        if self.input_csv is None and self.synthetic is None:
            raise ConfigInvalid("config needs 'input_csv' or 'synthetic'")
        if self.synthetic is not None and "n" not in self.synthetic:
            raise ConfigInvalid("config field 'synthetic' needs 'n'")
        if self.mode not in ("ad1", "ad2", "both"):
            raise ConfigInvalid("mode must be 'ad1', 'ad2', or 'both'")
        if self.min_samples < 2:
            raise ConfigInvalid("min_samples must be >= 2")
        if not self.eps > 0:
            raise ConfigInvalid("eps must be > 0")
        if self.n_days < 1:
            raise ConfigInvalid("n_days must be >= 1")


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    """Parse and validate a pipeline config JSON file."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigInvalid(f"{path}: expected a JSON object")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigInvalid(f"{path}: unknown config fields {sorted(unknown)}")
    render_raw = raw.pop("render", {})
    render_known = {f.name for f in fields(RenderConfig)}
    render_unknown = set(render_raw) - render_known
    if render_unknown:
        raise ConfigInvalid(f"{path}: unknown render fields {sorted(render_unknown)}")
    config = PipelineConfig(**raw, render=RenderConfig(**render_raw)) if render_raw else PipelineConfig(**raw)
    config.validate()
    return config


def config_digest(config: PipelineConfig) -> str:
    """Stable digest of the full effective config, stamped into sidecars."""
    payload = {f.name: getattr(config, f.name) for f in fields(config)}
    payload["render"] = {f.name: getattr(config.render, f.name) for f in fields(config.render)}
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_sidecar(path: Path, payload: dict, digest: str) -> None:
    payload = dict(payload)
    payload["config_digest"] = digest
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_clusters_csv(path: Path) -> list[ClusterPoint]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        ClusterPoint(
            lat_deg=float(r["lat"]), lon_deg=float(r["lon"]), depth_m=float(r["depth"]),
            bleach_pct=float(r["bleach"]), par=float(r["par"]),
            member_count=int(r["member_count"]),
        )
        for r in rows
    ]


def _read_timeline_csv(path: Path, n_days: int) -> Timeline:
    with open(path, newline="") as fh:
        return timeline_from_dataframe(csv.DictReader(fh), n_days)


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def stage_ingest(config: PipelineConfig, workdir: Path, digest: str) -> tuple[Path, Path]:
    """Validate (or synthesize) observations; write validated.csv + stats.json."""
    if config.synthetic is not None:
        synth = config.synthetic
        observations = generate_synthetic_dataset(
            seed=int(synth.get("seed", 0)),
            n=int(synth["n"]),
            n_blobs=int(synth.get("blobs", 12)),
        )
        skipped: list = []
    else:
        text = Path(config.input_csv).read_text(encoding="utf-8")
        skipped = []
        observations = parse_observations(
            text, config.schema, skip_bad_rows=config.skip_bad_rows, bad_rows=skipped,
        )
    validated = workdir / "validated.csv"
    stats_path = workdir / "stats.json"
    validated.write_text(observations_to_csv(observations), encoding="utf-8")
    stats = dataset_stats(observations)
    stats["skipped_rows"] = len(skipped)
    _write_sidecar(stats_path, stats, digest)
    if skipped:
        log.warning("ingest: skipped %d bad row(s)", len(skipped))
    return validated, stats_path


def stage_cluster(config: PipelineConfig, workdir: Path, digest: str,
                  validated: Path) -> Path:
    """OPTICS + threshold extraction + aggregation; write clusters.csv."""
    observations = parse_observations(validated.read_text(encoding="utf-8"))
    points = [(o.lat_deg, o.lon_deg) for o in observations]
    ordering = optics_run(points, min_samples=config.min_samples)
    labels = extract_clusters(ordering, config.eps)
    clusters = aggregate(observations, labels)

    clusters_path = workdir / "clusters.csv"
    _write_csv(
        clusters_path, CLUSTER_HEADER,
        [
            (i, repr(c.lat_deg), repr(c.lon_deg), repr(c.depth_m), repr(c.bleach_pct),
             repr(c.par), c.member_count)
            for i, c in enumerate(clusters)
        ],
    )
    _write_csv(workdir / "reachability.csv", REACHABILITY_HEADER,
               [(i, p, repr(r)) for i, p, r in reachability_rows(ordering)])
    _write_sidecar(
        workdir / "clusters_meta.json",
        {
            "n_points": len(observations),
            "n_clusters": len(clusters),
            "n_noise": int((labels == -1).sum()),
            "eps": config.eps,
            "min_samples": config.min_samples,
        },
        digest,
    )
    return clusters_path


def stage_map(config: PipelineConfig, workdir: Path, digest: str,
              clusters_path: Path, stats_path: Path) -> Path:
    """Build the sonification dataframe from clusters + dataset stats."""
    clusters = _read_clusters_csv(clusters_path)
    stats = json.loads(stats_path.read_text())
    timeline = build_timeline(
        clusters, bbox_from_stats(stats), config.n_days, config.depth_boost_db,
    )
    dataframe_path = workdir / "dataframe.csv"
    _write_csv(dataframe_path, DATAFRAME_HEADER, dataframe_rows(timeline))
    _write_sidecar(
        workdir / "dataframe_meta.json",
        {"n_voices": len(timeline.voices), "n_days": timeline.n_days},
        digest,
    )
    return dataframe_path


def stage_render(config: PipelineConfig, workdir: Path, mode: str,
                 dataframe_path: Path, digest: str) -> Path:
    """Render one mode from the dataframe; write WAVs + report JSON."""
    timeline = _read_timeline_csv(dataframe_path, config.n_days)
    render_config = replace(
        config.render,
        mode=mode,
        n_days=config.n_days,
        depth_boost_db=config.depth_boost_db,
        ambix_path=str(workdir / f"reef_{mode}_ambix.wav"),
        stereo_path=str(workdir / f"reef_{mode}_stereo.wav"),
        report_path=str(workdir / f"reef_{mode}_report.json"),
        decoded_path=(
            str(workdir / f"reef_{mode}_decoded.wav") if config.render.layout_path else None
        ),
    )
    report = render_to_files(render_config, timeline)
    report_path = Path(render_config.report_path)
    payload = json.loads(report_path.read_text())
    payload["config_digest"] = digest
    report_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    log.info("rendered %s: %.1f s, digest %s", mode, report.duration_s,
             report.content_digest[:12])
    return report_path


def run_pipeline(config: PipelineConfig) -> dict[str, str]:
    """Run every stage in order; returns {artifact name: path}."""
    config.validate()
    workdir = Path(config.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    digest = config_digest(config)

    artifacts: dict[str, str] = {}
    validated, stats_path = _run_stage("ingest", stage_ingest, config, workdir, digest)
    artifacts["validated_csv"] = str(validated)
    artifacts["stats_json"] = str(stats_path)

    clusters_path = _run_stage("cluster", stage_cluster, config, workdir, digest, validated)
    artifacts["clusters_csv"] = str(clusters_path)
    artifacts["reachability_csv"] = str(workdir / "reachability.csv")

    dataframe_path = _run_stage("map", stage_map, config, workdir, digest,
                                clusters_path, stats_path)
    artifacts["dataframe_csv"] = str(dataframe_path)

    modes = ("ad1", "ad2") if config.mode == "both" else (config.mode,)
    for mode in modes:
        report_path = _run_stage(f"render:{mode}", stage_render, config, workdir, mode,
                                 dataframe_path, digest)
        artifacts[f"report_{mode}"] = str(report_path)
        artifacts[f"ambix_{mode}"] = str(workdir / f"reef_{mode}_ambix.wav")
        artifacts[f"stereo_{mode}"] = str(workdir / f"reef_{mode}_stereo.wav")
    return artifacts


def _run_stage(name, func, *args):
    try:
        return func(*args)
    except (SonificationError, OSError) as exc:
        raise type(exc)(f"{name}: {exc}") from exc


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reefsonics",
        description="Sonify coral-bleaching observations onto an order-3 ambisonic sphere.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="validate a CSV (or synthesize one) and write stats")
    p_ingest.add_argument("--input", help="source CSV path")
    p_ingest.add_argument("--schema", help="JSON file mapping lat/lon/depth/bleach/par to column names")
    p_ingest.add_argument("--synthetic", type=int, metavar="N", help="generate N synthetic observations instead of reading a file")
    p_ingest.add_argument("--seed", type=int, default=0, help="synthetic generator seed")
    p_ingest.add_argument("--blobs", type=int, default=12, help="synthetic spatial blob count")
    p_ingest.add_argument("--skip-bad-rows", action="store_true", help="drop and count bad rows instead of failing")
    p_ingest.add_argument("--out-dir", required=True)

    p_cluster = sub.add_parser("cluster", help="re-cluster a validated CSV by location")
    p_cluster.add_argument("--input", required=True, help="validated CSV from `ingest`")
    p_cluster.add_argument("--eps", type=float, default=DEFAULT_EPS_DEG, help="extraction threshold in degrees")
    p_cluster.add_argument("--min-samples", type=int, default=2)
    p_cluster.add_argument("--out-dir", required=True)

    p_map = sub.add_parser("map", help="build the sonification dataframe")
    p_map.add_argument("--clusters", required=True, help="clusters CSV from `cluster`")
    p_map.add_argument("--stats", required=True, help="stats JSON from `ingest`")
    p_map.add_argument("--n-days", type=int, default=78)
    p_map.add_argument("--depth-boost-db", type=float, default=DEFAULT_DEPTH_BOOST_DB)
    p_map.add_argument("--out-dir", required=True)

    p_render = sub.add_parser("render", help="render audio from a sonification dataframe")
    p_render.add_argument("--config", help="pipeline config JSON (render + timing sections used)")
    p_render.add_argument("--dataframe", help="dataframe CSV (defaults to <workdir>/dataframe.csv)")
    p_render.add_argument("--mode", choices=["ad1", "ad2"], help="override render mode")
    p_render.add_argument("--seed", type=int, help="override master seed")
    p_render.add_argument("--out-dir", help="override output directory")
    p_render.add_argument("--solo", choices=["crackles", "bubbles"], help="render one layer only")
    p_render.add_argument("--layout", help="speaker layout JSON for an extra decoded WAV")
    p_render.add_argument("--workers", type=int, help="render worker threads")

    p_pipe = sub.add_parser("pipeline", help="run ingest, cluster, map, and render in sequence")
    p_pipe.add_argument("--config", required=True, help="pipeline config JSON")

    return parser


def _load_schema(path: str | None) -> dict:
    if path is None:
        return dict(DEFAULT_SCHEMA)
    schema = json.loads(Path(path).read_text())
    if not isinstance(schema, dict):
        raise ConfigInvalid(f"{path}: schema must be a JSON object")
    return schema


def cmd_ingest(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.synthetic is None and args.input is None:
        raise ConfigInvalid("ingest needs --input or --synthetic")
    config = PipelineConfig(
        workdir=str(out_dir),
        input_csv=args.input,
        schema=_load_schema(args.schema),
        skip_bad_rows=args.skip_bad_rows,
        synthetic=(
            {"seed": args.seed, "n": args.synthetic, "blobs": args.blobs}
            if args.synthetic is not None else None
        ),
    )
    validated, stats = stage_ingest(config, out_dir, config_digest(config))
    print(validated)
    print(stats)
    return EXIT_OK


def cmd_cluster(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = PipelineConfig(
        workdir=str(out_dir), input_csv=args.input,
        eps=args.eps, min_samples=args.min_samples,
    )
    config.validate()
    path = stage_cluster(config, out_dir, config_digest(config), Path(args.input))
    print(path)
    print(out_dir / "reachability.csv")
    return EXIT_OK


def cmd_map(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = PipelineConfig(
        workdir=str(out_dir), n_days=args.n_days, depth_boost_db=args.depth_boost_db,
    )
    path = stage_map(config, out_dir, config_digest(config),
                     Path(args.clusters), Path(args.stats))
    print(path)
    return EXIT_OK


def cmd_render(args) -> int:
    if args.config:
        config = load_pipeline_config(args.config)
    else:
        config = PipelineConfig()
    if args.out_dir:
        config.workdir = args.out_dir
    if args.mode:
        config.mode = args.mode
    if args.seed is not None:
        config.render.master_seed = args.seed
    if args.solo:
        config.render.solo = args.solo
    if args.layout:
        config.render.layout_path = args.layout
    if args.workers is not None:
        config.render.workers = args.workers
    workdir = Path(config.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    dataframe = Path(args.dataframe) if args.dataframe else workdir / "dataframe.csv"
    if not dataframe.exists():
        raise ConfigInvalid(f"dataframe CSV not found: {dataframe} (run `map` first)")
    modes = ("ad1", "ad2") if config.mode == "both" else (config.mode,)
    for mode in modes:
        report_path = stage_render(config, workdir, mode, dataframe, config_digest(config))
        print(report_path)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    config = load_pipeline_config(args.config)
    artifacts = run_pipeline(config)
    for name, path in sorted(artifacts.items()):
        print(f"{name}: {path}")
    return EXIT_OK


_COMMANDS = {
    "ingest": cmd_ingest,
    "cluster": cmd_cluster,
    "map": cmd_map,
    "render": cmd_render,
    "pipeline": cmd_pipeline,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SonificationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
