"""reefsonics: coral-bleaching observations rendered as spatial audio.

The pipeline clusters observations by location, maps the cluster fields to
synthesis controls (impulse density, FM spectra, gains, sphere angles),
renders two sound layers per cluster, and encodes everything as sources on
an order-3 ambisonic sphere.
"""

__version__ = "0.1.0"

from .ambisonics import AmbisonicBlock, SpeakerLayout, sh_coeffs
from .clustering import ClusterPoint, OpticsOrdering, aggregate, extract_clusters, optics_run
from .ingest import BBox, Observation, compute_bbox, generate_synthetic_dataset, parse_observations
from .mapping import Timeline, VoiceParams, build_timeline
from .renderer import RenderConfig, RenderReport, render
from .synthesis import GrainBank, MonoBlock

__all__ = [
    "__version__",
    "AmbisonicBlock",
    "BBox",
    "ClusterPoint",
    "GrainBank",
    "MonoBlock",
    "Observation",
    "OpticsOrdering",
    "RenderConfig",
    "RenderReport",
    "SpeakerLayout",
    "Timeline",
    "VoiceParams",
    "aggregate",
    "build_timeline",
    "compute_bbox",
    "extract_clusters",
    "generate_synthetic_dataset",
    "optics_run",
    "parse_observations",
    "render",
    "sh_coeffs",
]
