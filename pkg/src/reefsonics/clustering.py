"""Location re-clustering: OPTICS ordering, eps-threshold extraction, aggregation.

The distance metric is plain Euclidean on (lat, lon) decimal degrees: the
datasets this targets span a few degrees at most, and raw degrees keep the
min_samples=2 extraction exactly equal to connected components of the
eps-distance graph, which the test suite uses as an oracle.

Everything here is deterministic: seed points are expanded in ascending
index order and the priority queue breaks reachability ties by lowest
original index.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInput, LengthMismatch
from .ingest import Observation

#: Label assigned to points that belong to no cluster at the chosen eps.
NOISE = -1


@dataclass(frozen=True)
class OpticsOrdering:
    """Result of an OPTICS run over one point set.

    order: visit order, a permutation of 0..n-1.
    reachability: per point; +inf for the first point of each processing run.
    core_distance: per point; the distance to its (min_samples-1)-th nearest
        other point, +inf when there are not enough neighbors within max_eps.
    """

    order: np.ndarray
    reachability: np.ndarray
    core_distance: np.ndarray


def optics_run(
    points: Sequence[tuple[float, float]] | np.ndarray,
    min_samples: int = 2,
    max_eps: float = math.inf,
) -> OpticsOrdering:
    """Compute the OPTICS ordering of 2-D points under Euclidean distance.

    With min_samples=2 the core distance of a point is exactly its
    nearest-neighbor distance.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or (pts.size and pts.shape[1] != 2):
        raise ValueError("points must be an (n, 2) array-like")
    n = len(pts)
    if n == 0:
        raise EmptyInput("optics_run needs at least one point")
    if min_samples < 2:
        raise ValueError("min_samples must be >= 2")

    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    # Core distance: k-th nearest among the *other* points, k = min_samples-1.
    core = np.full(n, math.inf)
    k = min_samples - 1
    if n > k:
        others = dist.copy()
        np.fill_diagonal(others, math.inf)
        kth = np.partition(others, k - 1, axis=1)[:, k - 1]
        core = np.where(kth <= max_eps, kth, math.inf)

    reach = np.full(n, math.inf)
    processed = np.zeros(n, dtype=bool)
    order: list[int] = []
    heap: list[tuple[float, int]] = []

    def expand(p: int) -> None:
        if not math.isfinite(core[p]):
            return  # not a core point: it never seeds anything
        neighbors = np.flatnonzero(~processed & (dist[p] <= max_eps))
        new_reach = np.maximum(core[p], dist[p, neighbors])
        for o, r in zip(neighbors, new_reach):
            if r < reach[o]:
                reach[o] = r
                heapq.heappush(heap, (r, int(o)))

    for start in range(n):
        if processed[start]:
            continue
        processed[start] = True
        order.append(start)
        expand(start)
        while heap:
            r, q = heapq.heappop(heap)
            if processed[q] or r != reach[q]:
                continue  # stale entry superseded by a smaller reachability
            processed[q] = True
            order.append(q)
            expand(q)

    return OpticsOrdering(
        order=np.asarray(order, dtype=np.int64),
        reachability=reach,
        core_distance=core,
    )


def extract_clusters(ordering: OpticsOrdering, eps: float) -> np.ndarray:
    """Label points by thresholding the ordering at `eps` (DBSCAN-equivalent).

    Walking the ordering: a point whose reachability exceeds eps starts a
    new cluster if its core distance is within eps, and is NOISE otherwise;
    any other point joins the cluster currently open. Labels come out
    contiguous from 0. For min_samples=2 the result equals the connected
    components of the graph with edges {(i, j): dist(i, j) <= eps}.
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    n = len(ordering.order)
    labels = np.full(n, NOISE, dtype=np.int64)
    current = NOISE
    for p in ordering.order:
        p = int(p)
        if ordering.reachability[p] > eps:
            if ordering.core_distance[p] <= eps:
                current += 1
                labels[p] = current
            else:
                labels[p] = NOISE
        else:
            labels[p] = current
    return labels


@dataclass(frozen=True)
class ClusterPoint:
    """Per-cluster field means; one sound source in the render."""

    lat_deg: float
    lon_deg: float
    depth_m: float
    bleach_pct: float
    par: float
    member_count: int


def _mean(values: list[float]) -> float:
    # fsum keeps the mean exact and therefore permutation-invariant
    return math.fsum(values) / len(values)


def aggregate(observations: Sequence[Observation], labels: np.ndarray) -> list[ClusterPoint]:
    """Average observation fields per label; noise points become singletons.

    Output order: real clusters ascending by label, then noise singletons
    ascending by original index.
    """
    if len(observations) != len(labels):
        raise LengthMismatch(
            f"{len(observations)} observations vs {len(labels)} labels"
        )
    groups: dict[int, list[int]] = {}
    noise: list[int] = []
    for idx, label in enumerate(labels):
        label = int(label)
        if label == NOISE:
            noise.append(idx)
        else:
            groups.setdefault(label, []).append(idx)

    clusters: list[ClusterPoint] = []
    for label in sorted(groups):
        members = [observations[i] for i in groups[label]]
        clusters.append(
            ClusterPoint(
                lat_deg=_mean([m.lat_deg for m in members]),
                lon_deg=_mean([m.lon_deg for m in members]),
                depth_m=_mean([m.depth_m for m in members]),
                bleach_pct=_mean([m.bleach_pct for m in members]),
                par=_mean([m.par for m in members]),
                member_count=len(members),
            )
        )
    for idx in noise:
        o = observations[idx]
        clusters.append(
            ClusterPoint(
                lat_deg=o.lat_deg, lon_deg=o.lon_deg, depth_m=o.depth_m,
                bleach_pct=o.bleach_pct, par=o.par, member_count=1,
            )
        )
    return clusters


def reachability_rows(ordering: OpticsOrdering) -> list[tuple[int, int, float]]:
    """(ordering index, point id, reachability) rows for the plot-data file."""
    return [
        (i, int(p), float(ordering.reachability[int(p)]))
        for i, p in enumerate(ordering.order)
    ]
