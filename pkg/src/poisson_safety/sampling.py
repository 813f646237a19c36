"""Robot-surface sampling: dense clouds at fine resolution, greedy
minimum-distance downsampling, and coverage verification.

Sampling is done per link in the local frame: links are rigid, so a local
covering transfers to every configuration, while cross-link distances do
not. The greedy pass over a deterministic point order yields a set that is
simultaneously a packing (pairwise >= eps) and a cover (every cloud point
within eps of an accepted point) of its input cloud.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .kinematics import BodyPoint, RobotModel


def _fibonacci_sphere(count: int) -> np.ndarray:
    i = np.arange(count) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / count)
    theta = np.pi * (1.0 + np.sqrt(5.0)) * i
    return np.stack(
        [np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=1
    )


def _sample_capsule_surface(p0: np.ndarray, p1: np.ndarray, r: float,
                            delta: float) -> np.ndarray:
    """Points covering the capsule surface at spacing <= ~0.7 * delta:
    Fibonacci caps plus rings along the cylinder."""
    pts = []
    n_sph = max(8, int(np.ceil(4.0 * np.pi * r * r / (0.55 * delta * delta))))
    sph = _fibonacci_sphere(n_sph) * r
    pts.append(p0 + sph)
    axis = p1 - p0
    length = float(np.linalg.norm(axis))
    if length > 1e-12:
        pts.append(p1 + sph)
        a = axis / length
        tmp = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = np.cross(a, tmp)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(a, e1)
        n_rings = max(2, int(np.ceil(length / (0.7 * delta))) + 1)
        n_circ = max(6, int(np.ceil(2.0 * np.pi * r / (0.7 * delta))))
        ts = np.linspace(0.0, 1.0, n_rings)
        ang = np.arange(n_circ) * (2.0 * np.pi / n_circ)
        ring = np.cos(ang)[:, None] * e1 + np.sin(ang)[:, None] * e2
        cyl = p0[None, None, :] + ts[None, :, None] * axis[None, None, :] \
            + r * ring[:, None, :]
        pts.append(cyl.reshape(-1, 3))
    return np.concatenate(pts, axis=0)


@dataclass(frozen=True)
class DenseSurfaceCloud:
    """Per-link local-frame surface points plus the achieved covering radius
    (estimated by randomized probing of the analytic surfaces)."""

    points: Dict[int, np.ndarray]
    delta: float

    @property
    def total(self) -> int:
        return sum(len(p) for p in self.points.values())


@dataclass(frozen=True)
class SampleSet:
    """Downsampled body points: pairwise >= epsilon per link, and every
    dense-cloud point of that link within epsilon of some sample."""

    body_points: Tuple[BodyPoint, ...]
    epsilon: float

    @property
    def count(self) -> int:
        return len(self.body_points)

    def by_link(self) -> Dict[int, np.ndarray]:
        out: Dict[int, List[np.ndarray]] = {}
        for bp in self.body_points:
            out.setdefault(bp.link_index, []).append(bp.local)
        return {k: np.array(v) for k, v in out.items()}

    def local_stacked(self):
        """(link_indices, locals) arrays for vectorized world transforms."""
        links = np.array([bp.link_index for bp in self.body_points], dtype=int)
        locs = np.array([bp.local for bp in self.body_points])
        return links, locs


def _probe_surface_points(rng: np.random.Generator, p0, p1, r, count: int) -> np.ndarray:
    """Random points on a capsule surface (area-weighted between parts)."""
    axis = p1 - p0
    length = float(np.linalg.norm(axis))
    area_cyl = 2.0 * np.pi * r * length
    area_caps = 4.0 * np.pi * r * r
    n_cyl = int(round(count * area_cyl / (area_cyl + area_caps)))
    out = []
    dirs = rng.normal(size=(count - n_cyl, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    if length > 1e-12:
        a = axis / length
        half = dirs @ a >= 0
        out.append(np.where(half[:, None], p1 + r * dirs, p0 + r * dirs))
        t = rng.uniform(0.0, 1.0, n_cyl)
        tmp = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = np.cross(a, tmp)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(a, e1)
        ang = rng.uniform(0.0, 2.0 * np.pi, n_cyl)
        out.append(p0 + t[:, None] * axis + r * (np.cos(ang)[:, None] * e1
                                                 + np.sin(ang)[:, None] * e2))
    else:
        out.append(p0 + r * dirs)
    return np.concatenate(out, axis=0)


def generate_dense_cloud(model: RobotModel, delta: float,
                         probe_count: int = 2000, seed: int = 0) -> DenseSurfaceCloud:
    """Dense delta-cover of every link's primitive union.

    ``delta`` must be positive and below the smallest primitive radius. The
    recorded delta is the max over randomized surface probes of the distance
    to the cloud, so degenerate requests still report their true resolution.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    min_r = min((r for geom in model.links for _, _, r in geom.capsules), default=np.inf)
    if delta >= min_r:
        raise ValueError(f"delta {delta} must be below the smallest primitive radius {min_r}")
    rng = np.random.default_rng(seed)
    points: Dict[int, np.ndarray] = {}
    achieved = 0.0
    for li, geom in enumerate(model.links):
        if not geom.capsules:
            continue
        parts = [_sample_capsule_surface(p0, p1, r, delta) for p0, p1, r in geom.capsules]
        cloud = np.concatenate(parts, axis=0)
        points[li] = cloud
        tree = cKDTree(cloud)
        for p0, p1, r in geom.capsules:
            probes = _probe_surface_points(rng, p0, p1, r, probe_count)
            d, _ = tree.query(probes)
            achieved = max(achieved, float(d.max()))
    return DenseSurfaceCloud(points, achieved)


def poisson_disk_downsample(cloud: DenseSurfaceCloud, epsilon: float) -> SampleSet:
    """Greedy minimum-distance pass per link, in a deterministic order
    (lexicographic by coordinates): accept a point iff no previously accepted
    point of the same link lies within epsilon."""
    if epsilon <= cloud.delta:
        raise ValueError("epsilon must exceed the cloud resolution delta")
    body_points = []
    for li in sorted(cloud.points):
        pts = cloud.points[li]
        order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))
        pts = pts[order]
        tree = cKDTree(pts)
        alive = np.ones(len(pts), dtype=bool)
        ptr = 0
        while ptr < len(pts):
            if not alive[ptr]:
                ptr += 1
                continue
            body_points.append(BodyPoint(li, pts[ptr]))
            alive[tree.query_ball_point(pts[ptr], epsilon)] = False
            ptr += 1
    return SampleSet(tuple(body_points), epsilon)


@dataclass(frozen=True)
class CoverageReport:
    max_min_distance: float
    holds: bool
    per_link: Dict[int, float]


def verify_coverage(cloud: DenseSurfaceCloud, samples: SampleSet) -> CoverageReport:
    """Brute-force check of the covering condition: per link, the max over
    cloud points of the distance to the nearest sample must be < epsilon."""
    by_link = samples.by_link()
    per_link: Dict[int, float] = {}
    worst = 0.0
    for li, pts in cloud.points.items():
        sam = by_link.get(li)
        if sam is None or len(sam) == 0:
            # an uncovered link counts as a miss by its full extent
            extent = float(np.linalg.norm(pts - pts.mean(axis=0), axis=1).max())
            per_link[li] = max(extent, samples.epsilon)
            worst = max(worst, per_link[li])
            continue
        d, _ = cKDTree(sam).query(pts)
        per_link[li] = float(d.max())
        worst = max(worst, per_link[li])
    return CoverageReport(worst, worst < samples.epsilon, per_link)


def write_samples_csv(samples: SampleSet, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["link_index", "x", "y", "z"])
        for bp in samples.body_points:
            w.writerow([bp.link_index, *(f"{v:.9g}" for v in bp.local)])
