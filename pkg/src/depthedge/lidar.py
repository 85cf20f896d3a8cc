"""LIDAR-style sparse sampling of dense depth, edge-distance density
analysis, and density-matched thinning."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core_io import DepthMap, EdgeMap, EvalRegion, FULL_FRAME, SparseDepth, \
    crop_eval_region


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be > 0")


@dataclass(frozen=True)
class LidarConfig:
    num_beams: int = 64
    horiz_step_deg: float = 0.09
    vert_fov_deg: tuple = (-24.8, 2.0)  # (min_elev, max_elev)
    intrinsics: Intrinsics = Intrinsics(500.0, 500.0, 500.0, 200.0)

    def __post_init__(self):
        if self.num_beams < 0:
            raise ValueError("num_beams must be >= 0")
        if self.horiz_step_deg <= 0:
            raise ValueError("horiz_step_deg must be > 0")
        if self.vert_fov_deg[0] >= self.vert_fov_deg[1]:
            raise ValueError("need min_elev < max_elev")


@dataclass(frozen=True)
class DensityCurve:
    """Per-distance-bin LIDAR occupancy: (bin, ratio or None, pixel count)."""

    bins: tuple  # of (d: int, ratio: float | None, count: int)

    def ratio_at(self, d: int):
        for b, r, _ in self.bins:
            if b == d:
                return r
        return None


def simulate_lidar(gt: DepthMap, cfg: LidarConfig = LidarConfig()) -> SparseDepth:
    """Project a regular beam/azimuth grid through a pinhole camera and
    sample the nearest valid GT pixel per ray.  Deterministic; duplicate
    pixel hits collapse to the first."""
    h, w = gt.shape
    k = cfg.intrinsics
    if cfg.num_beams == 0:
        return SparseDepth(h, w, np.array([], dtype=np.int64),
                           np.array([], dtype=np.int64), np.array([]))
    elevs = np.linspace(math.radians(cfg.vert_fov_deg[0]),
                        math.radians(cfg.vert_fov_deg[1]), cfg.num_beams)
    # horizontal FOV implied by the intrinsics and frame width
    a_min = -math.atan2(k.cx, k.fx)
    a_max = math.atan2(w - k.cx, k.fx)
    fov_deg = math.degrees(a_max - a_min)
    n_az = int(math.floor(fov_deg / cfg.horiz_step_deg + 1e-9)) + 1
    az = math.radians(cfg.horiz_step_deg) * np.arange(n_az) + a_min

    tan_a = np.tan(az)
    cos_a = np.cos(az)
    seen = np.zeros((h, w), dtype=bool)
    rows, cols, depths = [], [], []
    for e in elevs:
        u = k.fx * tan_a + k.cx
        v = k.fy * math.tan(e) / cos_a + k.cy
        cc = np.floor(u + 0.5).astype(np.int64)
        rr = np.floor(v + 0.5).astype(np.int64)
        inside = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        for r, c in zip(rr[inside].tolist(), cc[inside].tolist()):
            if not seen[r, c] and gt.valid[r, c]:
                seen[r, c] = True
                rows.append(r)
                cols.append(c)
                depths.append(gt.values[r, c])
    return SparseDepth(h, w, np.array(rows, dtype=np.int64),
                       np.array(cols, dtype=np.int64),
                       np.array(depths, dtype=np.float64))


def edge_distance_field(edges: EdgeMap) -> np.ndarray:
    """Exact Euclidean distance (pixels) to the nearest edge pixel.

    With no edges every pixel is +inf."""
    if not edges.mask.any():
        return np.full(edges.shape, np.inf)
    return ndimage.distance_transform_edt(~edges.mask)


def density_curve(lidar: SparseDepth, edges: EdgeMap, max_d: int = 20,
                  region: EvalRegion = FULL_FRAME) -> DensityCurve:
    """LIDAR occupancy ratio per floor(distance-to-edge) bin up to max_d."""
    if (lidar.height, lidar.width) != edges.shape:
        raise ValueError("lidar/edges frame dimension mismatch")
    dist = edge_distance_field(edges)
    occupied = np.zeros(edges.shape, dtype=bool)
    occupied[lidar.rows, lidar.cols] = True

    r0, r1, c0, c1 = region.bounds(*edges.shape)
    dist = dist[r0:r1, c0:c1]
    occupied = occupied[r0:r1, c0:c1]

    bins = []
    for d in range(max_d + 1):
        sel = np.floor(dist) == d
        count = int(sel.sum())
        ratio = float(occupied[sel].sum() / count) if count else None
        bins.append((d, ratio, count))
    return DensityCurve(bins=tuple(bins))


def thin_to_curve(lidar: SparseDepth, edges: EdgeMap, target: DensityCurve,
                  seed: int, max_d: int = 20,
                  region: EvalRegion = FULL_FRAME) -> SparseDepth:
    """Randomly drop samples so each distance bin approaches the target
    occupancy ratio: keep probability min(1, target/current) per bin."""
    for _, r, _ in target.bins:
        if r is not None and not (0.0 <= r <= 1.0):
            raise ValueError("target ratios must lie in [0, 1]")
    current = density_curve(lidar, edges, max_d=max_d, region=region)
    keep_prob = {}
    for d, cur, _ in current.bins:
        tgt = target.ratio_at(d)
        if cur is None or cur == 0 or tgt is None:
            keep_prob[d] = 1.0
        else:
            keep_prob[d] = min(1.0, tgt / cur)

    dist = edge_distance_field(edges)
    sample_bin = np.floor(dist[lidar.rows, lidar.cols])
    rng = np.random.default_rng(seed)
    draws = rng.random(len(lidar))
    probs = np.array([keep_prob.get(int(b), 1.0) if np.isfinite(b) else 1.0
                      for b in sample_bin])
    keep = draws < probs
    return SparseDepth(lidar.height, lidar.width, lidar.rows[keep],
                       lidar.cols[keep], lidar.depths[keep])
