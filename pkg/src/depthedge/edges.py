"""Deterministic edge pipelines over depth maps and edge-probability maps.

Gradients use central differences so that thresholds stay in meters per
pixel (no kernel gain factor).  NMS samples the response field along the
gradient direction with bilinear interpolation; exact ties are broken so
the lexicographically smaller (row, col) pixel survives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core_io import DepthMap, EdgeMap, EdgeProbMap

_TIE_EPS = 1e-9


@dataclass(frozen=True)
class CannyConfig:
    th_low: float = 4.0    # meters/pixel
    th_high: float = 5.0   # meters/pixel
    smoothing_sigma: float = 0.0  # pixels, 0 = no smoothing

    def __post_init__(self):
        if not (0 <= self.th_low <= self.th_high):
            raise ValueError("need 0 <= th_low <= th_high")
        if self.smoothing_sigma < 0:
            raise ValueError("smoothing_sigma must be >= 0")


@dataclass(frozen=True)
class HysteresisConfig:
    low: float = 0.85
    high: float = 0.9

    def __post_init__(self):
        if not (0 <= self.low <= self.high <= 1):
            raise ValueError("need 0 <= low <= high <= 1")


@dataclass(frozen=True)
class PanopticMap:
    segment_id: np.ndarray  # int (H, W)
    class_id: np.ndarray    # int (H, W)
    excluded_class_pairs: frozenset = frozenset()  # of frozenset({a, b})

    def __post_init__(self):
        seg = np.asarray(self.segment_id, dtype=np.int64)
        cls = np.asarray(self.class_id, dtype=np.int64)
        if seg.ndim != 2 or seg.shape != cls.shape:
            raise ValueError("segment_id/class_id must be matching 2-D arrays")
        for sid in np.unique(seg):
            if np.unique(cls[seg == sid]).size != 1:
                raise ValueError(f"segment {sid} spans multiple classes")
        pairs = frozenset(frozenset(p) for p in self.excluded_class_pairs)
        object.__setattr__(self, "segment_id", seg)
        object.__setattr__(self, "class_id", cls)
        object.__setattr__(self, "excluded_class_pairs", pairs)

    @property
    def shape(self):
        return self.segment_id.shape


@dataclass(frozen=True)
class GradientField:
    magnitude: np.ndarray  # meters/pixel
    direction: np.ndarray  # radians, atan2(dD/dy, dD/dx)
    defined: np.ndarray    # bool; False within 1 px of invalid/out-of-frame


def depth_gradient(d: DepthMap) -> GradientField:
    """Central-difference gradient; undefined next to invalid pixels."""
    if d.height < 3 or d.width < 3:
        raise ValueError("depth map must be at least 3x3")
    v = d.values
    dx = np.zeros_like(v)
    dy = np.zeros_like(v)
    dx[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / 2.0
    dy[1:-1, :] = (v[2:, :] - v[:-2, :]) / 2.0

    # a pixel's gradient needs itself and its 4-neighborhood valid & in frame
    cross = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    defined = ndimage.binary_erosion(d.valid, structure=cross, border_value=0)

    magnitude = np.hypot(dx, dy)
    direction = np.arctan2(dy, dx)
    magnitude[~defined] = 0.0
    direction[~defined] = 0.0
    return GradientField(magnitude, direction, defined)


def _bilinear(a: np.ndarray, rr: np.ndarray, cc: np.ndarray) -> np.ndarray:
    """Bilinear sample; anything outside the frame contributes 0."""
    h, w = a.shape
    r0 = np.floor(rr).astype(np.int64)
    c0 = np.floor(cc).astype(np.int64)
    fr = rr - r0
    fc = cc - c0
    out = np.zeros(rr.shape)
    for dr, dc, wgt in ((0, 0, (1 - fr) * (1 - fc)), (0, 1, (1 - fr) * fc),
                        (1, 0, fr * (1 - fc)), (1, 1, fr * fc)):
        ri = r0 + dr
        ci = c0 + dc
        inside = (ri >= 0) & (ri < h) & (ci >= 0) & (ci < w)
        vals = np.where(inside, a[np.clip(ri, 0, h - 1), np.clip(ci, 0, w - 1)], 0.0)
        out += wgt * vals
    return out


def nms(magnitude: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Thin a response field to local maxima along +-direction.

    A pixel survives iff it is >= the bilinear sample on the
    lexicographically-larger side of the direction axis and strictly >
    the sample on the smaller side, so exact ties keep the pixel with
    the smaller (row, col).
    """
    magnitude = np.asarray(magnitude, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    if magnitude.shape != direction.shape:
        raise ValueError("magnitude/direction shape mismatch")
    h, w = magnitude.shape
    dr = np.sin(direction)
    dc = np.cos(direction)
    dr[np.abs(dr) < _TIE_EPS] = 0.0
    dc[np.abs(dc) < _TIE_EPS] = 0.0

    rr, cc = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    n_pos = _bilinear(magnitude, rr + dr, cc + dc)
    n_neg = _bilinear(magnitude, rr - dr, cc - dc)

    # is (+dr, +dc) the lexicographically-larger side?
    pos_larger = (dr > 0) | ((dr == 0) & (dc >= 0))
    survive = np.where(pos_larger,
                       (magnitude >= n_pos) & (magnitude > n_neg),
                       (magnitude > n_pos) & (magnitude >= n_neg))
    return np.where(survive, magnitude, 0.0)


def hysteresis(thinned: np.ndarray, low: float, high: float) -> EdgeMap:
    """Keep pixels >= low that are 8-connected to a seed pixel >= high."""
    if low > high:
        raise ValueError("need low <= high")
    thinned = np.asarray(thinned, dtype=np.float64)
    weak = thinned >= low
    strong = thinned >= high
    if not strong.any():
        return EdgeMap(np.zeros_like(weak))
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    keep_labels = np.unique(labels[strong])
    keep_labels = keep_labels[keep_labels > 0]
    keep = np.isin(labels, keep_labels)
    return EdgeMap(keep)


def _masked_gaussian(values: np.ndarray, valid: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian smoothing normalized over valid support (holes stay holes)."""
    num = ndimage.gaussian_filter(np.where(valid, values, 0.0), sigma)
    den = ndimage.gaussian_filter(valid.astype(np.float64), sigma)
    out = np.where(den > 0, num / np.maximum(den, 1e-300), 0.0)
    return np.where(valid, out, values)


def canny_depth_edges(d: DepthMap, cfg: CannyConfig = CannyConfig()) -> EdgeMap:
    """Canny on metric depth: smooth -> gradient -> NMS -> hysteresis."""
    if cfg.smoothing_sigma > 0:
        d = DepthMap(np.where(d.valid, _masked_gaussian(d.values, d.valid,
                                                        cfg.smoothing_sigma),
                              d.values),
                     d.valid)
    g = depth_gradient(d)
    thinned = nms(g.magnitude, g.direction)
    thinned[~g.defined] = 0.0
    edges = hysteresis(thinned, cfg.th_low, cfg.th_high)
    return EdgeMap(edges.mask & g.defined)


def dee_postprocess(p: EdgeProbMap, orient: np.ndarray,
                    cfg: HysteresisConfig = HysteresisConfig()) -> EdgeMap:
    """Thin a dense edge-probability map to 1-px edges (NMS + hysteresis)."""
    orient = np.asarray(orient, dtype=np.float64)
    if orient.shape != p.shape:
        raise ValueError("probability/orientation shape mismatch")
    thinned = nms(p.probs, orient)
    return hysteresis(thinned, cfg.low, cfg.high)


def gt_from_panoptic(pm: PanopticMap) -> EdgeMap:
    """Single-sided segment boundaries, skipping excluded class adjacencies.

    The edge pixel is placed on the side with the larger segment_id.
    """
    seg = pm.segment_id
    cls = pm.class_id
    h, w = seg.shape
    edge = np.zeros((h, w), dtype=bool)

    def mark(sa, ca, ia, sb, cb, ib):
        # sa/sb: abutting segment id slices; ia/ib: index slices into edge
        diff = sa != sb
        if not diff.any():
            return
        if pm.excluded_class_pairs:
            excl = np.zeros_like(diff)
            rr, cc = np.nonzero(diff)
            for k in range(rr.size):
                pair = frozenset((int(ca[rr[k], cc[k]]), int(cb[rr[k], cc[k]])))
                if pair in pm.excluded_class_pairs:
                    excl[rr[k], cc[k]] = True
            diff &= ~excl
        larger_a = diff & (sa > sb)
        larger_b = diff & (sb > sa)
        ia[0][larger_a] = True
        ib[0][larger_b] = True

    if w > 1:
        mark(seg[:, :-1], cls[:, :-1], (edge[:, :-1],),
             seg[:, 1:], cls[:, 1:], (edge[:, 1:],))
    if h > 1:
        mark(seg[:-1, :], cls[:-1, :], (edge[:-1, :],),
             seg[1:, :], cls[1:, :], (edge[1:, :],))
    return EdgeMap(edge)
