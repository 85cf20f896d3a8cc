"""Evaluation protocol: bijective edge matching, PR sweeps, AUC, and
depth metrics (ARE, ordinal disagreement, delta accuracy)."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core_io import (DepthMap, EdgeMap, EvalRegion, FULL_FRAME, SparseDepth,
                      crop_eval_region, read_depth_png16, read_edge_png8,
                      read_pfm)
from .edges import CannyConfig, canny_depth_edges


@dataclass(frozen=True)
class MatchConfig:
    t_e: float = 2.0  # Euclidean pixel radius

    def __post_init__(self):
        if self.t_e < 0:
            raise ValueError("t_e must be >= 0")


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple          # of ((pred_r, pred_c), (gt_r, gt_c))
    precision: float
    recall: float

    @property
    def cardinality(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class PrCurve:
    points: tuple         # of (precision, recall, sweep_parameter)
    auc_partial: float
    auc_partial_range: tuple
    auc_full: float


@dataclass
class MetricsReport:
    are: float
    ord_score: float
    delta_1: float
    delta_2: float
    delta_3: float
    auc_partial: float
    auc_full: float
    auc_range: tuple
    curve: PrCurve | None
    per_image: list
    errors: list


def _hopcroft_karp(adj: list[list[int]], n_right: int) -> list[int]:
    """Maximum bipartite matching; returns match_left (-1 = unmatched)."""
    inf = float("inf")
    n_left = len(adj)
    match_l = [-1] * n_left
    match_r = [-1] * n_right
    while True:
        dist = [inf] * n_left
        q = deque()
        for u in range(n_left):
            if match_l[u] == -1:
                dist[u] = 0
                q.append(u)
        found = False
        while q:
            u = q.popleft()
            for v in adj[u]:
                w = match_r[v]
                if w == -1:
                    found = True
                elif dist[w] == inf:
                    dist[w] = dist[u] + 1
                    q.append(w)
        if not found:
            break

        def dfs(u):
            for v in adj[u]:
                w = match_r[v]
                if w == -1 or (dist[w] == dist[u] + 1 and dfs(w)):
                    match_l[u] = v
                    match_r[v] = u
                    return True
            dist[u] = inf
            return False

        for u in range(n_left):
            if match_l[u] == -1:
                dfs(u)
    return match_l


def match_edges(pred: EdgeMap, gt: EdgeMap,
                cfg: MatchConfig = MatchConfig()) -> MatchResult:
    """Maximum-cardinality bijective matching within Euclidean radius t_e.

    precision = |mu| / |pred|, recall = |mu| / |gt|; an empty side makes
    its own ratio vacuously 1.
    """
    if pred.shape != gt.shape:
        raise ValueError("pred/gt frame dimension mismatch")
    pr, pc = np.nonzero(pred.mask)
    gr, gc = np.nonzero(gt.mask)
    n_pred = pr.size
    n_gt = gr.size
    if n_pred == 0 or n_gt == 0:
        return MatchResult(pairs=(),
                           precision=1.0 if n_pred == 0 else 0.0,
                           recall=1.0 if n_gt == 0 else 0.0)

    # spatial binning: bucket GT pixels by cell of size ceil(t_e), check
    # only neighboring cells -> near-linear arc discovery for small t_e
    cell = max(1, math.ceil(cfg.t_e))
    buckets: dict[tuple[int, int], list[int]] = {}
    for j in range(n_gt):
        buckets.setdefault((gr[j] // cell, gc[j] // cell), []).append(j)
    t2 = cfg.t_e * cfg.t_e
    adj: list[list[int]] = []
    for i in range(n_pred):
        br, bc = pr[i] // cell, pc[i] // cell
        cand = []
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                for j in buckets.get((br + dr, bc + dc), ()):
                    d2 = (int(pr[i]) - int(gr[j])) ** 2 + \
                         (int(pc[i]) - int(gc[j])) ** 2
                    if d2 <= t2:
                        cand.append(j)
        adj.append(cand)

    match_l = _hopcroft_karp(adj, n_gt)
    pairs = tuple(((int(pr[i]), int(pc[i])), (int(gr[j]), int(gc[j])))
                  for i, j in enumerate(match_l) if j != -1)
    m = len(pairs)
    return MatchResult(pairs=pairs, precision=m / n_pred, recall=m / n_gt)


def brute_force_max_matching(pred_pixels, gt_pixels, t_e: float) -> int:
    """Exponential exact maximum matching; test oracle for small instances."""
    pred_pixels = list(pred_pixels)
    gt_pixels = list(gt_pixels)
    t2 = t_e * t_e
    adj = [[j for j, g in enumerate(gt_pixels)
            if (p[0] - g[0]) ** 2 + (p[1] - g[1]) ** 2 <= t2]
           for p in pred_pixels]

    def best(i, used):
        if i == len(adj):
            return 0
        top = best(i + 1, used)
        for j in adj[i]:
            if not (used >> j) & 1:
                top = max(top, 1 + best(i + 1, used | (1 << j)))
        return top

    return best(0, 0)


def auc(points, prange: tuple[float, float] = (0.0, 1.0)) -> tuple[float, float]:
    """Trapezoidal area of recall over precision.

    auc_partial integrates over [a, b] (linear interpolation inside the
    covered span, zero-fill outside) normalized by (b - a); auc_full
    does the same over [0, 1].
    """
    a, b = prange
    if a >= b:
        raise ValueError("need a < b for the precision range")
    pts = sorted((float(p[0]), float(p[1])) for p in points)
    if not pts:
        raise ValueError("need at least one PR point")

    def integral(lo: float, hi: float) -> float:
        # piecewise-linear recall(precision) on the covered span, 0 outside
        if len(pts) == 1:
            return 0.0
        total = 0.0
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            xl = max(x0, lo)
            xr = min(x1, hi)
            if xr <= xl or x1 == x0:
                continue
            yl = y0 + (y1 - y0) * (xl - x0) / (x1 - x0)
            yr = y0 + (y1 - y0) * (xr - x0) / (x1 - x0)
            total += 0.5 * (yl + yr) * (xr - xl)
        return total

    auc_partial = integral(a, b) / (b - a)
    auc_full = integral(0.0, 1.0)
    return auc_partial, auc_full


def build_pr_curve(points, prange: tuple[float, float] = (0.0, 1.0)) -> PrCurve:
    """Deduplicate sweep points and attach partial/full AUC."""
    seen = {}
    for p, r, param in points:
        seen[param] = (float(p), float(r), param)
    pts = tuple(seen.values())
    ap, af = auc([(p, r) for p, r, _ in pts], prange)
    return PrCurve(points=pts, auc_partial=ap, auc_partial_range=tuple(prange),
                   auc_full=af)


def pr_sweep(pred_depth: DepthMap, gt_edges: EdgeMap,
             sweep: list[CannyConfig],
             cfg: MatchConfig = MatchConfig(),
             region: EvalRegion = FULL_FRAME,
             prange: tuple[float, float] = (0.0, 1.0)) -> PrCurve:
    """Canny-per-config precision/recall sweep for one image."""
    if not sweep:
        raise ValueError("empty sweep")
    gt_c = crop_eval_region(gt_edges, region)
    points = []
    for c in sweep:
        pred_edges = crop_eval_region(canny_depth_edges(pred_depth, c), region)
        m = match_edges(pred_edges, gt_c, cfg)
        points.append((m.precision, m.recall, c.th_high))
    return build_pr_curve(points, prange)


def default_sweep(n: int = 30, lo: float = 0.5, hi: float = 32.0,
                  low_ratio: float = 0.8) -> list[CannyConfig]:
    """Geometric th_high sweep with th_low = low_ratio * th_high."""
    ths = np.geomspace(lo, hi, n)
    return [CannyConfig(th_low=low_ratio * t, th_high=t) for t in ths]


# ---------------------------------------------------------------------------
# depth metrics


def _gather_pred(pred: DepthMap, gt: SparseDepth,
                 region: EvalRegion) -> tuple[np.ndarray, np.ndarray]:
    if pred.shape != (gt.height, gt.width):
        raise ValueError("pred/gt frame dimension mismatch")
    pred_c = crop_eval_region(pred, region)
    gt_c = crop_eval_region(gt, region)
    if len(gt_c) == 0:
        raise ValueError("no GT samples inside the evaluation region")
    if not pred_c.valid[gt_c.rows, gt_c.cols].all():
        raise ValueError("prediction invalid at a GT sample")
    return pred_c.values[gt_c.rows, gt_c.cols], gt_c.depths


def are(pred: DepthMap, gt: SparseDepth,
        region: EvalRegion = FULL_FRAME) -> float:
    """Mean absolute relative error |pred - gt| / gt over GT samples."""
    p, g = _gather_pred(pred, gt, region)
    return float(np.mean(np.abs(p - g) / g))


def delta_acc(pred: DepthMap, gt: SparseDepth, threshold: float = 1.25,
              region: EvalRegion = FULL_FRAME) -> float:
    """Fraction of samples with max(pred/gt, gt/pred) < threshold."""
    p, g = _gather_pred(pred, gt, region)
    ratio = np.maximum(p / g, g / p)
    return float(np.mean(ratio < threshold))


def _ordinal_labels(a: np.ndarray, b: np.ndarray, tau: float) -> np.ndarray:
    lab = np.zeros(a.shape, dtype=np.int8)
    lab[a / b > 1.0 + tau] = 1
    lab[b / a > 1.0 + tau] = -1
    return lab


def ord_score(pred: DepthMap, gt: SparseDepth, num_pairs: int = 50_000,
              tau: float = 0.03, seed: int = 0,
              region: EvalRegion = FULL_FRAME) -> float:
    """Ordinal disagreement rate over seeded random GT sample pairs."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    p, g = _gather_pred(pred, gt, region)
    n = g.size
    if n < 2:
        raise ValueError("need at least 2 GT samples")
    total_pairs = n * (n - 1) // 2
    rng = np.random.default_rng(seed)
    if total_pairs <= num_pairs:
        ii, jj = np.triu_indices(n, k=1)
    else:
        # draw distinct unordered pairs in seeded batches until enough
        chosen: set[tuple[int, int]] = set()
        while len(chosen) < num_pairs:
            need = num_pairs - len(chosen)
            a = rng.integers(0, n, size=2 * need + 16)
            b = rng.integers(0, n, size=2 * need + 16)
            for x, y in zip(a.tolist(), b.tolist()):
                if x != y:
                    chosen.add((x, y) if x < y else (y, x))
                    if len(chosen) == num_pairs:
                        break
        pairs = sorted(chosen)
        ii = np.array([p[0] for p in pairs], dtype=np.int64)
        jj = np.array([p[1] for p in pairs], dtype=np.int64)
    gt_lab = _ordinal_labels(g[ii], g[jj], tau)
    pr_lab = _ordinal_labels(p[ii], p[jj], tau)
    return float(np.mean(gt_lab != pr_lab))


# ---------------------------------------------------------------------------
# dataset evaluation


@dataclass(frozen=True)
class EvalConfig:
    match: MatchConfig = field(default_factory=MatchConfig)
    region: EvalRegion = field(default_factory=lambda: FULL_FRAME)
    sweep: tuple = ()
    auc_range: tuple = (0.0, 1.0)
    ord_num_pairs: int = 50_000
    ord_tau: float = 0.03
    seed: int = 0
    deltas: tuple = (1.25, 1.25 ** 2, 1.25 ** 3)


def _read_depth_any(path: str) -> DepthMap:
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return read_depth_png16(data)
    return read_pfm(data)


def _depthmap_to_sparse(d: DepthMap) -> SparseDepth:
    rr, cc = np.nonzero(d.valid)
    return SparseDepth(d.height, d.width, rr, cc, d.values[rr, cc])


def evaluate_image(pred: DepthMap, gt_depth: DepthMap, gt_edges: EdgeMap,
                   cfg: EvalConfig, image_index: int = 0) -> dict:
    gt_sparse = _depthmap_to_sparse(gt_depth)
    sweep = list(cfg.sweep) or default_sweep()
    gt_c = crop_eval_region(gt_edges, cfg.region)
    points = []
    for c in sweep:
        pred_edges = crop_eval_region(canny_depth_edges(pred, c), cfg.region)
        m = match_edges(pred_edges, gt_c, cfg.match)
        points.append((m.precision, m.recall, c.th_high))
    deltas = [delta_acc(pred, gt_sparse, t, cfg.region) for t in cfg.deltas]
    return {
        "are": are(pred, gt_sparse, cfg.region),
        "ord": ord_score(pred, gt_sparse, cfg.ord_num_pairs, cfg.ord_tau,
                         seed=cfg.seed + image_index, region=cfg.region),
        "delta_1": deltas[0],
        "delta_2": deltas[1],
        "delta_3": deltas[2],
        "pr_points": points,
    }


def evaluate_dataset(manifest: list[dict], cfg: EvalConfig = EvalConfig(),
                     threads: int = 1) -> MetricsReport:
    """Per-image metrics plus dataset means and the aggregated PR curve.

    Manifest records: {id, pred_depth_path, gt_depth_path, gt_edges_path}.
    Per-file failures are recorded and evaluation continues.
    """
    if not manifest:
        raise ValueError("empty manifest")

    def run_one(args):
        idx, rec = args
        pred = _read_depth_any(rec["pred_depth_path"])
        gt_depth = _read_depth_any(rec["gt_depth_path"])
        with open(rec["gt_edges_path"], "rb") as f:
            gt_edges = read_edge_png8(f.read())
        out = evaluate_image(pred, gt_depth, gt_edges, cfg, image_index=idx)
        out["id"] = rec.get("id", str(idx))
        return out

    tasks = list(enumerate(manifest))
    results: list = [None] * len(tasks)
    errors: list = []
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as ex:
            futs = [ex.submit(run_one, t) for t in tasks]
            for k, fut in enumerate(futs):
                try:
                    results[k] = fut.result()
                except Exception as e:
                    errors.append({"id": manifest[k].get("id", str(k)),
                                   "error": str(e)})
    else:
        for k, t in enumerate(tasks):
            try:
                results[k] = run_one(t)
            except Exception as e:
                errors.append({"id": manifest[k].get("id", str(k)),
                               "error": str(e)})
    per_image = [r for r in results if r is not None]
    if not per_image:
        raise ValueError("all manifest entries failed: " + json.dumps(errors))

    def mean(key):
        return float(np.mean([r[key] for r in per_image]))

    # dataset PR point = mean of per-image (P, R) at each sweep parameter
    n_points = len(per_image[0]["pr_points"])
    agg_points = []
    for k in range(n_points):
        ps = [r["pr_points"][k][0] for r in per_image]
        rs = [r["pr_points"][k][1] for r in per_image]
        param = per_image[0]["pr_points"][k][2]
        agg_points.append((float(np.mean(ps)), float(np.mean(rs)), param))
    curve = build_pr_curve(agg_points, cfg.auc_range)

    return MetricsReport(
        are=mean("are"), ord_score=mean("ord"),
        delta_1=mean("delta_1"), delta_2=mean("delta_2"),
        delta_3=mean("delta_3"),
        auc_partial=curve.auc_partial, auc_full=curve.auc_full,
        auc_range=tuple(cfg.auc_range), curve=curve,
        per_image=per_image, errors=errors)
