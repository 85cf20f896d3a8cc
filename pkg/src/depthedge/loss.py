"""Differentiable edge loss over predicted depth, with analytic gradients.

The forward path maps depth to an edge probability via
sigmoid(|grad| - t_grad), where the gradient is taken perpendicular to
the ground-truth edge where an edge orientation is available, and falls
back to the isotropic central-difference magnitude elsewhere.  The loss
combines a multi-scale L1 depth term with a balanced binary cross
entropy edge term; gradients with respect to the predicted depth are
returned for consumption by external trainers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core_io import DepthMap, EdgeMap, EdgeProbMap, SparseDepth
from .edges import depth_gradient

PROB_CLAMP_EPS = 1e-7


@dataclass(frozen=True)
class EdbConfig:
    t_grad: float = 4.0            # meters/pixel sigmoid shift (non-paper default)
    orientation_sigma: float = 2.0  # px blur before estimating theta
    orientation_floor: float = 1e-3

    def __post_init__(self):
        if self.t_grad <= 0:
            raise ValueError("t_grad must be > 0")
        if self.orientation_sigma < 0 or self.orientation_floor < 0:
            raise ValueError("sigma/floor must be >= 0")


@dataclass(frozen=True)
class OrientationField:
    theta: np.ndarray    # radians in (-pi, pi]
    defined: np.ndarray  # bool

    @property
    def shape(self):
        return self.theta.shape


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.1
    num_scales: int = 1
    depth_loss_kind: str = "L1"

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.num_scales < 1:
            raise ValueError("num_scales must be >= 1")
        if self.depth_loss_kind != "L1":
            raise ValueError("only L1 depth loss is supported")


@dataclass(frozen=True)
class LossOutput:
    total: float
    depth_term: float
    edge_term: float
    grad_wrt_depth: np.ndarray          # 1/meters, scale-0 resolution
    grads_per_scale: tuple              # one array per scale


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def orientation_from_edges(e, cfg: EdbConfig = EdbConfig()) -> OrientationField:
    """Edge-normal direction from a (blurred) edge map's gradient."""
    if isinstance(e, EdgeMap):
        f = e.mask.astype(np.float64)
    elif isinstance(e, EdgeProbMap):
        f = e.probs
    else:
        f = np.asarray(e, dtype=np.float64)
    if cfg.orientation_sigma > 0:
        f = ndimage.gaussian_filter(f, cfg.orientation_sigma)
    gx = np.zeros_like(f)
    gy = np.zeros_like(f)
    gx[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / 2.0
    gy[1:-1, :] = (f[2:, :] - f[:-2, :]) / 2.0
    mag = np.hypot(gx, gy)
    defined = mag >= max(cfg.orientation_floor, np.finfo(float).tiny)
    theta = np.where(defined, np.arctan2(gy, gx), 0.0)
    return OrientationField(theta, defined)


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def _orthogonal_forward(d: DepthMap, of: OrientationField):
    """Shared forward pass.

    Returns (g, defined, ortho, dr, dc, iso) where g is the signed
    orthogonal difference at oriented pixels and the isotropic gradient
    magnitude elsewhere; ortho/iso flag which rule produced each pixel.
    """
    if of.shape != d.shape:
        raise ValueError("depth/orientation shape mismatch")
    h, w = d.shape
    rr, cc = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    dr = _round_half_away(np.sin(of.theta)).astype(np.int64)
    dc = _round_half_away(np.cos(of.theta)).astype(np.int64)

    ra, ca = rr + dr, cc + dc
    rb, cb = rr - dr, cc - dc
    inb = ((ra >= 0) & (ra < h) & (ca >= 0) & (ca < w) &
           (rb >= 0) & (rb < h) & (cb >= 0) & (cb < w))
    rac = np.clip(ra, 0, h - 1)
    cac = np.clip(ca, 0, w - 1)
    rbc = np.clip(rb, 0, h - 1)
    cbc = np.clip(cb, 0, w - 1)
    ortho_ok = (of.defined & inb & d.valid &
                d.valid[rac, cac] & d.valid[rbc, cbc])
    ortho_g = np.where(ortho_ok,
                       d.values[rac, cac] - d.values[rbc, cbc], 0.0)

    gf = depth_gradient(d)
    iso = ~of.defined & gf.defined
    g = np.where(ortho_ok, ortho_g, np.where(iso, gf.magnitude, 0.0))
    defined = ortho_ok | iso
    ortho = ortho_ok
    return g, defined, ortho, dr, dc, iso


def orthogonal_gradient(d: DepthMap, of: OrientationField):
    """Depth difference along the edge normal; isotropic |grad| fallback.

    Returns (values, defined): undefined pixels carry 0 and must be
    excluded from any loss.
    """
    g, defined, _, _, _, _ = _orthogonal_forward(d, of)
    return g, defined


def edb_forward(d: DepthMap, of: OrientationField,
                cfg: EdbConfig = EdbConfig()) -> EdgeProbMap:
    """Edge probability sigmoid(|grad| - t_grad) per pixel."""
    p, _ = edb_forward_with_domain(d, of, cfg)
    return p


def edb_forward_with_domain(d: DepthMap, of: OrientationField,
                            cfg: EdbConfig = EdbConfig()):
    g, defined, _, _, _, _ = _orthogonal_forward(d, of)
    probs = _sigmoid(np.abs(g) - cfg.t_grad)
    return EdgeProbMap(probs), defined


def _as_prob_array(pred) -> np.ndarray:
    return pred.probs if isinstance(pred, EdgeProbMap) else np.asarray(pred, dtype=np.float64)


def bbce(pred, gt: EdgeMap, domain: np.ndarray | None = None) -> float:
    """Balanced BCE: positives and negatives reweighted to equal halves."""
    loss, _ = bbce_with_grad(pred, gt, domain)
    return loss


def bbce_with_grad(pred, gt: EdgeMap, domain: np.ndarray | None = None):
    """Loss plus d(loss)/d(probability), zero where the clamp saturates."""
    p_raw = _as_prob_array(pred)
    if p_raw.shape != gt.shape:
        raise ValueError("prediction/GT shape mismatch")
    if domain is None:
        domain = np.ones(p_raw.shape, dtype=bool)
    pos = gt.mask & domain
    neg = ~gt.mask & domain
    n_pos = int(pos.sum())
    n_neg = int(neg.sum())
    if n_pos == 0 and n_neg == 0:
        raise ValueError("no supervised pixels (both classes empty)")

    eps = PROB_CLAMP_EPS
    p = np.clip(p_raw, eps, 1.0 - eps)
    active = (p_raw > eps) & (p_raw < 1.0 - eps)
    grad = np.zeros_like(p)

    if n_pos and n_neg:
        w_pos = 0.5 / n_pos
        w_neg = 0.5 / n_neg
    else:
        w_pos = 1.0 / n_pos if n_pos else 0.0
        w_neg = 1.0 / n_neg if n_neg else 0.0

    loss = 0.0
    if n_pos:
        loss += w_pos * float(np.sum(-np.log(p[pos])))
        grad[pos & active] = -w_pos / p[pos & active]
    if n_neg:
        loss += w_neg * float(np.sum(-np.log(1.0 - p[neg])))
        grad[neg & active] = w_neg / (1.0 - p[neg & active])
    grad[~domain] = 0.0
    return loss, grad


def depth_loss_l1(pred: DepthMap, gt) -> float:
    loss, _ = depth_loss_l1_with_grad(pred, gt)
    return loss


def depth_loss_l1_with_grad(pred: DepthMap, gt):
    """Mean |pred - gt| in meters over the valid GT support."""
    if isinstance(gt, SparseDepth):
        gt = gt.to_dense()
    if gt.shape != pred.shape:
        raise ValueError("prediction/GT shape mismatch")
    support = gt.valid & pred.valid
    n = int(support.sum())
    if n == 0:
        raise ValueError("empty GT support")
    diff = np.where(support, pred.values - gt.values, 0.0)
    loss = float(np.sum(np.abs(diff))) / n
    grad = np.where(support, np.sign(diff) / n, 0.0)
    return loss, grad


# ---------------------------------------------------------------------------
# pyramids


def _ceil_pool(a: np.ndarray, reduce_fn):
    h, w = a.shape
    h2 = (h + 1) // 2
    w2 = (w + 1) // 2
    out = np.empty((h2, w2), dtype=a.dtype if a.dtype == bool else np.float64)
    for i in range(h2):
        for j in range(w2):
            out[i, j] = reduce_fn(a[2 * i:2 * i + 2, 2 * j:2 * j + 2])
    return out


def depth_pyramid(d: DepthMap, num_scales: int) -> list[DepthMap]:
    """Scale s halves each dimension (ceil); 2x2 mean over valid pixels."""
    pyr = [d]
    for _ in range(1, num_scales):
        prev = pyr[-1]
        h, w = prev.shape
        h2, w2 = (h + 1) // 2, (w + 1) // 2
        vals = np.zeros((h2, w2))
        valid = np.zeros((h2, w2), dtype=bool)
        for i in range(h2):
            for j in range(w2):
                blk_v = prev.values[2 * i:2 * i + 2, 2 * j:2 * j + 2]
                blk_m = prev.valid[2 * i:2 * i + 2, 2 * j:2 * j + 2]
                if blk_m.any():
                    vals[i, j] = blk_v[blk_m].mean()
                    valid[i, j] = True
        pyr.append(DepthMap(vals, valid))
    return pyr


def edge_pyramid(e: EdgeMap, num_scales: int) -> list[EdgeMap]:
    """Logical OR over each 2x2 block so edges survive downscaling."""
    pyr = [e]
    for _ in range(1, num_scales):
        pyr.append(EdgeMap(_ceil_pool(pyr[-1].mask, np.any)))
    return pyr


# ---------------------------------------------------------------------------
# total loss


def _edge_loss_scale(pred: DepthMap, gt_edges: EdgeMap, edb: EdbConfig):
    """BBCE(EDB(pred), gt_edges) and its gradient with respect to pred."""
    of = orientation_from_edges(gt_edges, edb)
    g, defined, ortho, dr, dc, iso = _orthogonal_forward(pred, of)
    probs = _sigmoid(np.abs(g) - edb.t_grad)
    domain = defined & pred.valid
    loss, dL_dp = bbce_with_grad(probs, gt_edges, domain)

    dL_dz = dL_dp * probs * (1.0 - probs)
    dL_dg = dL_dz * np.sign(g)  # subgradient 0 at g == 0

    h, w = pred.shape
    grad = np.zeros((h, w))
    rr, cc = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")

    # oriented pixels: g = D[r+dr, c+dc] - D[r-dr, c-dc]
    sel = ortho & (dL_dg != 0)
    if sel.any():
        np.add.at(grad, (rr[sel] + dr[sel], cc[sel] + dc[sel]), dL_dg[sel])
        np.add.at(grad, (rr[sel] - dr[sel], cc[sel] - dc[sel]), -dL_dg[sel])

    # isotropic pixels: g = hypot(gx, gy) of central differences
    sel = iso & (dL_dg != 0)
    if sel.any():
        v = pred.values
        gx = np.zeros((h, w))
        gy = np.zeros((h, w))
        gx[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / 2.0
        gy[1:-1, :] = (v[2:, :] - v[:-2, :]) / 2.0
        mag = np.hypot(gx, gy)
        safe = np.where(mag > 0, mag, 1.0)
        cx = dL_dg * gx / (2.0 * safe)
        cy = dL_dg * gy / (2.0 * safe)
        zero = mag == 0
        cx[zero] = 0.0
        cy[zero] = 0.0
        np.add.at(grad, (rr[sel], cc[sel] + 1), cx[sel])
        np.add.at(grad, (rr[sel], cc[sel] - 1), -cx[sel])
        np.add.at(grad, (rr[sel] + 1, cc[sel]), cy[sel])
        np.add.at(grad, (rr[sel] - 1, cc[sel]), -cy[sel])
    return loss, grad


def total_loss(pred_pyramid: list[DepthMap], gt_depth, gt_edges: EdgeMap,
               cfg: LossConfig = LossConfig(),
               edb: EdbConfig = EdbConfig()) -> LossOutput:
    """Multi-scale L1 depth loss plus alpha-weighted BBCE edge loss.

    gt_depth and gt_edges are given at full resolution; their pyramids
    are built internally (valid-mean pooling for depth, OR-pooling for
    edges).  Gradients are with respect to each scale's predicted depth.
    """
    s_count = cfg.num_scales
    if len(pred_pyramid) != s_count:
        raise ValueError("pyramid length must equal num_scales")
    if isinstance(gt_depth, SparseDepth):
        gt_depth = gt_depth.to_dense()
    h0, w0 = pred_pyramid[0].shape
    for s, p in enumerate(pred_pyramid):
        eh = -(-h0 // (2 ** s))
        ew = -(-w0 // (2 ** s))
        if p.shape != (eh, ew):
            raise ValueError(f"scale {s} has shape {p.shape}, expected {(eh, ew)}")
    if gt_depth.shape != (h0, w0) or gt_edges.shape != (h0, w0):
        raise ValueError("GT shape mismatch with scale 0")

    gt_d_pyr = depth_pyramid(gt_depth, s_count)
    gt_e_pyr = edge_pyramid(gt_edges, s_count)

    depth_term = 0.0
    edge_term = 0.0
    grads = []
    for s in range(s_count):
        l1, g_l1 = depth_loss_l1_with_grad(pred_pyramid[s], gt_d_pyr[s])
        el, g_el = _edge_loss_scale(pred_pyramid[s], gt_e_pyr[s], edb)
        depth_term += l1
        edge_term += el
        grads.append((g_l1 + cfg.alpha * g_el) / s_count)
    depth_term /= s_count
    edge_term /= s_count
    total = depth_term + cfg.alpha * edge_term
    return LossOutput(total=float(total), depth_term=float(depth_term),
                      edge_term=float(edge_term),
                      grad_wrt_depth=grads[0], grads_per_scale=tuple(grads))
