"""Depth-edge toolkit: extraction, loss, metrics, LIDAR simulation and
annotation of depth edges in monocular depth estimation outputs."""

__version__ = "0.1.0"

from .core_io import (BOTTOM_60, BOTTOM_60_GARG, FULL_FRAME, DepthMap,
                      EdgeMap, EdgeProbMap, EvalRegion, FormatError,
                      SparseDepth, crop_eval_region, read_depth_png16,
                      read_edge_png8, read_pfm, read_prob_png16,
                      write_depth_png16, write_edge_png8, write_pfm,
                      write_prob_png16)
from .edges import (CannyConfig, HysteresisConfig, PanopticMap,
                    canny_depth_edges, dee_postprocess, depth_gradient,
                    gt_from_panoptic, hysteresis, nms)
from .lidar import (DensityCurve, Intrinsics, LidarConfig, density_curve,
                    edge_distance_field, simulate_lidar, thin_to_curve)
from .loss import (EdbConfig, LossConfig, LossOutput, OrientationField,
                   bbce, depth_loss_l1, edb_forward, orientation_from_edges,
                   orthogonal_gradient, total_loss)
from .metrics import (EvalConfig, MatchConfig, MatchResult, MetricsReport,
                      PrCurve, are, auc, delta_acc, evaluate_dataset,
                      match_edges, ord_score, pr_sweep)
