import numpy as np
import pytest

from depthedge.core_io import DepthMap, EdgeProbMap
from depthedge.edges import (CannyConfig, HysteresisConfig, PanopticMap,
                             canny_depth_edges, dee_postprocess,
                             depth_gradient, gt_from_panoptic, hysteresis,
                             nms)


def full_depth(values):
    values = np.asarray(values, dtype=np.float64)
    return DepthMap(values, np.ones(values.shape, bool))


class TestDepthGradient:
    def test_constant_zero_magnitude(self):
        g = depth_gradient(full_depth(np.full((5, 5), 7.0)))
        assert (g.magnitude == 0).all()

    def test_ramp_unit_gradient(self):
        v = np.tile(np.arange(1, 8, dtype=np.float64), (5, 1))
        g = depth_gradient(full_depth(v))
        interior = g.defined
        assert np.allclose(g.magnitude[interior], 1.0)
        assert np.allclose(g.direction[interior], 0.0)

    def test_step_spreads_over_two_columns(self):
        v = np.full((5, 6), 10.0)
        v[:, 3:] = 20.0  # step between cols 2 and 3
        g = depth_gradient(full_depth(v))
        assert np.allclose(g.magnitude[1:-1, 2], 5.0)
        assert np.allclose(g.magnitude[1:-1, 3], 5.0)

    def test_undefined_near_invalid(self):
        v = np.full((5, 5), 10.0)
        valid = np.ones((5, 5), bool)
        valid[2, 2] = False
        g = depth_gradient(DepthMap(v, valid))
        for r, c in [(2, 2), (1, 2), (3, 2), (2, 1), (2, 3)]:
            assert not g.defined[r, c]
        assert g.defined[1, 1]

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            depth_gradient(full_depth(np.ones((2, 5))))


class TestNms:
    def test_isolated_spike_survives(self):
        mag = np.zeros((5, 5))
        mag[2, 2] = 3.0
        out = nms(mag, np.zeros((5, 5)))
        assert out[2, 2] == 3.0
        assert out.sum() == 3.0

    def test_two_wide_ridge_keeps_smaller_column(self):
        # equal-magnitude ridge over cols 2 and 3, horizontal direction
        mag = np.zeros((5, 5))
        mag[:, 2] = 2.0
        mag[:, 3] = 2.0
        out = nms(mag, np.zeros((5, 5)))
        assert (out[:, 2] == 2.0).all()
        assert (out[:, 3] == 0.0).all()

    def test_monotone_ramp_keeps_boundary_maximum(self):
        mag = np.tile(np.arange(5, dtype=np.float64), (3, 1))
        out = nms(mag, np.zeros((3, 5)))
        # only the last column (local max against out-of-frame 0) survives
        assert (out[:, :4] == 0).all()
        assert (out[:, 4] == 4.0).all()

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            nms(np.zeros((3, 3)), np.zeros((2, 3)))


class TestHysteresis:
    def test_all_below_low_empty(self):
        assert hysteresis(np.full((4, 4), 0.5), 0.85, 0.9).count() == 0

    def test_chain_connected_to_seed_kept(self):
        row = np.zeros((1, 5))
        row[0, :3] = [0.86, 0.86, 0.95]
        e = hysteresis(row, 0.85, 0.9)
        assert e.pixels == {(0, 0), (0, 1), (0, 2)}

    def test_isolated_weak_dropped(self):
        row = np.zeros((1, 5))
        row[0, 1] = 0.86
        assert hysteresis(row, 0.85, 0.9).count() == 0

    def test_degenerate_zero_thresholds_mark_everything(self):
        e = hysteresis(np.zeros((3, 4)), 0.0, 0.0)
        assert e.count() == 12

    def test_diagonal_connectivity(self):
        a = np.zeros((3, 3))
        a[0, 0] = 0.95
        a[1, 1] = 0.86
        a[2, 2] = 0.86
        assert hysteresis(a, 0.85, 0.9).count() == 3


class TestCannyDepthEdges:
    def test_constant_empty(self):
        assert canny_depth_edges(full_depth(np.full((6, 6), 30.0))).count() == 0

    def test_three_meter_step_below_low(self):
        v = np.full((6, 8), 10.0)
        v[:, 4:] = 13.0
        assert canny_depth_edges(v_map := full_depth(v),
                                 CannyConfig(4, 5)).count() == 0

    def test_ten_meter_step_single_column(self):
        v = np.full((8, 8), 10.0)
        v[:, 4:] = 20.0  # step between cols 3 and 4 -> magnitude 5 on both
        e = canny_depth_edges(full_depth(v), CannyConfig(4, 5))
        # tie broken to the smaller column; border rows are undefined
        assert e.pixels == {(r, 3) for r in range(1, 7)}

    @pytest.mark.parametrize("phi_deg", [0, 30, 45, 60, 90, 135])
    def test_thinness_along_gradient(self, phi_deg):
        # oriented step worlds: the surviving edge must be 1 px wide
        # along the (quantized) gradient direction
        phi = np.radians(phi_deg)
        yy, xx = np.meshgrid(np.arange(16), np.arange(16), indexing="ij")
        v = np.where(xx * np.cos(phi) + yy * np.sin(phi) > 7.3, 40.0, 10.0)
        e = canny_depth_edges(full_depth(v), CannyConfig(4.0, 5.0))
        assert e.count() > 0
        g = depth_gradient(full_depth(v))
        for r, c in e.pixels:
            # quantized 8-direction offset along the gradient
            dr = int(np.copysign(np.floor(abs(np.sin(g.direction[r, c])) + 0.5),
                                 np.sin(g.direction[r, c])))
            dc = int(np.copysign(np.floor(abs(np.cos(g.direction[r, c])) + 0.5),
                                 np.cos(g.direction[r, c])))
            ahead = (r + dr, c + dc) in e.pixels
            behind = (r - dr, c - dc) in e.pixels
            assert not (ahead and behind)

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(5)
        v = np.cumsum(rng.uniform(0, 4, (10, 10)), axis=1) + 1.0
        d = full_depth(v)
        base = canny_depth_edges(d, CannyConfig(2.0, 3.0))
        higher = canny_depth_edges(d, CannyConfig(2.0, 4.0))
        assert higher.pixels <= base.pixels
        lower_low = canny_depth_edges(d, CannyConfig(1.0, 3.0))
        assert base.pixels <= lower_low.pixels

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        v = rng.uniform(1, 50, (10, 10))
        d = full_depth(v)
        a = canny_depth_edges(d, CannyConfig(2, 3))
        b = canny_depth_edges(d, CannyConfig(2, 3))
        assert a.pixels == b.pixels

    def test_smoothing_sigma_runs(self):
        v = np.full((8, 8), 10.0)
        v[:, 4:] = 30.0
        e = canny_depth_edges(full_depth(v), CannyConfig(2, 3, smoothing_sigma=1.0))
        assert e.count() > 0


class TestDeePostprocess:
    def test_zero_probs_empty(self):
        p = EdgeProbMap(np.zeros((5, 5)))
        assert dee_postprocess(p, np.zeros((5, 5))).count() == 0

    def test_gaussian_cross_section_peak_survives(self):
        profile = [0.2, 0.7, 0.95, 0.7, 0.2]
        probs = np.tile(profile, (5, 1))
        e = dee_postprocess(EdgeProbMap(probs), np.zeros((5, 5)),
                            HysteresisConfig(0.85, 0.9))
        assert e.pixels == {(r, 2) for r in range(5)}

    def test_saturated_field_yields_thin_lattice(self):
        probs = np.ones((4, 4))
        e = dee_postprocess(EdgeProbMap(probs), np.zeros((4, 4)),
                            HysteresisConfig(0.85, 0.9))
        # ties resolve toward smaller column: a single 1-px column survives
        assert e.pixels == {(r, 0) for r in range(4)}


class TestGtFromPanoptic:
    def test_single_segment_empty(self):
        pm = PanopticMap(np.zeros((4, 4), int), np.zeros((4, 4), int))
        assert gt_from_panoptic(pm).count() == 0

    def test_same_class_instances_emit_boundary(self):
        seg = np.zeros((4, 4), int)
        seg[:, 2:] = 1
        cls = np.full((4, 4), 7)
        e = gt_from_panoptic(PanopticMap(seg, cls))
        # boundary on the larger-segment side (col 2)
        assert e.pixels == {(r, 2) for r in range(4)}

    def test_excluded_pair_suppressed(self):
        seg = np.zeros((4, 4), int)
        seg[:, 2:] = 1
        cls = np.zeros((4, 4), int)
        cls[:, 2:] = 3  # road=0 | sidewalk=3
        pm = PanopticMap(seg, cls, frozenset({frozenset({0, 3})}))
        assert gt_from_panoptic(pm).count() == 0

    def test_relabel_invariance(self):
        rng = np.random.default_rng(21)
        seg = rng.integers(0, 5, (6, 6))
        cls = seg % 3  # class constant per segment id
        base = gt_from_panoptic(PanopticMap(seg, cls))
        relabeled = gt_from_panoptic(PanopticMap(seg * 10 + 3, cls))
        assert base.pixels == relabeled.pixels
