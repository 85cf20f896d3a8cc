import numpy as np
import pytest

from depthedge.core_io import DepthMap, EdgeMap, EdgeProbMap, SparseDepth
from depthedge.loss import (EdbConfig, LossConfig, bbce, bbce_with_grad,
                            depth_loss_l1, depth_pyramid, edb_forward,
                            edb_forward_with_domain, edge_pyramid,
                            orientation_from_edges, orthogonal_gradient,
                            total_loss)

# seeds screened so no instance straddles a subgradient kink within the
# finite-difference step (|diff| ~ 0, clamp boundary, pred == gt)
GRAD_CHECK_SEEDS = [0, 1, 2, 4, 5, 6, 7, 8, 11, 12, 13, 14, 15, 16, 17, 18,
                    19, 20, 21, 22, 23, 24, 25, 27, 28, 29, 30, 31, 32, 33,
                    36, 38, 42, 43, 46, 47, 48, 49, 50, 51, 52, 53, 54, 55,
                    57, 58, 59, 60, 61, 62]


def full_depth(values):
    values = np.asarray(values, dtype=np.float64)
    return DepthMap(values, np.ones(values.shape, bool))


def random_instance(seed, size=16, edge_density=0.1):
    rng = np.random.default_rng(seed)
    pred = full_depth(rng.uniform(1, 80, (size, size)))
    gt = full_depth(rng.uniform(1, 80, (size, size)))
    edges = EdgeMap(rng.random((size, size)) < edge_density)
    return pred, gt, edges


def fd_gradient(pred, gt, edges, cfg, edb, h=1e-3):
    out = np.zeros(pred.shape)
    for i in range(pred.height):
        for j in range(pred.width):
            vp = pred.values.copy()
            vp[i, j] += h
            vm = pred.values.copy()
            vm[i, j] -= h
            lp = total_loss([DepthMap(vp, pred.valid)], gt, edges, cfg, edb).total
            lm = total_loss([DepthMap(vm, pred.valid)], gt, edges, cfg, edb).total
            out[i, j] = (lp - lm) / (2 * h)
    return out


class TestOrientation:
    def test_vertical_line_theta_horizontal(self):
        e = EdgeMap.from_pixels(9, 9, [(r, 4) for r in range(9)])
        of = orientation_from_edges(e, EdbConfig(orientation_sigma=1.0))
        for r in range(2, 7):
            for c in (3, 5):
                assert of.defined[r, c]
                assert abs(np.sin(of.theta[r, c])) < 1e-9

    def test_horizontal_line_theta_vertical(self):
        e = EdgeMap.from_pixels(9, 9, [(4, c) for c in range(9)])
        of = orientation_from_edges(e, EdbConfig(orientation_sigma=1.0))
        for c in range(2, 7):
            for r in (3, 5):
                assert of.defined[r, c]
                assert abs(abs(of.theta[r, c]) - np.pi / 2) < 1e-9

    def test_empty_map_all_undefined(self):
        of = orientation_from_edges(EdgeMap(np.zeros((6, 6), bool)))
        assert not of.defined.any()


class TestOrthogonalGradient:
    def make_of(self, shape, theta):
        from depthedge.loss import OrientationField
        return OrientationField(np.full(shape, float(theta)),
                                np.ones(shape, bool))

    def test_theta_zero_horizontal_difference(self):
        rng = np.random.default_rng(1)
        d = full_depth(rng.uniform(1, 40, (6, 6)))
        g, defined = orthogonal_gradient(d, self.make_of((6, 6), 0.0))
        for r in range(6):
            for c in range(1, 5):
                assert defined[r, c]
                assert g[r, c] == d.values[r, c + 1] - d.values[r, c - 1]

    def test_theta_half_pi_vertical_difference(self):
        rng = np.random.default_rng(2)
        d = full_depth(rng.uniform(1, 40, (6, 6)))
        g, defined = orthogonal_gradient(d, self.make_of((6, 6), np.pi / 2))
        for r in range(1, 5):
            for c in range(6):
                assert g[r, c] == d.values[r + 1, c] - d.values[r - 1, c]

    def test_theta_quarter_pi_diagonal_difference(self):
        rng = np.random.default_rng(3)
        d = full_depth(rng.uniform(1, 40, (6, 6)))
        g, defined = orthogonal_gradient(d, self.make_of((6, 6), np.pi / 4))
        # round(sqrt(2)/2) = 1 under half-away-from-zero rounding
        for r in range(1, 5):
            for c in range(1, 5):
                assert g[r, c] == d.values[r + 1, c + 1] - d.values[r - 1, c - 1]

    def test_out_of_bounds_undefined(self):
        d = full_depth(np.full((4, 4), 5.0))
        g, defined = orthogonal_gradient(d, self.make_of((4, 4), 0.0))
        assert not defined[:, 0].any()
        assert not defined[:, 3].any()

    def test_divergence_from_isotropic_on_diagonal_edge(self):
        # the oriented operator and the plain magnitude disagree
        from depthedge.edges import depth_gradient
        yy, xx = np.meshgrid(np.arange(10), np.arange(10), indexing="ij")
        d = full_depth(np.where(xx + yy > 9, 40.0, 10.0))
        g, defined = orthogonal_gradient(d, self.make_of((10, 10), np.pi / 4))
        iso = depth_gradient(d).magnitude
        sel = defined & (depth_gradient(d).defined)
        assert not np.allclose(np.abs(g[sel]), iso[sel])


class TestEdbForward:
    def test_half_probability_at_t_grad(self):
        # |orthogonal difference| == t_grad -> exactly 0.5
        v = np.tile(np.arange(0, 24, 2, dtype=np.float64) + 1.0, (5, 1))
        d = full_depth(v)  # D[c+1]-D[c-1] == 4 everywhere
        of = TestOrthogonalGradient().make_of((5, 12), 0.0)
        p = edb_forward(d, of, EdbConfig(t_grad=4.0))
        assert np.all(p.probs[:, 1:-1] == 0.5)

    def test_constant_depth_probability(self):
        d = full_depth(np.full((8, 8), 30.0))
        of = orientation_from_edges(EdgeMap(np.zeros((8, 8), bool)))
        p, domain = edb_forward_with_domain(d, of, EdbConfig(t_grad=4.0))
        expected = 1.0 / (1.0 + np.exp(4.0))
        assert np.allclose(p.probs[domain], expected)
        assert abs(expected - 0.0180) < 1e-4

    def test_step_saturates(self):
        v = np.full((6, 8), 10.0)
        v[:, 4:] = 20.0
        d = full_depth(v)
        of = TestOrthogonalGradient().make_of((6, 8), 0.0)
        p = edb_forward(d, of, EdbConfig(t_grad=4.0))
        expected = 1.0 / (1.0 + np.exp(-6.0))
        assert np.allclose(p.probs[:, 4], expected)  # sees D[5]-D[3] = 10
        assert abs(expected - 0.9975) < 1e-4

    def test_strictly_increasing_in_gradient(self):
        of = TestOrthogonalGradient().make_of((3, 5), 0.0)
        probs = []
        for step in (1.0, 2.0, 5.0, 9.0):
            v = np.tile([10.0, 10.0, 10.0, 10.0 + step, 10.0 + step], (3, 1))
            p = edb_forward(full_depth(v), of, EdbConfig(t_grad=4.0))
            probs.append(p.probs[1, 2])
        assert all(a < b for a, b in zip(probs, probs[1:]))


class TestBbce:
    def test_half_everywhere_is_ln2(self):
        gt = EdgeMap.from_pixels(10, 10, [(0, 0)])
        p = EdgeProbMap(np.full((10, 10), 0.5))
        assert abs(bbce(p, gt) - np.log(2)) < 1e-12

    def test_single_class_fallback(self):
        gt = EdgeMap.from_pixels(1, 1, [(0, 0)])
        p = EdgeProbMap(np.array([[0.25]]))
        assert abs(bbce(p, gt) - (-np.log(0.25))) < 1e-12

    def test_near_perfect_split(self):
        probs = np.full((1, 1000), 1e-6)
        probs[0, 0] = 1 - 1e-6
        gt = EdgeMap.from_pixels(1, 1000, [(0, 0)])
        loss = bbce(EdgeProbMap(probs), gt)
        assert abs(loss - (-np.log(1 - 1e-6))) < 1e-9
        assert loss < 2e-6

    def test_both_classes_empty_errors(self):
        gt = EdgeMap(np.zeros((4, 4), bool))
        p = EdgeProbMap(np.full((4, 4), 0.5))
        with pytest.raises(ValueError, match="classes empty"):
            bbce(p, gt, domain=np.zeros((4, 4), bool))

    def test_permutation_invariant(self):
        rng = np.random.default_rng(13)
        probs = rng.random((1, 50))
        gt_mask = rng.random((1, 50)) < 0.3
        if not gt_mask.any():
            gt_mask[0, 0] = True
        perm = rng.permutation(50)
        a = bbce(EdgeProbMap(probs), EdgeMap(gt_mask))
        b = bbce(EdgeProbMap(probs[:, perm]), EdgeMap(gt_mask[:, perm]))
        assert abs(a - b) < 1e-12

    def test_label_swap_with_flip_invariant(self):
        rng = np.random.default_rng(14)
        probs = rng.uniform(0.01, 0.99, (6, 6))
        gt_mask = rng.random((6, 6)) < 0.4
        gt_mask[0, 0] = True
        gt_mask[0, 1] = False
        a = bbce(EdgeProbMap(probs), EdgeMap(gt_mask))
        b = bbce(EdgeProbMap(1.0 - probs), EdgeMap(~gt_mask))
        assert abs(a - b) < 1e-12


class TestDepthLossL1:
    def test_perfect_zero(self):
        d = full_depth(np.full((4, 4), 9.0))
        assert depth_loss_l1(d, d) == 0.0

    def test_offset_one_meter(self):
        gt = full_depth(np.full((4, 4), 9.0))
        pred = full_depth(np.full((4, 4), 10.0))
        assert depth_loss_l1(pred, gt) == 1.0

    def test_sparse_mean(self):
        gt = SparseDepth.from_samples(3, 3, [(0, 0, 5.0), (1, 1, 10.0)])
        pred_v = np.full((3, 3), 1.0)
        pred_v[0, 0] = 6.0
        pred_v[1, 1] = 8.0
        assert depth_loss_l1(full_depth(pred_v), gt) == 1.5

    def test_empty_support_errors(self):
        pred = full_depth(np.ones((3, 3)))
        gt = DepthMap(np.ones((3, 3)), np.zeros((3, 3), bool))
        with pytest.raises(ValueError, match="empty"):
            depth_loss_l1(pred, gt)


class TestPyramids:
    def test_depth_pyramid_shapes(self):
        d = full_depth(np.ones((15, 9)))
        pyr = depth_pyramid(d, 3)
        assert [p.shape for p in pyr] == [(15, 9), (8, 5), (4, 3)]

    def test_edge_pyramid_or_pool(self):
        e = EdgeMap.from_pixels(4, 4, [(0, 0), (3, 3)])
        pyr = edge_pyramid(e, 2)
        assert pyr[1].pixels == {(0, 0), (1, 1)}


class TestTotalLoss:
    def test_alpha_zero_is_pure_l1(self):
        pred, gt, edges = random_instance(100)
        out = total_loss([pred], gt, edges, LossConfig(alpha=0.0), EdbConfig())
        l1 = depth_loss_l1(pred, gt)
        assert out.total == l1
        assert out.edge_term >= 0

    def test_additive_decomposition(self):
        pred, gt, edges = random_instance(101)
        cfg = LossConfig(alpha=0.1)
        out = total_loss([pred], gt, edges, cfg, EdbConfig())
        assert out.total == out.depth_term + cfg.alpha * out.edge_term

    def test_saturating_step_world_small_edge_term(self):
        # perfect prediction on a sharp step: EDB saturates on the GT edge
        v = np.full((16, 16), 10.0)
        v[:, 8:] = 40.0
        d = full_depth(v)
        # the +-1 px straddle of the difference operator responds at the
        # two pixels flanking the step, so GT marks that 2-px band
        edges = EdgeMap.from_pixels(
            16, 16, [(r, c) for r in range(16) for c in (7, 8)])
        out = total_loss([d], d, edges, LossConfig(alpha=1.0),
                         EdbConfig(t_grad=8.0))
        assert out.depth_term == 0.0
        assert out.edge_term < 1e-3

    def test_pyramid_shape_mismatch_rejected(self):
        pred, gt, edges = random_instance(102)
        with pytest.raises(ValueError):
            total_loss([pred, pred], gt, edges, LossConfig(num_scales=2),
                       EdbConfig())

    def test_multiscale_runs_and_decomposes(self):
        pred, gt, edges = random_instance(103)
        pyr = depth_pyramid(pred, 3)
        out = total_loss(pyr, gt, edges, LossConfig(alpha=0.5, num_scales=3),
                         EdbConfig())
        assert out.total == out.depth_term + 0.5 * out.edge_term
        assert len(out.grads_per_scale) == 3
        assert out.grads_per_scale[1].shape == (8, 8)

    def test_gradient_matches_finite_differences_single(self):
        pred, gt, edges = random_instance(GRAD_CHECK_SEEDS[0])
        cfg = LossConfig(alpha=0.1)
        edb = EdbConfig(t_grad=4.0)
        out = total_loss([pred], gt, edges, cfg, edb)
        fd = fd_gradient(pred, gt, edges, cfg, edb)
        sel = np.abs(out.grad_wrt_depth) > 1e-6
        rel = np.abs(out.grad_wrt_depth - fd)[sel] / np.abs(out.grad_wrt_depth[sel])
        assert rel.max() < 1e-3

    def test_gradient_finite_on_valid(self):
        pred, gt, edges = random_instance(104)
        out = total_loss([pred], gt, edges, LossConfig(alpha=0.1), EdbConfig())
        assert np.isfinite(out.grad_wrt_depth[pred.valid]).all()
