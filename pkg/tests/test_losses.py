"""
Loss terms, their combination, and the analytic predictor gradient.
"""

import math

import numpy as np
import pytest

from src.assignment import (
    assign_first_stage,
    assign_second_stage_heuristic,
    assign_second_stage_projection,
    assign_second_stage_source,
)
from src.config.config_objects import ExperimentSpec, HeuristicConfig, LossConfig
from src.core.constants import PROBABILITY_EPSILON
from src.core.exceptions import GroundTruthKindError, LossError, NonFiniteLoss
from src.geometry import theta_to_midpoint_offset
from src.losses import (
    LossBreakdown,
    ObjectiveSettings,
    binary_cross_entropy,
    combined_loss,
    evaluate_objective,
    example_loss,
    rcnn_loss_source,
    rcnn_loss_target,
    regression_penalty,
    rpn_loss_source,
    rpn_loss_target,
    wrap_angle,
)
from src.objects.annotations import GroundTruthSet
from src.objects.boxes import AABox, MidpointOffsetProposal, RotatedBox
from src.objects.detections import Detection
from src.objects.predictions import RpnPredictions
from src.objects.predictor import ToyPredictor
from src.objects.training import LossStrategy
from src.simulator import SceneTask, generate_scene, initial_predictor

ALMOST_ONE = 1.0 - PROBABILITY_EPSILON
NO_NORMALISATION = LossConfig(regression_normalization="none")


def encoded(box: RotatedBox, p: float) -> MidpointOffsetProposal:
    enc = theta_to_midpoint_offset(box)
    return MidpointOffsetProposal(enc.cx, enc.cy, enc.w, enc.h, enc.alpha, enc.beta, p)


def far_proposal(p: float) -> MidpointOffsetProposal:
    return MidpointOffsetProposal(500, 500, 2, 2, 1, 1, p)


# =============================================================================
# BUILDING BLOCKS
# =============================================================================

class TestBuildingBlocks:

    def test_bce_at_half(self):
        losses, grads = binary_cross_entropy(np.zeros(2), np.array([True, False]), np.ones(2), 1e-7)
        np.testing.assert_allclose(losses, [math.log(2), math.log(2)])
        np.testing.assert_allclose(grads, [-0.5, 0.5])

    def test_bce_gradient_vanishes_outside_clamp(self):
        _, grads = binary_cross_entropy(np.array([60.0, -60.0]), np.array([True, True]), np.ones(2), 1e-7)
        assert grads[0] == 0.0
        assert grads[1] == 0.0

    def test_smooth_l1(self):
        cfg = LossConfig(regression="smooth_l1", smooth_l1_beta=1.0)
        values, grads = regression_penalty(np.array([0.5, -2.0]), cfg)
        np.testing.assert_allclose(values, [0.125, 1.5])
        np.testing.assert_allclose(grads, [0.5, -1.0])

    def test_wrap_angle(self):
        np.testing.assert_allclose(wrap_angle(np.array([math.pi - 0.02, 0.3, -math.pi / 2])),
                                   [-0.02, 0.3, -math.pi / 2])


class TestLossBreakdown:

    def test_totals(self):
        parts = LossBreakdown(L_S=1.0, L_T=2.0, L_S_star=0.5, L_T_star=0.25)
        assert parts.total_first == 3.0
        assert parts.total_second == 0.75
        assert parts.total == 3.75

    @pytest.mark.parametrize("value", [float("nan"), float("inf"), -1.0])
    def test_invalid_component(self, value):
        with pytest.raises(NonFiniteLoss):
            LossBreakdown(L_T=value)

    def test_mean(self):
        mean = LossBreakdown.mean([LossBreakdown(L_S=1.0), LossBreakdown(L_S=3.0, L_T=2.0)])
        assert (mean.L_S, mean.L_T) == (2.0, 1.0)

    def test_as_target_moves_components(self):
        moved = LossBreakdown(L_S=1.0, L_S_star=2.0).as_target()
        assert (moved.L_S, moved.L_T, moved.L_S_star, moved.L_T_star) == (0.0, 1.0, 0.0, 2.0)


# =============================================================================
# FIRST STAGE
# =============================================================================

class TestRpnLossSource:

    BOX = RotatedBox(0, 0, 4, 2, 0)

    def run(self, proposals, cfg=None):
        gt = GroundTruthSet.source([self.BOX])
        return rpn_loss_source(proposals, gt, assign_first_stage(proposals, gt), cfg)

    def test_exact_confident_positive_is_near_zero(self):
        assert self.run([encoded(self.BOX, ALMOST_ONE)]).L_S == pytest.approx(0.0, abs=1e-6)

    def test_confident_negative_is_near_zero(self):
        assert self.run([far_proposal(PROBABILITY_EPSILON)]).L_S == pytest.approx(0.0, abs=1e-6)

    def test_undecided_positive_costs_log_two(self):
        assert self.run([encoded(self.BOX, 0.5)]).L_S == pytest.approx(math.log(2))

    def test_offsets_are_regressed(self):
        prop = MidpointOffsetProposal(0, 0, 4, 2, 1.5, 1.0, ALMOST_ONE)
        # alpha residual 0.5 over reference width 4
        assert self.run([prop]).L_S == pytest.approx(0.125, abs=1e-6)

    def test_gradient_at_minimum_is_zero(self):
        gt = GroundTruthSet.source([self.BOX])
        enc = theta_to_midpoint_offset(self.BOX)
        pred = RpnPredictions([[enc.cx, enc.cy, enc.w, enc.h, enc.alpha, enc.beta]], [60.0], [[4.0, 2.0]])
        breakdown = rpn_loss_source(pred, gt, assign_first_stage(pred.boxes, gt))
        assert not breakdown.output_gradients["rpn_boxes"].any()
        assert not breakdown.output_gradients["rpn_logits"].any()

    def test_rejects_target_ground_truth(self):
        gt = GroundTruthSet.target([AABox(0, 0, 1, 1)])
        proposals = [far_proposal(0.5)]
        with pytest.raises(GroundTruthKindError):
            rpn_loss_source(proposals, gt, assign_first_stage(proposals, gt))

    def test_assignment_length_mismatch(self):
        gt = GroundTruthSet.source([self.BOX])
        with pytest.raises(LossError):
            rpn_loss_source([far_proposal(0.5)] * 2, gt, assign_first_stage([far_proposal(0.5)], gt))


class TestRpnLossTarget:

    GT = GroundTruthSet.target([AABox(-2, -1, 2, 1)])

    def run(self, proposals, gamma=1.0, cfg=None):
        return rpn_loss_target(proposals, self.GT, assign_first_stage(proposals, self.GT, gamma), gamma, cfg)

    def test_centre_offset_costs_one_over_n(self):
        proposals = [MidpointOffsetProposal(1, 0, 4, 2, 2, 1, ALMOST_ONE), far_proposal(PROBABILITY_EPSILON)]
        assert self.run(proposals, cfg=NO_NORMALISATION).L_T == pytest.approx(0.5, abs=1e-5)

    def test_enlarged_target_matched_exactly(self):
        proposals = [MidpointOffsetProposal(0, 0, 4.4, 2.2, 0.3, -0.4, ALMOST_ONE)]
        assert self.run(proposals, gamma=1.1).L_T == pytest.approx(0.0, abs=1e-6)

    def test_offsets_get_no_gradient(self, rng):
        rows = np.column_stack([rng.uniform(-1, 1, (8, 2)), rng.uniform(2, 5, (8, 2)), np.zeros((8, 2))])
        rows[:, 4] = rows[:, 2] * rng.uniform(-0.5, 0.5, 8)
        rows[:, 5] = rows[:, 3] * rng.uniform(-0.5, 0.5, 8)
        pred = RpnPredictions(rows, rng.normal(size=8), rows[:, 2:4])
        breakdown = rpn_loss_target(pred, self.GT, assign_first_stage(rows, self.GT))
        assert not breakdown.output_gradients["rpn_boxes"][:, 4:].any()

    def test_offsets_do_not_change_value(self):
        a = [MidpointOffsetProposal(0.5, 0, 4, 2, 2, 1, 0.7)]
        b = [MidpointOffsetProposal(0.5, 0, 4, 2, -1.3, 0.2, 0.7)]
        assert self.run(a).L_T == self.run(b).L_T


# =============================================================================
# SECOND STAGE
# =============================================================================

class TestRcnnLossSource:

    def test_exact_positive_near_zero(self):
        box = RotatedBox(3, 3, 6, 2, 0.4)
        gt = GroundTruthSet.source([box])
        dets = [Detection(box, ALMOST_ONE)]
        value = rcnn_loss_source(dets, gt, assign_second_stage_source([box], gt)).L_S_star
        assert value == pytest.approx(0.0, abs=1e-6)

    def test_angle_residual_wraps(self):
        gt_box = RotatedBox(0, 0, 4, 1, -math.pi / 2 + 0.01)
        pred_box = RotatedBox(0, 0, 4, 1, math.pi / 2 - 0.01)
        gt = GroundTruthSet.source([gt_box])
        assignments = assign_second_stage_source([pred_box], gt)
        assert assignments[0].positive
        value = rcnn_loss_source([Detection(pred_box, ALMOST_ONE)], gt, assignments).L_S_star
        assert value == pytest.approx(0.02, abs=1e-6)

    def test_short_side_first_ground_truth_is_relabelled(self):
        gt = GroundTruthSet.source([RotatedBox(0, 0, 1, 4, 0.0)])
        pred_box = RotatedBox(0, 0, 4, 1, math.pi / 2)
        assignments = assign_second_stage_source([pred_box], gt)
        value = rcnn_loss_source([Detection(pred_box, ALMOST_ONE)], gt, assignments).L_S_star
        assert value == pytest.approx(0.0, abs=1e-6)


class TestRcnnLossTarget:

    GT = GroundTruthSet.target([AABox(0, 0, 4, 2)])

    def test_projection_example(self):
        dets = [Detection(RotatedBox(2, 1, 4, 2, 0), 0.8), Detection(RotatedBox(50, 50, 4, 2, 0), 0.1)]
        assignments = assign_second_stage_projection([d.box for d in dets], self.GT)
        value = rcnn_loss_target(dets, self.GT, assignments, "projection").L_T_star
        assert value == pytest.approx((-math.log(0.8) - math.log(0.9)) / 2)

    def test_heuristic_mask_leaves_negatives(self):
        gt = GroundTruthSet.target([AABox(0, 0, 20, 10)])
        dets = [Detection(RotatedBox(10, 5, 20, 10, 0), 0.3), Detection(RotatedBox(90, 90, 4, 2, 0), 0.1)]
        cfg = HeuristicConfig(area_rule="mask_small")
        assignments = assign_second_stage_heuristic([d.box for d in dets], gt, cfg)
        assert assignments[0].positive and not assignments[0].reliable
        value = rcnn_loss_target(dets, gt, assignments, "heuristic").L_T_star
        assert value == pytest.approx(-math.log(0.9) / 2)

    def test_mirrored_angle_same_loss(self):
        boxes = [RotatedBox(2, 1, 3, 1, 0.3), RotatedBox(2, 1, 3, 1, math.pi - 0.3)]
        losses = []
        for box in boxes:
            assignments = assign_second_stage_projection([box], self.GT)
            losses.append(rcnn_loss_target([Detection(box, 0.6)], self.GT, assignments).L_T_star)
        assert losses[0] == losses[1]

    def test_no_regression_gradient(self):
        dets = [Detection(RotatedBox(2.5, 1, 4, 2, 0.2), 0.6)]
        assignments = assign_second_stage_projection([d.box for d in dets], self.GT)
        breakdown = rcnn_loss_target(dets, self.GT, assignments)
        assert not breakdown.output_gradients["rcnn_boxes"].any()

    def test_unknown_mode(self):
        with pytest.raises(LossError):
            rcnn_loss_target([], self.GT, assign_second_stage_projection(np.zeros((0, 5)), self.GT), "literal")


class TestCombinedLoss:

    def test_sum_of_parts(self):
        total = combined_loss(LossBreakdown(L_S=1.0, L_S_star=0.5), LossBreakdown(L_T=2.0, L_T_star=0.25))
        assert total.total == 3.75

    def test_empty_target(self):
        total = combined_loss(LossBreakdown(L_S=1.0, L_S_star=0.5), [])
        assert total.total == 1.5

    def test_weighted(self):
        total = combined_loss(LossBreakdown(L_S=1.0), LossBreakdown(L_T=1.0), (2.0, 1.0))
        assert total.total == 3.0

    def test_permutation_invariant(self, rng):
        gt = GroundTruthSet.source([RotatedBox(0, 0, 6, 2, 0.3), RotatedBox(8, 1, 5, 3, -0.7)])
        rows = np.column_stack([rng.uniform(-2, 10, (20, 2)), rng.uniform(3, 8, (20, 2)), np.zeros((20, 2))])
        rows[:, 4] = rows[:, 2] * 0.3
        rows[:, 5] = -rows[:, 3] * 0.2
        logits = rng.normal(size=20)
        order = rng.permutation(20)
        a = rpn_loss_source(RpnPredictions(rows, logits, rows[:, 2:4]), gt, assign_first_stage(rows, gt))
        b = rpn_loss_source(RpnPredictions(rows[order], logits[order], rows[order, 2:4]), gt,
                            assign_first_stage(rows[order], gt))
        assert a.L_S == pytest.approx(b.L_S, rel=1e-12)


# =============================================================================
# PREDICTOR GRADIENT
# =============================================================================

def objective_batch(strategies):
    """Training examples of two small scenes per strategy under the initial predictor."""
    spec = ExperimentSpec(heuristic=HeuristicConfig(area_threshold=600.0))
    model = initial_predictor()
    batch = []
    for k, strategy in enumerate(strategies):
        domain = "source" if strategy is LossStrategy.SOURCE else "target"
        cfg = spec.source_scene if domain == "source" else spec.target_scene
        scene = generate_scene(cfg, 10 + k, domain)
        batch.append(SceneTask.build(scene, strategy, spec).example(model, spec))
    return batch


ALL_STRATEGIES = [LossStrategy.SOURCE, LossStrategy.TARGET_PROJECTION,
                  LossStrategy.TARGET_HEURISTIC, LossStrategy.TARGET_AXIS, LossStrategy.TARGET_NAIVE]


def check_directional(batch, settings, rng, points, step=1e-6):
    """
    Compare the analytic gradient with central differences along random
    directions; points where one-sided differences disagree straddle a kink.
    """
    n_params = evaluate_objective(initial_predictor(), batch, settings).gradient.size
    checked = 0
    for _ in range(points):
        params = initial_predictor().flat() + rng.normal(0.0, 0.02, n_params)
        direction = rng.normal(size=n_params)
        direction /= np.linalg.norm(direction)
        centre = evaluate_objective(params, batch, settings)
        plus = evaluate_objective(params + step * direction, batch, settings).total
        minus = evaluate_objective(params - step * direction, batch, settings).total
        forward = (plus - centre.total) / step
        backward = (centre.total - minus) / step
        if abs(forward - backward) > 1e-4 * max(1.0, abs(forward)):
            continue
        numeric = (plus - minus) / (2 * step)
        analytic = float(centre.gradient @ direction)
        assert abs(numeric - analytic) <= 1e-5 * max(abs(analytic), 1e-2)
        checked += 1
    return checked


class TestObjectiveGradient:

    @pytest.mark.parametrize("regression", ["l1", "smooth_l1"])
    def test_directional_finite_differences(self, rng, regression):
        batch = objective_batch(ALL_STRATEGIES)
        settings = ObjectiveSettings(loss=LossConfig(regression=regression))
        assert check_directional(batch, settings, rng, points=20) >= 15

    @pytest.mark.parametrize("strategy", [LossStrategy.TARGET_PROJECTION, LossStrategy.TARGET_HEURISTIC,
                                          LossStrategy.TARGET_AXIS])
    def test_target_first_stage_ignores_offsets(self, strategy):
        batch = objective_batch([strategy])
        model = ToyPredictor.from_flat(initial_predictor().flat() + 0.01, batch[0].features.shape[1])
        _, gradient = example_loss(model, batch[0], ObjectiveSettings())
        grad_w1, grad_w2 = model.split_gradient(gradient)
        assert not grad_w1[4:6].any()
        assert not grad_w2[:5].any()

    def test_axis_only_terms_ignore_gamma(self):
        batch = objective_batch([LossStrategy.TARGET_AXIS])
        plain = evaluate_objective(initial_predictor(), batch, ObjectiveSettings(gamma=1.0))
        enlarged = evaluate_objective(initial_predictor(), batch, ObjectiveSettings(gamma=1.2))
        assert plain.total == enlarged.total
        np.testing.assert_array_equal(plain.gradient, enlarged.gradient)

    def test_naive_terms_train_offsets(self):
        batch = objective_batch([LossStrategy.TARGET_NAIVE])
        model = initial_predictor()
        grad_w1, _ = model.split_gradient(evaluate_objective(model, batch).gradient)
        assert grad_w1[4:6].any()

    def test_empty_batch(self):
        result = evaluate_objective(initial_predictor(), [])
        assert result.total == 0.0
        assert not result.gradient.any()

    def test_domain_weights_scale_gradient(self):
        batch = objective_batch([LossStrategy.TARGET_PROJECTION])
        base = evaluate_objective(initial_predictor(), batch)
        doubled = evaluate_objective(initial_predictor(), batch,
                                     ObjectiveSettings(loss=LossConfig(target_weight=2.0)))
        assert doubled.total == pytest.approx(2 * base.total)
        np.testing.assert_allclose(doubled.gradient, 2 * base.gradient)

    @pytest.mark.slow
    def test_full_gradient_finite_differences(self, rng):
        batch = objective_batch(ALL_STRATEGIES)
        settings = ObjectiveSettings()
        assert check_directional(batch, settings, rng, points=100) >= 90
