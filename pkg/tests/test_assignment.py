"""
Label assignment for both stages, plus the reliability switch.
"""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.assignment import (
    AssignmentBatch,
    AssignmentResult,
    assign_by_iou,
    assign_first_stage,
    assign_second_stage_heuristic,
    assign_second_stage_projection,
    assign_second_stage_source,
    positive_recall,
    reliability_switch,
)
from src.config.config_objects import HeuristicConfig
from src.core.exceptions import GroundTruthKindError, InvalidGamma
from src.geometry import project_rotated, theta_to_midpoint_offset
from src.objects.annotations import GroundTruthSet
from src.objects.boxes import AABox, MidpointOffsetProposal, RotatedBox
from tests.conftest import rotated_boxes


def proposal_for(rect: AABox) -> MidpointOffsetProposal:
    return MidpointOffsetProposal(rect.cx, rect.cy, rect.width, rect.height, rect.width / 2, rect.height / 2)


# =============================================================================
# ARGMAX RULE
# =============================================================================

class TestAssignByIoU:

    def test_lowest_index_wins_ties(self):
        batch = assign_by_iou(np.array([[0.7, 0.7, 0.2]]))
        assert batch[0] == AssignmentResult(sigma=0, tau=0.7, positive=True)

    def test_no_overlap_has_no_match(self):
        assert assign_by_iou(np.zeros((1, 2)))[0].sigma is None

    def test_threshold_is_inclusive(self):
        assert assign_by_iou(np.array([[0.5]]))[0].positive
        assert not assign_by_iou(np.array([[0.4999]]))[0].positive

    def test_no_ground_truth(self):
        batch = assign_by_iou(np.zeros((3, 0)))
        assert len(batch) == 3
        assert batch.n_positive == 0


# =============================================================================
# FIRST STAGE
# =============================================================================

class TestFirstStage:

    def test_exact_external_rectangle(self):
        gt = GroundTruthSet.target([AABox(0, 0, 4, 2)])
        result = assign_first_stage([proposal_for(AABox(0, 0, 4, 2))], gt)[0]
        assert (result.sigma, result.tau, result.positive) == (0, 1.0, True)

    def test_disjoint_proposal_is_negative(self):
        gt = GroundTruthSet.target([AABox(0, 0, 4, 2)])
        result = assign_first_stage([proposal_for(AABox(10, 10, 12, 12))], gt)[0]
        assert result.tau == 0.0
        assert not result.positive

    def test_source_ground_truth_is_projected(self):
        box = RotatedBox(0, 0, 4, 1, math.pi / 4)
        gt = GroundTruthSet.source([box])
        result = assign_first_stage([theta_to_midpoint_offset(box)], gt)[0]
        assert result.tau == pytest.approx(1.0)
        ext = project_rotated(box)
        assert ext.xmax == pytest.approx(5 / (2 * math.sqrt(2)))

    def test_source_and_target_branches_agree_on_axis_aligned_boxes(self, rng):
        source = GroundTruthSet.source([RotatedBox(2, 3, 4, 2, 0), RotatedBox(9, 9, 3, 6, 0)])
        target = GroundTruthSet.target([AABox(0, 2, 4, 4), AABox(7.5, 6, 10.5, 12)])
        centres = rng.uniform(0, 12, size=(40, 2))
        sizes = rng.uniform(1, 8, size=(40, 2))
        rows = np.hstack([centres, sizes, sizes / 2])
        assert assign_first_stage(rows, source) == assign_first_stage(rows, target)

    def test_enlargement_changes_target_overlap(self):
        gt = GroundTruthSet.target([AABox(-1, -1, 1, 1)])
        proposals = [proposal_for(AABox(-1.2, -1.2, 1.2, 1.2))]
        assert assign_first_stage(proposals, gt, gamma=1.0)[0].tau == pytest.approx(4 / 5.76)
        assert assign_first_stage(proposals, gt, gamma=1.2)[0].tau == pytest.approx(1.0)

    def test_gamma_below_one_rejected(self):
        gt = GroundTruthSet.target([AABox(0, 0, 1, 1)])
        with pytest.raises(InvalidGamma):
            assign_first_stage([proposal_for(AABox(0, 0, 1, 1))], gt, gamma=0.9)

    def test_empty_ground_truth_gives_negatives(self):
        batch = assign_first_stage([proposal_for(AABox(0, 0, 1, 1))] * 3, GroundTruthSet.target([]))
        assert [r.sigma for r in batch] == [None, None, None]
        assert batch.tau.tolist() == [0.0, 0.0, 0.0]


# =============================================================================
# SECOND STAGE
# =============================================================================

class TestSecondStageSource:

    def test_identical_box(self):
        box = RotatedBox(5, 5, 8, 2, 0.3)
        result = assign_second_stage_source([box], GroundTruthSet.source([box]))[0]
        assert result.tau == 1.0
        assert result.positive

    def test_mirrored_angle_is_negative(self):
        gt = GroundTruthSet.source([RotatedBox(0, 0, 4, 1, 0.5)])
        result = assign_second_stage_source([RotatedBox(0, 0, 4, 1, math.pi - 0.5)], gt)[0]
        assert result.tau < 0.5
        assert not result.positive

    def test_picks_larger_overlap(self):
        gt = GroundTruthSet.source([RotatedBox(0, 0, 4, 2, 0), RotatedBox(3, 0, 4, 2, 0)])
        result = assign_second_stage_source([RotatedBox(2.5, 0, 4, 2, 0)], gt)[0]
        assert result.sigma == 1

    def test_rejects_target_ground_truth(self):
        with pytest.raises(GroundTruthKindError):
            assign_second_stage_source([RotatedBox(0, 0, 1, 1, 0)], GroundTruthSet.target([AABox(0, 0, 1, 1)]))


class TestSecondStageProjection:

    def test_projection_matching_ground_truth_is_positive_at_any_angle(self):
        box = RotatedBox(0, 0, 6, 2, 0.6)
        gt = GroundTruthSet.target([project_rotated(box)])
        result = assign_second_stage_projection([box], gt)[0]
        assert result.tau == pytest.approx(1.0)
        assert result.positive

    def test_elongated_diagonal_proposal_recovered(self):
        # projection is a 12/sqrt(2) square inside a sqrt(120) square: IoU 72/120
        side = math.sqrt(120.0)
        gt = GroundTruthSet.target([AABox(-side / 2, -side / 2, side / 2, side / 2)])
        proposal = RotatedBox(0, 0, 10, 2, math.pi / 4)
        projected = assign_second_stage_projection([proposal], gt)[0]
        matched = assign_second_stage_source([proposal], gt.as_axis_rotated())[0]
        assert projected.tau == pytest.approx(0.6)
        assert projected.positive
        assert matched.tau < 0.5
        assert not matched.positive

    @given(rotated_boxes(coord=st.floats(-5, 5), extent=st.floats(1, 10)))
    def test_orientation_blind(self, box):
        gt = GroundTruthSet.target([AABox(-4, -3, 4, 3), AABox(-1, -6, 2, 6)])
        base = assign_second_stage_projection([box], gt)[0]
        flipped = assign_second_stage_projection([RotatedBox(box.cx, box.cy, box.w, box.h, -box.theta)], gt)[0]
        assert flipped == base
        mirrored = assign_second_stage_projection(
            [RotatedBox(box.cx, box.cy, box.w, box.h, math.pi - box.theta)], gt)[0]
        assert mirrored.sigma == base.sigma
        assert mirrored.tau == pytest.approx(base.tau, abs=1e-12)

    def test_rejects_source_ground_truth(self):
        with pytest.raises(GroundTruthKindError):
            assign_second_stage_projection([RotatedBox(0, 0, 1, 1, 0)], GroundTruthSet.source([RotatedBox(0, 0, 1, 1)]))

    def test_recall_at_least_source_style_matching(self, rng):
        n = 60
        objects = np.column_stack([
            rng.uniform(0, 500, n), rng.uniform(0, 500, n),
            rng.uniform(20, 60, n), rng.uniform(5, 15, n), rng.uniform(-1.5, 1.5, n),
        ])
        gt = GroundTruthSet.target([project_rotated(RotatedBox(*row)) for row in objects])
        proposals = objects.copy()
        proposals[:, :2] += rng.uniform(-1, 1, (n, 2))
        proposals[:, 2:4] *= rng.uniform(0.95, 1.05, (n, 2))
        proposals[:, 4] += rng.uniform(-0.05, 0.05, n)

        projected = assign_second_stage_projection(proposals, gt)
        matched = assign_second_stage_source(proposals, gt.as_axis_rotated())
        assert positive_recall(projected, n) >= positive_recall(matched, n)
        assert positive_recall(projected, n) == 1.0


# =============================================================================
# RELIABILITY SWITCH
# =============================================================================

class TestReliabilitySwitch:

    @staticmethod
    def run(gt_box: AABox, cfg: HeuristicConfig) -> AssignmentResult:
        gt = GroundTruthSet.target([gt_box])
        return assign_second_stage_heuristic([gt_box.as_rotated()], gt, cfg)[0]

    def test_elongated_box_is_reliable(self):
        result = self.run(AABox(0, 0, 40, 10), HeuristicConfig(area_threshold=150.0, area_rule="mask_small"))
        assert result.positive and result.reliable

    def test_large_squarish_box_masked(self):
        result = self.run(AABox(0, 0, 20, 10), HeuristicConfig(area_threshold=150.0, area_rule="mask_small"))
        assert result.positive and not result.reliable

    def test_small_box_kept_under_keep_small(self):
        result = self.run(AABox(0, 0, 12, 10), HeuristicConfig(area_threshold=150.0, area_rule="keep_small"))
        assert result.reliable

    def test_small_box_masked_under_mask_small(self):
        result = self.run(AABox(0, 0, 12, 10), HeuristicConfig(area_threshold=150.0, area_rule="mask_small"))
        assert not result.reliable

    def test_negatives_stay_reliable(self):
        gt = GroundTruthSet.target([AABox(0, 0, 12, 10)])
        cfg = HeuristicConfig(area_threshold=150.0, area_rule="mask_small")
        batch = assign_second_stage_heuristic([RotatedBox(100, 100, 4, 4, 0)], gt, cfg)
        assert not batch[0].positive
        assert batch[0].reliable

    def test_trained_positive_excludes_masked(self):
        gt = GroundTruthSet.target([AABox(0, 0, 20, 10)])
        matched = assign_second_stage_source([RotatedBox(10, 5, 20, 10, 0)], gt.as_axis_rotated())
        switched = reliability_switch(matched, gt, HeuristicConfig(area_rule="mask_small"))
        assert switched.positive.tolist() == [True]
        assert switched.trained_positive.tolist() == [False]

    def test_rejects_source_ground_truth(self):
        with pytest.raises(GroundTruthKindError):
            reliability_switch(AssignmentBatch.empty(1), GroundTruthSet.source([]), HeuristicConfig())


# =============================================================================
# RESULTS
# =============================================================================

class TestAssignmentBatch:

    def test_positive_recall(self):
        batch = AssignmentBatch(np.array([0, 0, 2, -1]), np.array([0.9, 0.6, 0.7, 0.0]),
                                np.array([True, True, True, False]))
        assert positive_recall(batch, 4) == 0.5
        assert positive_recall(batch, 0) == 0.0

    def test_records(self):
        batch = AssignmentBatch.empty(2)
        assert batch.to_records()[1] == {"proposal": 1, "sigma": None, "tau": 0.0,
                                          "positive": False, "reliable": True}

    def test_round_trip_through_results(self):
        batch = assign_by_iou(np.array([[0.2, 0.8], [0.0, 0.0]]))
        assert AssignmentBatch.from_results(list(batch)) == batch

    def test_deterministic(self, random_rotated):
        rows = random_rotated(50)
        gt = GroundTruthSet.source([RotatedBox(*r) for r in random_rotated(8)])
        assert assign_second_stage_source(rows, gt) == assign_second_stage_source(rows, gt)
