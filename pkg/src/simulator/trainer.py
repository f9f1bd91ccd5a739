"""
Training and evaluation of the toy predictor on synthetic scenes.

Each epoch refreshes the second-stage references (the decoded first-stage
boxes, detached) and their assignments for every training scene, then runs
plain gradient descent over mini-batches of source and target scenes. The
first-stage assignments depend only on the anchors and are computed once.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.assignment.results import AssignmentBatch
from src.assignment.rules import (
    assign_first_stage,
    assign_second_stage_heuristic,
    assign_second_stage_projection,
    assign_second_stage_source,
)
from src.config.config_objects import ExperimentSpec
from src.core.exceptions import DivergedLoss, NonFiniteLoss
from src.core.logger import get_logger
from src.evaluation.report import EvalReport, evaluate_dataset, precision_at_recall
from src.geometry.batch import midpoint_offsets_to_rotated_array
from src.losses.breakdown import LossBreakdown
from src.losses.objective import ObjectiveSettings, evaluate_objective
from src.objects.annotations import GroundTruthSet
from src.objects.boxes import RotatedBox
from src.objects.detections import Detection
from src.objects.predictions import sigmoid
from src.objects.predictor import ToyPredictor
from src.objects.training import LossStrategy, TrainingExample
from src.simulator.features import N_FEATURES
from src.simulator.scenes import Scene, generate_scene, rotate_scene_quarter

logger = get_logger(__name__, module_name="simulator")

TARGET_STRATEGIES = {
    "axis_only": LossStrategy.TARGET_AXIS,
    "naive_cotraining": LossStrategy.TARGET_NAIVE,
    "kcr_projection": LossStrategy.TARGET_PROJECTION,
    "kcr_heuristic": LossStrategy.TARGET_HEURISTIC,
    "fully_supervised": LossStrategy.TARGET_ROTATED,
}

# Scene seeds are spec.seed * SEED_STRIDE + offset + index
SEED_STRIDE = 1_000_000
TEST_SEED_OFFSET = 500_000

# Initial alpha, beta fractions: a near axis-aligned box inside each anchor
INITIAL_OFFSET = 0.45

TRACE_COLUMNS = ["epoch", "L_S", "L_T", "L_S_star", "L_T_star", "total", "learning_rate"]


def initial_predictor(n_features: int = N_FEATURES) -> ToyPredictor:
    """Zero weights apart from the bias of the alpha and beta outputs."""
    model = ToyPredictor.zeros(n_features)
    model.w1[4, 0] = INITIAL_OFFSET
    model.w1[5, 0] = INITIAL_OFFSET
    return model


def decode_references(model: ToyPredictor, features: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    """
    Decoded first-stage boxes used as second-stage references.

    Rows whose midpoint-offset parallelogram collapses fall back to their
    anchor read as a theta = 0 box.
    """
    rpn = model.forward_rpn(features, anchors)
    boxes, valid = midpoint_offsets_to_rotated_array(rpn.predictions.boxes)
    if not np.all(valid):
        fallback = np.concatenate([anchors, np.zeros((anchors.shape[0], 1))], axis=1)
        boxes[~valid] = fallback[~valid]
        logger.debug("%d degenerate first-stage boxes replaced by their anchors", int((~valid).sum()))
    return boxes


# =============================================================================
# TRAINING EXAMPLES
# =============================================================================

@dataclass
class SceneTask:
    """A training scene with its loss strategy and the parts that never change."""
    scene: Scene
    strategy: LossStrategy
    first_stage_gt: GroundTruthSet
    first_stage_assignments: AssignmentBatch
    second_stage_gt: GroundTruthSet

    @classmethod
    def build(cls, scene: Scene, strategy: LossStrategy, spec: ExperimentSpec) -> "SceneTask":
        thr = spec.positive_threshold
        if strategy in (LossStrategy.TARGET_PROJECTION, LossStrategy.TARGET_HEURISTIC):
            gt = scene.axis_gt
            first = assign_first_stage(scene.anchors, gt, spec.gamma, thr, spec.enlargement_mode)
            return cls(scene, strategy, gt, first, gt)
        if strategy is LossStrategy.TARGET_AXIS:
            gt = scene.axis_gt
            return cls(scene, strategy, gt, assign_first_stage(scene.anchors, gt, 1.0, thr), gt)
        if strategy is LossStrategy.TARGET_NAIVE:
            gt = scene.axis_gt.as_axis_rotated()
        else:
            gt = scene.rotated_gt
        first = assign_first_stage(scene.anchors, gt, 1.0, thr)
        return cls(scene, strategy, gt, first, gt)

    def second_stage(self, references: np.ndarray, spec: ExperimentSpec) -> AssignmentBatch:
        thr = spec.positive_threshold
        if self.strategy is LossStrategy.TARGET_PROJECTION:
            return assign_second_stage_projection(references, self.second_stage_gt, spec.gamma, thr,
                                                  spec.enlargement_mode)
        if self.strategy is LossStrategy.TARGET_HEURISTIC:
            return assign_second_stage_heuristic(references, self.second_stage_gt, spec.heuristic, thr)
        if self.strategy is LossStrategy.TARGET_AXIS:
            return assign_second_stage_source(references, self.second_stage_gt.as_axis_rotated(), thr)
        return assign_second_stage_source(references, self.second_stage_gt, thr)

    def example(self, model: ToyPredictor, spec: ExperimentSpec) -> TrainingExample:
        """Freeze references and second-stage assignments under the current model."""
        references = decode_references(model, self.scene.features, self.scene.anchors)
        return TrainingExample(
            image_id=self.scene.image_id,
            strategy=self.strategy,
            features=self.scene.features,
            anchors=self.scene.anchors,
            first_stage_gt=self.first_stage_gt,
            first_stage_assignments=self.first_stage_assignments,
            references=references,
            second_stage_gt=self.second_stage_gt,
            second_stage_assignments=self.second_stage(references, spec),
        )


def uses_source(spec: ExperimentSpec) -> bool:
    return spec.mode != "axis_only" and spec.source_per_batch > 0


def _train_seeds(spec: ExperimentSpec) -> List[int]:
    return [spec.seed * SEED_STRIDE + i for i in range(spec.train_scenes)]


def _test_seeds(spec: ExperimentSpec) -> List[int]:
    return [spec.seed * SEED_STRIDE + TEST_SEED_OFFSET + i for i in range(spec.test_scenes)]


def training_scenes(spec: ExperimentSpec) -> Tuple[List[Scene], List[Scene]]:
    """(source scenes, target scenes) of a spec; no source scenes in axis_only mode."""
    flags = dict(symmetric_features=spec.symmetric_features, domain_signature=spec.domain_signature)
    target = [generate_scene(spec.target_scene, s, "target", **flags) for s in _train_seeds(spec)]
    source: List[Scene] = []
    if uses_source(spec):
        source = [generate_scene(spec.source_scene, s, "source", **flags) for s in _train_seeds(spec)]
        if spec.source_rotation_augment:
            source += [rotate_scene_quarter(scene, spec.source_scene, **flags) for scene in source]
    return source, target


def held_out_scenes(spec: ExperimentSpec) -> List[Scene]:
    """Held-out target-domain scenes, scored against their rotated ground truth."""
    return [
        generate_scene(spec.target_scene, s, "target", spec.symmetric_features, spec.domain_signature)
        for s in _test_seeds(spec)
    ]


def build_tasks(spec: ExperimentSpec, source: Sequence[Scene], target: Sequence[Scene]) -> Tuple[List[SceneTask], List[SceneTask]]:
    target_strategy = TARGET_STRATEGIES[spec.mode]
    source_tasks = [SceneTask.build(scene, LossStrategy.SOURCE, spec) for scene in source]
    target_tasks = [SceneTask.build(scene, target_strategy, spec) for scene in target]
    return source_tasks, target_tasks


# =============================================================================
# TRAINING
# =============================================================================

@dataclass
class TrainingResult:
    """
    Attributes:
        model: Trained predictor
        trace: Mean loss breakdown of each epoch's steps, taken before each update
        learning_rates: Step size used in each epoch
    """
    model: ToyPredictor
    trace: List[LossBreakdown] = field(default_factory=list)
    learning_rates: List[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.trace[-1].total if self.trace else float("nan")

    def trace_frame(self) -> pd.DataFrame:
        rows = []
        for epoch, (breakdown, lr) in enumerate(zip(self.trace, self.learning_rates)):
            row = {"epoch": epoch, **breakdown.to_dict(), "total": breakdown.total, "learning_rate": lr}
            rows.append(row)
        return pd.DataFrame(rows, columns=TRACE_COLUMNS)

    def trace_records(self) -> List[Dict[str, float]]:
        return self.trace_frame().to_dict(orient="records")


def gradient_mask(model: ToyPredictor, p_only: bool) -> np.ndarray:
    """1 for trainable parameters; with p_only just the two objectness rows."""
    if not p_only:
        return np.ones(model.flat().size)
    w1 = np.zeros_like(model.w1)
    w2 = np.zeros_like(model.w2)
    w1[-1] = 1.0
    w2[-1] = 1.0
    return np.concatenate([w1.ravel(), w2.ravel()])


def _batches(spec: ExperimentSpec, n_source: int, n_target: int,
             rng: np.random.Generator) -> List[Tuple[List[int], List[int]]]:
    target_order = rng.permutation(n_target)
    source_order = rng.permutation(n_source) if n_source else np.zeros(0, dtype=int)
    if spec.full_batch:
        return [(source_order.tolist(), target_order.tolist())]
    steps = math.ceil(n_target / spec.target_per_batch)
    per_source = spec.source_per_batch if n_source else 0
    batches = []
    for step in range(steps):
        targets = target_order[step * spec.target_per_batch:(step + 1) * spec.target_per_batch]
        sources = [int(source_order[(step * per_source + k) % n_source]) for k in range(per_source)]
        batches.append((sources, targets.tolist()))
    return batches


def train(spec: ExperimentSpec,
          scenes: Optional[Tuple[Sequence[Scene], Sequence[Scene]]] = None,
          model: Optional[ToyPredictor] = None) -> TrainingResult:
    """
    Gradient descent on the combined co-training loss.

    Args:
        spec: Experiment settings; the mode picks the target-scene losses
        scenes: (source, target) training scenes; generated from the spec when None
        model: Starting predictor; ``initial_predictor()`` when None

    Raises:
        DivergedLoss: The loss or the parameters became non-finite
    """
    source, target = scenes if scenes is not None else training_scenes(spec)
    source_tasks, target_tasks = build_tasks(spec, source, target)
    model = model.copy() if model is not None else initial_predictor()
    settings = ObjectiveSettings(loss=spec.loss, gamma=spec.gamma, enlargement_mode=spec.enlargement_mode)
    mask = gradient_mask(model, spec.p_only)
    result = TrainingResult(model)

    logger.info("Training %s (%s): %d source / %d target scenes, %d epochs",
                spec.name, spec.mode, len(source_tasks), len(target_tasks), spec.epochs)
    for epoch in range(spec.epochs):
        lr = spec.learning_rate * spec.lr_decay ** epoch
        source_examples = [task.example(model, spec) for task in source_tasks]
        target_examples = [task.example(model, spec) for task in target_tasks]
        rng = np.random.default_rng([spec.seed, epoch])
        steps: List[LossBreakdown] = []
        for source_idx, target_idx in _batches(spec, len(source_examples), len(target_examples), rng):
            batch = [source_examples[i] for i in source_idx] + [target_examples[i] for i in target_idx]
            try:
                objective = evaluate_objective(model, batch, settings)
            except NonFiniteLoss as e:
                raise DivergedLoss(epoch, float("nan")) from e
            params = model.flat() - lr * mask * objective.gradient
            model = ToyPredictor.from_flat(params, model.n_features)
            if not model.is_finite():
                raise DivergedLoss(epoch, objective.total)
            steps.append(objective)
        epoch_loss = LossBreakdown.mean(steps)
        if not math.isfinite(epoch_loss.total):
            raise DivergedLoss(epoch, epoch_loss.total)
        result.trace.append(LossBreakdown(epoch_loss.L_S, epoch_loss.L_T, epoch_loss.L_S_star, epoch_loss.L_T_star))
        result.learning_rates.append(lr)
        logger.debug("Epoch %d: total %.6f (lr %.5f)", epoch, epoch_loss.total, lr)

    result.model = model
    logger.info("Finished %s: final loss %.6f", spec.name, result.final_loss)
    return result


# =============================================================================
# EVALUATION
# =============================================================================

def predict_scene(model: ToyPredictor, scene: Scene) -> List[Detection]:
    """Second-stage boxes of every proposal, scored by the refined objectness."""
    references = decode_references(model, scene.features, scene.anchors)
    rcnn = model.forward_rcnn(scene.features, references)
    boxes = rcnn.predictions.boxes
    scores = sigmoid(rcnn.predictions.logits)
    usable = np.all(np.isfinite(boxes), axis=1) & (boxes[:, 2] > 0) & (boxes[:, 3] > 0) & np.isfinite(scores)
    if not np.all(usable):
        logger.warning("Scene %s: skipped %d degenerate proposals", scene.image_id, int((~usable).sum()))
    return [Detection(RotatedBox(*boxes[k]), float(scores[k])) for k in np.flatnonzero(usable)]


def evaluate_model(model: ToyPredictor, scenes: Sequence[Scene], spec: ExperimentSpec) -> EvalReport:
    """AP50 of the model's second-stage detections against rotated ground truth."""
    predictions = {scene.image_id: predict_scene(model, scene) for scene in scenes}
    ground_truth = {scene.image_id: scene.rotated_gt for scene in scenes}
    return evaluate_dataset(predictions, ground_truth, spec.evaluation_config())


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    training: TrainingResult
    report: EvalReport

    @property
    def ap50(self) -> float:
        return self.report.ap50

    @property
    def precision_at_recall_50(self) -> float:
        return precision_at_recall(self.report, 0.5)

    def to_row(self) -> Dict[str, object]:
        return {
            "name": self.spec.name,
            "mode": self.spec.mode,
            "gamma": self.spec.gamma,
            "ap50": self.ap50,
            "precision_at_recall_50": self.precision_at_recall_50,
            "final_loss": self.training.final_loss,
            "epochs": self.spec.epochs,
        }


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Train on generated scenes and evaluate on held-out target scenes."""
    training = train(spec)
    report = evaluate_model(training.model, held_out_scenes(spec), spec)
    result = ExperimentResult(spec, training, report)
    logger.info("%s: AP50 %.4f, precision@0.5 recall %.4f",
                spec.name, result.ap50, result.precision_at_recall_50)
    return result
