"""
Configuration objects.

Plain dataclasses with a ``validate()`` that lists problems and a
``from_dict()`` that builds from parsed YAML and raises ConfigError when
anything is wrong. Experiment suites are read from YAML files such as
``src/config/experiment_default.yaml``.
"""

import copy
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Type, TypeVar, Union, get_args, get_origin, get_type_hints

import yaml

from src.core.constants import (
    DEFAULT_ASPECT_RATIO_MIN,
    EVAL_IOU_THRESHOLD,
    EXPERIMENT_MODES,
    NMS_IOU_THRESHOLD,
    POSITIVE_IOU_THRESHOLD,
    PROBABILITY_EPSILON,
)
from src.core.exceptions import ConfigError

T = TypeVar("T")

DEFAULT_EXPERIMENT_FILE = Path(__file__).resolve().parent / "experiment_default.yaml"

AREA_RULES = ("keep_small", "mask_small")
REGRESSION_KINDS = ("l1", "smooth_l1")
REGRESSION_NORMALIZATIONS = ("proposal", "none")
ENLARGEMENT_MODES = ("scale", "literal")
ORIENTATIONS = ("uniform", "fixed")


def _check_keys(cls: Type, data: Dict[str, Any], where: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}; known keys are {sorted(known)}")


def _raise_issues(issues: List[str], where: str) -> None:
    if issues:
        raise ConfigError(f"{where}: " + "; ".join(issues))


def _coerce_scalar(value: Any, kind: Type, key: str) -> Any:
    """Read a YAML scalar as int, float, bool or str; ConfigError names the key."""
    if kind is bool or kind is str:
        if isinstance(value, kind):
            return value
    elif not isinstance(value, bool):
        try:
            if kind is float:
                return float(value)
            number = value if isinstance(value, int) else float(value)
            if number == int(number):
                return int(number)
        except (TypeError, ValueError, OverflowError):
            pass
    raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}")


def _coerce_fields(cls: Type, data: Dict[str, Any], where: str) -> Dict[str, Any]:
    """Scalar, optional and tuple fields of a config dataclass converted to their declared types."""
    values = dict(data)
    for name, hint in get_type_hints(cls).items():
        if name not in values:
            continue
        value, key = values[name], f"{where}.{name}"
        origin, args = get_origin(hint), get_args(hint)
        if origin is Union and type(None) in args:
            if value is not None:
                values[name] = _coerce_scalar(value, args[0], key)
        elif origin is tuple:
            if not isinstance(value, (list, tuple)) or len(value) != len(args):
                raise ConfigError(f"{key}: expected a list of {len(args)} numbers, got {value!r}")
            values[name] = tuple(_coerce_scalar(v, t, key) for v, t in zip(value, args))
        elif hint in (int, float, bool, str):
            values[name] = _coerce_scalar(value, hint, key)
    return values


def _range_issues(name: str, value: Tuple[float, float], minimum: float = 0.0, strict: bool = True) -> List[str]:
    issues = []
    if len(value) != 2:
        return [f"{name} must have two entries, got {value}"]
    lo, hi = value
    if not (math.isfinite(lo) and math.isfinite(hi)):
        issues.append(f"{name} must be finite: {value}")
    elif lo > hi:
        issues.append(f"{name} must be ordered low <= high: {value}")
    elif lo <= minimum if strict else lo < minimum:
        issues.append(f"{name} must be above {minimum}: {value}")
    return issues


# =============================================================================
# ASSIGNMENT / LOSS / EVALUATION
# =============================================================================

@dataclass
class HeuristicConfig:
    """Reliability rule for target positives (heuristic selection)."""
    aspect_ratio_min: float = DEFAULT_ASPECT_RATIO_MIN
    area_threshold: float = 0.0
    area_rule: str = "keep_small"

    def validate(self) -> List[str]:
        issues = []
        if not self.aspect_ratio_min >= 1.0:
            issues.append(f"aspect_ratio_min must be >= 1: {self.aspect_ratio_min}")
        if not self.area_threshold >= 0.0:
            issues.append(f"area_threshold must be >= 0: {self.area_threshold}")
        if self.area_rule not in AREA_RULES:
            issues.append(f"area_rule must be one of {AREA_RULES}: {self.area_rule}")
        return issues

    @classmethod
    def from_dict(cls, data: Dict[str, Any], where: str = "heuristic") -> "HeuristicConfig":
        _check_keys(cls, data, where)
        cfg = cls(**_coerce_fields(cls, data, where))
        _raise_issues(cfg.validate(), where)
        return cfg


@dataclass
class AssignmentConfig:
    """IoU threshold and ground-truth transform used by all assignment rules."""
    positive_threshold: float = POSITIVE_IOU_THRESHOLD
    gamma: float = 1.0
    enlargement_mode: str = "scale"

    def validate(self) -> List[str]:
        issues = []
        if not 0.0 < self.positive_threshold <= 1.0:
            issues.append(f"positive_threshold must be in (0, 1]: {self.positive_threshold}")
        if not (math.isfinite(self.gamma) and self.gamma >= 1.0):
            issues.append(f"gamma must be >= 1: {self.gamma}")
        if self.enlargement_mode not in ENLARGEMENT_MODES:
            issues.append(f"enlargement_mode must be one of {ENLARGEMENT_MODES}: {self.enlargement_mode}")
        return issues


@dataclass
class LossConfig:
    """
    Loss options.

    regression_normalization 'proposal' divides positional residuals by the
    reference box extents (treated as constants); 'none' keeps image units.
    """
    regression: str = "l1"
    smooth_l1_beta: float = 1.0 / 9.0
    regression_normalization: str = "proposal"
    epsilon: float = PROBABILITY_EPSILON
    source_weight: float = 1.0
    target_weight: float = 1.0

    def validate(self) -> List[str]:
        issues = []
        if self.regression not in REGRESSION_KINDS:
            issues.append(f"regression must be one of {REGRESSION_KINDS}: {self.regression}")
        if not self.smooth_l1_beta > 0.0:
            issues.append(f"smooth_l1_beta must be positive: {self.smooth_l1_beta}")
        if self.regression_normalization not in REGRESSION_NORMALIZATIONS:
            issues.append(
                f"regression_normalization must be one of {REGRESSION_NORMALIZATIONS}: "
                f"{self.regression_normalization}"
            )
        if not 0.0 < self.epsilon < 0.5:
            issues.append(f"epsilon must be in (0, 0.5): {self.epsilon}")
        for name in ("source_weight", "target_weight"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                issues.append(f"{name} must be a finite value >= 0: {value}")
        return issues

    @classmethod
    def from_dict(cls, data: Dict[str, Any], where: str = "loss") -> "LossConfig":
        _check_keys(cls, data, where)
        cfg = cls(**_coerce_fields(cls, data, where))
        _raise_issues(cfg.validate(), where)
        return cfg


@dataclass
class EvaluationConfig:
    """AP50 evaluation options; nms_threshold None leaves detections as given."""
    iou_threshold: float = EVAL_IOU_THRESHOLD
    nms_threshold: Optional[float] = None
    skip_difficult: bool = False

    def validate(self) -> List[str]:
        issues = []
        if not 0.0 < self.iou_threshold <= 1.0:
            issues.append(f"iou_threshold must be in (0, 1]: {self.iou_threshold}")
        if self.nms_threshold is not None and not 0.0 < self.nms_threshold <= 1.0:
            issues.append(f"nms_threshold must be in (0, 1]: {self.nms_threshold}")
        return issues


# =============================================================================
# SIMULATOR
# =============================================================================

@dataclass
class SceneConfig:
    """Synthetic scene generation for one domain."""
    image_size: float = 256.0
    objects_min: int = 3
    objects_max: int = 6
    long_side: Tuple[float, float] = (28.0, 60.0)
    aspect: Tuple[float, float] = (2.0, 5.0)
    orientation: str = "uniform"
    fixed_theta: float = 0.0
    occlusion_rate: float = 0.0
    proposals_per_object: int = 4
    background_proposals: int = 8
    jitter: float = 0.12
    feature_noise: float = 0.02
    placement_attempts: int = 200
    seed: int = 0

    def validate(self) -> List[str]:
        issues = []
        if not self.image_size > 0:
            issues.append(f"image_size must be positive: {self.image_size}")
        if self.objects_min < 0 or self.objects_max < self.objects_min:
            issues.append(f"object count range invalid: [{self.objects_min}, {self.objects_max}]")
        issues.extend(_range_issues("long_side", tuple(self.long_side)))
        issues.extend(_range_issues("aspect", tuple(self.aspect), minimum=1.0, strict=False))
        if self.orientation not in ORIENTATIONS:
            issues.append(f"orientation must be one of {ORIENTATIONS}: {self.orientation}")
        if not 0.0 <= self.occlusion_rate <= 1.0:
            issues.append(f"occlusion_rate must be in [0, 1]: {self.occlusion_rate}")
        if self.proposals_per_object < 1:
            issues.append(f"proposals_per_object must be >= 1: {self.proposals_per_object}")
        if self.background_proposals < 0:
            issues.append(f"background_proposals must be >= 0: {self.background_proposals}")
        if not 0.0 <= self.jitter < 0.5:
            issues.append(f"jitter must be in [0, 0.5): {self.jitter}")
        if not self.feature_noise >= 0.0:
            issues.append(f"feature_noise must be >= 0: {self.feature_noise}")
        if self.placement_attempts < 1:
            issues.append(f"placement_attempts must be >= 1: {self.placement_attempts}")
        return issues

    @classmethod
    def from_dict(cls, data: Dict[str, Any], where: str = "scene") -> "SceneConfig":
        _check_keys(cls, data, where)
        cfg = cls(**_coerce_fields(cls, data, where))
        _raise_issues(cfg.validate(), where)
        return cfg


def _default_source_scene() -> SceneConfig:
    return SceneConfig(long_side=(28.0, 60.0), feature_noise=0.005, seed=1)


def _default_target_scene() -> SceneConfig:
    return SceneConfig(long_side=(24.0, 52.0), feature_noise=0.008, seed=2)


@dataclass
class ExperimentSpec:
    """
    One simulator run.

    Modes:
        axis_only: target scenes only, target terms matched against theta = 0 boxes
        naive_cotraining: source + target, target boxes read as theta = 0
        kcr_projection: source + target, projection assignment in stage two
        kcr_heuristic: source + target, heuristic selection in stage two
        fully_supervised: target scenes with their rotated ground truth
    """
    name: str = "kcr_projection"
    mode: str = "kcr_projection"
    epochs: int = 300
    learning_rate: float = 0.05
    lr_decay: float = 0.99
    source_per_batch: int = 2
    target_per_batch: int = 2
    train_scenes: int = 16
    test_scenes: int = 64
    gamma: float = 1.0
    enlargement_mode: str = "scale"
    positive_threshold: float = POSITIVE_IOU_THRESHOLD
    nms_threshold: float = NMS_IOU_THRESHOLD
    heuristic: HeuristicConfig = field(default_factory=HeuristicConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    source_scene: SceneConfig = field(default_factory=_default_source_scene)
    target_scene: SceneConfig = field(default_factory=_default_target_scene)
    seed: int = 0
    symmetric_features: bool = False
    source_rotation_augment: bool = False
    domain_signature: float = 1.0
    p_only: bool = False
    full_batch: bool = False

    def validate(self) -> List[str]:
        issues = []
        if self.mode not in EXPERIMENT_MODES:
            issues.append(f"mode must be one of {EXPERIMENT_MODES}: {self.mode}")
        if self.epochs < 1:
            issues.append(f"epochs must be >= 1: {self.epochs}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            issues.append(f"learning_rate must be positive: {self.learning_rate}")
        if not 0.0 < self.lr_decay <= 1.0:
            issues.append(f"lr_decay must be in (0, 1]: {self.lr_decay}")
        if self.source_per_batch < 0 or self.target_per_batch < 0:
            issues.append("batch composition must be non-negative")
        if self.target_per_batch == 0:
            issues.append("target_per_batch must be >= 1")
        if self.mode in ("naive_cotraining", "kcr_projection", "kcr_heuristic") and self.source_per_batch == 0:
            issues.append(f"mode {self.mode} needs source_per_batch >= 1")
        if self.train_scenes < 1 or self.test_scenes < 1:
            issues.append("train_scenes and test_scenes must be >= 1")
        if not self.domain_signature >= 0.0:
            issues.append(f"domain_signature must be >= 0: {self.domain_signature}")
        issues.extend(self.assignment_config().validate())
        if not 0.0 < self.nms_threshold <= 1.0:
            issues.append(f"nms_threshold must be in (0, 1]: {self.nms_threshold}")
        issues.extend(self.heuristic.validate())
        issues.extend(self.loss.validate())
        issues.extend(f"source_scene: {i}" for i in self.source_scene.validate())
        issues.extend(f"target_scene: {i}" for i in self.target_scene.validate())
        return issues

    def assignment_config(self) -> AssignmentConfig:
        return AssignmentConfig(self.positive_threshold, self.gamma, self.enlargement_mode)

    def evaluation_config(self) -> EvaluationConfig:
        return EvaluationConfig(iou_threshold=EVAL_IOU_THRESHOLD, nms_threshold=self.nms_threshold)

    def with_overrides(self, **overrides: Any) -> "ExperimentSpec":
        data = self.to_dict()
        data.update(overrides)
        return ExperimentSpec.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for name in ("source_scene", "target_scene"):
            for key in ("long_side", "aspect"):
                data[name][key] = list(data[name][key])
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any], where: str = "experiment") -> "ExperimentSpec":
        _check_keys(cls, data, where)
        values = dict(data)
        if "heuristic" in values and isinstance(values["heuristic"], dict):
            values["heuristic"] = HeuristicConfig.from_dict(values["heuristic"], f"{where}.heuristic")
        if "loss" in values and isinstance(values["loss"], dict):
            values["loss"] = LossConfig.from_dict(values["loss"], f"{where}.loss")
        for name in ("source_scene", "target_scene"):
            if name in values and isinstance(values[name], dict):
                base = asdict(_default_source_scene() if name == "source_scene" else _default_target_scene())
                base.update(values[name])
                values[name] = SceneConfig.from_dict(base, f"{where}.{name}")
        for name, kind in (("heuristic", HeuristicConfig), ("loss", LossConfig),
                           ("source_scene", SceneConfig), ("target_scene", SceneConfig)):
            if name in values and not isinstance(values[name], kind):
                raise ConfigError(f"{where}.{name}: expected a mapping, got {values[name]!r}")
        if "name" not in values and "mode" in values:
            values["name"] = str(values["mode"])
        spec = cls(**_coerce_fields(cls, values, where))
        _raise_issues(spec.validate(), where)
        return spec


@dataclass
class SuiteConfig:
    """
    A list of experiments plus an optional gamma sweep.

    The sweep runs over the experiment with ``gamma_sweep_mode``, or over the
    suite defaults in that mode when no experiment has it.
    """
    name: str = "default"
    experiments: List[ExperimentSpec] = field(default_factory=list)
    gamma_sweep: List[float] = field(default_factory=list)
    gamma_sweep_mode: str = "kcr_projection"
    defaults: Dict[str, Any] = field(default_factory=dict)

    def validate(self) -> List[str]:
        issues = []
        names = [spec.name for spec in self.experiments]
        if len(set(names)) != len(names):
            issues.append(f"experiment names must be unique: {names}")
        for gamma in self.gamma_sweep:
            if not gamma >= 1.0:
                issues.append(f"gamma_sweep values must be >= 1: {gamma}")
        if self.gamma_sweep_mode not in EXPERIMENT_MODES:
            issues.append(f"gamma_sweep_mode must be one of {EXPERIMENT_MODES}: {self.gamma_sweep_mode}")
        return issues

    def sweep_base(self) -> ExperimentSpec:
        for spec in self.experiments:
            if spec.mode == self.gamma_sweep_mode:
                return spec
        base = _deep_merge(self.defaults, {"mode": self.gamma_sweep_mode})
        return ExperimentSpec.from_dict(base, "suite.defaults")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SuiteConfig":
        """
        Build a suite from a parsed spec file.

        Each entry under ``experiments`` is deep-merged over ``defaults``.
        """
        if not isinstance(data, dict) or "suite" not in data:
            raise ConfigError("Experiment spec must contain a top-level 'suite' mapping")
        suite = data["suite"]
        if not isinstance(suite, dict):
            raise ConfigError("'suite' must be a mapping")
        known = {"name", "defaults", "experiments", "gamma_sweep", "gamma_sweep_mode"}
        unknown = sorted(set(suite) - known)
        if unknown:
            raise ConfigError(f"suite: unknown keys {unknown}; known keys are {sorted(known)}")

        defaults = suite.get("defaults") or {}
        if not isinstance(defaults, dict):
            raise ConfigError("suite.defaults must be a mapping")
        entries = suite.get("experiments") or []
        if not isinstance(entries, list):
            raise ConfigError("suite.experiments must be a list")
        sweep = suite.get("gamma_sweep") or []
        if not isinstance(sweep, list):
            raise ConfigError(f"suite.gamma_sweep must be a list, got {sweep!r}")
        experiments = [
            ExperimentSpec.from_dict(_deep_merge(defaults, entry or {}), f"suite.experiments[{i}]")
            for i, entry in enumerate(entries)
        ]
        cfg = cls(
            name=str(suite.get("name", "default")),
            experiments=experiments,
            gamma_sweep=[_coerce_scalar(g, float, f"suite.gamma_sweep[{i}]") for i, g in enumerate(sweep)],
            gamma_sweep_mode=str(suite.get("gamma_sweep_mode", "kcr_projection")),
            defaults=copy.deepcopy(defaults),
        )
        _raise_issues(cfg.validate(), "suite")
        if cfg.gamma_sweep:
            cfg.sweep_base()  # invalid defaults surface at load time
        return cfg


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_suite_config(path: Optional[Union[str, Path]] = None) -> SuiteConfig:
    """
    Load an experiment suite from YAML.

    Args:
        path: Spec file; the shipped default suite when None

    Raises:
        ConfigError: Unreadable file, invalid YAML or invalid values
        FileNotFoundError: The file does not exist
    """
    spec_path = Path(path) if path else DEFAULT_EXPERIMENT_FILE
    with open(spec_path, "r", encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"Invalid YAML in experiment spec {spec_path}: {e}")
    return SuiteConfig.from_dict(data)
