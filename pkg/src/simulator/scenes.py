"""
Synthetic scenes.

A scene is a square image holding a few elongated objects. Its rotated
ground truth is what a source dataset would label; the axis-aligned ground
truth is the external rectangle of every object, as a target dataset would
label it. Proposals (anchors) are jittered external rectangles of the objects
plus background boxes that touch no object.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from src.config.config_objects import SceneConfig
from src.core.logger import get_logger
from src.geometry.batch import iou_aabb_matrix, iou_rotated_matrix, project_rotated_array
from src.objects.annotations import GroundTruthSet
from src.objects.boxes import AABox, RotatedBox
from src.simulator.features import proposal_features

logger = get_logger(__name__, module_name="simulator")

DOMAINS = ("source", "target")
_DOMAIN_CODES = {"source": 0, "target": 1}
# Extra seed word for the quarter-turned copy of a source scene
_ROTATED_COPY_CODE = 90
# Background anchors are at least this fraction of the smallest object length
_BACKGROUND_MIN_SCALE = 0.6


@dataclass(frozen=True)
class Scene:
    """
    One synthetic image.

    Attributes:
        image_id: '<domain>-<seed>' with a '-rot90' suffix for rotated copies
        domain: 'source' or 'target'
        objects: Rotated ground truth, long side first
        rotated_gt: Source-kind ground truth of the objects
        axis_gt: Target-kind ground truth, the external rectangles of the objects
        anchors: (N, 4) proposals as ax, ay, aw, ah
        object_index: (N,) object each proposal was drawn around, -1 for background
        features: (N, F) per-proposal features
    """
    image_id: str
    domain: str
    image_size: float
    objects: Tuple[RotatedBox, ...]
    rotated_gt: GroundTruthSet
    axis_gt: GroundTruthSet
    anchors: np.ndarray
    object_index: np.ndarray
    features: np.ndarray

    @property
    def is_target(self) -> bool:
        return self.domain == "target"

    @property
    def n_proposals(self) -> int:
        return self.anchors.shape[0]

    def object_array(self) -> np.ndarray:
        return self.rotated_gt.as_array()


def _external_half_extents(w: float, h: float, theta: float) -> Tuple[float, float]:
    c, s = abs(np.cos(theta)), abs(np.sin(theta))
    return (w * c + h * s) / 2.0, (w * s + h * c) / 2.0


def place_objects(cfg: SceneConfig, rng: np.random.Generator) -> List[RotatedBox]:
    """
    Rejection-sample objects inside the image.

    A candidate overlapping an already placed object is kept only with
    probability ``occlusion_rate``; with rate 0 no two objects overlap.
    Placement stops early, with a warning, when the attempt budget runs out.
    """
    n_objects = int(rng.integers(cfg.objects_min, cfg.objects_max + 1))
    placed: List[RotatedBox] = []
    attempts = 0
    while len(placed) < n_objects and attempts < cfg.placement_attempts:
        attempts += 1
        length = rng.uniform(*cfg.long_side)
        aspect = rng.uniform(*cfg.aspect)
        if cfg.orientation == "uniform":
            theta = rng.uniform(-np.pi / 2.0, np.pi / 2.0)
        else:
            theta = cfg.fixed_theta
        hx, hy = _external_half_extents(length, length / aspect, theta)
        if 2.0 * hx >= cfg.image_size or 2.0 * hy >= cfg.image_size:
            continue
        cx = rng.uniform(hx, cfg.image_size - hx)
        cy = rng.uniform(hy, cfg.image_size - hy)
        candidate = RotatedBox(cx, cy, length, length / aspect, theta)
        if placed:
            overlap = iou_rotated_matrix([candidate], placed, max_workers=1)
            if np.any(overlap > 0.0) and not rng.random() < cfg.occlusion_rate:
                continue
        placed.append(candidate)
    if len(placed) < n_objects:
        logger.warning("Placed %d of %d objects after %d attempts", len(placed), n_objects, attempts)
    return placed


def object_anchors(rects: np.ndarray, cfg: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    """
    ``proposals_per_object`` jittered copies of each external rectangle.

    Centres move by up to ``jitter`` of the rectangle extents and extents are
    scaled by 1 +- ``jitter``; zero jitter reproduces the rectangles exactly.

    Returns:
        (M * K, 4) anchors ax, ay, aw, ah, grouped by object
    """
    k = cfg.proposals_per_object
    centre = np.stack([(rects[:, 0] + rects[:, 2]) / 2.0, (rects[:, 1] + rects[:, 3]) / 2.0], axis=1)
    size = np.stack([rects[:, 2] - rects[:, 0], rects[:, 3] - rects[:, 1]], axis=1)
    centre = np.repeat(centre, k, axis=0)
    size = np.repeat(size, k, axis=0)
    if cfg.jitter == 0.0:
        return np.concatenate([centre, size], axis=1)
    shift = rng.uniform(-cfg.jitter, cfg.jitter, size=centre.shape) * size
    scale = 1.0 + rng.uniform(-cfg.jitter, cfg.jitter, size=size.shape)
    return np.concatenate([centre + shift, size * scale], axis=1)


def background_anchors(rects: np.ndarray, cfg: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    """Anchors of object-like size that do not touch any object's external rectangle."""
    found: List[np.ndarray] = []
    lo, hi = _BACKGROUND_MIN_SCALE * cfg.long_side[0], cfg.long_side[1]
    attempts = 0
    budget = cfg.placement_attempts * max(cfg.background_proposals, 1)
    while len(found) < cfg.background_proposals and attempts < budget:
        attempts += 1
        aw, ah = rng.uniform(lo, hi, size=2)
        if aw >= cfg.image_size or ah >= cfg.image_size:
            continue
        ax = rng.uniform(aw / 2.0, cfg.image_size - aw / 2.0)
        ay = rng.uniform(ah / 2.0, cfg.image_size - ah / 2.0)
        anchor = np.array([ax - aw / 2.0, ay - ah / 2.0, ax + aw / 2.0, ay + ah / 2.0])
        if rects.shape[0] and np.any(iou_aabb_matrix(anchor[None, :], rects) > 0.0):
            continue
        found.append(np.array([ax, ay, aw, ah]))
    if len(found) < cfg.background_proposals:
        logger.warning("Placed %d of %d background proposals", len(found), cfg.background_proposals)
    return np.asarray(found, dtype=float).reshape(-1, 4)


def _assemble(image_id: str,
              domain: str,
              cfg: SceneConfig,
              objects: Sequence[RotatedBox],
              anchors: np.ndarray,
              object_index: np.ndarray,
              rng: np.random.Generator,
              symmetric_features: bool,
              domain_signature: float) -> Scene:
    objects = tuple(b.canonical_long_side() for b in objects)
    rotated_gt = GroundTruthSet.source(objects)
    object_arr = rotated_gt.as_array()
    rects = project_rotated_array(object_arr)
    axis_gt = GroundTruthSet.target([AABox(*row) for row in rects])
    features = proposal_features(
        anchors, object_arr, object_index, cfg.feature_noise, rng,
        target_domain=domain == "target",
        domain_signature=domain_signature,
        symmetric=symmetric_features,
        object_rects=rects,
    )
    return Scene(image_id, domain, cfg.image_size, objects, rotated_gt, axis_gt,
                 anchors, object_index, features)


def generate_scene(cfg: SceneConfig,
                   seed: int,
                   domain: str = "source",
                   symmetric_features: bool = False,
                   domain_signature: float = 1.0) -> Scene:
    """
    Build one scene; the same (cfg, seed, domain) always gives the same scene.

    Args:
        cfg: Scene generation settings of the domain
        seed: Scene seed, combined with ``cfg.seed``
        domain: 'source' or 'target'
        symmetric_features: Orientation-symmetric features (ablation)
        domain_signature: Strength of the domain feature
    """
    if domain not in DOMAINS:
        raise ValueError(f"domain must be one of {DOMAINS}, got '{domain}'")
    rng = np.random.default_rng([cfg.seed, int(seed), _DOMAIN_CODES[domain]])
    objects = place_objects(cfg, rng)
    rects = project_rotated_array(objects)
    fg = object_anchors(rects, cfg, rng)
    bg = background_anchors(rects, cfg, rng)
    anchors = np.concatenate([fg, bg], axis=0)
    object_index = np.concatenate([
        np.repeat(np.arange(len(objects)), cfg.proposals_per_object),
        np.full(bg.shape[0], -1),
    ]).astype(int)
    scene = _assemble(f"{domain}-{seed}", domain, cfg, objects, anchors, object_index, rng,
                      symmetric_features, domain_signature)
    logger.debug("Scene %s: %d objects, %d proposals", scene.image_id, len(objects), scene.n_proposals)
    return scene


def rotate_scene_quarter(scene: Scene,
                         cfg: SceneConfig,
                         symmetric_features: bool = False,
                         domain_signature: float = 1.0) -> Scene:
    """
    Copy of a scene turned by 90 degrees about the image centre.

    Objects turn with the image, anchors swap their extents and features are
    drawn afresh for the new geometry.
    """
    c = scene.image_size / 2.0
    objects = [
        RotatedBox(c - (b.cy - c), c + (b.cx - c), b.w, b.h, b.theta + np.pi / 2.0)
        for b in scene.objects
    ]
    ax, ay, aw, ah = scene.anchors.T
    anchors = np.stack([c - (ay - c), c + (ax - c), ah, aw], axis=1)
    seed_words = [cfg.seed, _ROTATED_COPY_CODE, _DOMAIN_CODES[scene.domain]]
    seed_words.extend(ord(ch) for ch in scene.image_id)
    rng = np.random.default_rng(seed_words)
    return _assemble(f"{scene.image_id}-rot90", scene.domain, cfg, objects, anchors,
                     scene.object_index.copy(), rng, symmetric_features, domain_signature)


def generate_scenes(cfg: SceneConfig,
                    seeds: Sequence[int],
                    domain: str = "source",
                    symmetric_features: bool = False,
                    domain_signature: float = 1.0) -> List[Scene]:
    return [generate_scene(cfg, seed, domain, symmetric_features, domain_signature) for seed in seeds]
