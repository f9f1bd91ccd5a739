"""
Per-proposal features for the toy predictor.

Each object proposal observes its object through the second moments of the
object's support region. For a w x h rectangle at angle theta the covariance
is R diag(w^2, h^2) R^T / 12; a noisy copy of it (and of the centre) is
turned back into an estimated box whose centre offset, extents, midpoint
offsets and angle become features. Background proposals observe nothing.

Columns:
    0  bias
    1  (cx_hat - ax) / aw            scaled by FEATURE_GAIN
    2  (cy_hat - ay) / ah            scaled by FEATURE_GAIN
    3  W_hat / aw - 1                external width, scaled
    4  H_hat / ah - 1                external height, scaled
    5  alpha_hat / W_hat             |.| with symmetric features
    6  beta_hat / H_hat              |.| with symmetric features
    7  theta_hat                     |.| with symmetric features
    8  w_hat / aw - 1                rotated long side, scaled
    9  h_hat / ah - 1                rotated short side, scaled
    10 IoU of anchor and object external rectangle, plus noise
    11 |column 1| + |column 2|
    12 |column 3| + |column 4|
    13 background flag
    14 domain signature: strength * (0 source, 1 target) plus noise
"""

from typing import Optional

import numpy as np

from src.geometry.batch import project_rotated_array, theta_to_midpoint_offsets_array

FEATURE_NAMES = (
    "bias",
    "offset_x",
    "offset_y",
    "external_w",
    "external_h",
    "alpha_ratio",
    "beta_ratio",
    "theta",
    "side_w",
    "side_h",
    "overlap",
    "offset_magnitude",
    "size_mismatch",
    "background",
    "domain",
)
N_FEATURES = len(FEATURE_NAMES)

# Offset and size features are multiplied by this and clipped to +-FEATURE_CLIP
FEATURE_GAIN = 5.0
FEATURE_CLIP = 3.0
DOMAIN_NOISE = 0.05


def moment_boxes(objects: np.ndarray, noise: float, rng: np.random.Generator) -> np.ndarray:
    """
    Boxes re-estimated from noisy centres and second moments.

    Args:
        objects: (N, 5) rotated boxes, one per proposal
        noise: Relative noise on centres and moment entries

    Returns:
        (N, 5) estimated boxes, long side first, canonical angle
    """
    n = objects.shape[0]
    if n == 0:
        return np.zeros((0, 5))
    cx, cy, w, h, t = objects.T
    c, s = np.cos(t), np.sin(t)
    sxx = (w ** 2 * c ** 2 + h ** 2 * s ** 2) / 12.0
    syy = (w ** 2 * s ** 2 + h ** 2 * c ** 2) / 12.0
    sxy = (w ** 2 - h ** 2) * c * s / 12.0

    scale = w ** 2 / 12.0
    eps = rng.standard_normal((n, 3)) * noise
    sxx = sxx + eps[:, 0] * scale
    syy = syy + eps[:, 1] * scale
    sxy = sxy + eps[:, 2] * scale
    centre_noise = rng.standard_normal((n, 2)) * noise * w[:, None]

    cov = np.empty((n, 2, 2))
    cov[:, 0, 0] = sxx
    cov[:, 1, 1] = syy
    cov[:, 0, 1] = sxy
    cov[:, 1, 0] = sxy
    values, vectors = np.linalg.eigh(cov)
    small = np.maximum(values[:, 0], 1e-6 * scale)
    large = np.maximum(values[:, 1], small)
    major = vectors[:, :, 1]
    theta = np.arctan2(major[:, 1], major[:, 0])
    theta = (theta + np.pi / 2.0) % np.pi - np.pi / 2.0
    theta = np.where(theta >= np.pi / 2.0, theta - np.pi, theta)

    return np.stack([
        cx + centre_noise[:, 0],
        cy + centre_noise[:, 1],
        np.sqrt(12.0 * large),
        np.sqrt(12.0 * small),
        theta,
    ], axis=1)


def _anchor_iou(anchors: np.ndarray, rects: np.ndarray) -> np.ndarray:
    ax0 = anchors[:, 0] - anchors[:, 2] / 2.0
    ay0 = anchors[:, 1] - anchors[:, 3] / 2.0
    ax1 = anchors[:, 0] + anchors[:, 2] / 2.0
    ay1 = anchors[:, 1] + anchors[:, 3] / 2.0
    iw = np.clip(np.minimum(ax1, rects[:, 2]) - np.maximum(ax0, rects[:, 0]), 0.0, None)
    ih = np.clip(np.minimum(ay1, rects[:, 3]) - np.maximum(ay0, rects[:, 1]), 0.0, None)
    inter = iw * ih
    union = anchors[:, 2] * anchors[:, 3] + (rects[:, 2] - rects[:, 0]) * (rects[:, 3] - rects[:, 1]) - inter
    return np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)


def proposal_features(anchors: np.ndarray,
                      objects: np.ndarray,
                      owner: np.ndarray,
                      noise: float,
                      rng: np.random.Generator,
                      target_domain: bool,
                      domain_signature: float = 1.0,
                      symmetric: bool = False,
                      object_rects: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Feature matrix of one scene.

    Args:
        anchors: (N, 4) anchors ax, ay, aw, ah
        objects: (M, 5) rotated ground truth
        owner: (N,) object index of each proposal, -1 for background
        noise: Feature noise level of the domain
        rng: Scene generator; consumed in a fixed order
        target_domain: Domain of the scene
        domain_signature: Strength of the domain column
        symmetric: Use orientation-symmetric features (|alpha|, |beta|, |theta|)
        object_rects: (M, 4) external rectangles of the objects, computed if omitted

    Returns:
        (N, N_FEATURES)
    """
    n = anchors.shape[0]
    features = np.zeros((n, N_FEATURES))
    features[:, 0] = 1.0
    features[:, 14] = domain_signature * float(target_domain) + DOMAIN_NOISE * rng.standard_normal(n)
    fg = np.flatnonzero(owner >= 0)
    features[owner < 0, 13] = 1.0
    if fg.size == 0:
        return features

    est = moment_boxes(objects[owner[fg]], noise, rng)
    enc = theta_to_midpoint_offsets_array(est)
    ax, ay, aw, ah = anchors[fg].T
    ext_w, ext_h = enc[:, 2], enc[:, 3]

    def gained(values: np.ndarray) -> np.ndarray:
        return np.clip(FEATURE_GAIN * values, -FEATURE_CLIP, FEATURE_CLIP)

    features[fg, 1] = gained((est[:, 0] - ax) / aw)
    features[fg, 2] = gained((est[:, 1] - ay) / ah)
    features[fg, 3] = gained(ext_w / aw - 1.0)
    features[fg, 4] = gained(ext_h / ah - 1.0)
    alpha_ratio = enc[:, 4] / ext_w
    beta_ratio = enc[:, 5] / ext_h
    theta = est[:, 4]
    if symmetric:
        alpha_ratio, beta_ratio, theta = np.abs(alpha_ratio), np.abs(beta_ratio), np.abs(theta)
    features[fg, 5] = alpha_ratio
    features[fg, 6] = beta_ratio
    features[fg, 7] = theta
    features[fg, 8] = gained(est[:, 2] / aw - 1.0)
    features[fg, 9] = gained(est[:, 3] / ah - 1.0)

    if object_rects is None:
        object_rects = project_rotated_array(objects)
    overlap = _anchor_iou(anchors[fg], object_rects[owner[fg]])
    features[fg, 10] = overlap + noise * rng.standard_normal(fg.size)
    features[fg, 11] = np.abs(features[fg, 1]) + np.abs(features[fg, 2])
    features[fg, 12] = np.abs(features[fg, 3]) + np.abs(features[fg, 4])
    return features
