"""
ToyPredictor: a shared affine map from per-proposal features to both stages.

Stage one maps features f to (dx, dy, dw, dh, a, b, logit) and decodes
against the anchor (ax, ay, aw, ah):
    cx = ax + dx * aw            cy = ay + dy * ah
    W  = aw * max(1 + dw, s0)    H  = ah * max(1 + dh, s0)
    alpha = clip(a, -1/2, 1/2) * W
    beta  = clip(b, -1/2, 1/2) * H
Stage two maps the same features to (dx, dy, dw, dh, t, logit) and refines a
detached reference box (rx, ry, rw, rh, rtheta):
    x* = rx + dx * rw    y* = ry + dy * rh
    w* = rw * max(1 + dw, s0)    h* = rh * max(1 + dh, s0)    theta* = t
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.core.constants import RCNN_CHANNELS, RPN_CHANNELS
from src.core.exceptions import ConfigError
from src.objects.predictions import RcnnPredictions, RpnPredictions

# Smallest decoded scale factor, keeps widths positive
MIN_SCALE = 0.05


@dataclass
class RpnForward:
    raw: np.ndarray
    predictions: RpnPredictions
    width_active: np.ndarray
    height_active: np.ndarray
    a_clipped: np.ndarray
    b_clipped: np.ndarray


@dataclass
class RcnnForward:
    raw: np.ndarray
    predictions: RcnnPredictions
    width_active: np.ndarray
    height_active: np.ndarray


class ToyPredictor:
    """
    Parameters W1 (7, F) and W2 (6, F), zero-initialised by default.

    Examples:
        >>> model = ToyPredictor.zeros(n_features=16)
        >>> model.flat().shape
        (208,)
    """

    def __init__(self, w1: np.ndarray, w2: np.ndarray):
        self.w1 = np.asarray(w1, dtype=float)
        self.w2 = np.asarray(w2, dtype=float)
        if self.w1.shape[0] != len(RPN_CHANNELS) or self.w2.shape[0] != len(RCNN_CHANNELS):
            raise ConfigError(f"Unexpected parameter shapes {self.w1.shape}, {self.w2.shape}")
        if self.w1.shape[1] != self.w2.shape[1]:
            raise ConfigError("Both stages must read the same feature width")

    @classmethod
    def zeros(cls, n_features: int) -> "ToyPredictor":
        return cls(np.zeros((len(RPN_CHANNELS), n_features)), np.zeros((len(RCNN_CHANNELS), n_features)))

    @classmethod
    def from_flat(cls, params: np.ndarray, n_features: int) -> "ToyPredictor":
        params = np.asarray(params, dtype=float)
        split = len(RPN_CHANNELS) * n_features
        if params.shape != ((len(RPN_CHANNELS) + len(RCNN_CHANNELS)) * n_features,):
            raise ConfigError(f"Parameter vector of shape {params.shape} does not fit {n_features} features")
        return cls(params[:split].reshape(len(RPN_CHANNELS), n_features),
                   params[split:].reshape(len(RCNN_CHANNELS), n_features))

    @property
    def n_features(self) -> int:
        return self.w1.shape[1]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.w2.ravel()])

    def copy(self) -> "ToyPredictor":
        return ToyPredictor(self.w1.copy(), self.w2.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.w1)) and np.all(np.isfinite(self.w2)))

    # =========================================================================
    # STAGE ONE
    # =========================================================================

    def forward_rpn(self, features: np.ndarray, anchors: np.ndarray) -> RpnForward:
        """
        Args:
            features: (N, F)
            anchors: (N, 4) as ax, ay, aw, ah
        """
        raw = features @ self.w1.T
        ax, ay, aw, ah = anchors.T
        sw = 1.0 + raw[:, 2]
        sh = 1.0 + raw[:, 3]
        width_active = sw > MIN_SCALE
        height_active = sh > MIN_SCALE
        width = aw * np.where(width_active, sw, MIN_SCALE)
        height = ah * np.where(height_active, sh, MIN_SCALE)
        a = np.clip(raw[:, 4], -0.5, 0.5)
        b = np.clip(raw[:, 5], -0.5, 0.5)
        boxes = np.stack([
            ax + raw[:, 0] * aw,
            ay + raw[:, 1] * ah,
            width,
            height,
            a * width,
            b * height,
        ], axis=1)
        predictions = RpnPredictions(boxes, raw[:, 6], np.stack([aw, ah], axis=1))
        return RpnForward(raw, predictions, width_active, height_active, a, b)

    def backward_rpn(self, fwd: RpnForward, features: np.ndarray,
                     grad_boxes: np.ndarray, grad_logits: np.ndarray) -> np.ndarray:
        """Chain loss gradients on decoded boxes and logits back to W1."""
        raw = fwd.raw
        aw, ah = fwd.predictions.reference.T
        g = np.zeros_like(raw)
        g[:, 0] = grad_boxes[:, 0] * aw
        g[:, 1] = grad_boxes[:, 1] * ah
        d_width = grad_boxes[:, 2] + grad_boxes[:, 4] * fwd.a_clipped
        d_height = grad_boxes[:, 3] + grad_boxes[:, 5] * fwd.b_clipped
        g[:, 2] = np.where(fwd.width_active, d_width * aw, 0.0)
        g[:, 3] = np.where(fwd.height_active, d_height * ah, 0.0)
        width = fwd.predictions.boxes[:, 2]
        height = fwd.predictions.boxes[:, 3]
        g[:, 4] = np.where(np.abs(raw[:, 4]) < 0.5, grad_boxes[:, 4] * width, 0.0)
        g[:, 5] = np.where(np.abs(raw[:, 5]) < 0.5, grad_boxes[:, 5] * height, 0.0)
        g[:, 6] = grad_logits
        return g.T @ features

    # =========================================================================
    # STAGE TWO
    # =========================================================================

    def forward_rcnn(self, features: np.ndarray, references: np.ndarray) -> RcnnForward:
        """
        Args:
            features: (N, F)
            references: (N, 5) detached first-stage boxes
        """
        raw = features @ self.w2.T
        rx, ry, rw, rh = references[:, 0], references[:, 1], references[:, 2], references[:, 3]
        sw = 1.0 + raw[:, 2]
        sh = 1.0 + raw[:, 3]
        width_active = sw > MIN_SCALE
        height_active = sh > MIN_SCALE
        boxes = np.stack([
            rx + raw[:, 0] * rw,
            ry + raw[:, 1] * rh,
            rw * np.where(width_active, sw, MIN_SCALE),
            rh * np.where(height_active, sh, MIN_SCALE),
            raw[:, 4],
        ], axis=1)
        predictions = RcnnPredictions(boxes, raw[:, 5], np.stack([rw, rh], axis=1))
        return RcnnForward(raw, predictions, width_active, height_active)

    def backward_rcnn(self, fwd: RcnnForward, features: np.ndarray,
                      grad_boxes: np.ndarray, grad_logits: np.ndarray) -> np.ndarray:
        """Chain loss gradients on refined boxes and logits back to W2."""
        rw, rh = fwd.predictions.reference.T
        g = np.zeros_like(fwd.raw)
        g[:, 0] = grad_boxes[:, 0] * rw
        g[:, 1] = grad_boxes[:, 1] * rh
        g[:, 2] = np.where(fwd.width_active, grad_boxes[:, 2] * rw, 0.0)
        g[:, 3] = np.where(fwd.height_active, grad_boxes[:, 3] * rh, 0.0)
        g[:, 4] = grad_boxes[:, 4]
        g[:, 5] = grad_logits
        return g.T @ features

    def split_gradient(self, gradient: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        split = self.w1.size
        return gradient[:split].reshape(self.w1.shape), gradient[split:].reshape(self.w2.shape)
