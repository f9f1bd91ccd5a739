"""
LossBreakdown: the four co-training loss components plus gradients.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Optional

import numpy as np

from src.core.exceptions import NonFiniteLoss

COMPONENTS = ("L_S", "L_T", "L_S_star", "L_T_star")


@dataclass
class LossBreakdown:
    """
    First-stage (L_S, L_T) and second-stage (L_S_star, L_T_star) losses.

    ``gradient`` is the flattened parameter gradient when the breakdown comes
    from the objective; ``output_gradients`` holds per-proposal gradients with
    respect to decoded outputs for a single loss term.
    """
    L_S: float = 0.0
    L_T: float = 0.0
    L_S_star: float = 0.0
    L_T_star: float = 0.0
    gradient: Optional[np.ndarray] = None
    output_gradients: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for name in COMPONENTS:
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise NonFiniteLoss(f"{name} is not finite: {value}")
            if value < 0.0:
                raise NonFiniteLoss(f"{name} is negative: {value}")
            setattr(self, name, value)

    @property
    def total_first(self) -> float:
        return self.L_S + self.L_T

    @property
    def total_second(self) -> float:
        return self.L_S_star + self.L_T_star

    @property
    def total(self) -> float:
        return self.total_first + self.total_second

    @property
    def source(self) -> float:
        return self.L_S + self.L_S_star

    @property
    def target(self) -> float:
        return self.L_T + self.L_T_star

    def __add__(self, other: "LossBreakdown") -> "LossBreakdown":
        if not isinstance(other, LossBreakdown):
            return NotImplemented
        if self.gradient is None:
            gradient = None if other.gradient is None else other.gradient.copy()
        elif other.gradient is None:
            gradient = self.gradient.copy()
        else:
            gradient = self.gradient + other.gradient
        # Output gradients belong to one image's proposals and do not add up
        return LossBreakdown(
            L_S=self.L_S + other.L_S,
            L_T=self.L_T + other.L_T,
            L_S_star=self.L_S_star + other.L_S_star,
            L_T_star=self.L_T_star + other.L_T_star,
            gradient=gradient,
        )

    def scaled(self, source_weight: float = 1.0, target_weight: Optional[float] = None) -> "LossBreakdown":
        """
        Scale source components by source_weight and target components by target_weight.

        Output gradients are dropped; a parameter gradient can only be scaled
        when both weights agree.
        """
        if target_weight is None:
            target_weight = source_weight
        gradient = None
        if self.gradient is not None:
            if source_weight != target_weight:
                raise ValueError("A mixed-domain gradient cannot be scaled per domain")
            gradient = self.gradient * source_weight
        return LossBreakdown(
            L_S=self.L_S * source_weight,
            L_T=self.L_T * target_weight,
            L_S_star=self.L_S_star * source_weight,
            L_T_star=self.L_T_star * target_weight,
            gradient=gradient,
        )

    def as_target(self) -> "LossBreakdown":
        """Move source components into the target slots (source-style losses on target images)."""
        return replace(
            self,
            L_S=0.0,
            L_T=self.L_T + self.L_S,
            L_S_star=0.0,
            L_T_star=self.L_T_star + self.L_S_star,
        )

    def to_dict(self) -> Dict[str, float]:
        return {
            "L_S": self.L_S,
            "L_T": self.L_T,
            "L_S_star": self.L_S_star,
            "L_T_star": self.L_T_star,
            "total_first": self.total_first,
            "total_second": self.total_second,
            "total": self.total,
        }

    @classmethod
    def sum(cls, parts: Iterable["LossBreakdown"]) -> "LossBreakdown":
        total = cls()
        for part in parts:
            total = total + part
        return total

    @classmethod
    def mean(cls, parts: Iterable["LossBreakdown"]) -> "LossBreakdown":
        parts = list(parts)
        if not parts:
            return cls()
        total = cls.sum(parts)
        return total.scaled(1.0 / len(parts))
