"""
Assignment results.

An AssignmentBatch keeps sigma, tau, positive and reliable as parallel numpy
arrays and behaves as a read-only sequence of AssignmentResult.
"""

from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional, Sequence, Union, overload

import numpy as np

NO_MATCH = -1


@dataclass(frozen=True)
class AssignmentResult:
    """
    Assignment of one proposal.

    Attributes:
        sigma: 0-based index of the matched ground-truth box, None when nothing overlaps
        tau: IoU realised by sigma (0 when sigma is None)
        positive: tau >= positive threshold
        reliable: heuristic-selection flag g; True outside heuristic selection
    """
    sigma: Optional[int]
    tau: float
    positive: bool
    reliable: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigma": self.sigma,
            "tau": self.tau,
            "positive": self.positive,
            "reliable": self.reliable,
        }


class AssignmentBatch(Sequence[AssignmentResult]):
    """Assignments of all proposals of one image, in proposal order."""

    def __init__(self, sigma: np.ndarray, tau: np.ndarray, positive: np.ndarray,
                 reliable: Optional[np.ndarray] = None):
        self.sigma = np.asarray(sigma, dtype=np.int64)
        self.tau = np.asarray(tau, dtype=float)
        self.positive = np.asarray(positive, dtype=bool)
        n = self.sigma.shape[0]
        self.reliable = np.ones(n, dtype=bool) if reliable is None else np.asarray(reliable, dtype=bool)
        if not (self.tau.shape == self.positive.shape == self.reliable.shape == (n,)):
            raise ValueError("sigma, tau, positive and reliable must be 1-d arrays of one length")

    @classmethod
    def empty(cls, n: int) -> "AssignmentBatch":
        """All n proposals negative with tau = 0."""
        return cls(np.full(n, NO_MATCH), np.zeros(n), np.zeros(n, dtype=bool))

    @classmethod
    def from_results(cls, results: Sequence[AssignmentResult]) -> "AssignmentBatch":
        return cls(
            np.array([NO_MATCH if r.sigma is None else r.sigma for r in results], dtype=np.int64),
            np.array([r.tau for r in results], dtype=float),
            np.array([r.positive for r in results], dtype=bool),
            np.array([r.reliable for r in results], dtype=bool),
        )

    def __len__(self) -> int:
        return int(self.sigma.shape[0])

    @overload
    def __getitem__(self, index: int) -> AssignmentResult: ...

    @overload
    def __getitem__(self, index: slice) -> "AssignmentBatch": ...

    def __getitem__(self, index: Union[int, slice]):
        if isinstance(index, slice):
            return AssignmentBatch(self.sigma[index], self.tau[index], self.positive[index], self.reliable[index])
        sigma = int(self.sigma[index])
        return AssignmentResult(
            sigma=None if sigma == NO_MATCH else sigma,
            tau=float(self.tau[index]),
            positive=bool(self.positive[index]),
            reliable=bool(self.reliable[index]),
        )

    def __iter__(self) -> Iterator[AssignmentResult]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AssignmentBatch):
            return NotImplemented
        return (np.array_equal(self.sigma, other.sigma)
                and np.array_equal(self.tau, other.tau)
                and np.array_equal(self.positive, other.positive)
                and np.array_equal(self.reliable, other.reliable))

    def __repr__(self) -> str:
        return f"AssignmentBatch({len(self)} proposals, {self.n_positive} positive)"

    @property
    def n_positive(self) -> int:
        return int(self.positive.sum())

    @property
    def trained_positive(self) -> np.ndarray:
        """Positives that contribute a positive loss term (positive and reliable)."""
        return self.positive & self.reliable

    def with_reliable(self, reliable: np.ndarray) -> "AssignmentBatch":
        return AssignmentBatch(self.sigma.copy(), self.tau.copy(), self.positive.copy(), reliable)

    def to_records(self) -> List[Dict[str, Any]]:
        return [dict(proposal=i, **result.to_dict()) for i, result in enumerate(self)]


def positive_recall(assignments: AssignmentBatch, n_gt: int) -> float:
    """
    Fraction of ground-truth boxes that receive at least one positive proposal.

    Returns 0.0 for an empty ground-truth set.
    """
    if n_gt <= 0:
        return 0.0
    covered = np.unique(assignments.sigma[assignments.positive])
    return float(covered.size) / float(n_gt)
