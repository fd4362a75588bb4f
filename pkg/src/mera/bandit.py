"""LinUCB retrieval-action selection over a 16-dimensional attempt context.

One ridge-regularized arm per retrieval action. Arms accept weighted updates
from both immediate post-attempt rewards (weight 1) and delayed credit
(fractional weights), and stay positive definite under any sequence of
nonnegative-weight updates.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .validation import FailureClass, ValidationReport

FEATURE_DIM = 16

DEFAULT_RIDGE = 1.0
DEFAULT_EXPLORATION = 0.6

# Direct re-inversion cadence bounding rank-one update drift.
REINVERT_EVERY = 64

FeatureVector = tuple[float, ...]


class RetrievalAction(enum.IntEnum):
    """What evidence enters the next prompt. Enum order is the tie-break order."""

    NONE = 0
    ONE_FAILURE_MATCH = 1
    ONE_AST_MATCH = 2
    ONE_FAILURE_ONE_AST = 3
    TWO_AST_MATCH = 4
    ONE_SKILL_ONLY = 5
    ONE_FAILURE_ONE_SKILL = 6
    DIFF_ONLY = 7


class NumericalFailure(Exception):
    """Arm matrix lost positive definiteness; indicates a violated invariant."""


class NegativeWeight(ValueError):
    """Update weights must be nonnegative."""


# One-hot slot order for the previous primary failure; SEMANTIC and BEHAVIOR
# share the final slot.
_FAILURE_SLOTS: tuple[tuple[FailureClass, ...], ...] = (
    (FailureClass.UNKNOWN,),
    (FailureClass.EXTRACTION,),
    (FailureClass.SYNTAX,),
    (FailureClass.UNDEFINED_NAME,),
    (FailureClass.SPEC_CONTRACT,),
    (FailureClass.IMPORT,),
    (FailureClass.RUNTIME,),
    (FailureClass.TYPE,),
    (FailureClass.SEMANTIC, FailureClass.BEHAVIOR),
)


@dataclass(frozen=True)
class AttemptContext:
    """Inputs the feature map consumes for one attempt."""

    attempt_index: int
    attempt_budget: int
    prev_report: ValidationReport | None = None
    edit_mode: bool = False

    def __post_init__(self) -> None:
        if self.attempt_budget < 1:
            raise ValueError("attempt_budget must be at least 1")
        if not 0 <= self.attempt_index < self.attempt_budget:
            raise ValueError("attempt_index must lie within the budget")


def build_features(ctx: AttemptContext) -> FeatureVector:
    """16-component context vector.

    Layout: [0] bias, [1] normalized attempt index, [2] previous validation
    progress over six checks, [3..11] one-hot previous primary failure,
    [12..14] one-hot previous-duration bucket (<10 s, 10-60 s, >60 s),
    [15] edit-mode flag. A fresh task reads as no failure, progress zero,
    and the fastest duration bucket.
    """
    phi = [0.0] * FEATURE_DIM
    phi[0] = 1.0
    if ctx.attempt_budget > 1:
        phi[1] = ctx.attempt_index / (ctx.attempt_budget - 1)

    failure = FailureClass.UNKNOWN
    duration = 0.0
    if ctx.prev_report is not None:
        phi[2] = min(1.0, ctx.prev_report.passed_count / 6.0)
        failure = ctx.prev_report.primary_failure
        duration = ctx.prev_report.duration
    for slot, classes in enumerate(_FAILURE_SLOTS):
        if failure in classes:
            phi[3 + slot] = 1.0
            break
    if duration < 10.0:
        phi[12] = 1.0
    elif duration <= 60.0:
        phi[13] = 1.0
    else:
        phi[14] = 1.0
    phi[15] = 1.0 if ctx.edit_mode else 0.0
    return tuple(phi)


class LinUcbArm:
    """Ridge state for one action: design matrix, response vector, pull count.

    The inverse is maintained incrementally by rank-one updates with periodic
    direct re-inversion to bound numeric drift.
    """

    def __init__(self, ridge: float = DEFAULT_RIDGE, dim: int = FEATURE_DIM) -> None:
        if ridge <= 0:
            raise ValueError("ridge must be positive")
        self.ridge = ridge
        self.dim = dim
        self.a = np.eye(dim) * ridge
        self.b = np.zeros(dim)
        self.pulls = 0
        self._a_inv = np.eye(dim) / ridge
        self._updates_since_reinvert = 0

    @property
    def a_inv(self) -> np.ndarray:
        return self._a_inv

    def theta_hat(self) -> np.ndarray:
        return self._a_inv @ self.b

    def to_dict(self) -> dict:
        return {
            "ridge": self.ridge,
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "pulls": self.pulls,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LinUcbArm":
        arm = cls(ridge=float(data["ridge"]), dim=len(data["b"]))
        arm.a = np.array(data["a"], dtype=float)
        arm.b = np.array(data["b"], dtype=float)
        arm.pulls = int(data["pulls"])
        arm._reinvert()
        return arm

    def _reinvert(self) -> None:
        try:
            self._a_inv = np.linalg.inv(self.a)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("arm matrix is not invertible") from exc
        self._updates_since_reinvert = 0


def ucb_score(arm: LinUcbArm, phi: FeatureVector, exploration: float) -> float:
    """Upper-confidence score: estimated utility plus exploration bonus."""
    if exploration < 0:
        raise ValueError("exploration must be nonnegative")
    x = np.asarray(phi, dtype=float)
    quad = float(x @ arm.a_inv @ x)
    if quad < -1e-12:
        raise NumericalFailure("negative confidence quadratic form")
    return float(arm.theta_hat() @ x) + exploration * math.sqrt(max(0.0, quad))


def select_action(
    arms: dict[RetrievalAction, LinUcbArm],
    phi: FeatureVector,
    exploration: float,
) -> RetrievalAction:
    """Argmax of the per-action scores; ties break by enum order."""
    missing = [a for a in RetrievalAction if a not in arms]
    if missing:
        raise ValueError(f"arms missing for actions: {missing}")
    best_action = RetrievalAction.NONE
    best_score = -math.inf
    for action in RetrievalAction:
        score = ucb_score(arms[action], phi, exploration)
        if score > best_score:
            best_score = score
            best_action = action
    return best_action


def update_arm(
    arm: LinUcbArm, phi: FeatureVector, reward_signal: float, weight: float = 1.0
) -> LinUcbArm:
    """Weighted ridge update; a zero weight leaves the arm untouched."""
    if weight < 0:
        raise NegativeWeight(f"weight {weight} is negative")
    if weight == 0:
        return arm
    x = np.asarray(phi, dtype=float)
    arm.a += weight * np.outer(x, x)
    arm.b += weight * reward_signal * x
    arm.pulls += 1
    arm._updates_since_reinvert += 1
    if arm._updates_since_reinvert >= REINVERT_EVERY:
        arm._reinvert()
    else:
        # Sherman-Morrison rank-one downdate of the inverse.
        inv_x = arm.a_inv @ x
        denom = 1.0 + weight * float(x @ inv_x)
        arm._a_inv = arm.a_inv - (weight * np.outer(inv_x, inv_x)) / denom
    return arm


class LinUcbPolicy:
    """All eight arms plus selection and persistence."""

    def __init__(
        self,
        ridge: float = DEFAULT_RIDGE,
        exploration: float = DEFAULT_EXPLORATION,
        dim: int = FEATURE_DIM,
    ) -> None:
        self.ridge = ridge
        self.exploration = exploration
        self.arms = {action: LinUcbArm(ridge, dim) for action in RetrievalAction}

    def select(self, phi: FeatureVector) -> RetrievalAction:
        return select_action(self.arms, phi, self.exploration)

    def update(
        self,
        action: RetrievalAction,
        phi: FeatureVector,
        reward_signal: float,
        weight: float = 1.0,
    ) -> None:
        update_arm(self.arms[action], phi, reward_signal, weight)

    def save(self, path: Path) -> None:
        doc = {
            "ridge": self.ridge,
            "exploration": self.exploration,
            "arms": {action.name: self.arms[action].to_dict() for action in RetrievalAction},
        }
        path.write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "LinUcbPolicy":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        policy = cls(ridge=float(doc["ridge"]), exploration=float(doc["exploration"]))
        for action in RetrievalAction:
            policy.arms[action] = LinUcbArm.from_dict(doc["arms"][action.name])
        return policy
