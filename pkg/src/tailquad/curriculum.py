"""Iteration-driven and reward-threshold-driven command curricula.

Stage 1 ramps the commanded forward speed along a sigmoid of the iteration
count; stage 2 ramps it along a sigmoid of ``reward_step``, a counter that
advances only when the iteration's mean per-step total reward exceeds a
threshold (4.75, strict). The same counter widens the turn-command onset
window: 1 + min(300, reward_step) control steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

REWARD_THRESHOLD = 4.75
STAGE1_SPEED_RANGE = (1.0, 2.5)
STAGE2_SPEED_RANGE = (1.77, 4.5)


def stage1_velocity(iteration: int) -> float:
    """1.0 + 1.5 / (1 + e^(-0.008 (iteration - 500))), bounded in (1.0, 2.5)."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    return 1.0 + 1.5 / (1.0 + math.exp(-0.008 * (iteration - 500.0)))


def stage2_velocity(reward_step: int) -> float:
    """1.77 + 2.73 / (1 + e^(-0.01 (reward_step - 100))), bounded in (1.77, 4.5)."""
    if reward_step < 0:
        raise ValueError("reward_step must be >= 0")
    return 1.77 + 2.73 / (1.0 + math.exp(-0.01 * (reward_step - 100.0)))


def command_range(reward_step: int) -> int:
    """Onset-window width in control steps: 1 + min(300, reward_step)."""
    if reward_step < 0:
        raise ValueError("reward_step must be >= 0")
    return 1 + min(300, reward_step)


@dataclass(frozen=True)
class CurriculumState:
    """Counters plus the derived command bounds for the current iteration."""

    iteration: int = 0
    reward_step: int = 0
    threshold: float = REWARD_THRESHOLD
    stage: int | None = None      # 1, 2, or None (curriculum inactive)
    v_cmd: float = 0.0
    command_range: int = 1

    @classmethod
    def start(cls, stage: int | None, threshold: float = REWARD_THRESHOLD) -> "CurriculumState":
        state = cls(stage=stage, threshold=threshold)
        return state.refresh()

    def refresh(self) -> "CurriculumState":
        if self.stage == 1:
            v = stage1_velocity(self.iteration)
        elif self.stage == 2:
            v = stage2_velocity(self.reward_step)
        else:
            v = 0.0
        return replace(self, v_cmd=v, command_range=command_range(self.reward_step))

    def to_dict(self) -> dict:
        return {"iteration": self.iteration, "reward_step": self.reward_step,
                "threshold": self.threshold, "stage": self.stage,
                "v_cmd": self.v_cmd, "command_range": self.command_range}

    @classmethod
    def from_dict(cls, d: dict) -> "CurriculumState":
        return cls(**d)


def advance(state: CurriculumState, mean_iteration_reward: float) -> CurriculumState:
    """Bump the iteration; bump reward_step only on a strict threshold exceedance."""
    bump = 1 if mean_iteration_reward > state.threshold else 0
    return replace(state,
                   iteration=state.iteration + 1,
                   reward_step=state.reward_step + bump).refresh()
