"""Rhythmic velocity tracking with no phase information in the observation."""
from __future__ import annotations

import math

import numpy as np

from .base import Env, EnvSpec

DRAG = 0.5
TARGET_AMPLITUDE = 1.0
TARGET_FREQ = 1.5  # rad/s


class RhythmTrack(Env):
    """First-order velocity plant chasing a sinusoidal target speed.

    Dynamics: v' = a - 0.5 v; target v*(t) = sin(1.5 t); reward per step is
    -(v - v*)^2.  The observation is just [v] — the target's phase is never
    observed, so accurate tracking requires the policy to generate the
    rhythm internally; feedback through v alone can only damp.  Episode:
    400 steps of 0.05 s (about 4.8 target periods).  Reward range per step:
    [-25, 0] for the reachable envelope (|v| <= 4, |v*| <= 1).
    """

    name = "rhythm"

    def __init__(self):
        super().__init__()
        self.spec = EnvSpec(
            state_dim=1,
            action_dim=1,
            action_low=np.array([-2.0]),
            action_high=np.array([2.0]),
            dt=0.05,
            max_steps=400,
            gamma=0.99,
        )
        self.v = 0.0

    def target(self, t: float) -> float:
        return TARGET_AMPLITUDE * math.sin(TARGET_FREQ * t)

    def _reset(self, rng):
        self.v = rng.uniform(-0.5, 0.5)

    def _observe(self):
        o = np.empty(1)
        o[0] = self.v
        return o

    def _step(self, a):
        err = self.v - self.target(self.t)
        reward = -err * err
        self.v += (a[0] - DRAG * self.v) * self.spec.dt
        return reward, False, {}

    def reference_action(self) -> np.ndarray:
        """Exact feedforward for the current time: a = v*' + 0.5 v* holds the
        plant on the target once transients decay.  Test oracle."""
        t = self.t
        return np.array([
            TARGET_AMPLITUDE * TARGET_FREQ * math.cos(TARGET_FREQ * t)
            + DRAG * self.target(t)
        ])
