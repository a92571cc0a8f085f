"""Planar point mass tracking a circular reference trajectory."""
from __future__ import annotations

import math

import numpy as np

from .base import Env, EnvSpec

RADIUS = 1.0          # reference circle radius, m
ANG_SPEED = 1.0       # reference angular speed, rad/s
CTRL_COST = 0.01
RESET_SPREAD = 0.3    # uniform half-width of initial position/velocity offsets


class PointMassTracking(Env):
    """Double integrator chasing a moving target on the unit circle.

    Observation: [p - p_ref, v - v_ref, p_ref, v_ref] (8 values).  Action is
    a force in [-1, 1]^2 applied to a unit mass, integrated semi-implicitly.
    Per-step reward is -(|p - p_ref|^2 + 0.01 |a|^2), so perfect tracking
    still pays a small effort cost for the centripetal force.  Within a
    200-step episode the drift envelope bounds |p| by ~65 m, so the per-step
    reward lies in [-4400, 0].
    """

    name = "point_mass"
    OVERRIDABLE = ("max_steps", "reset_spread")

    def __init__(self):
        super().__init__()
        self.spec = EnvSpec(
            state_dim=8,
            action_dim=2,
            action_low=np.array([-1.0, -1.0]),
            action_high=np.array([1.0, 1.0]),
            dt=0.05,
            max_steps=200,
            gamma=0.99,
        )
        self.reset_spread = RESET_SPREAD
        self.px = self.py = 0.0
        self.vx = self.vy = 0.0

    def _apply_override(self, key, value):
        if key == "reset_spread":
            self.reset_spread = float(value)
        else:
            super()._apply_override(key, value)

    def _reset(self, rng):
        w = self.reset_spread
        off = rng.uniform(-w, w, 4)
        self.px = RADIUS + off[0]
        self.py = off[1]
        self.vx = off[2]
        self.vy = RADIUS * ANG_SPEED + off[3]

    def _observe(self):
        t = ANG_SPEED * self.t
        c, s = math.cos(t), math.sin(t)
        prx, pry = RADIUS * c, RADIUS * s
        vrx, vry = -RADIUS * ANG_SPEED * s, RADIUS * ANG_SPEED * c
        o = np.empty(8)
        o[0] = self.px - prx
        o[1] = self.py - pry
        o[2] = self.vx - vrx
        o[3] = self.vy - vry
        o[4] = prx
        o[5] = pry
        o[6] = vrx
        o[7] = vry
        return o

    def _step(self, a):
        ax, ay = a[0], a[1]
        t = ANG_SPEED * self.t
        ex = self.px - RADIUS * math.cos(t)
        ey = self.py - RADIUS * math.sin(t)
        reward = -(ex * ex + ey * ey + CTRL_COST * (ax * ax + ay * ay))
        dt = self.spec.dt
        self.vx += ax * dt
        self.vy += ay * dt
        self.px += self.vx * dt
        self.py += self.vy * dt
        return reward, False, {}

    def reference_action(self) -> np.ndarray:
        """Hand-derived tracking controller: PD on the error plus the
        centripetal feedforward.  Used as a correctness oracle in tests."""
        t = ANG_SPEED * self.t
        c, s = math.cos(t), math.sin(t)
        prx, pry = RADIUS * c, RADIUS * s
        vrx, vry = -RADIUS * ANG_SPEED * s, RADIUS * ANG_SPEED * c
        w2 = ANG_SPEED ** 2
        return np.array([
            -2.0 * (self.px - prx) - 2.0 * (self.vx - vrx) - w2 * prx,
            -2.0 * (self.py - pry) - 2.0 * (self.vy - vry) - w2 * pry,
        ])
