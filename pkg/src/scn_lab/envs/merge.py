"""Longitudinal on-ramp merge into a lane of car-following traffic."""
from __future__ import annotations

import math

import numpy as np

from .base import Env, EnvSpec
from ..errors import ConfigError

# geometry (m)
MERGE_POS = 150.0
GOAL_DIST = 100.0      # goal is MERGE_POS + GOAL_DIST
CAR_LENGTH = 4.0
SENSOR_RANGE = 100.0   # gap readings clamp here; also reported when absent

# traffic (intelligent-driver-model parameters)
N_CARS = 6
IDM_V0 = 12.0          # desired speed, m/s
IDM_T = 1.5            # desired time headway, s
IDM_A = 1.5            # max acceleration, m/s^2
IDM_B = 2.0            # comfortable braking, m/s^2
IDM_S0 = 2.0           # jam gap, m
IDM_DELTA = 4.0
IDM_NOISE_STD = 0.3    # per-step acceleration noise, m/s^2
IDM_BRAKE_LIMIT = 8.0  # physical braking floor for traffic
_IDM_2SQRT_AB = 2.0 * math.sqrt(IDM_A * IDM_B)

# reward shaping
CRASH_GAP = 1.0
CRASH_PENALTY = -200.0
GOAL_REWARD = 200.0
CLOSE_GAP = 5.0
CLOSE_PENALTY = -1.0
SPEED_WINDOW = (3.0, 15.0)
SPEED_PENALTY = -0.1
PROGRESS_COEF = 0.01
EGO_MAX_SPEED = 30.0


def idm_accel(v: float, gap: float, v_lead: float) -> float:
    """Car-following acceleration toward desired speed and safe gap."""
    desired_gap = IDM_S0 + max(0.0, v * IDM_T + v * (v - v_lead) / _IDM_2SQRT_AB)
    if gap < 0.1:
        gap = 0.1
    ratio = desired_gap / gap
    acc = IDM_A * (1.0 - (v / IDM_V0) ** IDM_DELTA - ratio * ratio)
    return max(-IDM_BRAKE_LIMIT, min(acc, IDM_A))


def idm_free_accel(v: float) -> float:
    return IDM_A * (1.0 - (v / IDM_V0) ** IDM_DELTA)


class MergeDriving(Env):
    """Acceleration-only merge negotiation at 10 Hz.

    The ego vehicle starts on a ramp that joins the lane at 150 m; six
    traffic cars drive the lane under a noisy intelligent driver model and,
    once the ego has merged, the car behind it follows it like any other
    leader.  Observation: [v_ego, dist to merge point, lead gap, lead
    relative speed, lag gap, lag relative speed]; gaps are bumper-to-bumper,
    clamped to 100 m (100 and relative speed 0 when no such car).

    Reward per step: 0.01 * progress, -1 while merged with any gap < 5 m,
    -0.1 while speed is outside [3, 15] m/s, +200 on passing the goal at
    250 m, -200 when a merged gap drops below 1 m (crash, terminal).  An
    episodic return above 50 counts as solved.  Per-step range given the
    30 m/s speed cap: [-201.1, +200.03].
    """

    name = "merge"
    OVERRIDABLE = ("max_steps", "idm_noise_std")

    def __init__(self):
        super().__init__()
        self.spec = EnvSpec(
            state_dim=6,
            action_dim=1,
            action_low=np.array([-4.0]),
            action_high=np.array([3.0]),
            dt=0.1,
            max_steps=300,
            gamma=0.995,
        )
        self.idm_noise_std = IDM_NOISE_STD
        self.x_ego = 0.0
        self.v_ego = 0.0
        self.x: list[float] = [0.0] * N_CARS  # lane cars, front first (descending x)
        self.v: list[float] = [0.0] * N_CARS

    def _apply_override(self, key, value):
        if key == "idm_noise_std":
            if float(value) < 0:
                raise ConfigError("idm_noise_std must be >= 0")
            self.idm_noise_std = float(value)
        else:
            super()._apply_override(key, value)

    def _reset(self, rng):
        self.x_ego = 0.0
        self.v_ego = rng.uniform(5.0, 10.0)
        xs = [rng.uniform(80.0, 130.0)]
        for _ in range(N_CARS - 1):
            xs.append(xs[-1] - CAR_LENGTH - rng.uniform(8.0, 30.0))
        self.x = xs
        self.v = rng.uniform(9.0, 12.0, N_CARS).tolist()

    @property
    def merged(self) -> bool:
        return self.x_ego >= MERGE_POS

    def _neighbors(self):
        """(lead_index, lag_index) around the ego, either may be None."""
        lead = lag = None
        x_ego = self.x_ego
        for i in range(N_CARS):
            if self.x[i] > x_ego:
                lead = i
            else:
                lag = i
                break
        return lead, lag

    def _gap_to(self, i: int) -> float:
        return abs(self.x[i] - self.x_ego) - CAR_LENGTH

    def _observe(self):
        lead, lag = self._neighbors()
        o = np.empty(6)
        o[0] = self.v_ego
        o[1] = MERGE_POS - self.x_ego
        if lead is not None:
            o[2] = min(self._gap_to(lead), SENSOR_RANGE)
            o[3] = self.v[lead] - self.v_ego
        else:
            o[2], o[3] = SENSOR_RANGE, 0.0
        if lag is not None:
            o[4] = min(self._gap_to(lag), SENSOR_RANGE)
            o[5] = self.v[lag] - self.v_ego
        else:
            o[4], o[5] = SENSOR_RANGE, 0.0
        return o

    def _advance_traffic(self):
        dt = self.spec.dt
        x, v = self.x, self.v
        lead, lag = self._neighbors()
        follow_ego = lag if self.merged else None
        noise = self._rng.normal(0.0, self.idm_noise_std, N_CARS).tolist()
        acc = [0.0] * N_CARS
        for i in range(N_CARS):
            if i == follow_ego:
                a = idm_accel(v[i], self._gap_to(i), self.v_ego)
            elif i == 0:
                a = idm_free_accel(v[i])
            else:
                a = idm_accel(v[i], x[i - 1] - x[i] - CAR_LENGTH, v[i - 1])
            a += noise[i]
            acc[i] = max(-IDM_BRAKE_LIMIT, min(a, 3.0))
        for i in range(N_CARS):
            vi = v[i] + acc[i] * dt
            if vi < 0.0:
                vi = 0.0
            v[i] = vi
            x[i] += vi * dt

    def _step(self, a):
        dt = self.spec.dt
        x_before = self.x_ego

        self._advance_traffic()
        self.v_ego = min(max(self.v_ego + a[0] * dt, 0.0), EGO_MAX_SPEED)
        self.x_ego += self.v_ego * dt

        reward = PROGRESS_COEF * (self.x_ego - x_before)
        info: dict = {}
        terminal = False

        min_gap = math.inf
        if self.merged:
            lead, lag = self._neighbors()
            if lead is not None:
                min_gap = self._gap_to(lead)
            if lag is not None:
                g = self._gap_to(lag)
                if g < min_gap:
                    min_gap = g
            if min_gap < CLOSE_GAP:
                reward += CLOSE_PENALTY
        if not (SPEED_WINDOW[0] <= self.v_ego <= SPEED_WINDOW[1]):
            reward += SPEED_PENALTY

        if min_gap < CRASH_GAP:
            reward += CRASH_PENALTY
            terminal = True
            info["crash"] = True
        elif self.x_ego > MERGE_POS + GOAL_DIST:
            reward += GOAL_REWARD
            terminal = True
            info["goal"] = True
        return reward, terminal, info

    def reference_action(self) -> np.ndarray:
        """Merge the ego under the same car-following rule as the traffic,
        yielding to the lag car while the gap behind is still unsafe.  Safe
        by construction; used as the no-crash oracle in tests."""
        lead, lag = self._neighbors()
        acc = idm_free_accel(self.v_ego) if lead is None \
            else idm_accel(self.v_ego, self._gap_to(lead), self.v[lead])
        if not self.merged and lag is not None and self._gap_to(lag) < 10.0:
            # treat the car behind as a leader until it has passed
            acc = min(acc, idm_accel(self.v_ego, self._gap_to(lag), self.v[lag]))
        low, high = self.spec.action_low[0], self.spec.action_high[0]
        return np.array([min(max(acc, low), high)])
