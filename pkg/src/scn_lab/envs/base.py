"""Environment contract shared by every task."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConfigError, UsageError


@dataclass(frozen=True)
class EnvSpec:
    state_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    dt: float
    max_steps: int
    gamma: float

    def __post_init__(self):
        low = np.asarray(self.action_low, dtype=np.float64)
        high = np.asarray(self.action_high, dtype=np.float64)
        object.__setattr__(self, "action_low", low)
        object.__setattr__(self, "action_high", high)
        if low.shape != (self.action_dim,) or high.shape != (self.action_dim,):
            raise ConfigError("action bounds must have shape (action_dim,)")
        if not np.all(low < high):
            raise ConfigError("action_low must be < action_high elementwise")
        if not (0.0 < self.dt <= 0.1):
            raise ConfigError(f"dt {self.dt} outside (0, 0.1]")
        if not (0.0 <= self.gamma < 1.0):
            raise ConfigError(f"gamma {self.gamma} outside [0, 1)")


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool
    info: dict = field(default_factory=dict)


class Env:
    """Seedable, deterministic single-instance environment.

    Subclasses implement ``_reset(rng)`` (set internal physical state),
    ``_observe() -> state vector`` and ``_step(action) -> (reward,
    terminal, info)`` which advances the physics by one dt.  ``step`` clips
    actions to the spec bounds, advances the episode clock, applies the
    step limit and refuses to run past the end of an episode.
    """

    spec: EnvSpec
    name: str = "env"

    # config keys that may be overridden from an experiment file
    OVERRIDABLE: tuple[str, ...] = ("max_steps",)

    def __init__(self):
        self._step_count = 0
        self._done = True
        self._rng: np.random.Generator | None = None
        self._last_obs: np.ndarray | None = None
        self._bounds: tuple[list, list] | None = None

    @property
    def t(self) -> float:
        """Episode clock in seconds: step index times dt, 0 after reset."""
        return self._step_count * self.spec.dt

    @property
    def done(self) -> bool:
        return self._done

    def reset(self, seed: int) -> np.ndarray:
        self._rng = np.random.default_rng(seed)
        self._step_count = 0
        self._done = False
        self._reset(self._rng)
        self._last_obs = self._observe()
        return self._last_obs

    def step(self, action) -> Transition:
        if self._done:
            raise UsageError(f"{self.name}: step() called on a finished episode")
        dim = self.spec.action_dim
        a = np.asarray(action, dtype=np.float64)
        if a.shape != (dim,):
            a = a.reshape(-1)
            if a.shape != (dim,):
                raise ConfigError(f"{self.name}: action has shape {a.shape}, want ({dim},)")
        if self._bounds is None:
            self._bounds = (self.spec.action_low.tolist(), self.spec.action_high.tolist())
        low, high = self._bounds
        vals = a.tolist()
        clipped = False
        for i in range(dim):
            x = vals[i]
            if not math.isfinite(x):
                raise ConfigError(f"{self.name}: non-finite action {vals}")
            if x < low[i]:
                vals[i] = low[i]
                clipped = True
            elif x > high[i]:
                vals[i] = high[i]
                clipped = True
        if clipped:
            a = np.array(vals)
        state = self._last_obs
        reward, terminal, info = self._step(a)
        self._step_count += 1
        next_state = self._observe()
        self._last_obs = next_state
        truncated = not terminal and self._step_count >= self.spec.max_steps
        info["truncated"] = truncated
        self._done = terminal or truncated
        return Transition(state, a, reward, next_state, self._done, info)

    def apply_overrides(self, overrides: dict) -> None:
        for key, value in overrides.items():
            if key not in self.OVERRIDABLE:
                raise ConfigError(
                    f"{self.name}: unknown override {key!r} (allowed: {sorted(self.OVERRIDABLE)})"
                )
            self._apply_override(key, value)

    def _apply_override(self, key: str, value) -> None:
        if key == "max_steps":
            self.spec = replace(self.spec, max_steps=int(value))

    # subclass hooks -------------------------------------------------------
    def _reset(self, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def _step(self, action: np.ndarray):
        raise NotImplementedError

    def _observe(self) -> np.ndarray:
        raise NotImplementedError
