"""Built-in environments and the shared reset/step contract."""
from __future__ import annotations

from .base import Env, EnvSpec, Transition
from .merge import MergeDriving
from .normalizer import ObsNormalizer
from .pendulum import PendulumSwingUp
from .point_mass import PointMassTracking
from .rhythm import RhythmTrack
from ..errors import ConfigError

ENV_REGISTRY = {
    "point_mass": PointMassTracking,
    "pendulum": PendulumSwingUp,
    "rhythm": RhythmTrack,
    "merge": MergeDriving,
}


def make_env(name: str, overrides: dict | None = None) -> Env:
    try:
        cls = ENV_REGISTRY[name]
    except KeyError:
        raise ConfigError(
            f"unknown env {name!r} (available: {sorted(ENV_REGISTRY)})"
        ) from None
    env = cls()
    if overrides:
        env.apply_overrides(dict(overrides))
    return env


class EnvFactory:
    """Picklable builder used by parallel trainers."""

    def __init__(self, name: str, overrides: dict | None = None):
        if name not in ENV_REGISTRY:
            raise ConfigError(f"unknown env {name!r} (available: {sorted(ENV_REGISTRY)})")
        self.name = name
        self.overrides = dict(overrides or {})

    def __call__(self) -> Env:
        return make_env(self.name, self.overrides)


__all__ = [
    "Env", "EnvSpec", "Transition", "ObsNormalizer", "EnvFactory", "make_env",
    "ENV_REGISTRY", "PointMassTracking", "PendulumSwingUp", "RhythmTrack",
    "MergeDriving",
]
