"""Learning-curve records: versioned CSV schemas and cross-seed aggregation.

Two row schemas exist, one per trainer family.  Every row carries its
schema tag so files stay self-describing when concatenated; floats use
``repr`` (shortest round-trip) so write -> read -> write is byte-stable.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MissingArtifactError

ES_SCHEMA = "es_curve_v1"
PG_SCHEMA = "pg_curve_v1"

ES_COLUMNS = ("schema", "seed", "generation", "timesteps",
              "fitness_mean", "fitness_min", "fitness_max", "center_norm")
PG_COLUMNS = ("schema", "seed", "timesteps", "ep_reward_mean", "ep_reward_min",
              "ep_reward_max", "policy_loss", "value_loss", "explained_variance")


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_curve(path, schema: str, seed: int, rows) -> None:
    """Persist trainer history (EsTrainer / PpoTrainer stats objects)."""
    if schema == ES_SCHEMA:
        columns = ES_COLUMNS
        def unpack(r):
            return (r.generation, r.timesteps, r.fitness_mean, r.fitness_min,
                    r.fitness_max, r.center_norm)
    elif schema == PG_SCHEMA:
        columns = PG_COLUMNS
        def unpack(r):
            return (r.timesteps, r.ep_reward_mean, r.ep_reward_min, r.ep_reward_max,
                    r.policy_loss, r.value_loss, r.explained_variance)
    else:
        raise ConfigError(f"unknown curve schema {schema!r}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for r in rows:
            writer.writerow([schema, seed, *[_fmt(v) for v in unpack(r)]])


@dataclass
class Curve:
    """One run's learning curve on the shared x-axis (env timesteps)."""
    seed: int
    timesteps: np.ndarray
    reward: np.ndarray

    def resample(self, grid: np.ndarray) -> np.ndarray:
        return np.interp(grid, self.timesteps, self.reward)

    @property
    def average_reward(self) -> float:
        """Mean episodic reward over the whole run (sampling efficiency)."""
        return float(self.reward.mean())


def read_curve(path) -> Curve:
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise MissingArtifactError(f"curve file not found: {path}") from None
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ConfigError(f"{path}: empty curve file")
        cols = tuple(reader.fieldnames)
        if cols == list(ES_COLUMNS) or cols == ES_COLUMNS:
            reward_col = "fitness_mean"
        elif cols == list(PG_COLUMNS) or cols == PG_COLUMNS:
            reward_col = "ep_reward_mean"
        else:
            raise ConfigError(f"{path}: unrecognized curve columns {cols}")
        seeds, ts, rew = [], [], []
        for row in reader:
            seeds.append(int(row["seed"]))
            ts.append(float(row["timesteps"]))
            rew.append(float(row[reward_col]))
    if not ts:
        raise ConfigError(f"{path}: curve has no rows")
    if len(set(seeds)) != 1:
        raise ConfigError(f"{path}: expected a single seed per curve file")
    return Curve(seeds[0], np.asarray(ts), np.asarray(rew))


@dataclass
class VariantSummary:
    variant: str
    metric: str
    mean: float
    std: float
    n_seeds: int
    per_seed: list


def final_reward(episode_returns, last: int = 100) -> float:
    """Mean of the last ``last`` training-episode returns."""
    tail = list(episode_returns)[-last:]
    if not tail:
        raise ConfigError("no episodes recorded")
    return float(np.mean(tail))


def align_curves(curves: list[Curve], points: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Resample curves onto a common timestep grid; returns (grid, matrix)."""
    if not curves:
        raise ConfigError("align_curves needs at least one curve")
    lo = max(c.timesteps[0] for c in curves)
    hi = min(c.timesteps[-1] for c in curves)
    n = min(points, max(len(c.timesteps) for c in curves))
    grid = np.linspace(lo, hi, n)
    return grid, np.stack([c.resample(grid) for c in curves])


def aggregate(per_variant: dict[str, list[float]], metric: str) -> list[VariantSummary]:
    """Per-variant mean and cross-seed std of a scalar metric."""
    if not per_variant:
        raise ConfigError("aggregate: empty input")
    out = []
    for variant, values in per_variant.items():
        if not values:
            raise ConfigError(f"aggregate: variant {variant!r} has no runs")
        arr = np.asarray(values, dtype=np.float64)
        out.append(VariantSummary(variant, metric, float(arr.mean()),
                                  float(arr.std()), len(values), list(values)))
    return out


def percent_improvement(mean_a: float, mean_b: float) -> float:
    """(mean_a - mean_b) / |mean_b| * 100."""
    if mean_b == 0:
        raise ConfigError("percent improvement undefined for a zero baseline")
    return (mean_a - mean_b) / abs(mean_b) * 100.0


def write_summary_csv(path, summaries: list[VariantSummary]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "metric", "mean", "std", "n_seeds"])
        for s in summaries:
            writer.writerow([s.variant, s.metric, _fmt(s.mean), _fmt(s.std), s.n_seeds])
