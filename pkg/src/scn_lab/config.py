"""Experiment configuration: strict JSON with full-path error reporting.

Unknown keys are rejected, every error names the offending field, and a
fully resolved copy (defaults filled in) is written next to each run's
outputs so any artifact can be reproduced from the file beside it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .es import EsConfig
from .policy import Architecture, preset_architecture
from .ppo import PgConfig

ES_KEYS = {"sigma": float, "lr": float, "workers": int, "generations": int,
           "episodes_per_eval": int, "normalize_obs": bool}
PG_KEYS = {"gamma": float, "gae_lambda": float, "clip_eps": float, "rollout_len": int,
           "epochs": int, "minibatch": int, "policy_lr": float, "value_coef": float,
           "entropy_coef": float, "max_grad_norm": float, "total_timesteps": int,
           "normalize_obs": bool}
ABLATION_VARIANTS = ("SCN", "LinearOnly", "MlpOnly", "SCN_L", "SCN_N", "PseudoSCN")


def _require(block: dict, path: str, known: dict) -> None:
    for key in block:
        if key not in known:
            raise ConfigError(f"{path}.{key}: unknown key (allowed: {sorted(known)})")


def _typed(block: dict, path: str, key: str, kind, default=None, required=False):
    if key not in block or block[key] is None:
        if required:
            raise ConfigError(f"{path}.{key}: required field missing")
        return default
    value = block[key]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is bool and isinstance(value, bool):
        return value
    if kind is str and isinstance(value, str):
        return value
    if kind is list and isinstance(value, list):
        return value
    if kind is dict and isinstance(value, dict):
        return value
    raise ConfigError(f"{path}.{key}: expected {kind.__name__}, got {type(value).__name__}")


@dataclass
class PolicySpec:
    preset: str | None = None
    linear: bool = True
    nonlinear: str | None = "mlp"
    hidden: tuple[int, ...] = (16,)
    cpg_components: int = 16

    def architecture(self, state_dim: int, action_dim: int, mode: str) -> Architecture:
        if self.preset is not None:
            return preset_architecture(self.preset, state_dim, action_dim, mode)
        return Architecture(
            state_dim, action_dim, linear=self.linear, nonlinear=self.nonlinear,
            hidden=self.hidden, cpg_components=self.cpg_components,
            gaussian_head=(mode == "pg"),
        )

    def to_dict(self) -> dict:
        if self.preset is not None:
            return {"preset": self.preset}
        return {"linear": self.linear, "nonlinear": self.nonlinear,
                "hidden": list(self.hidden), "cpg_components": self.cpg_components}


@dataclass
class HarnessSpec:
    ablation_variants: tuple[str, ...] = ABLATION_VARIANTS
    eval_episodes: int = 20
    noise_target: str = "action"
    sigma_levels: tuple[float, ...] = (0.0, 0.1, 0.25, 0.5, 1.0)
    episodes_per_level: int = 10
    sweep_family: str = "scn"
    sweep_widths: tuple[int, ...] = (64, 32, 16, 8, 4)

    def to_dict(self) -> dict:
        return {
            "ablation": {"variants": list(self.ablation_variants),
                         "eval_episodes": self.eval_episodes},
            "robustness": {"noise_target": self.noise_target,
                           "sigma_levels": list(self.sigma_levels),
                           "episodes_per_level": self.episodes_per_level},
            "sweep": {"family": self.sweep_family, "widths": list(self.sweep_widths)},
        }


@dataclass
class ExperimentConfig:
    env_name: str
    env_overrides: dict
    policy: PolicySpec
    algo: str                  # "es" | "pg"
    es: EsConfig | None
    pg: PgConfig | None
    seeds: tuple[int, ...]
    output_dir: str
    harness: HarnessSpec = field(default_factory=HarnessSpec)

    @property
    def mode(self) -> str:
        return "es" if self.algo == "es" else "pg"

    def to_dict(self) -> dict:
        trainer: dict = {"algo": self.algo}
        if self.algo == "es":
            c = self.es
            trainer.update({k: getattr(c, k) for k in ES_KEYS})
        else:
            c = self.pg
            trainer.update({k: getattr(c, k) for k in PG_KEYS})
        return {
            "env": {"name": self.env_name, "overrides": self.env_overrides},
            "policy": self.policy.to_dict(),
            "trainer": trainer,
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
            "harness": self.harness.to_dict(),
        }

    def save_resolved(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _parse_policy(block: dict) -> PolicySpec:
    known = {"preset": str, "linear": bool, "nonlinear": str, "hidden": list,
             "cpg_components": int}
    _require(block, "policy", known)
    preset = _typed(block, "policy", "preset", str)
    if preset is not None:
        extra = set(block) - {"preset"}
        if extra:
            raise ConfigError(f"policy: preset excludes explicit keys {sorted(extra)}")
        return PolicySpec(preset=preset)
    nonlinear = block.get("nonlinear", "mlp")
    if nonlinear is not None and not isinstance(nonlinear, str):
        raise ConfigError("policy.nonlinear: expected string or null")
    hidden = _typed(block, "policy", "hidden", list, [16])
    if not all(isinstance(h, int) and not isinstance(h, bool) for h in hidden):
        raise ConfigError("policy.hidden: expected a list of integers")
    return PolicySpec(
        preset=None,
        linear=_typed(block, "policy", "linear", bool, True),
        nonlinear=nonlinear,
        hidden=tuple(hidden),
        cpg_components=_typed(block, "policy", "cpg_components", int, 16),
    )


def _parse_trainer(block: dict) -> tuple[str, EsConfig | None, PgConfig | None]:
    algo = _typed(block, "trainer", "algo", str, required=True)
    if algo == "es":
        _require(block, "trainer", {**ES_KEYS, "algo": str, "master_seed": int, "jobs": int})
        kwargs = {k: _typed(block, "trainer", k, kind)
                  for k, kind in ES_KEYS.items() if block.get(k) is not None}
        return "es", EsConfig(**kwargs), None
    if algo == "pg":
        _require(block, "trainer", {**PG_KEYS, "algo": str})
        kwargs = {k: _typed(block, "trainer", k, kind)
                  for k, kind in PG_KEYS.items() if block.get(k) is not None}
        return "pg", None, PgConfig(**kwargs)
    raise ConfigError(f"trainer.algo: expected 'es' or 'pg', got {algo!r}")


def _parse_harness(block: dict) -> HarnessSpec:
    _require(block, "harness", {"ablation": dict, "robustness": dict, "sweep": dict})
    spec = HarnessSpec()
    abl = _typed(block, "harness", "ablation", dict, {})
    _require(abl, "harness.ablation", {"variants": list, "eval_episodes": int})
    variants = _typed(abl, "harness.ablation", "variants", list, list(ABLATION_VARIANTS))
    for v in variants:
        if v not in ABLATION_VARIANTS:
            raise ConfigError(
                f"harness.ablation.variants: unknown variant {v!r} "
                f"(allowed: {list(ABLATION_VARIANTS)})"
            )
    rob = _typed(block, "harness", "robustness", dict, {})
    _require(rob, "harness.robustness",
             {"noise_target": str, "sigma_levels": list, "episodes_per_level": int})
    target = _typed(rob, "harness.robustness", "noise_target", str, "action")
    if target not in ("action", "obs"):
        raise ConfigError("harness.robustness.noise_target: expected 'action' or 'obs'")
    levels = _typed(rob, "harness.robustness", "sigma_levels", list,
                    list(HarnessSpec.sigma_levels))
    fl = [float(x) for x in levels]
    if any(x < 0 for x in fl) or any(b <= a for a, b in zip(fl, fl[1:])):
        raise ConfigError("harness.robustness.sigma_levels: must be >= 0, strictly ascending")
    sw = _typed(block, "harness", "sweep", dict, {})
    _require(sw, "harness.sweep", {"family": str, "widths": list})
    family = _typed(sw, "harness.sweep", "family", str, "scn")
    if family not in ("scn", "mlp"):
        raise ConfigError("harness.sweep.family: expected 'scn' or 'mlp'")
    widths = _typed(sw, "harness.sweep", "widths", list, list(HarnessSpec.sweep_widths))
    return HarnessSpec(
        ablation_variants=tuple(variants),
        eval_episodes=_typed(abl, "harness.ablation", "eval_episodes", int, 20),
        noise_target=target,
        sigma_levels=tuple(fl),
        episodes_per_level=_typed(rob, "harness.robustness", "episodes_per_level", int, 10),
        sweep_family=family,
        sweep_widths=tuple(int(w) for w in widths),
    )


def parse_config(data: dict, source: str = "config") -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    _require(data, source,
             {"env": dict, "policy": dict, "trainer": dict, "seeds": list,
              "output_dir": str, "harness": dict})
    env = _typed(data, source, "env", dict, required=True)
    _require(env, "env", {"name": str, "overrides": dict})
    env_name = _typed(env, "env", "name", str, required=True)
    overrides = _typed(env, "env", "overrides", dict, {})
    policy = _parse_policy(_typed(data, source, "policy", dict, required=True))
    algo, es, pg = _parse_trainer(_typed(data, source, "trainer", dict, required=True))
    seeds = _typed(data, source, "seeds", list, [1, 2, 3, 4, 5])
    if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError("seeds: expected a non-empty list of integers")
    harness = _parse_harness(_typed(data, source, "harness", dict, {}))
    return ExperimentConfig(
        env_name=env_name,
        env_overrides=overrides,
        policy=policy,
        algo=algo,
        es=es,
        pg=pg,
        seeds=tuple(seeds),
        output_dir=_typed(data, source, "output_dir", str, "runs"),
        harness=harness,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"{path}: config file not found") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
    return parse_config(data, source=str(path))
