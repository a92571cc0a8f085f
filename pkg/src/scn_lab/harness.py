"""Experiment harness: training runs, ablations, stream isolation,
post-hoc policy composition, noise robustness and size sweeps.

Artifacts land under ``out_dir/<variant>/seed_<n>/`` as a checkpoint, a
curve CSV and the resolved config, so every result is reproducible from
the files sitting next to it.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig
from .envs import EnvFactory
from .errors import ConfigError, MissingArtifactError
from .es import EsConfig, EsTrainer
from .policy import Architecture, param_count
from .ppo import PpoTrainer
from .records import (ES_SCHEMA, PG_SCHEMA, Curve, VariantSummary, aggregate,
                      align_curves, final_reward, read_curve, write_curve)
from .rollout import (CompositeAgent, NoiseSpec, PolicyAgent, evaluate,
                      evaluate_policy, random_policy_returns)

EVAL_SEED_BASE = 900_000
BASELINE_SEED = 424_242


def derive_variant_arch(base: Architecture, variant: str) -> Architecture:
    """Architecture for a trained ablation variant.

    ``LinearOnly`` keeps only the gain matrix and bias; ``MlpOnly`` keeps
    only the nonlinear stream at exactly the size it has inside the full
    policy, so the ablation compares like against like.
    """
    if variant == "SCN":
        if not (base.linear and base.nonlinear):
            raise ConfigError("SCN variant needs a two-stream base architecture")
        return base
    if variant == "LinearOnly":
        return Architecture(base.state_dim, base.action_dim, linear=True, nonlinear=None,
                            hidden=(), gaussian_head=base.gaussian_head)
    if variant == "MlpOnly":
        if base.nonlinear is None:
            raise ConfigError("MlpOnly variant needs a base with a nonlinear stream")
        return Architecture(base.state_dim, base.action_dim, linear=False,
                            nonlinear=base.nonlinear, hidden=base.hidden,
                            cpg_components=base.cpg_components,
                            gaussian_head=base.gaussian_head)
    raise ConfigError(f"no trained architecture for variant {variant!r}")


@dataclass
class RunResult:
    env_name: str
    variant: str
    seed: int
    checkpoint_path: Path
    curve_path: Path
    final100: float           # mean of the last 100 training-episode returns
    final_eval: float         # mean return of the trained policy, frozen normalizer
    timesteps: int


def _run_dir(out_dir, variant: str, seed: int) -> Path:
    d = Path(out_dir) / variant / f"seed_{seed}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def train_run(cfg: ExperimentConfig, arch: Architecture, variant: str, seed: int,
              out_dir, jobs: int = 1, eval_episodes: int = 20,
              generations: int | None = None, on_progress=None,
              stop_at_reward: float | None = None) -> RunResult:
    """Train one (variant, seed) run and persist its artifacts."""
    factory = EnvFactory(cfg.env_name, cfg.env_overrides)
    run_dir = _run_dir(out_dir, variant, seed)
    t0 = time.perf_counter()
    if cfg.algo == "es":
        es_cfg = EsConfig(**{**cfg.es.__dict__, "master_seed": seed, "jobs": jobs})
        trainer = EsTrainer(arch, factory, es_cfg)
        stop_fn = None
        if stop_at_reward is not None:
            def stop_fn(stats, tr, _level=stop_at_reward):
                return stats.fitness_mean >= _level
        try:
            trainer.train(generations, on_generation=stop_fn if on_progress is None else on_progress)
        finally:
            trainer.close()
        policy, normalizer = trainer.policy(), trainer.normalizer
        critic = None
        schema, history = ES_SCHEMA, trainer.history
        episode_returns, timesteps = trainer.episode_returns, trainer.total_steps
    else:
        trainer = PpoTrainer(arch, factory, cfg.pg, seed)
        trainer.train(on_rollout=on_progress)
        policy, normalizer = trainer.policy, trainer.normalizer
        critic = trainer.critic
        schema, history = PG_SCHEMA, trainer.history
        episode_returns, timesteps = trainer.episode_returns, trainer.total_steps

    ckpt = run_dir / "checkpoint.bin"
    save_checkpoint(ckpt, policy, cfg.mode, normalizer, critic, cfg.env_name)
    curve = run_dir / "curve.csv"
    write_curve(curve, schema, seed, history)
    cfg.save_resolved(run_dir / "config.resolved.json")
    returns = evaluate_policy(factory, policy, normalizer, eval_episodes,
                              EVAL_SEED_BASE + seed)
    meta = {
        "variant": variant, "seed": seed, "timesteps": timesteps,
        "wall_clock_s": time.perf_counter() - t0,
        "final_eval_mean": float(returns.mean()),
    }
    (run_dir / "run_meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return RunResult(cfg.env_name, variant, seed, ckpt, curve,
                     final100=final_reward(episode_returns),
                     final_eval=float(returns.mean()), timesteps=timesteps)


def _require_checkpoint(out_dir, variant: str, seed: int) -> Path:
    path = Path(out_dir) / variant / f"seed_{seed}" / "checkpoint.bin"
    if not path.exists():
        raise MissingArtifactError(
            f"variant {variant!r} seed {seed} needs checkpoint {path} — train it first"
        )
    return path


@dataclass
class EvalResult:
    env_name: str
    variant: str
    seed: int
    final_eval: float


@dataclass
class AblationOutcome:
    trained: dict = field(default_factory=dict)    # variant -> list[RunResult]
    evaluated: dict = field(default_factory=dict)  # variant -> list[EvalResult]

    def final_evals(self, variant: str) -> list[float]:
        if variant in self.trained:
            return [r.final_eval for r in self.trained[variant]]
        return [r.final_eval for r in self.evaluated[variant]]

    def final100s(self, variant: str) -> list[float]:
        return [r.final100 for r in self.trained[variant]]


def run_ablation(cfg: ExperimentConfig, out_dir, jobs: int = 1,
                 generations: int | None = None, on_progress=None) -> AblationOutcome:
    """Train/evaluate the requested variants for every seed.

    Trainable variants (SCN, LinearOnly, MlpOnly) produce checkpoints and
    curves; SCN_L and SCN_N re-evaluate the trained SCN with one stream
    masked; PseudoSCN sums the actions of the separately trained LinearOnly
    and MlpOnly policies at evaluation time.
    """
    factory = EnvFactory(cfg.env_name, cfg.env_overrides)
    probe = factory()
    base = cfg.policy.architecture(probe.spec.state_dim, probe.spec.action_dim, cfg.mode)
    variants = cfg.harness.ablation_variants
    episodes = cfg.harness.eval_episodes
    outcome = AblationOutcome()

    for variant in ("SCN", "LinearOnly", "MlpOnly"):
        if variant in variants:
            arch = derive_variant_arch(base, variant)
            runs = [train_run(cfg, arch, variant, seed, out_dir, jobs,
                              episodes, generations, on_progress)
                    for seed in cfg.seeds]
            outcome.trained[variant] = runs

    for variant in ("SCN_L", "SCN_N"):
        if variant not in variants:
            continue
        rows = []
        for seed in cfg.seeds:
            ck = load_checkpoint(_require_checkpoint(out_dir, "SCN", seed))
            masked = ck.policy.with_mask(
                linear=variant == "SCN_L", nonlinear=variant == "SCN_N")
            returns = evaluate_policy(factory, masked, ck.normalizer, episodes,
                                      EVAL_SEED_BASE + seed)
            rows.append(EvalResult(cfg.env_name, variant, seed, float(returns.mean())))
        outcome.evaluated[variant] = rows

    if "PseudoSCN" in variants:
        rows = []
        for seed in cfg.seeds:
            lin = load_checkpoint(_require_checkpoint(out_dir, "LinearOnly", seed))
            mlp = load_checkpoint(_require_checkpoint(out_dir, "MlpOnly", seed))

            def agent_factory(rng, _l=lin, _m=mlp):
                return CompositeAgent(PolicyAgent(_l.policy, _l.normalizer),
                                      PolicyAgent(_m.policy, _m.normalizer))

            returns = evaluate(factory, agent_factory, episodes, EVAL_SEED_BASE + seed)
            rows.append(EvalResult(cfg.env_name, "PseudoSCN", seed, float(returns.mean())))
        outcome.evaluated["PseudoSCN"] = rows
    return outcome


def env_random_baseline(env_name: str, overrides: dict | None = None,
                        episodes: int = 20) -> float:
    """Mean return of uniform-random actions; the shift anchor for ratios."""
    return float(random_policy_returns(EnvFactory(env_name, overrides),
                                       episodes, BASELINE_SEED).mean())


def performance_ratio(r_variant: float, r_full: float, r_baseline: float) -> float:
    """Share of the full policy's edge over the baseline that a variant keeps:
    (r_variant - r_baseline) / (r_full - r_baseline)."""
    denom = r_full - r_baseline
    if denom == 0:
        raise ConfigError("performance ratio undefined: full policy equals baseline")
    return (r_variant - r_baseline) / denom


# -- robustness -----------------------------------------------------------------
@dataclass
class RobustnessRow:
    sigma: float
    mean_reward: float
    degradation_pct: float


def run_robustness(checkpoint_path, env_name: str, noise_target: str,
                   sigma_levels, episodes_per_level: int = 10,
                   env_overrides: dict | None = None,
                   seed_base: int = EVAL_SEED_BASE) -> list[RobustnessRow]:
    """Reward vs noise level for a trained policy.

    Degradation is the share of the policy's edge over the random baseline
    lost at each level: 100 * (r0 - r_sigma) / (r0 - r_random).
    """
    levels = [float(s) for s in sigma_levels]
    if any(s < 0 for s in levels) or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError("sigma levels must be >= 0 and strictly ascending")
    ck = load_checkpoint(checkpoint_path)
    factory = EnvFactory(env_name, env_overrides)
    baseline = env_random_baseline(env_name, env_overrides, episodes_per_level)
    rewards = []
    for sigma in levels:
        noise = NoiseSpec(noise_target, sigma) if sigma > 0 else None
        r = evaluate_policy(factory, ck.policy, ck.normalizer,
                            episodes_per_level, seed_base, noise=noise)
        rewards.append(float(r.mean()))
    r0 = rewards[0] if levels and levels[0] == 0.0 else evaluate_policy(
        factory, ck.policy, ck.normalizer, episodes_per_level, seed_base).mean()
    edge = r0 - baseline
    rows = []
    for sigma, r in zip(levels, rewards):
        deg = 0.0 if edge == 0 else 100.0 * (r0 - r) / edge
        rows.append(RobustnessRow(sigma, r, deg))
    return rows


# -- size sweep -------------------------------------------------------------------
@dataclass
class SweepEntry:
    width: int
    preset: str
    n_params: int
    summary: VariantSummary
    curves: list[Curve]


def run_size_sweep(cfg: ExperimentConfig, out_dir, jobs: int = 1,
                   generations: int | None = None) -> list[SweepEntry]:
    """Train one run per (width, seed) for the configured family."""
    factory = EnvFactory(cfg.env_name, cfg.env_overrides)
    probe = factory()
    entries = []
    for width in cfg.harness.sweep_widths:
        preset_name = f"{cfg.harness.sweep_family}-{width}"
        from .policy import preset_architecture
        arch = preset_architecture(preset_name, probe.spec.state_dim,
                                   probe.spec.action_dim, cfg.mode)
        runs = [train_run(cfg, arch, preset_name, seed, out_dir, jobs,
                          cfg.harness.eval_episodes, generations)
                for seed in cfg.seeds]
        evals = [r.final_eval for r in runs]
        summary = aggregate({preset_name: evals}, "final_eval")[0]
        curves = [read_curve(r.curve_path) for r in runs]
        entries.append(SweepEntry(width, preset_name, param_count(arch), summary, curves))
    return entries


# -- cross-seed curve summaries ----------------------------------------------------
@dataclass
class CurveSummary:
    variant: str
    grid: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    average_reward: float     # mean episodic reward over the whole run
    final_rewards: list[float]


def summarize_curves(variant: str, curves: list[Curve],
                     final_rewards: list[float]) -> CurveSummary:
    grid, matrix = align_curves(curves)
    return CurveSummary(
        variant=variant,
        grid=grid,
        mean=matrix.mean(axis=0),
        std=matrix.std(axis=0),
        average_reward=float(np.mean([c.average_reward for c in curves])),
        final_rewards=list(final_rewards),
    )
