"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 runtime/training error,
4 missing artifact.  ``SCN_LAB_OUTPUT_DIR`` overrides the output root.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint
from .config import load_config
from .envs import ENV_REGISTRY, EnvFactory, make_env
from .errors import ConfigError, MissingArtifactError, ScnLabError, TrainingDiverged
from .harness import (env_random_baseline, performance_ratio, run_ablation,
                      run_robustness, run_size_sweep, train_run)
from .plotting import SvgPlot
from .policy import param_count, preset_architecture
from .records import read_curve, write_summary_csv, aggregate
from .rollout import NoiseSpec, PolicyAgent, evaluate_policy, write_trace

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_MISSING = 4


def _out_dir(cfg_output_dir: str, override: str | None) -> Path:
    root = override or os.environ.get("SCN_LAB_OUTPUT_DIR") or cfg_output_dir
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(cfg.output_dir, args.output_dir)
    seeds = [args.seed] if args.seed is not None else list(cfg.seeds)
    factory = EnvFactory(cfg.env_name, cfg.env_overrides)
    probe = factory()
    arch = cfg.policy.architecture(probe.spec.state_dim, probe.spec.action_dim, cfg.mode)
    name = cfg.policy.preset or "policy"
    for seed in seeds:
        run = train_run(cfg, arch, name, seed, out, jobs=args.jobs)
        print(f"seed {seed}: {run.timesteps} steps, final eval {run.final_eval:.2f}, "
              f"checkpoint {run.checkpoint_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    env_name = args.env or ck.env_name
    if env_name is None:
        raise ConfigError("no env recorded in checkpoint; pass --env")
    factory = EnvFactory(env_name)
    spec = factory().spec
    if (spec.state_dim, spec.action_dim) != (ck.policy.arch.state_dim, ck.policy.arch.action_dim):
        raise ConfigError(
            f"checkpoint dims ({ck.policy.arch.state_dim}, {ck.policy.arch.action_dim}) "
            f"do not match env {env_name} ({spec.state_dim}, {spec.action_dim})"
        )
    policy = ck.policy
    if args.disable_stream:
        policy = policy.with_mask(
            linear=args.disable_stream != "linear",
            nonlinear=args.disable_stream != "nonlinear",
        )
    noise = None
    if args.noise:
        noise = NoiseSpec(args.noise, args.sigma)
    returns = evaluate_policy(factory, policy, ck.normalizer, args.episodes,
                              args.seed, noise=noise)
    print(f"episodes {args.episodes}  mean {returns.mean():.4f}  std {returns.std():.4f}  "
          f"min {returns.min():.4f}  max {returns.max():.4f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"mean": returns.mean(), "std": returns.std(),
                       "min": returns.min(), "max": returns.max(),
                       "episodes": args.episodes}, fh, indent=2)
            fh.write("\n")
    if args.trace:
        agent = PolicyAgent(policy, ck.normalizer,
                            noise=noise, rng=np.random.default_rng(args.seed))
        write_trace(args.trace, factory(), agent, args.seed)
        print(f"trace written to {args.trace}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(cfg.output_dir, args.output_dir)
    outcome = run_ablation(cfg, out, jobs=args.jobs, generations=args.generations)
    baseline = env_random_baseline(cfg.env_name, cfg.env_overrides)
    summaries = []
    evals = {}
    for variant in cfg.harness.ablation_variants:
        values = outcome.final_evals(variant)
        evals[variant] = values
    for s in aggregate(evals, "final_eval"):
        summaries.append(s)
        print(f"{s.variant:10s} mean {s.mean:10.2f}  std {s.std:8.2f}  (n={s.n_seeds})")
    write_summary_csv(out / "ablation_summary.csv", summaries)
    if "SCN" in evals:
        full = float(np.mean(evals["SCN"]))
        ratio_rows = []
        for variant in cfg.harness.ablation_variants:
            if variant == "SCN":
                continue
            r = performance_ratio(float(np.mean(evals[variant])), full, baseline)
            ratio_rows.append((variant, r))
            print(f"{variant:10s} baseline-shifted ratio vs SCN: {r:.3f}")
        with open(out / "ablation_ratios.csv", "w") as fh:
            fh.write("variant,ratio_vs_scn,baseline\n")
            for variant, r in ratio_rows:
                fh.write(f"{variant},{r!r},{baseline!r}\n")
    print(f"artifacts under {out}")
    return EXIT_OK


def cmd_robustness(args) -> int:
    sigmas = [float(s) for s in args.sigmas.split(",")]
    rows = run_robustness(args.checkpoint, args.env, args.target, sigmas,
                          args.episodes)
    print("sigma,mean_reward,degradation_pct")
    for r in rows:
        print(f"{r.sigma},{r.mean_reward:.4f},{r.degradation_pct:.2f}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("sigma,mean_reward,degradation_pct\n")
            for r in rows:
                fh.write(f"{r.sigma!r},{r.mean_reward!r},{r.degradation_pct!r}\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(cfg.output_dir, args.output_dir)
    if args.widths:
        widths = tuple(int(w) for w in args.widths.split(","))
        cfg.harness.sweep_widths = widths
    entries = run_size_sweep(cfg, out, jobs=args.jobs, generations=args.generations)
    path = out / "sweep_summary.csv"
    with open(path, "w") as fh:
        fh.write("preset,width,n_params,final_eval_mean,final_eval_std,n_seeds\n")
        for e in entries:
            fh.write(f"{e.preset},{e.width},{e.n_params},{e.summary.mean!r},"
                     f"{e.summary.std!r},{e.summary.n_seeds}\n")
            print(f"{e.preset:8s} params {e.n_params:6d}  final {e.summary.mean:10.2f} "
                  f"± {e.summary.std:.2f}")
    print(f"summary written to {path}")
    return EXIT_OK


def cmd_plot(args) -> int:
    groups: dict[str, list] = {}
    for path in args.curves:
        p = Path(path)
        if not p.exists():
            raise MissingArtifactError(f"curve file not found: {p}")
        label = p.parent.parent.name if p.parent.name.startswith("seed_") else p.stem
        groups.setdefault(label, []).append(read_curve(p))
    plot = SvgPlot(title=args.title or "")
    for label, curves in sorted(groups.items()):
        from .records import align_curves
        grid, matrix = align_curves(curves)
        plot.add(label, grid, matrix.mean(axis=0),
                 matrix.std(axis=0) if len(curves) > 1 else None)
    plot.save(args.out)
    print(f"plot written to {args.out}")
    return EXIT_OK


def cmd_info(args) -> int:
    print(f"scn-lab {__version__}")
    print("\nenvironments:")
    for name in sorted(ENV_REGISTRY):
        env = make_env(name)
        s = env.spec
        print(f"  {name:12s} state_dim {s.state_dim}  action_dim {s.action_dim}  "
              f"dt {s.dt}  max_steps {s.max_steps}  gamma {s.gamma}")
    print("\npreset parameter counts (es mode / pg mode):")
    for name in sorted(ENV_REGISTRY):
        env = make_env(name)
        s = env.spec
        row = []
        for preset in ("linear", "scn-16", "mlp-64", "locomotor"):
            es_n = param_count(preset_architecture(preset, s.state_dim, s.action_dim, "es"))
            pg_n = param_count(preset_architecture(preset, s.state_dim, s.action_dim, "pg"))
            row.append(f"{preset}={es_n}/{pg_n}")
        print(f"  {name:12s} " + "  ".join(row))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scn-lab",
        description="Structured control policies: training, ablation and robustness lab",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a policy per the experiment config")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, help="train only this seed")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--env", default=None)
    p.add_argument("--episodes", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--disable-stream", choices=("linear", "nonlinear"), default=None)
    p.add_argument("--noise", choices=("action", "obs"), default=None)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--trace", default=None, help="write one episode trace CSV here")
    p.add_argument("--out", default=None, help="write reward stats JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train/evaluate ablation variants")
    p.add_argument("config")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--generations", type=int, default=None)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("robustness", help="noise-injection degradation table")
    p.add_argument("checkpoint")
    p.add_argument("--env", required=True)
    p.add_argument("--target", choices=("action", "obs"), default="action")
    p.add_argument("--sigmas", default="0,0.1,0.25,0.5,1.0")
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("sweep", help="hidden-width size sweep")
    p.add_argument("config")
    p.add_argument("--widths", default=None, help="comma-separated widths")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--generations", type=int, default=None)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="render curve CSVs to an SVG")
    p.add_argument("curves", nargs="+")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--title", default=None)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("info", help="environments and preset sizes")
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifactError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except TrainingDiverged as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ScnLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
