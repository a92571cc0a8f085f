"""Antithetic evolution-strategies trainer.

Every perturbation is reconstructed from a seed derived from
(master_seed, generation, pair index), so a generation's outcome is a pure
function of the incoming state and those seeds: evaluations may run on any
number of workers and the parameter trajectory stays bit-identical, because
the reduction (fitness shaping, update sum, normalizer merge) always
happens serially in ascending evaluation order.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .envs import ObsNormalizer
from .errors import ConfigError
from .policy import Architecture, StructuredPolicy, init_params
from .rollout import PolicyAgent, run_episode


def derive_seed(*parts: int) -> int:
    """Stable 64-bit seed from a tuple of integers."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


@dataclass
class EsConfig:
    sigma: float = 0.1
    lr: float = 0.01
    workers: int = 30            # antithetic pairs per generation
    generations: int = 100
    episodes_per_eval: int = 1
    master_seed: int = 0
    jobs: int = 1                # process parallelism for evaluations
    normalize_obs: bool = True

    def __post_init__(self):
        if self.sigma <= 0 or self.lr <= 0:
            raise ConfigError("sigma and lr must be > 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.episodes_per_eval < 1:
            raise ConfigError("episodes_per_eval must be >= 1")


@dataclass
class Generation:
    """One completed generation: fitness layout is [pair0+, pair0-, pair1+, ...]."""
    index: int
    center: np.ndarray
    fitness: np.ndarray
    update: np.ndarray
    steps: int = 0


def pair_noise(n_params: int, master_seed: int, gen: int, pair: int) -> np.ndarray:
    """The standard-normal perturbation of a pair, reconstructible anywhere."""
    return np.random.default_rng([master_seed, gen, pair]).standard_normal(n_params)


def perturb(center: np.ndarray, sigma: float, pair_seed) -> tuple[np.ndarray, np.ndarray]:
    """Antithetic pair (center + sigma*eps, center - sigma*eps)."""
    eps = np.random.default_rng(pair_seed).standard_normal(center.shape[0])
    return center + sigma * eps, center - sigma * eps


def shape_fitness(raw: np.ndarray) -> np.ndarray:
    """Centered-rank shaping onto [-0.5, 0.5] with exact zero mean.

    Ranks come from a stable ascending sort (ties ordered by evaluation
    index) and tied values then share their group's average rank, so equal
    rewards always map to equal shaped values and an all-equal population
    shapes to all zeros.
    """
    raw = np.asarray(raw, dtype=np.float64)
    m = raw.shape[0]
    if m < 1:
        raise ConfigError("shape_fitness needs at least one value")
    if m == 1:
        return np.zeros(1)
    order = np.argsort(raw, kind="stable")
    ranks = np.empty(m)
    ranks[order] = np.arange(m, dtype=np.float64)
    # average ranks within tie groups
    i = 0
    sorted_vals = raw[order]
    while i < m:
        j = i
        while j + 1 < m and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        if j > i:
            ranks[order[i : j + 1]] = 0.5 * (i + j)
        i = j + 1
    shaped = ranks / (m - 1) - 0.5
    return shaped - shaped.mean()


def es_update(center: np.ndarray, shaped: np.ndarray, pair_seeds: list, cfg: EsConfig) -> np.ndarray:
    """New center: center + lr/(2n sigma) * sum_j (shaped+_j - shaped-_j) eps_j.

    Perturbations are reconstructed from ``pair_seeds`` and summed in
    ascending pair order (fixed reduction order keeps results bit-stable).
    """
    n = len(pair_seeds)
    if shaped.shape[0] != 2 * n:
        raise ConfigError(f"expected {2 * n} shaped values, got {shaped.shape[0]}")
    acc = np.zeros_like(center)
    for j, seed in enumerate(pair_seeds):
        eps = np.random.default_rng(seed).standard_normal(center.shape[0])
        acc += (shaped[2 * j] - shaped[2 * j + 1]) * eps
    return center + cfg.lr / (2.0 * n * cfg.sigma) * acc


# -- environment evaluation ----------------------------------------------------
def _eval_pairs(task):
    """Evaluate a chunk of antithetic pairs; runs in a worker process.

    Episode seeds derive from (master_seed, generation, episode index) and
    are shared by the whole population of a generation (common random
    numbers); across generations the draws vary, so training still averages
    over the reset distribution.  Returns, per pair,
    ((fit+, steps+, delta+), (fit-, steps-, delta-)) where delta is the
    Welford state of the observations the evaluation itself produced
    (merged into the master normalizer by the caller).
    """
    (center, arch, cfg, gen, pairs, env_factory, norm_state) = task
    out = []
    for pair in pairs:
        eps = pair_noise(center.shape[0], cfg.master_seed, gen, pair)
        per_sign = []
        for sign_idx, sign in enumerate((1.0, -1.0)):
            policy = StructuredPolicy(arch, center + sign * cfg.sigma * eps)
            norm = ObsNormalizer.from_state(norm_state) if norm_state is not None else None
            agent = PolicyAgent(policy, norm, collect_stats=norm is not None)
            total = 0.0
            steps = 0
            for ep in range(cfg.episodes_per_eval):
                env = env_factory()
                # common random numbers: every evaluation in a generation
                # plays the same episode draws, so fitness ranks compare
                # policies rather than episode luck
                seed = derive_seed(cfg.master_seed, gen, ep)
                result = run_episode(env, agent, seed)
                total += result.total_reward
                steps += result.steps
            delta_acc = agent.delta
            delta = delta_acc.state_dict() if delta_acc is not None else None
            per_sign.append((total / cfg.episodes_per_eval, steps, delta))
        out.append(per_sign)
    return out


@dataclass
class GenerationStats:
    generation: int
    timesteps: int
    fitness_mean: float
    fitness_min: float
    fitness_max: float
    center_norm: float


class EsTrainer:
    """Drives generations against one environment configuration.

    The observation normalizer is shared: each evaluation standardizes with
    a snapshot of the entering statistics while accumulating its own new
    observations, and the deltas merge back in ascending evaluation order.
    """

    def __init__(self, arch: Architecture, env_factory, cfg: EsConfig):
        if arch.gaussian_head:
            raise ConfigError("ES policies act deterministically; drop the Gaussian head")
        self.arch = arch
        self.env_factory = env_factory
        self.cfg = cfg
        probe = env_factory()
        if probe.spec.state_dim != arch.state_dim or probe.spec.action_dim != arch.action_dim:
            raise ConfigError(
                f"architecture dims ({arch.state_dim}, {arch.action_dim}) do not match "
                f"env {probe.name} ({probe.spec.state_dim}, {probe.spec.action_dim})"
            )
        self.normalizer = ObsNormalizer(arch.state_dim) if cfg.normalize_obs else None
        self.center = init_params(arch, "es", np.random.default_rng(cfg.master_seed))
        self.total_steps = 0
        self.episode_returns: list[float] = []  # every evaluation episode, in order
        self.history: list[GenerationStats] = []
        self._pool = None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _chunks(self) -> list[list[int]]:
        pairs = list(range(self.cfg.workers))
        jobs = max(1, self.cfg.jobs)
        if jobs == 1:
            return [pairs]
        size = -(-len(pairs) // jobs)
        return [pairs[i : i + size] for i in range(0, len(pairs), size)]

    def run_generation(self, center: np.ndarray, gen_index: int) -> tuple[Generation, np.ndarray]:
        """Evaluate 2*workers perturbations, update the center.

        Given the entering (center, normalizer state), the result depends
        only on (master_seed, gen_index, env config) — not on ``jobs``.
        """
        cfg = self.cfg
        norm_state = self.normalizer.state_dict() if self.normalizer is not None else None
        chunks = self._chunks()
        tasks = [
            (center, self.arch, cfg, gen_index, chunk, self.env_factory, norm_state)
            for chunk in chunks
        ]
        if cfg.jobs > 1 and len(chunks) > 1:
            if self._pool is None:
                self._pool = ProcessPoolExecutor(max_workers=cfg.jobs)
            chunk_results = list(self._pool.map(_eval_pairs, tasks))
        else:
            chunk_results = [_eval_pairs(t) for t in tasks]

        fitness = np.empty(2 * cfg.workers)
        steps = 0
        flat = [pair_result for chunk in chunk_results for pair_result in chunk]
        for pair, per_sign in enumerate(flat):
            for sign_idx, (fit, ep_steps, delta) in enumerate(per_sign):
                fitness[2 * pair + sign_idx] = fit
                steps += ep_steps
                if self.normalizer is not None and delta is not None:
                    self.normalizer.merge(ObsNormalizer.from_state(delta))

        shaped = shape_fitness(fitness)
        pair_seeds = [[cfg.master_seed, gen_index, p] for p in range(cfg.workers)]
        new_center = es_update(center, shaped, pair_seeds, cfg)
        gen = Generation(gen_index, center.copy(), fitness, new_center - center, steps)
        return gen, new_center

    def train(self, generations: int | None = None, on_generation=None) -> list[GenerationStats]:
        """Run ``generations`` (default from config); optional callback
        ``on_generation(stats, trainer)`` may return True to stop early."""
        n = self.cfg.generations if generations is None else generations
        for g in range(len(self.history), len(self.history) + n):
            gen, new_center = self.run_generation(self.center, g)
            self.center = new_center
            self.total_steps += gen.steps
            self.episode_returns.extend(gen.fitness.tolist())
            stats = GenerationStats(
                generation=g,
                timesteps=self.total_steps,
                fitness_mean=float(gen.fitness.mean()),
                fitness_min=float(gen.fitness.min()),
                fitness_max=float(gen.fitness.max()),
                center_norm=float(np.sqrt(gen.center @ gen.center)),
            )
            self.history.append(stats)
            if on_generation is not None and on_generation(stats, self):
                break
        return self.history

    def policy(self) -> StructuredPolicy:
        return StructuredPolicy(self.arch, self.center)


def es_minimize(fitness_fn, center0: np.ndarray, cfg: EsConfig,
                generations: int | None = None):
    """Generic ES loop over a black-box fitness (higher is better).

    ``fitness_fn(theta, gen, pair, sign_idx) -> float``.  Shares the exact
    perturb/shape/update path with environment training; used for
    optimizer-level tests on analytic objectives.
    """
    center = np.array(center0, dtype=np.float64)
    n_gens = cfg.generations if generations is None else generations
    trace = []
    for g in range(n_gens):
        fitness = np.empty(2 * cfg.workers)
        for pair in range(cfg.workers):
            eps = pair_noise(center.shape[0], cfg.master_seed, g, pair)
            fitness[2 * pair] = fitness_fn(center + cfg.sigma * eps, g, pair, 0)
            fitness[2 * pair + 1] = fitness_fn(center - cfg.sigma * eps, g, pair, 1)
        shaped = shape_fitness(fitness)
        pair_seeds = [[cfg.master_seed, g, p] for p in range(cfg.workers)]
        center = es_update(center, shaped, pair_seeds, cfg)
        trace.append((g, float(fitness.mean()), center.copy()))
    return center, trace
