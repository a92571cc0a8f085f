"""Episode execution shared by trainers, evaluation and the harness."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .envs import Env, ObsNormalizer
from .policy import StructuredPolicy


@dataclass
class NoiseSpec:
    """Additive Gaussian test-time noise.

    ``target`` is ``"action"`` (added to the mean action before the env
    clips it) or ``"obs"`` (added to the standardized observation).
    """
    target: str
    sigma: float

    def __post_init__(self):
        if self.target not in ("action", "obs"):
            raise ValueError(f"noise target must be 'action' or 'obs', got {self.target!r}")
        if self.sigma < 0:
            raise ValueError("noise sigma must be >= 0")


class PolicyAgent:
    """Policy plus observation standardization, with optional test-time noise.

    Standardization uses a frozen snapshot of the normalizer statistics
    taken at construction.  With ``collect_stats=True`` the agent also
    accumulates the raw observations it sees, exposed as ``delta`` (an
    ``ObsNormalizer`` state) for a trainer to merge back deterministically.
    ``stochastic=True`` samples from the Gaussian head instead of acting on
    the mean.
    """

    def __init__(self, policy: StructuredPolicy, normalizer: ObsNormalizer | None = None,
                 collect_stats: bool = False, stochastic: bool = False,
                 noise: NoiseSpec | None = None, rng: np.random.Generator | None = None):
        self.policy = policy
        self.stochastic = stochastic
        self.noise = noise if (noise is not None and noise.sigma > 0) else None
        self.rng = rng
        self._mean = self._inv_scale = None
        if normalizer is not None and normalizer.count >= 2:
            self._mean = normalizer.mean.copy()
            self._inv_scale = 1.0 / np.sqrt(normalizer.m2 / normalizer.count + 1e-8)
        self._n = 0
        self._sx = self._sxx = None
        if collect_stats:
            dim = policy.arch.state_dim
            self._sx = np.zeros(dim)
            self._sxx = np.zeros(dim)
        if (stochastic or self.noise is not None) and rng is None:
            raise ValueError("stochastic action or noise injection needs an rng")

    def act(self, obs: np.ndarray, t: float) -> np.ndarray:
        if self._sx is not None:
            self._n += 1
            self._sx += obs
            self._sxx += obs * obs
        if self._mean is not None:
            obs = (obs - self._mean) * self._inv_scale
        noise = self.noise
        if noise is not None and noise.target == "obs":
            obs = obs + noise.sigma * self.rng.standard_normal(obs.shape[0])
        if self.stochastic:
            action, _ = self.policy.sample(obs, t, self.rng)
        else:
            action = self.policy.forward(obs, t)
        if noise is not None and noise.target == "action":
            action = action + noise.sigma * self.rng.standard_normal(action.shape[0])
        return action

    @property
    def delta(self) -> ObsNormalizer | None:
        """Welford state of the observations this agent has consumed."""
        if self._sx is None or self._n == 0:
            return None
        d = ObsNormalizer(self._sx.shape[0])
        d.count = self._n
        d.mean = self._sx / self._n
        d.m2 = np.maximum(self._sxx - self._n * d.mean * d.mean, 0.0)
        return d


class CompositeAgent:
    """Sums the actions of two agents at every step (post-training
    composition of independently trained policies)."""

    def __init__(self, first: PolicyAgent, second: PolicyAgent):
        self.first = first
        self.second = second

    def act(self, obs: np.ndarray, t: float) -> np.ndarray:
        return self.first.act(obs, t) + self.second.act(obs, t)


@dataclass
class EpisodeResult:
    total_reward: float
    steps: int
    transitions: list = field(default_factory=list)


def run_episode(env: Env, agent, seed: int, record: bool = False) -> EpisodeResult:
    """Run one full episode; returns undiscounted return and step count."""
    obs = env.reset(seed)
    total = 0.0
    steps = 0
    transitions = [] if record else None
    while not env.done:
        action = agent.act(obs, env.t)
        tr = env.step(action)
        total += tr.reward
        steps += 1
        obs = tr.next_state
        if record:
            transitions.append(tr)
    return EpisodeResult(total, steps, transitions or [])


def evaluate(env_factory, agent_factory, episodes: int, seed_base: int) -> np.ndarray:
    """Episodic returns of ``episodes`` independent rollouts.

    ``agent_factory(episode_rng)`` builds a fresh agent per episode so that
    injected noise streams are independent and reproducible; episode i uses
    env seed ``seed_base + i``.
    """
    returns = np.empty(episodes)
    for i in range(episodes):
        env = env_factory()
        rng = np.random.default_rng([seed_base, i])
        agent = agent_factory(rng)
        returns[i] = run_episode(env, agent, seed_base + i).total_reward
    return returns


def evaluate_policy(env_factory, policy: StructuredPolicy,
                    normalizer: ObsNormalizer | None, episodes: int,
                    seed_base: int, noise: NoiseSpec | None = None) -> np.ndarray:
    """Deterministic-action evaluation with a frozen normalizer."""
    def factory(rng):
        return PolicyAgent(policy, normalizer, collect_stats=False,
                           stochastic=False, noise=noise, rng=rng)
    return evaluate(env_factory, factory, episodes, seed_base)


def random_policy_returns(env_factory, episodes: int, seed_base: int) -> np.ndarray:
    """Baseline returns of uniform-random actions within the env bounds."""
    returns = np.empty(episodes)
    for i in range(episodes):
        env = env_factory()
        rng = np.random.default_rng([seed_base, i, 7919])
        obs = env.reset(seed_base + i)
        low, high = env.spec.action_low, env.spec.action_high
        total = 0.0
        while not env.done:
            total += env.step(rng.uniform(low, high)).reward
        returns[i] = total
    return returns


def write_trace(path, env: Env, agent, seed: int) -> None:
    """Export one episode as CSV: step, state..., action..., reward, done."""
    result = run_episode(env, agent, seed, record=True)
    sd, ad = env.spec.state_dim, env.spec.action_dim
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["step"] + [f"s{i}" for i in range(sd)] + [f"a{i}" for i in range(ad)]
            + ["reward", "done"]
        )
        for k, tr in enumerate(result.transitions):
            writer.writerow(
                [k] + [repr(float(v)) for v in tr.state]
                + [repr(float(v)) for v in tr.action]
                + [repr(float(tr.reward)), int(tr.done)]
            )
