"""Clipped-surrogate policy-gradient trainer on exact reverse-mode gradients.

The policy and the separate value network live in one flat optimization
vector updated by a single adaptive-moment optimizer; gradients flow
through ``StructuredPolicy.backprop`` (mean path), the closed-form Gaussian
log-density derivatives (log-std path) and the critic's own backprop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .envs import ObsNormalizer
from .errors import ConfigError, TrainingDiverged
from .es import derive_seed
from .policy import Architecture, StructuredPolicy, init_params


@dataclass
class PgConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    rollout_len: int = 2048
    epochs: int = 10
    minibatch: int = 64
    policy_lr: float = 3e-4
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    max_grad_norm: float = 0.5
    total_timesteps: int = 100_000
    normalize_obs: bool = True
    normalize_returns: bool = True

    def __post_init__(self):
        if not (0.0 < self.clip_eps < 1.0):
            raise ConfigError("clip_eps must be in (0, 1)")
        if not (0.0 <= self.gae_lambda <= 1.0):
            raise ConfigError("gae_lambda must be in [0, 1]")
        if not (0.0 <= self.gamma < 1.0):
            raise ConfigError("gamma must be in [0, 1)")
        if self.rollout_len < 1 or self.minibatch < 1 or self.epochs < 1:
            raise ConfigError("rollout_len, minibatch and epochs must be >= 1")


class ReturnNormalizer:
    """Scales rewards by the running std of the discounted return.

    Keeps value targets O(1) across reward scales so the value loss cannot
    drown the policy gradient under the shared norm clip; the standard
    companion of observation normalization in baseline implementations.
    """

    def __init__(self, gamma: float):
        self.gamma = gamma
        self.ret = 0.0
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def scale(self, reward: float, done: bool) -> float:
        self.ret = self.gamma * self.ret + reward
        self.count += 1
        delta = self.ret - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (self.ret - self.mean)
        if done:
            self.ret = 0.0
        if self.count < 2:
            return reward
        return reward / math.sqrt(self.m2 / self.count + 1e-8)


class Critic:
    """Value MLP: two tanh hidden layers, scalar output with bias."""

    def __init__(self, state_dim: int, hidden: tuple[int, ...] = (64, 64)):
        self.state_dim = state_dim
        self.sizes = (state_dim, *hidden, 1)
        n = sum(self.sizes[i + 1] * self.sizes[i] + self.sizes[i + 1]
                for i in range(len(self.sizes) - 1))
        self.theta = np.zeros(n)
        self.W: list[np.ndarray] = []
        self.b: list[np.ndarray] = []
        o = 0
        for i in range(len(self.sizes) - 1):
            n_out, n_in = self.sizes[i + 1], self.sizes[i]
            self.W.append(self.theta[o : o + n_out * n_in].reshape(n_out, n_in))
            o += n_out * n_in
            self.b.append(self.theta[o : o + n_out])
            o += n_out

    @property
    def num_params(self) -> int:
        return self.theta.shape[0]

    def init(self, rng: np.random.Generator) -> None:
        for W in self.W:
            bound = 1.0 / math.sqrt(W.shape[1])
            W[...] = rng.uniform(-bound, bound, size=W.shape)

    def set_flat(self, values: np.ndarray) -> None:
        self.theta[:] = values

    def flatten(self) -> np.ndarray:
        return self.theta.copy()

    def forward(self, s: np.ndarray) -> np.ndarray | float:
        single = s.ndim == 1
        h = s[None, :] if single else s
        for W, b in zip(self.W[:-1], self.b[:-1]):
            h = np.tanh(h @ W.T + b)
        v = (h @ self.W[-1].T + self.b[-1])[:, 0]
        return float(v[0]) if single else v

    def backprop(self, s: np.ndarray, upstream: np.ndarray) -> np.ndarray:
        """Gradient of ``sum(value * upstream)`` over the batch rows."""
        S = s[None, :] if s.ndim == 1 else s
        G = np.asarray(upstream, dtype=np.float64).reshape(S.shape[0], 1)
        grad = np.zeros(self.num_params)
        gW, gb = [], []
        o = 0
        for i in range(len(self.sizes) - 1):
            n_out, n_in = self.sizes[i + 1], self.sizes[i]
            gW.append(grad[o : o + n_out * n_in].reshape(n_out, n_in))
            o += n_out * n_in
            gb.append(grad[o : o + n_out])
            o += n_out
        hs = [S]
        for W, b in zip(self.W[:-1], self.b[:-1]):
            hs.append(np.tanh(hs[-1] @ W.T + b))
        gW[-1] += G.T @ hs[-1]
        gb[-1] += G.sum(axis=0)
        d = G @ self.W[-1]
        for i in range(len(self.W) - 2, -1, -1):
            d = d * (1.0 - hs[i + 1] ** 2)
            gW[i] += d.T @ hs[i]
            gb[i] += d.sum(axis=0)
            if i > 0:
                d = d @ self.W[i]
        return grad


def compute_gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
                gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation.

    ``values`` has one trailing bootstrap entry (length T+1); ``dones``
    masks the bootstrap after terminal steps:
    delta_t = r_t + gamma*V_{t+1}*(1-done_t) - V_t,
    A_t = delta_t + gamma*lam*(1-done_t)*A_{t+1}; returns = A + V.
    """
    T = rewards.shape[0]
    if values.shape[0] != T + 1 or dones.shape[0] != T:
        raise ConfigError("misaligned GAE inputs")
    adv = np.empty(T)
    gae = 0.0
    for t in range(T - 1, -1, -1):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * values[t + 1] * live - values[t]
        gae = delta + gamma * lam * live * gae
        adv[t] = gae
    return adv, adv + values[:-1]


@dataclass
class RolloutBuffer:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    log_prob_old: np.ndarray
    value_old: np.ndarray
    times: np.ndarray            # episode clock per step (for time-based streams)
    bootstrap: float             # V(s_T) when the buffer ends mid-episode, else 0
    episode_returns: list = field(default_factory=list)

    def finalize(self, gamma: float, lam: float) -> None:
        values = np.append(self.value_old, self.bootstrap)
        adv, ret = compute_gae(self.rewards, values, self.dones, gamma, lam)
        std = adv.std()
        self.advantages = (adv - adv.mean()) / (std if std > 1e-12 else 1.0)
        self.return_target = ret


class AdamState:
    """Bias-corrected adaptive-moment accumulator."""

    def __init__(self, n: int, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, lr: float) -> np.ndarray:
    if params.shape != grads.shape:
        raise ConfigError("adam_step: params and grads must align")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    return params - lr * m_hat / (np.sqrt(v_hat) + state.eps)


def ppo_loss(batch: dict, policy: StructuredPolicy, critic: Critic, cfg: PgConfig):
    """Loss and exact flat gradients for one minibatch.

    Returns (loss, policy_grad, critic_grad, stats).  The policy term is
    -mean(min(rho*A, clip(rho)*A)); the value term value_coef*MSE; entropy
    weighted by entropy_coef.  Raises TrainingDiverged on non-finite loss.
    """
    S, A_act = batch["states"], batch["actions"]
    logp_old, adv, ret = batch["log_prob_old"], batch["advantages"], batch["return_target"]
    times = batch["times"]
    B = S.shape[0]

    mean = policy.forward(S, times)
    log_std = policy.p.log_std
    std = np.exp(log_std)
    z = (A_act - mean) / std
    logp_new = -np.sum(log_std) - 0.5 * mean.shape[1] * math.log(2 * math.pi) \
        - 0.5 * np.sum(z * z, axis=1)
    ratio = np.exp(logp_new - logp_old)
    surr1 = ratio * adv
    surr2 = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv
    policy_term = -float(np.mean(np.minimum(surr1, surr2)))

    values = critic.forward(S)
    v_err = values - ret
    value_term = cfg.value_coef * float(np.mean(v_err * v_err))
    entropy = policy.entropy()
    loss = policy_term + value_term - cfg.entropy_coef * entropy
    if not math.isfinite(loss):
        raise TrainingDiverged(
            f"non-finite loss (policy {policy_term}, value {value_term}); aborting update"
        )

    # d(policy_term)/d(logp_new): active only where the unclipped branch wins
    active = (surr1 <= surr2).astype(np.float64)
    dlogp = -(ratio * adv * active) / B
    upstream_mean = dlogp[:, None] * (z / std)
    policy_grad = policy.backprop(S, times, upstream_mean)
    if policy.p.log_std is not None:
        dlog_std = (dlogp[:, None] * (z * z - 1.0)).sum(axis=0) - cfg.entropy_coef
        policy_grad[-log_std.shape[0]:] += dlog_std
    critic_grad = critic.backprop(S, 2.0 * cfg.value_coef * v_err / B)
    stats = {"policy_loss": policy_term, "value_loss": value_term, "entropy": entropy}
    return loss, policy_grad, critic_grad, stats


def clip_grad_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    norm = float(np.sqrt(grad @ grad))
    if norm > max_norm and norm > 0.0:
        return grad * (max_norm / norm)
    return grad


@dataclass
class RolloutStats:
    timesteps: int
    ep_reward_mean: float
    ep_reward_min: float
    ep_reward_max: float
    policy_loss: float
    value_loss: float
    explained_variance: float


class PpoTrainer:
    """On-policy training loop against one environment instance."""

    def __init__(self, arch: Architecture, env_factory, cfg: PgConfig, seed: int):
        if not arch.gaussian_head:
            raise ConfigError("policy-gradient training needs a Gaussian head")
        self.arch = arch
        self.cfg = cfg
        self.seed = seed
        self.env = env_factory()
        spec = self.env.spec
        if spec.state_dim != arch.state_dim or spec.action_dim != arch.action_dim:
            raise ConfigError(
                f"architecture dims ({arch.state_dim}, {arch.action_dim}) do not match "
                f"env {self.env.name} ({spec.state_dim}, {spec.action_dim})"
            )
        init_rng = np.random.default_rng([seed, 0xA11CE])
        self.policy = StructuredPolicy(arch, init_params(arch, "pg", init_rng))
        self.critic = Critic(arch.state_dim)
        self.critic.init(init_rng)
        self.normalizer = ObsNormalizer(arch.state_dim) if cfg.normalize_obs else None
        self.ret_norm = ReturnNormalizer(cfg.gamma) if cfg.normalize_returns else None
        self.adam = AdamState(self.policy.num_params + self.critic.num_params)
        self.sample_rng = np.random.default_rng([seed, 0x5A5A])
        self.batch_rng = np.random.default_rng([seed, 0xB00C])
        self.total_steps = 0
        self.episode_count = 0
        self.episode_returns: list[float] = []
        self.history: list[RolloutStats] = []
        self._obs = self.env.reset(derive_seed(seed, self.episode_count))
        self._ep_return = 0.0

    def _norm(self, obs: np.ndarray, training: bool) -> np.ndarray:
        if self.normalizer is None:
            return obs
        return self.normalizer.normalize(obs, training=training)

    def collect_rollout(self) -> RolloutBuffer:
        cfg = self.cfg
        T = cfg.rollout_len
        d, a = self.arch.state_dim, self.arch.action_dim
        states = np.empty((T, d))
        actions = np.empty((T, a))
        rewards = np.empty(T)
        dones = np.empty(T)
        logp = np.empty(T)
        values = np.empty(T)
        times = np.empty(T)
        completed: list[float] = []
        ended_on_done = False
        for k in range(T):
            norm_obs = self._norm(self._obs, training=True)
            t_now = self.env.t
            action, lp = self.policy.sample(norm_obs, t_now, self.sample_rng)
            tr = self.env.step(action)
            self._ep_return += tr.reward
            reward = tr.reward
            if self.ret_norm is not None:
                reward = self.ret_norm.scale(reward, tr.done)
            if tr.done:
                if tr.info.get("truncated"):
                    nxt = self._norm(tr.next_state, training=False)
                    reward += cfg.gamma * self.critic.forward(nxt)
                completed.append(self._ep_return)
                self.episode_returns.append(self._ep_return)
                self._ep_return = 0.0
                self.episode_count += 1
                self._obs = self.env.reset(derive_seed(self.seed, self.episode_count))
            else:
                self._obs = tr.next_state
            states[k] = norm_obs
            actions[k] = action
            rewards[k] = reward
            dones[k] = 1.0 if tr.done else 0.0
            logp[k] = lp
            values[k] = self.critic.forward(norm_obs)
            times[k] = t_now
            ended_on_done = tr.done
        bootstrap = 0.0
        if not ended_on_done:
            bootstrap = self.critic.forward(self._norm(self._obs, training=False))
        self.total_steps += T
        buf = RolloutBuffer(states, actions, rewards, dones, logp, values, times,
                            bootstrap, completed)
        buf.finalize(cfg.gamma, cfg.gae_lambda)
        return buf

    def update(self, buf: RolloutBuffer) -> dict:
        cfg = self.cfg
        T = cfg.rollout_len
        pol_n = self.policy.num_params
        last_stats: dict = {}
        for _ in range(cfg.epochs):
            order = self.batch_rng.permutation(T)
            for start in range(0, T, cfg.minibatch):
                idx = order[start : start + cfg.minibatch]
                batch = {
                    "states": buf.states[idx],
                    "actions": buf.actions[idx],
                    "log_prob_old": buf.log_prob_old[idx],
                    "advantages": buf.advantages[idx],
                    "return_target": buf.return_target[idx],
                    "times": buf.times[idx],
                }
                _, pg, cg, stats = ppo_loss(batch, self.policy, self.critic, cfg)
                grad = clip_grad_norm(np.concatenate([pg, cg]), cfg.max_grad_norm)
                params = np.concatenate([self.policy.flatten(), self.critic.flatten()])
                params = adam_step(params, grad, self.adam, cfg.policy_lr)
                self.policy.set_flat(params[:pol_n])
                self.critic.set_flat(params[pol_n:])
                last_stats = stats
        return last_stats

    def train(self, total_timesteps: int | None = None, on_rollout=None) -> list[RolloutStats]:
        budget = self.cfg.total_timesteps if total_timesteps is None else total_timesteps
        while self.total_steps < budget:
            buf = self.collect_rollout()
            ret_pred = buf.value_old
            var_ret = float(np.var(buf.return_target))
            ev = 1.0 - float(np.var(buf.return_target - ret_pred)) / var_ret if var_ret > 0 else 0.0
            stats = self.update(buf)
            eps = buf.episode_returns
            row = RolloutStats(
                timesteps=self.total_steps,
                ep_reward_mean=float(np.mean(eps)) if eps else math.nan,
                ep_reward_min=float(np.min(eps)) if eps else math.nan,
                ep_reward_max=float(np.max(eps)) if eps else math.nan,
                policy_loss=stats.get("policy_loss", math.nan),
                value_loss=stats.get("value_loss", math.nan),
                explained_variance=ev,
            )
            self.history.append(row)
            if on_rollout is not None and on_rollout(row, self):
                break
        return self.history
