"""Structured control policies.

A policy is the sum of up to two streams:

  * a linear stream  ``K @ s + b``,
  * a nonlinear stream, either a tanh MLP with no bias on its output layer
    or a bank of learned sinusoids (amplitude/frequency/phase per component)
    that depends on episode time only.

Streams combine additively into the mean action.  An optional Gaussian head
turns the mean into a stochastic policy with a state-independent, learned
log standard deviation per action dimension.

All parameters of a policy live in one flat float64 vector with a canonical
layout (see ``ParamLayout``); the stream matrices are numpy views into that
vector, so replacing parameters is a single slice assignment and
flatten/unflatten round-trips are bit-exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Architecture:
    """Static description of a policy: dimensions, streams, head.

    ``nonlinear`` is ``"mlp"``, ``"cpg"`` or ``None``.  ``hidden`` gives MLP
    hidden-layer widths, ``cpg_components`` the number of sinusoids per
    action dimension.
    """

    state_dim: int
    action_dim: int
    linear: bool = True
    nonlinear: str | None = "mlp"
    hidden: tuple[int, ...] = (16,)
    cpg_components: int = 16
    gaussian_head: bool = False

    def __post_init__(self):
        if self.state_dim < 1 or self.action_dim < 1:
            raise ConfigError(
                f"degenerate dims: state_dim={self.state_dim} action_dim={self.action_dim}"
            )
        if self.nonlinear not in (None, "mlp", "cpg"):
            raise ConfigError(f"unknown nonlinear stream {self.nonlinear!r}")
        if not self.linear and self.nonlinear is None:
            raise ConfigError("policy needs at least one stream")
        if self.nonlinear == "mlp":
            if not self.hidden or any(h < 1 for h in self.hidden):
                raise ConfigError(f"bad hidden widths {self.hidden}")
        if self.nonlinear == "cpg" and self.cpg_components < 1:
            raise ConfigError(f"bad sinusoid count {self.cpg_components}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def mlp_sizes(self) -> tuple[int, ...]:
        return (self.state_dim, *self.hidden, self.action_dim)

    def to_dict(self) -> dict:
        return {
            "state_dim": self.state_dim,
            "action_dim": self.action_dim,
            "linear": self.linear,
            "nonlinear": self.nonlinear,
            "hidden": list(self.hidden),
            "cpg_components": self.cpg_components,
            "gaussian_head": self.gaussian_head,
        }

    @staticmethod
    def from_dict(d: dict) -> "Architecture":
        return Architecture(
            state_dim=int(d["state_dim"]),
            action_dim=int(d["action_dim"]),
            linear=bool(d["linear"]),
            nonlinear=d["nonlinear"],
            hidden=tuple(d.get("hidden", ())),
            cpg_components=int(d.get("cpg_components", 16)),
            gaussian_head=bool(d.get("gaussian_head", False)),
        )


def param_count(arch: Architecture) -> int:
    """Total flat-vector length; a pure function of the architecture."""
    n = 0
    if arch.linear:
        n += arch.action_dim * arch.state_dim + arch.action_dim
    if arch.nonlinear == "mlp":
        sizes = arch.mlp_sizes
        for i in range(len(sizes) - 1):
            n += sizes[i + 1] * sizes[i]
            if i < len(sizes) - 2:  # output layer carries no bias
                n += sizes[i + 1]
    elif arch.nonlinear == "cpg":
        n += arch.action_dim * 3 * arch.cpg_components
    if arch.gaussian_head:
        n += arch.action_dim
    return n


class ParamLayout:
    """Carves a flat vector into the canonical parameter views.

    Order: linear K (row-major) then b; MLP layers in order, each weight
    matrix (row-major) then its hidden bias, output layer weights only; for
    the sinusoid stream, per action dimension amplitudes then angular
    frequencies then phases; Gaussian-head log stds last.
    """

    def __init__(self, arch: Architecture, theta: np.ndarray):
        if theta.shape != (param_count(arch),):
            raise ConfigError(
                f"parameter vector has length {theta.shape}, architecture needs {param_count(arch)}"
            )
        self.arch = arch
        self.theta = theta
        o = 0
        self.K = self.b = None
        if arch.linear:
            a, s = arch.action_dim, arch.state_dim
            self.K = theta[o : o + a * s].reshape(a, s)
            o += a * s
            self.b = theta[o : o + a]
            o += a
        self.W: list[np.ndarray] = []
        self.hb: list[np.ndarray] = []
        if arch.nonlinear == "mlp":
            sizes = arch.mlp_sizes
            for i in range(len(sizes) - 1):
                n_out, n_in = sizes[i + 1], sizes[i]
                self.W.append(theta[o : o + n_out * n_in].reshape(n_out, n_in))
                o += n_out * n_in
                if i < len(sizes) - 2:
                    self.hb.append(theta[o : o + n_out])
                    o += n_out
        self.A = self.omega = self.phi = None
        if arch.nonlinear == "cpg":
            a, c = arch.action_dim, arch.cpg_components
            block = theta[o : o + a * 3 * c].reshape(a, 3, c)
            self.A = block[:, 0, :]
            self.omega = block[:, 1, :]
            self.phi = block[:, 2, :]
            o += a * 3 * c
        self.log_std = None
        if arch.gaussian_head:
            self.log_std = theta[o : o + arch.action_dim]
            o += arch.action_dim
        assert o == theta.shape[0]


class StructuredPolicy:
    """Additive two-stream policy over a flat parameter vector.

    ``stream_mask = (linear_enabled, nonlinear_enabled)`` zeroes a stream's
    contribution without touching its parameters; ``with_mask`` returns a
    policy sharing the same parameter storage under a different mask.
    """

    def __init__(self, arch: Architecture, theta: np.ndarray | None = None,
                 stream_mask: tuple[bool, bool] = (True, True)):
        self.arch = arch
        n = param_count(arch)
        if theta is None:
            theta = np.zeros(n)
        else:
            theta = np.array(theta, dtype=np.float64).reshape(-1)
            if theta.shape[0] != n:
                raise ConfigError(
                    f"parameter vector length {theta.shape[0]} != architecture size {n}"
                )
        self._theta = theta
        self.p = ParamLayout(arch, self._theta)
        self.stream_mask = (bool(stream_mask[0]), bool(stream_mask[1]))

    # -- parameter plumbing ------------------------------------------------
    @property
    def num_params(self) -> int:
        return self._theta.shape[0]

    def flatten(self) -> np.ndarray:
        return self._theta.copy()

    def set_flat(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if values.shape != self._theta.shape:
            raise ConfigError(
                f"parameter vector length {values.shape[0]} != architecture size {self.num_params}"
            )
        self._theta[:] = values

    def with_mask(self, linear: bool | None = None, nonlinear: bool | None = None) -> "StructuredPolicy":
        mask = (
            self.stream_mask[0] if linear is None else bool(linear),
            self.stream_mask[1] if nonlinear is None else bool(nonlinear),
        )
        clone = object.__new__(StructuredPolicy)
        clone.arch = self.arch
        clone._theta = self._theta
        clone.p = self.p
        clone.stream_mask = mask
        return clone

    # -- forward -----------------------------------------------------------
    def _check_state(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        if s.shape[-1] != self.arch.state_dim:
            raise ConfigError(
                f"state has dim {s.shape[-1]}, policy expects {self.arch.state_dim}"
            )
        return s

    def linear_out(self, s: np.ndarray) -> np.ndarray:
        p = self.p
        if s.ndim == 1:
            return p.K @ s + p.b
        return s @ p.K.T + p.b

    def mlp_out(self, s: np.ndarray) -> np.ndarray:
        p = self.p
        h = s
        for i, W in enumerate(p.W[:-1]):
            h = np.tanh((h @ W.T + p.hb[i]) if s.ndim > 1 else (W @ h + p.hb[i]))
        W = p.W[-1]
        return h @ W.T if s.ndim > 1 else W @ h

    def cpg_out(self, t) -> np.ndarray:
        p = self.p
        t = np.asarray(t, dtype=np.float64)
        if t.ndim == 0:
            return np.sum(p.A * np.sin(p.omega * float(t) + p.phi), axis=1)
        phase = p.omega[None] * t[:, None, None] + p.phi[None]
        return np.sum(p.A[None] * np.sin(phase), axis=2)

    def nonlinear_out(self, s: np.ndarray, t) -> np.ndarray:
        if self.arch.nonlinear == "mlp":
            return self.mlp_out(s)
        return self.cpg_out(t)

    def forward(self, s: np.ndarray, t: float | np.ndarray = 0.0) -> np.ndarray:
        """Mean action for state ``s`` at episode time ``t`` (seconds)."""
        s = self._check_state(s)
        use_lin = self.arch.linear and self.stream_mask[0]
        use_non = self.arch.nonlinear is not None and self.stream_mask[1]
        if use_lin:
            out = self.linear_out(s)
            if use_non:
                out += self.nonlinear_out(s, t)
            return out
        if use_non:
            return self.nonlinear_out(s, t)
        return (
            np.zeros((s.shape[0], self.arch.action_dim)) if s.ndim > 1
            else np.zeros(self.arch.action_dim)
        )

    def forward_decomposed(self, s: np.ndarray, t: float | np.ndarray = 0.0):
        """Returns (mean, linear part, nonlinear part), mask already applied.

        The mean equals the elementwise sum of the two returned parts; a
        disabled or absent stream contributes exact zeros.
        """
        s = self._check_state(s)
        batch = s.ndim > 1
        zeros = (
            np.zeros((s.shape[0], self.arch.action_dim)) if batch
            else np.zeros(self.arch.action_dim)
        )
        u_lin = (
            self.linear_out(s)
            if self.arch.linear and self.stream_mask[0] else zeros.copy()
        )
        u_non = (
            self.nonlinear_out(s, t)
            if self.arch.nonlinear is not None and self.stream_mask[1] else zeros.copy()
        )
        return u_lin + u_non, u_lin, u_non

    # -- Gaussian head -----------------------------------------------------
    def sample(self, s: np.ndarray, t: float, rng: np.random.Generator):
        """Draw an action from the Gaussian head; returns (action, log_prob)."""
        if self.p.log_std is None:
            raise ConfigError("policy has no Gaussian head; cannot sample")
        mean = self.forward(s, t)
        std = np.exp(self.p.log_std)
        z = rng.standard_normal(self.arch.action_dim)
        action = mean + std * z
        log_prob = float(-np.sum(self.p.log_std) - 0.5 * self.arch.action_dim * LOG_2PI
                         - 0.5 * np.sum(z * z))
        return action, log_prob

    def log_prob(self, mean: np.ndarray, action: np.ndarray) -> np.ndarray:
        """Diagonal-Gaussian log density of ``action`` given ``mean``; batched."""
        log_std = self.p.log_std
        z = (action - mean) / np.exp(log_std)
        return -np.sum(log_std) - 0.5 * mean.shape[-1] * LOG_2PI - 0.5 * np.sum(z * z, axis=-1)

    def entropy(self) -> float:
        """Entropy of the Gaussian head (state-independent)."""
        log_std = self.p.log_std
        return float(np.sum(log_std) + 0.5 * log_std.shape[0] * (1.0 + LOG_2PI))

    # -- exact gradients ---------------------------------------------------
    def backprop(self, s: np.ndarray, t, upstream: np.ndarray) -> np.ndarray:
        """Gradient of ``sum(mean_action * upstream)`` w.r.t. every parameter.

        ``s`` and ``upstream`` may be single vectors or batches (rows); a
        batch returns the gradient summed over rows.  The result uses the
        canonical flat layout; parameters of masked streams and the head's
        log stds (which the mean does not depend on) get zeros.
        """
        s = self._check_state(s)
        single = s.ndim == 1
        S = s[None, :] if single else s
        G = np.asarray(upstream, dtype=np.float64)
        G = G[None, :] if single else G
        if G.shape != (S.shape[0], self.arch.action_dim):
            raise ConfigError(f"upstream grad shape {G.shape} does not match")
        grad = np.zeros(self.num_params)
        g = ParamLayout(self.arch, grad)

        if self.arch.linear and self.stream_mask[0]:
            g.K += G.T @ S
            g.b += G.sum(axis=0)

        if self.arch.nonlinear == "mlp" and self.stream_mask[1]:
            p = self.p
            hs = [S]
            for i, W in enumerate(p.W[:-1]):
                hs.append(np.tanh(hs[-1] @ W.T + p.hb[i]))
            # output layer: no bias, identity activation
            g.W[-1] += G.T @ hs[-1]
            d = G @ p.W[-1]
            for i in range(len(p.W) - 2, -1, -1):
                d = d * (1.0 - hs[i + 1] ** 2)
                g.W[i] += d.T @ hs[i]
                g.hb[i] += d.sum(axis=0)
                if i > 0:
                    d = d @ p.W[i]
        elif self.arch.nonlinear == "cpg" and self.stream_mask[1]:
            p = self.p
            tv = np.asarray(t, dtype=np.float64)
            tv = np.full(S.shape[0], float(tv)) if tv.ndim == 0 else tv
            phase = p.omega[None] * tv[:, None, None] + p.phi[None]  # (B, a, c)
            sin_p, cos_p = np.sin(phase), np.cos(phase)
            gb = G[:, :, None]  # (B, a, 1)
            g.A += np.sum(gb * sin_p, axis=0)
            g.omega += np.sum(gb * p.A[None] * cos_p * tv[:, None, None], axis=0)
            g.phi += np.sum(gb * p.A[None] * cos_p, axis=0)
        return grad


# -- initialization ----------------------------------------------------------
def init_params(arch: Architecture, mode: str, rng: np.random.Generator) -> np.ndarray:
    """Initial flat parameters.

    ``es``: the zero policy — output-side parameters (gain matrix, bias,
    MLP output weights, sinusoid amplitudes, log stds) are zero, while
    shape-side parameters are randomized so evolution gets first-order
    signal from the start: MLP hidden weights fan-in-scaled uniform,
    sinusoid frequencies uniform [0.5, 2.0] rad/s and phases uniform
    [0, 2pi).  An all-zero hidden stack would leave the output weights
    with only second-order fitness signal and the nonlinear stream never
    ignites at small learning rates.

    ``pg``: hidden weights fan-in-scaled uniform, output-layer weights and
    the linear gain scaled by 0.01, biases and log stds zero.
    """
    if mode not in ("es", "pg"):
        raise ConfigError(f"unknown init mode {mode!r}")
    theta = np.zeros(param_count(arch))
    p = ParamLayout(arch, theta)
    if arch.nonlinear == "cpg":
        p.omega[...] = rng.uniform(0.5, 2.0, size=p.omega.shape)
        p.phi[...] = rng.uniform(0.0, 2.0 * math.pi, size=p.phi.shape)
    if arch.nonlinear == "mlp":
        last = len(p.W) - 1
        for i, W in enumerate(p.W):
            bound = 1.0 / math.sqrt(W.shape[1])
            if i < last:
                W[...] = rng.uniform(-bound, bound, size=W.shape)
            elif mode == "pg":
                W[...] = 0.01 * rng.uniform(-bound, bound, size=W.shape)
    if mode == "pg":
        if arch.linear:
            bound = 1.0 / math.sqrt(arch.state_dim)
            p.K[...] = 0.01 * rng.uniform(-bound, bound, size=p.K.shape)
        if arch.nonlinear == "cpg":
            p.A[...] = 0.01 * rng.uniform(-1.0, 1.0, size=p.A.shape)
    return theta


def make_policy(arch: Architecture, mode: str, rng: np.random.Generator) -> StructuredPolicy:
    return StructuredPolicy(arch, init_params(arch, mode, rng))


# -- presets -----------------------------------------------------------------
def preset_architecture(name: str, state_dim: int, action_dim: int, mode: str) -> Architecture:
    """Named architecture presets.

    ``scn-H``: linear stream plus a width-H MLP stream (one hidden layer for
    ES, two for PPO, matching the trainer conventions).  ``mlp-H``: the
    standalone MLP baseline family, always two hidden layers of H.
    ``linear``: gain matrix and bias only.  ``locomotor``: linear stream
    plus a 16-sinusoid rhythmic stream.  PPO variants carry a Gaussian head.
    """
    name = name.strip().lower()
    head = mode == "pg"
    if name == "linear":
        return Architecture(state_dim, action_dim, linear=True, nonlinear=None,
                            hidden=(), gaussian_head=head)
    if name == "locomotor":
        return Architecture(state_dim, action_dim, linear=True, nonlinear="cpg",
                            hidden=(), cpg_components=16, gaussian_head=head)
    for prefix, linear in (("scn-", True), ("mlp-", False)):
        if name.startswith(prefix):
            try:
                width = int(name[len(prefix):])
            except ValueError:
                raise ConfigError(f"bad preset name {name!r}") from None
            if width < 1:
                raise ConfigError(f"bad preset width in {name!r}")
            if prefix == "scn-":
                hidden = (width,) if mode == "es" else (width, width)
            else:
                hidden = (width, width)
            return Architecture(state_dim, action_dim, linear=linear, nonlinear="mlp",
                                hidden=hidden, gaussian_head=head)
    raise ConfigError(f"unknown policy preset {name!r}")
