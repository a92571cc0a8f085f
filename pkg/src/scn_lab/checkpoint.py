"""Checkpoint file format.

One UTF-8 JSON header line (architecture, training mode, optional
normalizer statistics and critic layout, format version) terminated by a
newline, followed by the flat parameters as little-endian float64 — policy
parameters first, then critic parameters when present.  Round-trips are
bit-exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .envs import ObsNormalizer
from .errors import ConfigError, MissingArtifactError
from .policy import Architecture, StructuredPolicy, param_count

FORMAT_NAME = "scn-checkpoint"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    policy: StructuredPolicy
    mode: str                      # "es" | "pg"
    normalizer: ObsNormalizer | None = None
    critic_params: np.ndarray | None = None
    critic_hidden: tuple[int, ...] = ()
    env_name: str | None = None


def save_checkpoint(path, policy: StructuredPolicy, mode: str,
                    normalizer: ObsNormalizer | None = None,
                    critic=None, env_name: str | None = None) -> None:
    if mode not in ("es", "pg"):
        raise ConfigError(f"unknown checkpoint mode {mode!r}")
    theta = policy.flatten()
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "arch": policy.arch.to_dict(),
        "mode": mode,
        "param_count": int(theta.shape[0]),
        "normalizer": normalizer.state_dict() if normalizer is not None else None,
        "env": env_name,
    }
    blobs = [theta]
    if critic is not None:
        header["critic"] = {
            "hidden": list(critic.sizes[1:-1]),
            "param_count": critic.num_params,
        }
        blobs.append(critic.flatten())
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for blob in blobs:
            fh.write(np.ascontiguousarray(blob, dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    try:
        fh = open(path, "rb")
    except FileNotFoundError:
        raise MissingArtifactError(f"checkpoint not found: {path}") from None
    with fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: bad checkpoint header ({exc})") from None
        if header.get("format") != FORMAT_NAME:
            raise ConfigError(f"{path}: not a checkpoint file")
        if header.get("version") != FORMAT_VERSION:
            raise ConfigError(f"{path}: unsupported version {header.get('version')}")
        arch = Architecture.from_dict(header["arch"])
        n = int(header["param_count"])
        if n != param_count(arch):
            raise ConfigError(f"{path}: parameter count {n} does not match architecture")
        body = fh.read()
    need = n * 8
    critic_meta = header.get("critic")
    critic_n = int(critic_meta["param_count"]) if critic_meta else 0
    if len(body) != need + critic_n * 8:
        raise ConfigError(
            f"{path}: payload has {len(body)} bytes, expected {need + critic_n * 8}"
        )
    theta = np.frombuffer(body[:need], dtype="<f8").astype(np.float64)
    policy = StructuredPolicy(arch, theta)
    norm_state = header.get("normalizer")
    normalizer = ObsNormalizer.from_state(norm_state) if norm_state else None
    critic_params = None
    critic_hidden: tuple[int, ...] = ()
    if critic_meta:
        critic_params = np.frombuffer(body[need:], dtype="<f8").astype(np.float64)
        critic_hidden = tuple(critic_meta["hidden"])
    return Checkpoint(policy, header["mode"], normalizer, critic_params,
                      critic_hidden, header.get("env"))
