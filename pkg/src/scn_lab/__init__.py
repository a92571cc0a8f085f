"""scn-lab: structured control policies with ES/PPO trainers and an
ablation/robustness experiment harness on small deterministic tasks."""

__version__ = "0.1.0"

from .policy import (  # noqa: F401
    Architecture,
    StructuredPolicy,
    init_params,
    make_policy,
    param_count,
    preset_architecture,
)
