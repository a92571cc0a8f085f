import numpy as np
import pytest

from scn_lab.checkpoint import load_checkpoint, save_checkpoint
from scn_lab.envs import ObsNormalizer
from scn_lab.errors import ConfigError, MissingArtifactError
from scn_lab.policy import Architecture, StructuredPolicy, param_count
from scn_lab.ppo import Critic


def make_policy(seed=0, head=False):
    arch = Architecture(4, 2, linear=True, nonlinear="mlp", hidden=(6,),
                        gaussian_head=head)
    v = np.random.default_rng(seed).standard_normal(param_count(arch))
    return StructuredPolicy(arch, v)


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path):
        pol = make_policy(1)
        norm = ObsNormalizer(4)
        rng = np.random.default_rng(2)
        for _ in range(10):
            norm.update(rng.standard_normal(4))
        path = tmp_path / "ck.bin"
        save_checkpoint(path, pol, "es", norm, env_name="pendulum")
        ck = load_checkpoint(path)
        assert np.array_equal(ck.policy.flatten(), pol.flatten())
        assert ck.mode == "es"
        assert ck.env_name == "pendulum"
        assert ck.normalizer.count == norm.count
        assert np.array_equal(ck.normalizer.mean, norm.mean)
        # forward outputs match to the last bit
        s = rng.standard_normal(4)
        assert np.array_equal(ck.policy.forward(s), pol.forward(s))

    def test_save_load_save_identical_bytes(self, tmp_path):
        pol = make_policy(3)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_checkpoint(p1, pol, "es", None)
        ck = load_checkpoint(p1)
        save_checkpoint(p2, ck.policy, ck.mode, ck.normalizer)
        assert p1.read_bytes() == p2.read_bytes()

    def test_critic_roundtrip(self, tmp_path):
        pol = make_policy(4, head=True)
        critic = Critic(4, hidden=(8, 8))
        critic.set_flat(np.random.default_rng(5).standard_normal(critic.num_params))
        path = tmp_path / "pg.bin"
        save_checkpoint(path, pol, "pg", None, critic)
        ck = load_checkpoint(path)
        assert ck.critic_hidden == (8, 8)
        assert np.array_equal(ck.critic_params, critic.flatten())

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            load_checkpoint(tmp_path / "ghost.bin")

    def test_corrupt_header(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"not json\n\x00\x01")
        with pytest.raises(ConfigError):
            load_checkpoint(path)

    def test_truncated_payload(self, tmp_path):
        pol = make_policy(6)
        path = tmp_path / "t.bin"
        save_checkpoint(path, pol, "es", None)
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(ConfigError):
            load_checkpoint(path)

    def test_wrong_mode_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            save_checkpoint(tmp_path / "x.bin", make_policy(), "cma", None)
