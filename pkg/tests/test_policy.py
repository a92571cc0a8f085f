import math

import numpy as np
import pytest

from scn_lab.errors import ConfigError
from scn_lab.policy import (Architecture, StructuredPolicy, init_params,
                            param_count, preset_architecture)


def rand_policy(arch, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return StructuredPolicy(arch, scale * rng.standard_normal(param_count(arch)))


class TestLinearStream:
    def test_zero_params_zero_action(self):
        arch = Architecture(3, 2, linear=True, nonlinear=None, hidden=())
        pol = StructuredPolicy(arch)
        assert np.array_equal(pol.forward(np.array([1.0, -2.0, 3.0])), np.zeros(2))

    def test_identity_gain(self):
        arch = Architecture(2, 2, linear=True, nonlinear=None, hidden=())
        pol = StructuredPolicy(arch)
        pol.p.K[...] = np.eye(2)
        assert np.array_equal(pol.forward(np.array([1.0, 2.0])), np.array([1.0, 2.0]))

    def test_affine_oracle(self):
        # independent matrix-multiply oracle
        arch = Architecture(2, 2, linear=True, nonlinear=None, hidden=())
        pol = StructuredPolicy(arch)
        pol.p.K[...] = [[1.0, 2.0], [3.0, 4.0]]
        pol.p.b[...] = [1.0, 1.0]
        s = np.array([1.0, 1.0])
        expected = np.array([1.0 * 1 + 2.0 * 1 + 1, 3.0 * 1 + 4.0 * 1 + 1])
        assert np.allclose(pol.forward(s), expected)
        assert np.allclose(expected, [4.0, 8.0])

    def test_linearity_without_bias(self):
        arch = Architecture(4, 2, linear=True, nonlinear=None, hidden=())
        pol = rand_policy(arch, 3)
        pol.p.b[...] = 0.0
        rng = np.random.default_rng(1)
        s1, s2 = rng.standard_normal(4), rng.standard_normal(4)
        alpha = 0.3
        lhs = pol.forward(alpha * s1 + (1 - alpha) * s2)
        rhs = alpha * pol.forward(s1) + (1 - alpha) * pol.forward(s2)
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_dim_mismatch_raises(self):
        arch = Architecture(3, 2, linear=True, nonlinear=None, hidden=())
        with pytest.raises(ConfigError):
            StructuredPolicy(arch).forward(np.zeros(4))


class TestMlpStream:
    def test_zero_weights_zero_output_any_state(self):
        arch = Architecture(3, 2, linear=False, nonlinear="mlp", hidden=(8,))
        pol = StructuredPolicy(arch)
        for seed in range(5):
            s = np.random.default_rng(seed).standard_normal(3)
            assert np.array_equal(pol.forward(s), np.zeros(2))

    def test_tanh_zero_fixed_point(self):
        arch = Architecture(1, 1, linear=False, nonlinear="mlp", hidden=(1,))
        pol = StructuredPolicy(arch)
        pol.p.W[0][...] = 1.0
        pol.p.W[1][...] = 1.0
        assert pol.forward(np.array([0.0]))[0] == 0.0

    def test_scalar_evaluation_oracle(self):
        arch = Architecture(1, 1, linear=False, nonlinear="mlp", hidden=(1,))
        pol = StructuredPolicy(arch)
        pol.p.W[0][...] = 1.0
        pol.p.W[1][...] = 2.0
        got = pol.forward(np.array([1.0]))[0]
        assert got == pytest.approx(2.0 * math.tanh(1.0), abs=1e-12)
        assert got == pytest.approx(1.523188, abs=1e-6)

    def test_no_output_bias_in_layout(self):
        # hand count: (3->5 weights+bias) + (5->2 weights only)
        arch = Architecture(3, 2, linear=False, nonlinear="mlp", hidden=(5,))
        assert param_count(arch) == (3 * 5 + 5) + (5 * 2)

    def test_batched_matches_single(self):
        arch = Architecture(4, 3, linear=True, nonlinear="mlp", hidden=(6, 5))
        pol = rand_policy(arch, 7)
        rng = np.random.default_rng(2)
        S = rng.standard_normal((9, 4))
        batched = pol.forward(S)
        for i in range(9):
            assert np.allclose(batched[i], pol.forward(S[i]), atol=1e-12)


class TestCpgStream:
    def arch(self, c=4):
        return Architecture(2, 1, linear=False, nonlinear="cpg", hidden=(),
                            cpg_components=c)

    def test_zero_amplitudes(self):
        pol = StructuredPolicy(self.arch())
        pol.p.omega[...] = 1.3
        pol.p.phi[...] = 0.7
        for t in (0.0, 1.0, 5.5):
            assert np.array_equal(pol.forward(np.zeros(2), t), np.zeros(1))

    def test_quarter_period_peak(self):
        pol = StructuredPolicy(self.arch(c=1))
        pol.p.A[...] = 1.0
        pol.p.omega[...] = math.pi / 2
        pol.p.phi[...] = 0.0
        assert pol.forward(np.zeros(2), 1.0)[0] == pytest.approx(1.0, abs=1e-12)

    def test_zero_phase_zero_time(self):
        pol = StructuredPolicy(self.arch())
        pol.p.A[...] = np.random.default_rng(0).standard_normal((1, 4))
        pol.p.omega[...] = np.random.default_rng(1).uniform(0.5, 2.0, (1, 4))
        pol.p.phi[...] = 0.0
        assert np.allclose(pol.forward(np.zeros(2), 0.0), 0.0, atol=1e-15)

    def test_state_independence(self):
        pol = rand_policy(self.arch(), 4)
        rng = np.random.default_rng(5)
        t = 2.3
        outs = {tuple(pol.forward(rng.standard_normal(2), t)) for _ in range(4)}
        assert len(outs) == 1

    def test_periodicity_single_component(self):
        pol = StructuredPolicy(self.arch(c=1))
        pol.p.A[...] = 0.8
        pol.p.omega[...] = 1.7
        pol.p.phi[...] = 0.4
        period = 2 * math.pi / 1.7
        for t in (0.0, 0.9, 3.3):
            a = pol.forward(np.zeros(2), t)
            b = pol.forward(np.zeros(2), t + period)
            assert abs(a[0] - b[0]) < 1e-12

    def test_sum_formula_oracle(self):
        pol = rand_policy(self.arch(), 11)
        t = 1.234
        expected = sum(
            pol.p.A[0, i] * math.sin(pol.p.omega[0, i] * t + pol.p.phi[0, i])
            for i in range(4)
        )
        assert pol.forward(np.zeros(2), t)[0] == pytest.approx(expected, abs=1e-12)


class TestAdditivityAndMasking:
    def test_additivity_exact(self):
        rng = np.random.default_rng(0)
        for case in range(200):
            arch = Architecture(4, 2, linear=True, nonlinear="mlp", hidden=(6,))
            pol = rand_policy(arch, case)
            s = rng.standard_normal(4)
            mean, u_lin, u_non = pol.forward_decomposed(s)
            assert np.array_equal(mean, u_lin + u_non)

    def test_zero_nonlinear_reduces_to_linear(self):
        arch = Architecture(3, 2, linear=True, nonlinear="mlp", hidden=(5,))
        pol = rand_policy(arch, 1)
        for W in pol.p.W:
            W[...] = 0.0
        for hb in pol.p.hb:
            hb[...] = 0.0
        s = np.array([0.5, -1.0, 2.0])
        assert np.array_equal(pol.forward(s), pol.p.K @ s + pol.p.b)

    def test_mask_equals_standalone_stream(self):
        # masking one stream must equal a single-stream policy bit-for-bit
        rng = np.random.default_rng(42)
        for case in range(50):
            arch = Architecture(5, 3, linear=True, nonlinear="mlp", hidden=(7,))
            pol = rand_policy(arch, 100 + case)
            lin_arch = Architecture(5, 3, linear=True, nonlinear=None, hidden=())
            lin_pol = StructuredPolicy(lin_arch, np.concatenate([
                pol.p.K.ravel(), pol.p.b]))
            mlp_arch = Architecture(5, 3, linear=False, nonlinear="mlp", hidden=(7,))
            n_lin = 5 * 3 + 3
            mlp_pol = StructuredPolicy(mlp_arch, pol.flatten()[n_lin:])
            s = rng.standard_normal(5)
            masked_lin = pol.with_mask(nonlinear=False).forward(s)
            masked_mlp = pol.with_mask(linear=False).forward(s)
            assert np.array_equal(masked_lin, lin_pol.forward(s))
            assert np.array_equal(masked_mlp, mlp_pol.forward(s))

    def test_mask_leaves_params_untouched(self):
        arch = Architecture(3, 2, linear=True, nonlinear="mlp", hidden=(4,))
        pol = rand_policy(arch, 9)
        before = pol.flatten()
        masked = pol.with_mask(nonlinear=False)
        masked.forward(np.zeros(3))
        assert np.array_equal(pol.flatten(), before)
        assert masked.flatten() is not before
        assert np.array_equal(masked.flatten(), before)


class TestGaussianHead:
    def arch(self):
        return Architecture(3, 2, linear=True, nonlinear=None, hidden=(),
                            gaussian_head=True)

    def test_log_prob_at_mean(self):
        pol = StructuredPolicy(self.arch())
        lp = pol.log_prob(np.zeros(2), np.zeros(2))
        assert lp == pytest.approx(-math.log(2 * math.pi), abs=1e-12)

    def test_log_prob_one_sigma(self):
        arch = Architecture(1, 1, linear=True, nonlinear=None, hidden=(),
                            gaussian_head=True)
        pol = StructuredPolicy(arch)
        assert pol.log_prob(np.zeros(1), np.zeros(1)) == pytest.approx(
            -0.5 * math.log(2 * math.pi), abs=1e-12)  # ~ -0.91894
        assert pol.log_prob(np.zeros(1), np.ones(1)) == pytest.approx(
            -0.5 * math.log(2 * math.pi) - 0.5, abs=1e-12)  # ~ -1.41894

    def test_tiny_std_sample_is_mean(self):
        pol = StructuredPolicy(self.arch())
        pol.p.log_std[...] = -40.0
        a, _ = pol.sample(np.array([1.0, 2.0, 3.0]), 0.0, np.random.default_rng(0))
        assert np.allclose(a, pol.forward(np.array([1.0, 2.0, 3.0])), atol=1e-12)

    def test_sample_log_prob_consistency(self):
        pol = rand_policy(self.arch(), 5, scale=0.3)
        rng = np.random.default_rng(3)
        s = rng.standard_normal(3)
        a, lp = pol.sample(s, 0.0, rng)
        assert lp == pytest.approx(float(pol.log_prob(pol.forward(s), a)), abs=1e-10)

    def test_sampling_requires_head(self):
        arch = Architecture(3, 2, linear=True, nonlinear=None, hidden=())
        with pytest.raises(ConfigError):
            StructuredPolicy(arch).sample(np.zeros(3), 0.0, np.random.default_rng(0))


class TestParamVector:
    def test_roundtrip_random(self):
        archs = [
            Architecture(4, 2, linear=True, nonlinear="mlp", hidden=(6, 5), gaussian_head=True),
            Architecture(3, 1, linear=True, nonlinear="cpg", hidden=(), cpg_components=5),
            Architecture(2, 2, linear=False, nonlinear="mlp", hidden=(4,)),
            Architecture(7, 3, linear=True, nonlinear=None, hidden=()),
        ]
        for i, arch in enumerate(archs):
            v = np.random.default_rng(i).standard_normal(param_count(arch))
            pol = StructuredPolicy(arch, v)
            assert np.array_equal(pol.flatten(), v)

    def test_layout_arithmetic_example(self):
        # two 16-wide hidden layers, no head: hand-computed total
        arch = Architecture(11, 3, linear=True, nonlinear="mlp", hidden=(16, 16))
        expected = (3 * 11 + 3) + (11 * 16 + 16) + (16 * 16 + 16) + (16 * 3)
        assert expected == 548
        assert param_count(arch) == 548

    def test_layout_order_linear_first(self):
        arch = Architecture(2, 1, linear=True, nonlinear="mlp", hidden=(2,),
                            gaussian_head=True)
        n = param_count(arch)
        v = np.arange(float(n))
        pol = StructuredPolicy(arch, v)
        assert np.array_equal(pol.p.K.ravel(), [0.0, 1.0])
        assert pol.p.b[0] == 2.0
        assert np.array_equal(pol.p.W[0].ravel(), [3.0, 4.0, 5.0, 6.0])
        assert np.array_equal(pol.p.hb[0], [7.0, 8.0])
        assert np.array_equal(pol.p.W[1].ravel(), [9.0, 10.0])
        assert pol.p.log_std[0] == 11.0

    def test_cpg_layout_per_dim(self):
        arch = Architecture(1, 2, linear=False, nonlinear="cpg", hidden=(),
                            cpg_components=2)
        v = np.arange(float(param_count(arch)))
        pol = StructuredPolicy(arch, v)
        assert np.array_equal(pol.p.A[0], [0.0, 1.0])
        assert np.array_equal(pol.p.omega[0], [2.0, 3.0])
        assert np.array_equal(pol.p.phi[0], [4.0, 5.0])
        assert np.array_equal(pol.p.A[1], [6.0, 7.0])

    def test_zero_vector_zero_policy(self):
        arch = Architecture(5, 2, linear=True, nonlinear="mlp", hidden=(8,))
        pol = StructuredPolicy(arch, np.zeros(param_count(arch)))
        rng = np.random.default_rng(0)
        for _ in range(10):
            assert np.array_equal(pol.forward(rng.standard_normal(5)), np.zeros(2))

    def test_length_mismatch_raises(self):
        arch = Architecture(3, 2, linear=True, nonlinear=None, hidden=())
        with pytest.raises(ConfigError):
            StructuredPolicy(arch, np.zeros(5))


class TestBackprop:
    def test_zero_upstream(self):
        arch = Architecture(3, 2, linear=True, nonlinear="mlp", hidden=(4,))
        pol = rand_policy(arch, 0)
        g = pol.backprop(np.ones(3), 0.0, np.zeros(2))
        assert np.array_equal(g, np.zeros(pol.num_params))

    def test_linear_affine_derivative(self):
        arch = Architecture(3, 2, linear=True, nonlinear=None, hidden=())
        pol = rand_policy(arch, 1)
        s = np.array([0.5, -1.5, 2.0])
        g = np.array([2.0, -3.0])
        grad = pol.backprop(s, 0.0, g)
        gp = StructuredPolicy(arch, grad)
        assert np.allclose(gp.p.K, np.outer(g, s), atol=1e-12)
        assert np.allclose(gp.p.b, g, atol=1e-12)

    @pytest.mark.parametrize("case", range(20))
    def test_finite_difference_oracle(self, case):
        rng = np.random.default_rng(case)
        kind = case % 4
        if kind == 0:
            arch = Architecture(4, 2, linear=True, nonlinear="mlp", hidden=(5, 3))
        elif kind == 1:
            arch = Architecture(3, 2, linear=True, nonlinear="cpg", hidden=(),
                                cpg_components=4)
        elif kind == 2:
            arch = Architecture(5, 1, linear=False, nonlinear="mlp", hidden=(7,))
        else:
            arch = Architecture(2, 3, linear=True, nonlinear="mlp", hidden=(4,),
                                gaussian_head=True)
        theta = rng.standard_normal(param_count(arch))
        pol = StructuredPolicy(arch, theta)
        s = rng.standard_normal(arch.state_dim)
        t = float(rng.uniform(0, 5))
        upstream = rng.standard_normal(arch.action_dim)
        grad = pol.backprop(s, t, upstream)
        eps = 1e-6
        fd = np.empty_like(theta)
        for i in range(theta.shape[0]):
            tp, tm = theta.copy(), theta.copy()
            tp[i] += eps
            tm[i] -= eps
            fd[i] = (
                StructuredPolicy(arch, tp).forward(s, t) @ upstream
                - StructuredPolicy(arch, tm).forward(s, t) @ upstream
            ) / (2 * eps)
        rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12)
        assert rel < 1e-5

    def test_batch_sums_rows(self):
        arch = Architecture(3, 2, linear=True, nonlinear="mlp", hidden=(4,))
        pol = rand_policy(arch, 8)
        rng = np.random.default_rng(9)
        S = rng.standard_normal((6, 3))
        G = rng.standard_normal((6, 2))
        batched = pol.backprop(S, 0.0, G)
        summed = sum(pol.backprop(S[i], 0.0, G[i]) for i in range(6))
        assert np.allclose(batched, summed, atol=1e-10)

    def test_masked_stream_gets_zero_grad(self):
        arch = Architecture(3, 2, linear=True, nonlinear="mlp", hidden=(4,))
        pol = rand_policy(arch, 10).with_mask(nonlinear=False)
        grad = pol.backprop(np.ones(3), 0.0, np.ones(2))
        gp = StructuredPolicy(arch, grad)
        assert all(np.array_equal(W, 0 * W) for W in gp.p.W)
        assert not np.array_equal(gp.p.K, np.zeros_like(gp.p.K))


class TestInitParams:
    def test_es_zero_policy_mlp(self):
        arch = Architecture(4, 2, linear=True, nonlinear="mlp", hidden=(8,))
        theta = init_params(arch, "es", np.random.default_rng(0))
        pol = StructuredPolicy(arch, theta)
        rng = np.random.default_rng(1)
        for _ in range(10):
            assert np.array_equal(pol.forward(rng.standard_normal(4)), np.zeros(2))
        # hidden features start alive (first-order signal), output weights zero
        assert np.any(pol.p.W[0] != 0.0)
        assert np.array_equal(pol.p.W[-1], np.zeros_like(pol.p.W[-1]))

    def test_es_cpg_zero_output_random_freqs(self):
        arch = Architecture(2, 2, linear=True, nonlinear="cpg", hidden=(),
                            cpg_components=16)
        pol = StructuredPolicy(arch, init_params(arch, "es", np.random.default_rng(3)))
        assert np.all(pol.p.omega >= 0.5) and np.all(pol.p.omega <= 2.0)
        assert np.all(pol.p.phi >= 0.0) and np.all(pol.p.phi < 2 * math.pi)
        for t in (0.0, 0.7, 3.0):
            assert np.array_equal(pol.forward(np.zeros(2), t), np.zeros(2))

    def test_pg_small_mean_actions(self):
        arch = Architecture(6, 3, linear=True, nonlinear="mlp", hidden=(16, 16),
                            gaussian_head=True)
        for seed in (1, 2, 3):
            pol = StructuredPolicy(arch, init_params(arch, "pg", np.random.default_rng(seed)))
            rng = np.random.default_rng(100 + seed)
            for _ in range(20):
                s = rng.standard_normal(6)
                s /= np.linalg.norm(s)
                assert np.max(np.abs(pol.forward(s))) < 0.1
            assert np.array_equal(pol.p.log_std, np.zeros(3))

    def test_rejects_unknown_mode(self):
        arch = Architecture(3, 1, linear=True, nonlinear=None, hidden=())
        with pytest.raises(ConfigError):
            init_params(arch, "sgd", np.random.default_rng(0))


class TestPresets:
    def test_scn_depth_depends_on_mode(self):
        es = preset_architecture("scn-16", 10, 2, "es")
        pg = preset_architecture("scn-16", 10, 2, "pg")
        assert es.hidden == (16,)
        assert pg.hidden == (16, 16)
        assert not es.gaussian_head and pg.gaussian_head

    def test_mlp_baseline_always_two_layers(self):
        for mode in ("es", "pg"):
            arch = preset_architecture("mlp-64", 10, 2, mode)
            assert arch.hidden == (64, 64)
            assert not arch.linear

    def test_locomotor(self):
        arch = preset_architecture("locomotor", 4, 2, "es")
        assert arch.nonlinear == "cpg" and arch.cpg_components == 16 and arch.linear

    def test_degenerate_rejected(self):
        with pytest.raises(ConfigError):
            Architecture(0, 2)
        with pytest.raises(ConfigError):
            Architecture(3, 2, linear=False, nonlinear="mlp", hidden=(0,))
        with pytest.raises(ConfigError):
            Architecture(3, 2, linear=False, nonlinear=None)
        with pytest.raises(ConfigError):
            preset_architecture("resnet-50", 3, 2, "es")
