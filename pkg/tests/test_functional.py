"""Tests for the differentiable layer primitives."""

from __future__ import annotations

import numpy as np
import pytest

from autodiff import functional as ops
from autodiff.gradcheck import finite_difference_check, parameter_gradient_check
from autodiff.modules import BatchNorm, Conv, Dropout, Embedding, LayerNorm, Linear, ModuleList, Parameter
from autodiff.tensor import Tensor
from common.exceptions import CheckpointError, ConfigError, DimensionError

TOL = 1e-5


@pytest.fixture
def x4(rng) -> np.ndarray:
    return rng.normal(size=(2, 4, 7, 3))


# ============================================================================
# Temporal convolution
# ============================================================================


class TestConvTv:
    """Grouped dilated (k x 1) convolution."""

    def test_output_length_formula(self):
        assert ops.conv_output_length(64, 5, stride=1, dilation=1, padding=2) == 64
        assert ops.conv_output_length(64, 5, stride=2, dilation=1, padding=2) == 32
        assert ops.conv_output_length(10, 3, dilation=2, padding=0) == 6

    def test_pointwise_matches_einsum(self, float64, rng, x4):
        weight = rng.normal(size=(5, 4, 1, 1))
        bias = rng.normal(size=5)
        out = ops.conv_tv(Tensor(x4), Tensor(weight), Tensor(bias))
        expected = np.einsum("oi,bitv->botv", weight[:, :, 0, 0], x4) + bias[None, :, None, None]
        np.testing.assert_allclose(out.data, expected, atol=1e-12)

    def test_same_padding_keeps_length(self, float64, rng, x4):
        weight = rng.normal(size=(4, 4, 5, 1))
        out = ops.conv_tv(Tensor(x4), Tensor(weight), dilation=2, padding=4)
        assert out.shape == x4.shape

    def test_strided_shape(self, float64, rng, x4):
        out = ops.conv_tv(Tensor(x4), Tensor(rng.normal(size=(6, 4, 3, 1))), stride=2, padding=1)
        assert out.shape == (2, 6, 4, 3)

    def test_depthwise_channels_independent(self, float64, rng, x4):
        weight = np.zeros((4, 1, 3, 1))
        weight[:, 0, 1, 0] = [1.0, 2.0, 3.0, 4.0]
        out = ops.conv_tv(Tensor(x4), Tensor(weight), groups=4, padding=1)
        np.testing.assert_allclose(out.data, x4 * np.array([1.0, 2.0, 3.0, 4.0])[None, :, None, None])

    @pytest.mark.parametrize(("stride", "dilation", "groups"), [(1, 1, 1), (2, 1, 2), (1, 2, 4)])
    def test_input_gradient(self, float64, rng, x4, stride, dilation, groups):
        weight = Tensor(rng.normal(size=(4, 4 // groups, 3, 1)))
        bias = Tensor(rng.normal(size=4))

        def f(x):
            out = ops.conv_tv(x, weight, bias, stride=stride, dilation=dilation, groups=groups, padding=dilation)
            return (out * out).sum()

        assert finite_difference_check(f, x4) < TOL

    def test_weight_gradient(self, float64, rng, x4):
        weight = Parameter(rng.normal(size=(2, 2, 3, 1)))
        x = Tensor(x4)
        err = parameter_gradient_check(lambda: (ops.conv_tv(x, weight, groups=2, padding=1) ** 2).sum(), weight)
        assert err < TOL

    def test_bad_groups(self, float64, rng, x4):
        with pytest.raises(ConfigError):
            ops.conv_tv(Tensor(x4), Tensor(rng.normal(size=(3, 4, 1, 1))), groups=3)

    def test_channel_mismatch(self, float64, rng, x4):
        with pytest.raises(DimensionError):
            ops.conv_tv(Tensor(x4), Tensor(rng.normal(size=(3, 2, 1, 1))))

    def test_too_short_input(self, float64, rng):
        with pytest.raises(DimensionError):
            ops.conv_tv(Tensor(np.zeros((1, 1, 2, 1))), Tensor(np.ones((1, 1, 5, 1))))


# ============================================================================
# Normalization and activations
# ============================================================================


class TestNormalization:
    """Softmax, layer norm and batch norm."""

    def test_softmax_rows_sum_to_one(self, float64, rng):
        y = ops.softmax(Tensor(rng.normal(size=(3, 5)) * 50), axis=-1)
        np.testing.assert_allclose(y.data.sum(axis=-1), np.ones(3))

    def test_log_softmax_matches_log_of_softmax(self, float64, rng):
        x = Tensor(rng.normal(size=(4, 6)))
        np.testing.assert_allclose(ops.log_softmax(x).data, np.log(ops.softmax(x).data), atol=1e-12)

    def test_softmax_gradient(self, float64, rng):
        w = rng.normal(size=(3, 5))
        err = finite_difference_check(lambda x: (ops.softmax(x, axis=0) * Tensor(w)).sum(), rng.normal(size=(3, 5)))
        assert err < TOL

    def test_layer_norm_statistics(self, float64, rng):
        x = Tensor(rng.normal(3.0, 2.0, size=(4, 16)))
        y = ops.layer_norm(x, Tensor(np.ones(16)), Tensor(np.zeros(16)))
        np.testing.assert_allclose(y.data.mean(axis=-1), 0.0, atol=1e-10)
        np.testing.assert_allclose(y.data.var(axis=-1), 1.0, atol=1e-4)

    def test_layer_norm_gradient_over_channel_axis(self, float64, rng, x4):
        gain = Tensor(rng.normal(size=4))
        bias = Tensor(rng.normal(size=4))
        w = Tensor(rng.normal(size=x4.shape))
        assert finite_difference_check(lambda x: (ops.layer_norm(x, gain, bias, axis=1) * w).sum(), x4) < TOL

    def test_batch_norm_train_updates_running_stats(self, float64, rng, x4):
        bn = BatchNorm(4)
        out = bn(Tensor(x4 + 5.0))
        np.testing.assert_allclose(out.data.mean(axis=(0, 2, 3)), 0.0, atol=1e-10)
        assert np.all(bn.running_mean.data > 0.4)
        assert bn.has_statistics

    def test_batch_norm_eval_uses_running_stats(self, float64, x4):
        bn = BatchNorm(4).eval()
        bn.has_statistics = True
        np.testing.assert_allclose(bn(Tensor(x4)).data, x4 / np.sqrt(1.0 + ops.BATCH_NORM_EPS))

    def test_batch_norm_train_gradient(self, float64, rng, x4):
        bn = BatchNorm(4)
        bn.gain.data[:] = rng.normal(size=4)
        w = Tensor(rng.normal(size=x4.shape))
        assert finite_difference_check(lambda x: (bn(x) * w).sum(), x4) < TOL

    def test_batch_norm_needs_two_values(self, float64):
        with pytest.raises(DimensionError):
            BatchNorm(2)(Tensor(np.zeros((1, 2))))

    def test_gelu_values_and_gradient(self, float64, rng):
        y = ops.gelu(Tensor(np.array([0.0, 10.0, -10.0])))
        np.testing.assert_allclose(y.data, [0.0, 10.0, 0.0], atol=1e-6)
        assert finite_difference_check(lambda x: ops.gelu(x).sum(), rng.normal(size=8)) < TOL


# ============================================================================
# Pooling, dropout, embeddings and encodings
# ============================================================================


class TestMiscOps:
    def test_max_pool_same_padding(self, float64):
        x = np.array([1.0, 3.0, 2.0, 0.0]).reshape(1, 1, 4, 1)
        out = ops.max_pool_t(Tensor(x), kernel=3)
        np.testing.assert_allclose(out.data.reshape(-1), [3.0, 3.0, 3.0, 2.0])

    def test_max_pool_gradient(self, float64, rng, x4):
        assert finite_difference_check(lambda x: (ops.max_pool_t(x) ** 2).sum(), x4) < TOL

    def test_max_pool_even_kernel(self, float64, x4):
        with pytest.raises(ConfigError):
            ops.max_pool_t(Tensor(x4), kernel=2)

    def test_dropout_identity_in_eval(self, rng, x4):
        x = Tensor(x4)
        assert ops.dropout(x, 0.5, rng, training=False) is x

    def test_dropout_scales_survivors(self, float64, rng):
        y = Dropout(0.5, rng)(Tensor(np.ones(1000)))
        assert set(np.unique(y.data)) <= {0.0, 2.0}

    def test_embedding_scatter_gradient(self, float64, rng):
        emb = Embedding(4, 3, rng)
        emb(np.array([1, 1, 3])).sum().backward()
        np.testing.assert_allclose(emb.table.grad[:, 0], [0.0, 2.0, 0.0, 1.0])

    def test_embedding_out_of_range(self, rng):
        with pytest.raises(DimensionError):
            Embedding(4, 3, rng)(np.array([4]))

    def test_sinusoidal_encoding(self):
        table = ops.sinusoidal_encoding(6, 8)
        assert table.shape == (6, 8)
        np.testing.assert_allclose(table[0, 0::2], 0.0)
        np.testing.assert_allclose(table[0, 1::2], 1.0)
        np.testing.assert_allclose(table[3, 2], np.sin(3 / 10000 ** (2 / 8)))
        np.testing.assert_allclose(table[3, 3], np.cos(3 / 10000 ** (2 / 8)))


# ============================================================================
# Modules
# ============================================================================


class TestModules:
    """Parameter registration and state dicts."""

    def _net(self, rng) -> ModuleList:
        return ModuleList([Conv(3, 4, rng, kernel_t=3), LayerNorm(4, axis=1), Linear(4, 2, rng)])

    def test_parameter_names_and_count(self, rng):
        net = self._net(rng)
        names = [name for name, _ in net.named_parameters()]
        assert names == ["0.weight", "0.bias", "1.gain", "1.bias", "2.weight", "2.bias"]
        assert net.num_parameters() == 4 * 3 * 3 + 4 + 4 + 4 + 4 * 2 + 2

    def test_bias_excluded_from_decay(self, rng):
        conv = Conv(2, 2, rng)
        assert conv.weight.decay
        assert not conv.bias.decay

    def test_conv_same_padding_default(self, rng):
        conv = Conv(2, 2, rng, kernel_t=5, dilation=2)
        assert conv.padding == 4
        assert conv(Tensor(np.zeros((1, 2, 9, 3)))).shape == (1, 2, 9, 3)

    def test_train_eval_propagates(self, rng):
        net = self._net(rng).eval()
        assert all(not m.training for m in net.modules())
        net.train()
        assert all(m.training for m in net.modules())

    def test_state_dict_roundtrip(self, rng):
        source, target = self._net(rng), self._net(np.random.default_rng(99))
        target.load_state_dict({k: v.copy() for k, v in source.state_dict().items()})
        for (_, a), (_, b) in zip(source.named_parameters(), target.named_parameters(), strict=True):
            np.testing.assert_array_equal(a.data, b.data)

    def test_state_dict_mismatch(self, rng):
        net = self._net(rng)
        state = net.state_dict()
        del state["0.bias"]
        with pytest.raises(CheckpointError):
            net.load_state_dict(state)
        state = net.state_dict()
        state["0.bias"] = np.zeros(5)
        with pytest.raises(CheckpointError):
            net.load_state_dict(state)

    def test_load_marks_batch_norm_statistics(self):
        bn = BatchNorm(3)
        bn.load_state_dict(bn.state_dict())
        assert bn.has_statistics
