"""Tests for the reverse-mode tensor core."""

from __future__ import annotations

import numpy as np
import pytest

from autodiff.tensor import (
    Tensor,
    concat,
    debug_numerics_enabled,
    default_dtype,
    get_default_dtype,
    is_grad_enabled,
    kink_probe,
    no_grad,
    set_debug_numerics,
)
from common.exceptions import DimensionError, NumericalError, UsageError

# ============================================================================
# Construction and dtype
# ============================================================================


class TestConstruction:
    """Tensor creation and the default dtype switch."""

    def test_list_uses_default_dtype(self):
        assert Tensor([1.0, 2.0]).dtype == np.float32

    def test_float_array_keeps_its_dtype(self):
        assert Tensor(np.zeros(3, dtype=np.float64)).dtype == np.float64

    def test_default_dtype_context(self):
        with default_dtype(np.float64):
            assert get_default_dtype() is np.float64
            assert Tensor([1.0]).dtype == np.float64
        assert get_default_dtype() is np.float32

    def test_unsupported_dtype_rejected(self):
        with pytest.raises(DimensionError):
            Tensor([1, 2], dtype=np.int32)
        with pytest.raises(DimensionError), default_dtype(np.float16):
            pass

    def test_item_needs_single_element(self):
        assert Tensor([[3.0]]).item() == 3.0
        with pytest.raises(UsageError):
            Tensor([1.0, 2.0]).item()


# ============================================================================
# Backward pass
# ============================================================================


class TestBackward:
    """Gradient values of the elementary operators."""

    def test_product_rule(self, float64):
        x = Tensor([2.0, 3.0], requires_grad=True)
        y = Tensor([5.0, 7.0], requires_grad=True)
        (x * y + x).sum().backward()
        np.testing.assert_allclose(x.grad, [6.0, 8.0])
        np.testing.assert_allclose(y.grad, [2.0, 3.0])

    def test_repeated_input(self, float64):
        x = Tensor([3.0], requires_grad=True)
        (x * x).sum().backward()
        np.testing.assert_allclose(x.grad, [6.0])

    def test_broadcast_gradient_is_summed(self, float64):
        x = Tensor(np.ones((2, 3)), requires_grad=True)
        b = Tensor(np.ones(3), requires_grad=True)
        (x + b).sum().backward()
        np.testing.assert_allclose(b.grad, [2.0, 2.0, 2.0])

    def test_matmul_gradient(self, float64):
        a = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        b = Tensor(np.ones((3, 4)), requires_grad=True)
        (a @ b).sum().backward()
        np.testing.assert_allclose(a.grad, np.full((2, 3), 4.0))
        np.testing.assert_allclose(b.grad, np.tile(a.data.sum(axis=0)[:, None], (1, 4)))

    def test_division_and_power(self, float64):
        x = Tensor([2.0], requires_grad=True)
        (x**3 / 4.0).sum().backward()
        np.testing.assert_allclose(x.grad, [3.0])

    def test_exp_log_roundtrip_gradient(self, float64):
        x = Tensor([0.5, 1.5], requires_grad=True)
        x.exp().log().sum().backward()
        np.testing.assert_allclose(x.grad, [1.0, 1.0])

    def test_fancy_index_accumulates(self, float64):
        x = Tensor(np.zeros(3), requires_grad=True)
        x[np.array([0, 0, 2])].sum().backward()
        np.testing.assert_allclose(x.grad, [2.0, 0.0, 1.0])

    def test_reshape_permute_mean(self, float64):
        x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        x.permute(1, 0).reshape(6).mean().backward()
        np.testing.assert_allclose(x.grad, np.full((2, 3), 1 / 6))

    def test_concat_splits_gradient(self, float64):
        a = Tensor(np.ones((1, 2)), requires_grad=True)
        b = Tensor(np.ones((2, 2)), requires_grad=True)
        out = concat([a, b], axis=0)
        (out * Tensor(np.arange(6.0).reshape(3, 2))).sum().backward()
        np.testing.assert_allclose(a.grad, [[0.0, 1.0]])
        np.testing.assert_allclose(b.grad, [[2.0, 3.0], [4.0, 5.0]])

    def test_gradients_accumulate_across_calls(self, float64):
        x = Tensor([1.0], requires_grad=True)
        (x * 2.0).sum().backward()
        (x * 2.0).sum().backward()
        np.testing.assert_allclose(x.grad, [4.0])
        x.zero_grad()
        assert x.grad is None

    def test_backward_needs_scalar(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(UsageError):
            (x * 2.0).backward()

    def test_backward_needs_grad(self):
        with pytest.raises(UsageError):
            Tensor([1.0]).sum().backward()


# ============================================================================
# Graph recording switches
# ============================================================================


class TestGraphModes:
    """no_grad, detach and the debug finite check."""

    def test_no_grad_records_nothing(self):
        x = Tensor([1.0], requires_grad=True)
        with no_grad():
            assert not is_grad_enabled()
            y = x * 2.0
        assert is_grad_enabled()
        assert not y.requires_grad
        assert y.is_leaf

    def test_op_name_recorded(self):
        x = Tensor([1.0], requires_grad=True)
        assert (x + 1.0).op == "add"
        assert x.op is None

    def test_detach_cuts_graph(self):
        x = Tensor([1.0], requires_grad=True)
        assert (x * 3.0).detach().is_leaf

    def test_debug_numerics_raises_on_nonfinite(self):
        set_debug_numerics(True)
        try:
            assert debug_numerics_enabled()
            with pytest.raises(NumericalError):
                Tensor([0.0]).log()
        finally:
            set_debug_numerics(None)

    def test_debug_numerics_env_switch(self, monkeypatch):
        monkeypatch.setenv("HGCT_DEBUG_NUMERICS", "1")
        assert debug_numerics_enabled()
        monkeypatch.setenv("HGCT_DEBUG_NUMERICS", "0")
        assert not debug_numerics_enabled()

    def test_kink_probe_records_relu_margin(self):
        with kink_probe() as probe:
            Tensor([0.25, -0.5, 0.0]).relu()
        assert probe.margin == pytest.approx(0.25)
