import numpy as np
import pytest
import torch

from gdd import losses
from gdd.errors import (
    DegenerateLogits,
    InvalidTemperature,
    NonFiniteLoss,
    ShapeMismatch,
)
from gdd.losses import DistillScalars

import oracles

# Frozen values from the 50-digit oracle pipeline (see oracles.py).
STD_123_TAU1 = [-1.22474487139, 0.0, 1.22474487139]
STD_123_TAU2 = [-0.612372435696, 0.0, 0.612372435696]
KL_HALF_VS_QUARTER = 0.143841036226
KL_ZERO_CONVENTION = 0.69314718056
SKD_123_321_TAU1 = 1.6215438254
SKD_123_321_TAU2 = 0.471091411919


def rng(seed=0):
    g = torch.Generator()
    g.manual_seed(seed)
    return g


class TestStandardize:
    def test_pinned_tau1(self):
        out = losses.standardize_logits(torch.tensor([[1.0, 2.0, 3.0]]), tau=1.0)
        expected = [float(v) for v in oracles.standardize_rows([[1, 2, 3]], 1)[0]]
        np.testing.assert_allclose(expected, STD_123_TAU1, atol=1e-10)
        np.testing.assert_allclose(out[0].numpy(), STD_123_TAU1, atol=1e-6)

    def test_pinned_tau2(self):
        out = losses.standardize_logits(torch.tensor([[1.0, 2.0, 3.0]]), tau=2.0)
        expected = [float(v) for v in oracles.standardize_rows([[1, 2, 3]], 2)[0]]
        np.testing.assert_allclose(expected, STD_123_TAU2, atol=1e-10)
        np.testing.assert_allclose(out[0].numpy(), STD_123_TAU2, atol=1e-6)

    def test_postconditions_random_batches(self):
        g = rng(1)
        for tau in (0.5, 1.0, 2.0):
            x = torch.randn(16, 10, generator=g, dtype=torch.float64) * 7 + 3
            z = losses.standardize_logits(x, tau)
            assert float(z.mean(dim=1).abs().max()) <= 1e-9
            assert float((z.std(dim=1, correction=0) - 1 / tau).abs().max()) <= 1e-7

    def test_constant_row_raises(self):
        with pytest.raises(DegenerateLogits):
            losses.standardize_logits(torch.tensor([[5.0, 5.0, 5.0]]), tau=1.0)

    def test_constant_row_among_good_rows_raises(self):
        x = torch.tensor([[1.0, 2.0, 3.0], [4.0, 4.0, 4.0]])
        with pytest.raises(DegenerateLogits, match="1"):
            losses.standardize_logits(x, tau=1.0)

    @pytest.mark.parametrize("tau", [0.0, -1.0])
    def test_bad_temperature(self, tau):
        with pytest.raises(InvalidTemperature):
            losses.standardize_logits(torch.tensor([[1.0, 2.0]]), tau=tau)

    def test_affine_invariance(self):
        g = rng(2)
        for _ in range(20):
            x = torch.randn(4, 10, generator=g, dtype=torch.float64)
            a = float(torch.rand(1, generator=g)) * 10 + 0.1
            b = float(torch.randn(1, generator=g)) * 5
            z1 = losses.standardize_logits(a * x + b, tau=2.0)
            z2 = losses.standardize_logits(x, tau=2.0)
            assert float((z1 - z2).abs().max()) <= 1e-7

    def test_scale_law(self):
        g = rng(3)
        x = torch.randn(8, 10, generator=g, dtype=torch.float64)
        z_tau = losses.standardize_logits(x, tau=4.0)
        z_unit = losses.standardize_logits(x, tau=1.0) / 4.0
        rel = float(((z_tau - z_unit).abs() / z_unit.abs().clamp_min(1e-30)).max())
        assert rel <= 1e-12

    def test_nonfinite_rejected(self):
        with pytest.raises(NonFiniteLoss):
            losses.standardize_logits(torch.tensor([[1.0, float("nan"), 2.0]]), tau=1.0)

    def test_differentiable(self):
        x = torch.tensor([[1.0, 2.0, 3.0]], requires_grad=True)
        losses.standardize_logits(x, tau=2.0).sum().backward()
        assert x.grad is not None


class TestScaleLogits:
    def test_plain_division(self):
        out = losses.scale_logits(torch.tensor([[2.0, 4.0]]), tau=2.0)
        np.testing.assert_allclose(out.numpy(), [[1.0, 2.0]])

    def test_bad_temperature(self):
        with pytest.raises(InvalidTemperature):
            losses.scale_logits(torch.tensor([[1.0, 2.0]]), tau=0.0)


class TestSoftmax:
    def test_symmetry(self):
        out = losses.softmax_rows(torch.tensor([[0.0, 0.0]]))
        np.testing.assert_allclose(out.numpy(), [[0.5, 0.5]], atol=1e-9)

    def test_closed_form_ratio(self):
        out = losses.softmax_rows(torch.tensor([[0.0, float(np.log(3.0))]], dtype=torch.float64))
        expected = [float(v) for v in oracles.softmax_row([0, float(np.log(3.0))])]
        np.testing.assert_allclose(expected, [0.25, 0.75], atol=1e-12)
        np.testing.assert_allclose(out.numpy(), [[0.25, 0.75]], atol=1e-9)

    def test_overflow_guard(self):
        out = losses.softmax_rows(torch.tensor([[1000.0, 1000.0]]))
        np.testing.assert_allclose(out.numpy(), [[0.5, 0.5]], atol=1e-9)
        assert torch.isfinite(out).all()

    def test_shift_invariance(self):
        g = rng(4)
        x = torch.randn(8, 10, generator=g, dtype=torch.float64)
        for c in (-100.0, 3.7, 250.0):
            diff = (losses.softmax_rows(x + c) - losses.softmax_rows(x)).abs()
            assert float(diff.max()) <= 1e-9

    def test_rows_sum_to_one_and_positive(self):
        g = rng(5)
        x = torch.randn(32, 10, generator=g) * 20
        out = losses.softmax_rows(x)
        np.testing.assert_allclose(out.sum(dim=1).numpy(), np.ones(32), atol=1e-6)
        assert float(out.min()) > 0


class TestKL:
    def test_identical_is_zero(self):
        p = torch.tensor([[0.3, 0.7]], dtype=torch.float64)
        assert float(losses.kl_divergence_rows(p, p)) == pytest.approx(0.0, abs=1e-12)

    def test_pinned_value(self):
        p = torch.tensor([[0.5, 0.5]], dtype=torch.float64)
        q = torch.tensor([[0.25, 0.75]], dtype=torch.float64)
        assert float(oracles.kl_row([0.5, 0.5], [0.25, 0.75])) == pytest.approx(
            KL_HALF_VS_QUARTER, abs=1e-10
        )
        assert float(losses.kl_divergence_rows(p, q)) == pytest.approx(
            KL_HALF_VS_QUARTER, abs=1e-5
        )

    def test_zero_times_log_zero_convention(self):
        p = torch.tensor([[1.0, 0.0]], dtype=torch.float64)
        q = torch.tensor([[0.5, 0.5]], dtype=torch.float64)
        assert float(oracles.kl_row([1, 0], [0.5, 0.5])) == pytest.approx(
            KL_ZERO_CONVENTION, abs=1e-10
        )
        assert float(losses.kl_divergence_rows(p, q)) == pytest.approx(
            KL_ZERO_CONVENTION, abs=1e-5
        )

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            losses.kl_divergence_rows(torch.rand(2, 3), torch.rand(2, 4))

    def test_nonnegative_random_pairs(self):
        g = rng(6)
        for _ in range(1000):
            p = losses.softmax_rows(torch.randn(2, 10, generator=g, dtype=torch.float64) * 4)
            q = losses.softmax_rows(torch.randn(2, 10, generator=g, dtype=torch.float64) * 4)
            assert float(losses.kl_divergence_rows(p, q)) >= 0.0

    def test_zero_iff_equal(self):
        g = rng(7)
        p = losses.softmax_rows(torch.randn(4, 10, generator=g, dtype=torch.float64))
        q = losses.softmax_rows(torch.randn(4, 10, generator=g, dtype=torch.float64))
        assert float(losses.kl_divergence_rows(p, p)) == pytest.approx(0.0, abs=1e-12)
        assert float(losses.kl_divergence_rows(p, q)) > 1e-6

    def test_asymmetry_witness(self):
        p = torch.tensor([[0.5, 0.5]], dtype=torch.float64)
        q = torch.tensor([[0.25, 0.75]], dtype=torch.float64)
        forward = float(losses.kl_divergence_rows(p, q))
        backward = float(losses.kl_divergence_rows(q, p))
        assert forward != pytest.approx(backward, abs=1e-3)

    def test_batch_mean_reduction(self):
        p = torch.tensor([[0.5, 0.5], [1.0, 0.0]], dtype=torch.float64)
        q = torch.tensor([[0.25, 0.75], [0.5, 0.5]], dtype=torch.float64)
        expected = (KL_HALF_VS_QUARTER + KL_ZERO_CONVENTION) / 2
        assert float(losses.kl_divergence_rows(p, q)) == pytest.approx(expected, abs=1e-5)


class TestSkdLoss:
    def test_identical_inputs_zero(self):
        g = rng(8)
        x = torch.randn(4, 10, generator=g)
        assert float(losses.skd_loss(x, x, tau=2.0)) == pytest.approx(0.0, abs=1e-10)

    def test_affine_transform_collapses(self):
        g = rng(9)
        x = torch.randn(4, 10, generator=g, dtype=torch.float64)
        for a, b in ((2.0, 0.0), (0.5, -3.0), (7.0, 100.0)):
            assert float(losses.skd_loss(x, a * x + b, tau=2.0)) <= 1e-10

    def test_pinned_tau1(self):
        o = torch.tensor([[1.0, 2.0, 3.0]], dtype=torch.float64)
        s = torch.tensor([[3.0, 2.0, 1.0]], dtype=torch.float64)
        assert float(oracles.skd_pipeline([[1, 2, 3]], [[3, 2, 1]], 1)) == pytest.approx(
            SKD_123_321_TAU1, abs=1e-9
        )
        assert float(losses.skd_loss(o, s, tau=1.0)) == pytest.approx(SKD_123_321_TAU1, abs=1e-5)

    def test_pinned_tau2_no_tau_squared_inside(self):
        o = torch.tensor([[1.0, 2.0, 3.0]], dtype=torch.float64)
        s = torch.tensor([[3.0, 2.0, 1.0]], dtype=torch.float64)
        assert float(oracles.skd_pipeline([[1, 2, 3]], [[3, 2, 1]], 2)) == pytest.approx(
            SKD_123_321_TAU2, abs=1e-9
        )
        assert float(losses.skd_loss(o, s, tau=2.0)) == pytest.approx(SKD_123_321_TAU2, abs=1e-5)

    def test_original_is_numerator(self):
        # Direction regression: swapping the arguments must change the value.
        o = torch.tensor([[1.0, 2.0, 4.0]], dtype=torch.float64)
        s = torch.tensor([[4.0, 1.0, 2.0]], dtype=torch.float64)
        assert float(losses.skd_loss(o, s, tau=1.0)) != pytest.approx(
            float(losses.skd_loss(s, o, tau=1.0)), abs=1e-6
        )

    def test_no_standardization_path(self):
        o = torch.tensor([[1.0, 2.0, 3.0]], dtype=torch.float64)
        s = torch.tensor([[3.0, 2.0, 1.0]], dtype=torch.float64)
        got = float(losses.skd_loss(o, s, tau=2.0, standardize=False))
        p = [float(v) for v in oracles.softmax_row([0.5, 1.0, 1.5])]
        q = [float(v) for v in oracles.softmax_row([1.5, 1.0, 0.5])]
        assert got == pytest.approx(float(oracles.kl_row(p, q)), abs=1e-6)
        # Plain scaling is NOT affine invariant: a shifted copy no longer matches.
        assert float(losses.skd_loss(o, o + 5.0, tau=2.0, standardize=False)) > 1e-3

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            losses.skd_loss(torch.rand(2, 3), torch.rand(3, 3), tau=1.0)

    def test_degenerate_propagates(self):
        with pytest.raises(DegenerateLogits):
            losses.skd_loss(torch.tensor([[1.0, 1.0, 1.0]]), torch.rand(1, 3), tau=1.0)


class TestCombineTotalLoss:
    def test_pinned_examples(self):
        assert losses.combine_total_loss(1.0, 0.5, DistillScalars(2.0, 0.01)) == pytest.approx(1.02)
        assert losses.combine_total_loss(2.0, 1.0, DistillScalars(2.0, 0.001)) == pytest.approx(2.004)

    def test_zero_weight_passthrough(self):
        assert losses.combine_total_loss(3.25, 17.0, DistillScalars(2.0, 0.0)) == 3.25

    def test_monotone_in_skd(self):
        scalars = DistillScalars(2.0, 0.5)
        values = [losses.combine_total_loss(1.0, s, scalars) for s in (0.0, 0.5, 1.0, 2.0)]
        assert values == sorted(values) and len(set(values)) == len(values)

    def test_tensor_inputs_keep_graph(self):
        l_cgan = torch.tensor(1.0, requires_grad=True)
        l_skd = torch.tensor(0.5, requires_grad=True)
        total = losses.combine_total_loss(l_cgan, l_skd, DistillScalars(2.0, 0.01))
        total.backward()
        assert l_skd.grad is not None and float(l_skd.grad) == pytest.approx(0.04)

    def test_negative_skd_rejected(self):
        with pytest.raises(ValueError):
            losses.combine_total_loss(1.0, -0.1, DistillScalars(2.0, 0.01))

    def test_scalar_validation(self):
        with pytest.raises(InvalidTemperature):
            DistillScalars(tau=0.0, lambda_skd=0.1)
        with pytest.raises(ValueError):
            DistillScalars(tau=1.0, lambda_skd=-0.5)


class TestGradientCheck:
    def test_skd_against_fixed_target(self):
        g = rng(10)
        target = torch.randn(4, 10, generator=g, dtype=torch.float64)
        point = torch.randn(4, 10, generator=g, dtype=torch.float64)
        err = losses.finite_difference_gradient_check(
            lambda x: losses.skd_loss(target, x, tau=2.0), point, epsilon=1e-4
        )
        assert err <= 1e-3

    def test_constant_function_reports_zero(self):
        point = torch.randn(2, 5, generator=rng(11), dtype=torch.float64)
        err = losses.finite_difference_gradient_check(
            lambda x: torch.tensor(4.0, dtype=torch.float64), point, epsilon=1e-4
        )
        assert err == 0.0

    def test_linear_function_is_exact(self):
        point = torch.randn(3, 6, generator=rng(12), dtype=torch.float64)
        err = losses.finite_difference_gradient_check(lambda x: x.sum(), point, epsilon=1e-4)
        assert err <= 1e-8

    def test_nonfinite_loss_raises(self):
        point = torch.zeros(1, 3, dtype=torch.float64)
        with pytest.raises(NonFiniteLoss):
            losses.finite_difference_gradient_check(
                lambda x: (x.sum() * float("inf")).reshape(()), point, epsilon=1e-4
            )

    @pytest.mark.parametrize("epsilon", [1e-7, 1e-2])
    def test_epsilon_range_enforced(self, epsilon):
        with pytest.raises(ValueError):
            losses.finite_difference_gradient_check(
                lambda x: x.sum(), torch.zeros(1, 2, dtype=torch.float64), epsilon=epsilon
            )
