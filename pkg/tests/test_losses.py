import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softgt.errors import InvalidArgumentError
from softgt.losses import (
    AWingParams, awing_grad, awing_linear, awing_loss, awing_nonlinear, norm_relu, soft_dice_loss,
)

P = AWingParams()

# frozen from a 50-digit mpmath evaluation of the closed form (independent of the code under test)
MP_LOSS_Y0_YH025 = 0.42384647542790771914
MP_LOSS_Y0_YH08 = 3.5838066176503176529
MP_A0 = 6.3550980845701109555
MP_C0 = 1.5002718500057711115
MP_LOSS_Y03_YH09 = 2.6621378860877252456
MP_LOSS_Y07_YH05 = 0.79920510861785119766


class TestNormReLU:
    def test_basic(self):
        np.testing.assert_array_equal(norm_relu([-1.0, 2.0, 4.0]), [0.0, 0.5, 1.0])

    def test_all_negative(self):
        np.testing.assert_array_equal(norm_relu([-3.0, -0.1, 0.0]), [0.0, 0.0, 0.0])

    def test_single(self):
        np.testing.assert_array_equal(norm_relu([5.0]), [1.0])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
    def test_max_one_and_idempotent(self, xs):
        out = norm_relu(xs)
        assert np.all((out >= 0) & (out <= 1))
        if max(xs) > 0:
            assert out.max() == 1.0
            np.testing.assert_allclose(norm_relu(out), out, atol=1e-15)
        else:
            assert not out.any()


class TestAWing:
    def test_default_hyperparameters(self):
        assert (P.omega, P.epsilon, P.theta, P.alpha) == (8.0, 1.0, 0.5, 2.1)

    def test_zero_error(self):
        y = np.linspace(0, 1, 11)
        np.testing.assert_array_equal(awing_loss(y, y, reduction="none"), 0.0)

    def test_nonlinear_branch_value(self):
        assert awing_loss([0.0], [0.25], reduction="sum") == pytest.approx(MP_LOSS_Y0_YH025, abs=1e-12)

    def test_linear_branch_value(self):
        assert P.A(0.0) == pytest.approx(MP_A0, abs=1e-12)
        assert P.C(0.0) == pytest.approx(MP_C0, abs=1e-12)
        assert awing_loss([0.0], [0.8], reduction="sum") == pytest.approx(MP_LOSS_Y0_YH08, abs=1e-12)

    @pytest.mark.parametrize("y, yh, expected", [(0.3, 0.9, MP_LOSS_Y03_YH09), (0.7, 0.5, MP_LOSS_Y07_YH05)])
    def test_soft_targets(self, y, yh, expected):
        assert awing_loss([y], [yh], reduction="sum") == pytest.approx(expected, abs=1e-12)

    def test_theta_boundary_on_linear_branch(self):
        out = awing_loss([0.0], [0.5], reduction="none")
        np.testing.assert_array_equal(out, awing_linear([0.0], [0.5]))

    def test_reductions(self):
        y = np.array([0.0, 0.5, 1.0])
        yh = np.array([0.2, 0.9, 0.1])
        per = awing_loss(y, yh, reduction="none")
        assert awing_loss(y, yh, reduction="sum") == pytest.approx(per.sum())
        assert awing_loss(y, yh) == pytest.approx(per.mean())
        with pytest.raises(InvalidArgumentError):
            awing_loss(y, yh, reduction="max")

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            awing_loss([0.0, 1.0], [0.0])
        with pytest.raises(InvalidArgumentError):
            awing_grad([0.0, 1.0], [0.0])

    def test_continuity(self):
        y = np.random.default_rng(1).uniform(0, 1, 1000)
        yh = y + P.theta
        assert np.max(np.abs(awing_nonlinear(y, yh) - awing_linear(y, yh))) < 1e-9

    def test_nonnegative(self):
        y, yh = np.meshgrid(np.linspace(0, 1, 101), np.linspace(-1, 2, 301))
        assert awing_loss(y, yh, reduction="none").min() >= 0

    def test_monotone_in_abs_error(self):
        d = np.linspace(0, 2, 10_000)
        for y in (0.0, 0.25, 0.5, 1.0):
            loss = awing_loss(np.full_like(d, y), y + d, reduction="none")
            assert np.all(np.diff(loss) >= -1e-12)

    def test_params_validation(self):
        with pytest.raises(InvalidArgumentError):
            AWingParams(omega=0)
        with pytest.raises(InvalidArgumentError):
            AWingParams(alpha=1.0)

    def test_alternative_params_accepted(self):
        p = AWingParams(omega=12.0, epsilon=0.5)
        y = np.random.default_rng(0).uniform(0, 1, 100)
        yh = y + P.theta
        assert np.max(np.abs(awing_nonlinear(y, yh, p) - awing_linear(y, yh, p))) < 1e-9


class TestAWingGrad:
    def test_zero_at_zero_error(self):
        y = np.linspace(0, 1, 5)
        np.testing.assert_array_equal(awing_grad(y, y), 0.0)

    def test_linear_branch_is_minus_A(self):
        y = np.array([0.0, 0.2, 0.9])
        yh = y - 0.7  # d = 0.7 > theta
        np.testing.assert_array_equal(awing_grad(y, yh), -P.A(y))

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        y = rng.uniform(0, 1, 1000)
        yh = rng.uniform(-0.5, 1.5, 1000)
        keep = np.abs(np.abs(y - yh) - P.theta) > 1e-3
        y, yh = y[keep], yh[keep]
        h = 1e-5
        fd = (awing_loss(y, yh + h, reduction="none") - awing_loss(y, yh - h, reduction="none")) / (2 * h)
        an = awing_grad(y, yh)
        rel = np.abs(fd - an) / np.maximum(np.abs(an), 1e-300)
        assert rel.max() < 1e-4


class TestSoftDice:
    def test_identical(self):
        m = np.zeros((4, 4)); m[1:3, 1:3] = 1
        assert soft_dice_loss(m, m) == pytest.approx(0.0, abs=1e-4)

    def test_disjoint(self):
        a = np.zeros(10); a[:5] = 1
        assert soft_dice_loss(a, 1 - a) == pytest.approx(1.0, abs=1e-4)

    def test_half_prediction(self):
        y = np.zeros(20); y[:8] = 1
        # hand-evaluated: 1 - 2*4 / (8 + 4)
        assert soft_dice_loss(y, 0.5 * y) == pytest.approx(1 - 8 / 12, abs=1e-4)
