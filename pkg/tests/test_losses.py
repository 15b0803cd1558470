"""Loss and metric checks against scalar-loop oracles and finite
differences."""

import math

import numpy as np
import pytest

from lumisplat.errors import ValidationError
from lumisplat.losses import (LossWeights, depth_loss, depth_mse, dssim_loss,
                              l1_loss, psnr, scale_loss, ssim, total_loss)

RNG = np.random.default_rng


def _ssim_loop_oracle(x, y):
    """Direct windowed-statistics SSIM, nested loops, explicit 2D kernel."""
    w1 = np.exp(-((np.arange(11) - 5) ** 2) / (2 * 1.5 ** 2))
    w1 /= w1.sum()
    kern = np.outer(w1, w1)
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    h, w = x.shape
    vals = []
    for ci in range(5, h - 5):
        for cj in range(5, w - 5):
            px = x[ci - 5:ci + 6, cj - 5:cj + 6]
            py = y[ci - 5:ci + 6, cj - 5:cj + 6]
            mx = (kern * px).sum()
            my = (kern * py).sum()
            vx = (kern * px * px).sum() - mx * mx
            vy = (kern * py * py).sum() - my * my
            vxy = (kern * px * py).sum() - mx * my
            vals.append(((2 * mx * my + c1) * (2 * vxy + c2))
                        / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


class TestL1:
    def test_identical_images(self):
        img = RNG(0).uniform(size=(8, 8, 3))
        loss, grad = l1_loss(img, img)
        assert loss == 0.0
        np.testing.assert_array_equal(grad, 0.0)

    def test_constant_offset(self):
        target = RNG(1).uniform(0.0, 0.8, size=(6, 6, 3))
        loss, _ = l1_loss(target + 0.1, target)
        assert abs(loss - 0.1) < 1e-12

    def test_matches_loop_oracle(self):
        rng = RNG(2)
        a, b = rng.uniform(size=(5, 4, 3)), rng.uniform(size=(5, 4, 3))
        loss, _ = l1_loss(a, b)
        acc = 0.0
        for v1, v2 in zip(a.reshape(-1), b.reshape(-1)):
            acc += abs(v1 - v2)
        assert abs(loss - acc / a.size) < 1e-12

    def test_gradient_matches_finite_differences(self):
        rng = RNG(3)
        a, b = rng.uniform(size=(4, 4)), rng.uniform(size=(4, 4))
        _, grad = l1_loss(a, b)
        h = 1e-7
        for idx in range(a.size):
            p = a.copy().reshape(-1)
            p[idx] += h
            up = l1_loss(p.reshape(4, 4), b)[0]
            p[idx] -= 2 * h
            down = l1_loss(p.reshape(4, 4), b)[0]
            num = (up - down) / (2 * h)
            assert abs(grad.reshape(-1)[idx] - num) < 1e-8

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            l1_loss(np.zeros((4, 4)), np.zeros((4, 5)))


class TestSsim:
    def test_self_similarity_is_one(self):
        img = RNG(4).uniform(size=(16, 16, 3))
        assert abs(ssim(img, img) - 1.0) < 1e-12

    def test_symmetry(self):
        rng = RNG(5)
        a, b = rng.uniform(size=(14, 14)), rng.uniform(size=(14, 14))
        assert abs(ssim(a, b) - ssim(b, a)) < 1e-12

    def test_matches_loop_oracle(self):
        rng = RNG(6)
        a, b = rng.uniform(size=(15, 13)), rng.uniform(size=(15, 13))
        assert abs(ssim(a, b) - _ssim_loop_oracle(a, b)) < 1e-12

    def test_window_size_enforced(self):
        with pytest.raises(ValidationError):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))


class TestDssim:
    def test_identical_images(self):
        img = RNG(7).uniform(size=(12, 12, 3))
        loss, grad = dssim_loss(img, img)
        assert abs(loss) < 1e-12
        assert grad.shape == img.shape

    def test_inverted_image_bound(self):
        target = RNG(8).uniform(size=(16, 16, 3))
        loss, _ = dssim_loss(1.0 - target, target)
        assert 0.0 < loss <= 1.0

    def test_gradient_matches_finite_differences(self):
        # Interior pixels, where many windows overlap and the gradient is
        # well above the FD noise floor eps*loss/h.
        rng = RNG(9)
        x = rng.uniform(size=(16, 16))
        y = rng.uniform(size=(16, 16))
        _, grad = dssim_loss(x, y)
        h = 1e-6
        for i in range(5, 11):
            for j in range(5, 11, 2):
                p = x.copy()
                p[i, j] += h
                up = dssim_loss(p, y)[0]
                p[i, j] -= 2 * h
                down = dssim_loss(p, y)[0]
                num = (up - down) / (2 * h)
                ana = grad[i, j]
                assert abs(ana - num) <= 1e-5 * max(abs(num), abs(ana))

    def test_directional_derivative_matches_finite_differences(self):
        # Aggregates every coordinate, including boundary pixels.
        rng = RNG(10)
        x = rng.uniform(size=(12, 12, 3))
        y = rng.uniform(size=(12, 12, 3))
        v = rng.normal(size=x.shape)
        _, grad = dssim_loss(x, y)
        ana = float(np.sum(grad * v))
        h = 1e-6
        num = (dssim_loss(x + h * v, y)[0]
               - dssim_loss(x - h * v, y)[0]) / (2 * h)
        assert abs(ana - num) <= 1e-6 * max(abs(num), abs(ana))


class TestDepthLoss:
    def test_identical_depths(self):
        d = RNG(11).uniform(1.0, 3.0, size=(8, 8))
        loss, grad, empty = depth_loss(d, d, np.ones_like(d, dtype=bool))
        assert loss == 0.0 and not empty
        np.testing.assert_array_equal(grad, 0.0)

    def test_uniform_offset(self):
        d = RNG(12).uniform(1.0, 3.0, size=(8, 8))
        loss, _, _ = depth_loss(d + 2.0, d, np.ones_like(d, dtype=bool))
        assert abs(loss - 2.0) < 1e-12

    def test_matches_loop_oracle(self):
        rng = RNG(13)
        a = rng.uniform(1.0, 3.0, size=(6, 7))
        b = rng.uniform(1.0, 3.0, size=(6, 7))
        mask = rng.uniform(size=(6, 7)) < 0.6
        loss, _, _ = depth_loss(a, b, mask)
        acc, count = 0.0, 0
        for i in range(6):
            for j in range(7):
                if mask[i, j]:
                    acc += abs(a[i, j] - b[i, j])
                    count += 1
        assert abs(loss - acc / count) < 1e-12

    def test_masked_out_pixels_are_ignored(self):
        rng = RNG(14)
        a = rng.uniform(size=(5, 5))
        b = rng.uniform(size=(5, 5))
        mask = rng.uniform(size=(5, 5)) < 0.5
        loss1, grad1, _ = depth_loss(a, b, mask)
        a2 = np.where(mask, a, 99.0)
        loss2, grad2, _ = depth_loss(a2, b, mask)
        assert loss1 == loss2
        np.testing.assert_array_equal(grad1, grad2)

    def test_empty_mask_flag(self):
        loss, grad, empty = depth_loss(np.ones((4, 4)), np.zeros((4, 4)),
                                       np.zeros((4, 4), dtype=bool))
        assert loss == 0.0 and empty
        np.testing.assert_array_equal(grad, 0.0)

    def test_gradient_matches_finite_differences(self):
        rng = RNG(15)
        a = rng.uniform(1.0, 3.0, size=(5, 5))
        b = rng.uniform(1.0, 3.0, size=(5, 5))
        mask = rng.uniform(size=(5, 5)) < 0.7
        _, grad, _ = depth_loss(a, b, mask)
        h = 1e-7
        for idx in range(a.size):
            p = a.reshape(-1).copy()
            p[idx] += h
            up = depth_loss(p.reshape(5, 5), b, mask)[0]
            p[idx] -= 2 * h
            down = depth_loss(p.reshape(5, 5), b, mask)[0]
            assert abs(grad.reshape(-1)[idx] - (up - down) / (2 * h)) < 1e-8


class TestScaleLoss:
    def test_inactive_hinge(self):
        scales = np.full((10, 3), 0.005)
        loss, grad = scale_loss(scales, tau_s=0.01)
        assert loss == 0.0
        np.testing.assert_array_equal(grad, 0.0)

    def test_single_hinge(self):
        scales = np.full((4, 3), 0.005)
        scales[2, 1] = 0.01 + 1.0
        loss, _ = scale_loss(scales, tau_s=0.01)
        assert abs(loss - 1.0 / 4) < 1e-15

    def test_matches_loop_oracle(self):
        rng = RNG(16)
        scales = rng.uniform(0.0, 0.03, size=(20, 3))
        tau = 0.012
        loss, _ = scale_loss(scales, tau)
        acc = 0.0
        for row in scales:
            for s in row:
                acc += max(0.0, s - tau)
        assert abs(loss - acc / 20) < 1e-15

    def test_empty_input(self):
        loss, grad = scale_loss(np.zeros((0, 3)), 0.01)
        assert loss == 0.0 and grad.shape == (0, 3)

    def test_gradient_away_from_hinge(self):
        rng = RNG(17)
        scales = rng.uniform(0.0, 0.03, size=(6, 3))
        tau = 0.014
        _, grad = scale_loss(scales, tau)
        h = 1e-7
        for idx in range(scales.size):
            if abs(scales.reshape(-1)[idx] - tau) < 10 * h:
                continue
            p = scales.reshape(-1).copy()
            p[idx] += h
            up = scale_loss(p.reshape(6, 3), tau)[0]
            p[idx] -= 2 * h
            down = scale_loss(p.reshape(6, 3), tau)[0]
            assert abs(grad.reshape(-1)[idx] - (up - down) / (2 * h)) < 1e-8


class TestTotalLoss:
    def test_all_zero_parts(self):
        value, _ = total_loss(0.0, 0.0, 0.0, 0.0, LossWeights())
        assert value == 0.0

    def test_lambda1_degeneracy(self):
        w = LossWeights(lambda1=0.0, lambda2=0.3, lambda3=0.05)
        value, coeffs = total_loss(1.0, 123.0, 2.0, 4.0, w)
        assert abs(value - (1.0 + 0.3 * 2.0 + 0.05 * 4.0)) < 1e-15
        assert coeffs["dssim"] == 0.0

    def test_hand_computed_combination(self):
        w = LossWeights(lambda1=0.2, lambda2=0.1, lambda3=0.01)
        parts = (0.37, 0.12, 1.9, 0.004)
        value, coeffs = total_loss(*parts, w)
        expected = 0.8 * 0.37 + 0.2 * 0.12 + 0.1 * 1.9 + 0.01 * 0.004
        assert abs(value - expected) < 1e-15
        assert coeffs == {"l1": 0.8, "dssim": 0.2, "depth": 0.1,
                          "scale": 0.01}

    def test_scaling_a_part_scales_its_contribution(self):
        w = LossWeights()
        base, _ = total_loss(0.0, 0.0, 1.0, 0.0, w)
        doubled, _ = total_loss(0.0, 0.0, 2.0, 0.0, w)
        assert abs(doubled - 2.0 * base) < 1e-15

    def test_invalid_weights_rejected(self):
        with pytest.raises(ValidationError):
            LossWeights(lambda1=1.5)
        with pytest.raises(ValidationError):
            LossWeights(lambda2=-0.1)


class TestPsnr:
    def test_identical_is_infinite(self):
        img = RNG(18).uniform(size=(8, 8, 3))
        assert psnr(img, img) == math.inf

    def test_uniform_error_closed_form(self):
        target = np.full((16, 16, 3), 0.5)
        assert abs(psnr(target + 0.1, target) - 20.0) < 1e-9

    def test_matches_definitional_oracle(self):
        rng = RNG(19)
        a, b = rng.uniform(size=(9, 9, 3)), rng.uniform(size=(9, 9, 3))
        acc = 0.0
        for v1, v2 in zip(a.reshape(-1), b.reshape(-1)):
            acc += (v1 - v2) ** 2
        expected = 10.0 * math.log10(1.0 / (acc / a.size))
        assert abs(psnr(a, b) - expected) < 1e-9


class TestDepthMse:
    def test_identical_is_zero(self):
        d = RNG(20).uniform(1.0, 3.0, size=(8, 8))
        assert depth_mse(d, d, np.ones_like(d, dtype=bool)) == 0.0

    def test_uniform_offset(self):
        d = RNG(21).uniform(1.0, 3.0, size=(8, 8))
        got = depth_mse(d + 0.5, d, np.ones_like(d, dtype=bool))
        assert abs(got - 0.25) < 1e-12

    def test_matches_loop_oracle(self):
        rng = RNG(22)
        a = rng.uniform(1.0, 3.0, size=(7, 6))
        b = rng.uniform(1.0, 3.0, size=(7, 6))
        mask = rng.uniform(size=(7, 6)) < 0.5
        acc, count = 0.0, 0
        for i in range(7):
            for j in range(6):
                if mask[i, j]:
                    acc += (a[i, j] - b[i, j]) ** 2
                    count += 1
        assert abs(depth_mse(a, b, mask) - acc / count) < 1e-12

    def test_empty_mask_rejected(self):
        with pytest.raises(ValidationError):
            depth_mse(np.ones((4, 4)), np.zeros((4, 4)),
                      np.zeros((4, 4), dtype=bool))
