"""Scalar primitives against frozen values and independent brute force."""

import math

import numpy as np
import pytest

from kankit.basis import (
    ActivationWeights,
    GridSpec,
    Normalizer,
    activation_eval,
    activation_grad,
    normalize,
    normalize_deriv,
    normalize_deriv_from_output,
    rbf_eval,
    sigmoid,
    swish,
    swish_deriv,
)


class TestRbf:
    def test_peak_is_one(self):
        assert rbf_eval(0.0, 0.5) == 1.0

    def test_one_width_out(self):
        # exp(-1/2)
        assert abs(rbf_eval(0.5, 0.5) - 0.6065306597126334) < 1e-15

    def test_two_widths_out(self):
        # exp(-2)
        assert abs(rbf_eval(1.0, 0.5) - 0.1353352832366127) < 1e-15

    def test_even_in_r(self):
        r = np.linspace(-3, 3, 41)
        np.testing.assert_array_equal(rbf_eval(r, 0.7), rbf_eval(-r, 0.7))

    def test_rejects_bad_width(self):
        with pytest.raises(ValueError):
            rbf_eval(1.0, 0.0)


class TestSwish:
    def test_zero(self):
        assert swish(0.0) == 0.0

    def test_one(self):
        assert abs(swish(1.0) - 0.7310585786300049) < 1e-15

    def test_large_negative_underflows_cleanly(self):
        v = float(swish(-20.0))
        assert abs(v - (-20.0 / (1.0 + math.exp(20.0)))) < 1e-20
        assert abs(v + 4.122307236380407e-08) < 1e-15

    def test_sigmoid_extremes(self):
        assert sigmoid(800.0) == 1.0
        assert sigmoid(-800.0) == 0.0

    def test_deriv_matches_fd(self):
        rng = np.random.default_rng(3)
        for x in rng.uniform(-4, 4, size=50):
            h = 1e-6
            fd = (swish(x + h) - swish(x - h)) / (2 * h)
            assert abs(swish_deriv(x) - fd) < 1e-8


class TestNormalizers:
    def test_values(self):
        assert normalize(0.7, Normalizer.TANH) == pytest.approx(math.tanh(0.7), abs=1e-15)
        assert normalize(3.0, Normalizer.SOFTSIGN) == pytest.approx(0.75, abs=1e-15)
        assert normalize(-3.0, Normalizer.SOFTSIGN) == pytest.approx(-0.75, abs=1e-15)
        assert normalize(2.5, Normalizer.NONE) == 2.5

    def test_output_range(self):
        # saturating kinds stay within [-1, 1] even for huge inputs and
        # strictly inside it for moderate ones
        big = np.linspace(-1e6, 1e6, 101)
        mid = np.linspace(-8, 8, 101)
        for kind in (Normalizer.TANH, Normalizer.SOFTSIGN):
            assert np.all(np.abs(normalize(big, kind)) <= 1.0)
            assert np.all(np.abs(normalize(mid, kind)) < 1.0)

    def test_monotone(self):
        x = np.linspace(-10, 10, 201)
        for kind in Normalizer:
            y = normalize(x, kind)
            assert np.all(np.diff(y) > 0)

    def test_deriv_matches_fd(self):
        rng = np.random.default_rng(4)
        xs = rng.uniform(-5, 5, size=40)
        xs = xs[np.abs(xs) > 1e-3]  # softsign has a kink at 0
        h = 1e-6
        for kind in Normalizer:
            fd = (normalize(xs + h, kind) - normalize(xs - h, kind)) / (2 * h)
            np.testing.assert_allclose(normalize_deriv(xs, kind), fd, atol=1e-8)

    def test_deriv_from_output_identity(self):
        rng = np.random.default_rng(5)
        xs = rng.uniform(-5, 5, size=40)
        for kind in Normalizer:
            y = normalize(xs, kind)
            np.testing.assert_allclose(
                normalize_deriv_from_output(y, kind),
                normalize_deriv(xs, kind),
                rtol=1e-12, atol=1e-15,
            )


class TestGridSpec:
    def test_uniform_span(self):
        g = GridSpec.uniform(5)
        assert g.centers == (-1.0, -0.5, 0.0, 0.5, 1.0)
        assert g.width == 0.5

    def test_width_equals_spacing(self):
        for n in range(2, 12):
            g = GridSpec.uniform(n)
            gaps = np.diff(g.centers)
            assert np.allclose(gaps, g.width, atol=1e-12)
            assert g.centers[0] == -1.0 and g.centers[-1] == 1.0

    def test_single_center(self):
        g = GridSpec.uniform(1)
        assert g.centers == (0.0,)
        assert g.width == 1.0

    def test_rejects_uneven(self):
        with pytest.raises(ValueError):
            GridSpec(3, (-1.0, 0.5, 1.0), 1.0)

    def test_rejects_bad_span(self):
        with pytest.raises(ValueError):
            GridSpec(3, (-0.9, 0.0, 0.9), 0.9)

    def test_rejects_nonpositive_count(self):
        with pytest.raises(ValueError):
            GridSpec.uniform(0)


def _oracle_activation(x, w_rbf, w_base, centers, width, base_on):
    """Plain-python reference: sum of Gaussians plus the Swish term."""
    total = 0.0
    for wi, ci in zip(w_rbf, centers):
        total += wi * math.exp(-((x - ci) ** 2) / (2 * width * width))
    if base_on:
        total += w_base * x / (1.0 + math.exp(-x))
    return total


class TestActivation:
    def test_two_center_frozen_value(self):
        # unit weights on a two-center grid, evaluated midway: 2 exp(-1/8)
        g = GridSpec.uniform(2)
        w = ActivationWeights(rbf=[1.0, 1.0], base=0.0)
        got = activation_eval(0.0, w, g)
        assert abs(got - 2.0 * math.exp(-0.125)) < 1e-15
        assert abs(got - 1.7649938051691911) < 1e-12

    def test_matches_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(1, 8))
            g = GridSpec.uniform(n)
            w = ActivationWeights(rbf=rng.normal(size=n), base=float(rng.normal()))
            x = float(rng.uniform(-1.5, 1.5))
            base_on = bool(rng.integers(0, 2))
            want = _oracle_activation(x, w.rbf, w.base, g.centers, g.width, base_on)
            assert abs(activation_eval(x, w, g, base_on) - want) < 1e-12

    def test_linear_in_weights(self):
        rng = np.random.default_rng(12)
        g = GridSpec.uniform(4)
        for _ in range(30):
            w1 = rng.normal(size=4)
            w2 = rng.normal(size=4)
            b1, b2 = rng.normal(size=2)
            a, c = rng.normal(size=2)
            x = float(rng.uniform(-1, 1))
            lhs = activation_eval(
                x, ActivationWeights(a * w1 + c * w2, a * b1 + c * b2), g)
            rhs = a * activation_eval(x, ActivationWeights(w1, b1), g) + \
                c * activation_eval(x, ActivationWeights(w2, b2), g)
            assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(rhs))

    def test_grad_matches_fd(self):
        rng = np.random.default_rng(13)
        h = 1e-6
        for _ in range(60):
            n = int(rng.integers(1, 7))
            g = GridSpec.uniform(n)
            w = ActivationWeights(rbf=rng.normal(size=n), base=float(rng.normal()))
            x = float(rng.uniform(-1.2, 1.2))
            base_on = bool(rng.integers(0, 2))
            d_dx, d_dw = activation_grad(x, w, g, base_on)
            fd_x = (activation_eval(x + h, w, g, base_on)
                    - activation_eval(x - h, w, g, base_on)) / (2 * h)
            assert abs(d_dx - fd_x) < 1e-7
            assert d_dw.shape == (n + 1 if base_on else n,)
            for i in range(n):
                wp = ActivationWeights(w.rbf.copy(), w.base)
                wp.rbf[i] += h
                wm = ActivationWeights(w.rbf.copy(), w.base)
                wm.rbf[i] -= h
                fd = (activation_eval(x, wp, g, base_on)
                      - activation_eval(x, wm, g, base_on)) / (2 * h)
                assert abs(d_dw[i] - fd) < 1e-7
            if base_on:
                wp = ActivationWeights(w.rbf, w.base + h)
                wm = ActivationWeights(w.rbf, w.base - h)
                fd = (activation_eval(x, wp, g) - activation_eval(x, wm, g)) / (2 * h)
                assert abs(d_dw[n] - fd) < 1e-7

    def test_weight_count_checked(self):
        g = GridSpec.uniform(3)
        with pytest.raises(ValueError):
            activation_eval(0.0, ActivationWeights([1.0, 2.0]), g)
