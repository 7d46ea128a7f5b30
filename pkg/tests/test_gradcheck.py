"""The finite-difference battery itself, plus its helpers."""

import numpy as np

from kankit.gradcheck import default_cases, fd_gradient, rel_error, run_gradcheck


class TestHelpers:
    def test_fd_gradient_on_quadratic(self):
        # grad of x^T A x is (A + A^T) x, a case brute force nails
        rng = np.random.default_rng(91)
        a = rng.normal(size=(4, 4))
        x = rng.normal(size=4)
        grad = fd_gradient(lambda v: float(v @ a @ v), x)
        np.testing.assert_allclose(grad, (a + a.T) @ x, atol=1e-7)

    def test_rel_error_scales(self):
        assert rel_error([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert rel_error([0.0], [1e-13]) < 1.0  # tiny absolute noise tolerated
        assert abs(rel_error([100.0], [99.0]) - 0.01) < 1e-12

    def test_case_names_unique(self):
        names = [c.name for c in default_cases()]
        assert len(names) == len(set(names))
        assert len(names) >= 20


class TestBattery:
    def test_every_case_passes(self):
        report, worst, ok = run_gradcheck(tol=1e-5)
        assert ok, report
        assert worst < 1e-6  # exact gradients sit far below the gate
        assert report.count("PASS") == len(default_cases()) + 1

    def test_corrupt_mode_fails(self):
        report, worst, ok = run_gradcheck(tol=1e-5, corrupt=True)
        assert not ok
        assert worst > 1.0
        assert "FAIL" in report
