import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opelab import functions, measures
from opelab.errors import PreconditionError
from opelab.kernel import CDKernel
from opelab.linstat import (
    ScaledStatistic,
    TestFunction,
    commutator_hs_norm_sq,
    eval_scaled_statistic,
    eval_statistic,
    exact_mean,
    exact_scaled_variance,
    exact_variance,
    log_mgf,
    mgf,
)
from opelab.sampler import SampleConfiguration

ONE = TestFunction(lambda x: np.ones_like(x), sup_norm=1.0, name="one")
IDENTITY = functions.get("identity")
SQUARE = functions.get("square")
BUMP = functions.get("smooth_bump")


def _config(points):
    pts = np.sort(np.asarray(points, dtype=float))
    return SampleConfiguration(pts, seed=0, method="hkpv", n=len(pts))


class TestEvalStatistic:
    def test_counting(self):
        assert eval_statistic(_config([-0.5, 0.1, 0.7]), ONE) == 3.0

    def test_zero_function(self):
        zero = TestFunction(lambda x: np.zeros_like(x), sup_norm=1.0)
        assert eval_statistic(_config([-0.5, 0.1]), zero) == 0.0

    def test_square_arithmetic(self):
        assert eval_statistic(_config([-0.5, 0.5]), SQUARE) == pytest.approx(0.5)

    def test_scaled_reduces_to_global(self):
        sample = _config([-0.3, 0.2, 0.8])
        s = ScaledStatistic(SQUARE, alpha=0.0, xstar=0.0)
        assert eval_scaled_statistic(sample, s, 3) == pytest.approx(
            eval_statistic(sample, SQUARE))

    def test_scaled_empty_window(self):
        sample = _config([0.5, 0.9])
        s = ScaledStatistic(BUMP, alpha=0.9, xstar=-0.5)
        assert eval_scaled_statistic(sample, s, 2) == 0.0

    def test_scaled_wrong_n(self):
        with pytest.raises(PreconditionError):
            eval_scaled_statistic(_config([0.0]), ScaledStatistic(BUMP, 0.5, 0.0), 2)


class TestExactMean:
    def test_trace_for_constant_one(self):
        kern = CDKernel(measures.chebyshev(), 20)
        assert exact_mean(kern, ONE) == pytest.approx(20.0, rel=1e-12)

    def test_odd_function_symmetric_measure(self):
        kern = CDKernel(measures.chebyshev(), 7)
        assert exact_mean(kern, IDENTITY) == pytest.approx(0.0, abs=1e-12)

    def test_square_termwise_oracle_n3(self):
        # sum over j<3 of a_j^2 + b_j^2 + b_{j+1}^2 = 1/2 + 3/4 + 1/2
        kern = CDKernel(measures.chebyshev(), 3)
        assert exact_mean(kern, SQUARE) == pytest.approx(1.75, abs=1e-12)

    @pytest.mark.parametrize("n", [2, 5, 20])
    def test_square_matches_recurrence_identity(self, n):
        mu = measures.chebyshev()
        kern = CDKernel(mu, n)
        co = mu.recurrence(n + 1)
        a, b = co.diag, np.concatenate([[0.0], co.offdiag])
        want = sum(a[j] ** 2 + b[j] ** 2 + b[j + 1] ** 2 for j in range(n))
        assert exact_mean(kern, SQUARE) == pytest.approx(want, rel=1e-12)

    def test_quadrature_below_rank_rejected(self):
        kern = CDKernel(measures.chebyshev(), 10)
        with pytest.raises(PreconditionError):
            exact_mean(kern, SQUARE, m=5)


class TestExactVariance:
    def test_constant_gives_zero(self):
        kern = CDKernel(measures.chebyshev(), 6)
        assert exact_variance(kern, ONE) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("n", [2, 5, 20])
    def test_identity_chebyshev(self, n):
        kern = CDKernel(measures.chebyshev(), n)
        assert exact_variance(kern, IDENTITY) == pytest.approx(0.25, abs=1e-10)

    def test_identity_legendre_n2(self):
        kern = CDKernel(measures.legendre(), 2)
        assert exact_variance(kern, IDENTITY) == pytest.approx(4.0 / 15.0, abs=1e-10)

    def test_variance_equals_squared_offdiag(self):
        """Var X_x = b_n^2 for any family (Christoffel-Darboux computation)."""
        mu = measures.varying_gaussian(8)
        for n in (2, 4, 7):
            kern = CDKernel(mu, n)
            b_n = mu.recurrence(n).offdiag[n - 1]
            assert exact_variance(kern, IDENTITY) == pytest.approx(b_n ** 2, rel=1e-10)

    def test_generic_bound(self):
        kern = CDKernel(measures.legendre(), 12)
        for f in functions.bounded_suite(8):
            assert exact_variance(kern, f) <= 2 * 12 * f.sup_norm ** 2

    @given(coeffs=st.lists(st.floats(-1, 1), min_size=2, max_size=4))
    @settings(max_examples=15, deadline=None)
    def test_representation_agreement_polynomials(self, coeffs):
        """The double-integral and two-term variance forms agree (checked
        internally; disagreement would raise NumericalConsistencyError)."""
        ev = lambda x: np.polynomial.polynomial.polyval(x, np.array(coeffs))
        f = TestFunction(ev, sup_norm=float(np.sum(np.abs(coeffs))) + 1.0)
        var = exact_variance(CDKernel(measures.chebyshev(), 6), f)
        assert var >= -1e-12


class TestScaledVariance:
    def test_alpha_zero_reduces(self):
        kern = CDKernel(measures.chebyshev(), 10)
        s = ScaledStatistic(SQUARE, alpha=0.0, xstar=0.0)
        assert exact_scaled_variance(kern, s) == pytest.approx(
            exact_variance(kern, SQUARE), rel=1e-9)

    @pytest.mark.parametrize("alpha", [0.0, 0.3, 0.5, 0.8])
    def test_lipschitz_bound(self, alpha):
        mu = measures.chebyshev()
        n = 20
        kern = CDKernel(mu, n)
        b_n = mu.recurrence(n).offdiag[n - 1]
        for f in [BUMP, functions.get("cosine")] + functions.bounded_suite(5):
            s = ScaledStatistic(f, alpha, 0.0)
            bound = f.lipschitz ** 2 * b_n ** 2 * n ** (2 * alpha)
            assert exact_scaled_variance(kern, s) <= bound * (1 + 1e-9)

    def test_scaled_variance_rate_decreases(self):
        mu = measures.chebyshev()
        vals = []
        for n in (50, 100, 200):
            s = ScaledStatistic(BUMP, 0.5, 0.0)
            vals.append(n ** (-0.5) * exact_scaled_variance(CDKernel(mu, n), s))
        assert vals[0] > vals[1] > vals[2]


class TestMgf:
    def test_t_zero_is_one(self):
        assert mgf(CDKernel(measures.chebyshev(), 5), SQUARE, 0.0) == 1.0

    def test_constant_function(self):
        # X_f = c*n deterministically
        kern = CDKernel(measures.chebyshev(), 4)
        c, t = 0.7, 0.3
        f = TestFunction(lambda x: np.full_like(x, c), sup_norm=c)
        assert log_mgf(kern, f, t) == pytest.approx(t * c * 4, rel=1e-10)

    def test_cumulant_expansion_chebyshev(self):
        # log E e^{tX_x} = t^2 Var/2 + O(t^4) by symmetry; Var = 1/4
        kern = CDKernel(measures.chebyshev(), 5)
        val = log_mgf(kern, IDENTITY, 0.1)
        assert val == pytest.approx(0.00125, abs=5e-4)

    def test_derivatives_match_moments(self):
        kern = CDKernel(measures.chebyshev(), 8)
        f = SQUARE
        h = 1e-4
        lp, l0, lm = (log_mgf(kern, f, t) for t in (h, 0.0, -h))
        mean = exact_mean(kern, f)
        var = exact_variance(kern, f)
        assert (lp - lm) / (2 * h) == pytest.approx(mean, rel=1e-4)
        assert (lp - 2 * l0 + lm) / h ** 2 == pytest.approx(var, rel=1e-4)

    def test_mgf_positive_and_log_channel_consistent(self):
        kern = CDKernel(measures.legendre(), 6)
        t = 0.25
        assert mgf(kern, BUMP, t) == pytest.approx(math.exp(log_mgf(kern, BUMP, t)))


class TestCommutator:
    def test_constant_commutes(self):
        kern = CDKernel(measures.chebyshev(), 6)
        assert commutator_hs_norm_sq(kern, ONE) == pytest.approx(0.0, abs=1e-12)

    def test_identity_chebyshev(self):
        kern = CDKernel(measures.chebyshev(), 9)
        assert commutator_hs_norm_sq(kern, IDENTITY) == pytest.approx(0.5, abs=1e-10)

    def test_nonnegative(self):
        kern = CDKernel(measures.legendre(), 5)
        for f in functions.bounded_suite(5):
            assert commutator_hs_norm_sq(kern, f) >= 0.0
