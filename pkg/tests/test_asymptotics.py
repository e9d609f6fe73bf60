import math

import numpy as np
import pytest
from scipy import integrate

from opelab import asymptotics, functions, measures
from opelab.errors import DomainError, PreconditionError
from opelab.kernel import CDKernel, kernel_tilde
from opelab.linstat import TestFunction

BUMP = functions.get("smooth_bump")


class TestSineKernel:
    def test_removable_singularity(self):
        assert asymptotics.sine_kernel(0.3, 0.3) == 1.0

    def test_half_spacing(self):
        assert asymptotics.sine_kernel(0.0, 0.5) == pytest.approx(2.0 / math.pi)

    @pytest.mark.parametrize("k", [1, 2, -3])
    def test_integer_zeros(self, k):
        assert asymptotics.sine_kernel(0.0, float(k)) == pytest.approx(0.0, abs=1e-15)

    def test_even_and_bounded(self):
        for d in np.linspace(-4, 4, 33):
            v = asymptotics.sine_kernel(0.0, d)
            assert abs(v) <= 1.0
            assert v == pytest.approx(asymptotics.sine_kernel(0.0, -d))


class TestEquilibriumDensities:
    def test_arcsine_normalized(self):
        rho = asymptotics.arcsine_density()
        mass, _ = integrate.quad(lambda x: rho(x), -1, 1)
        assert mass == pytest.approx(1.0, abs=1e-8)
        assert rho(0.0) == pytest.approx(1.0 / math.pi, abs=1e-12)

    def test_semicircle_normalized(self):
        mu = measures.varying_gaussian(40)
        rho = asymptotics.semicircle_density(mu, 40)
        lo, hi = rho.support
        assert hi == pytest.approx(2.0, abs=1e-12)  # edge from the recurrence
        mass, _ = integrate.quad(lambda x: rho(x), lo, hi)
        assert mass == pytest.approx(1.0, abs=1e-8)

    def test_semicircle_radius_scales_with_rank(self):
        mu = measures.varying_gaussian(100)
        rho = asymptotics.semicircle_density(mu, 25)
        assert rho.support[1] == pytest.approx(1.0, abs=1e-12)  # 2 sqrt(25/100)


class TestNevaiIntegral:
    def test_constant_is_exactly_zero(self):
        kern = CDKernel(measures.chebyshev(), 30)
        c = TestFunction(lambda x: np.full_like(x, 0.3), sup_norm=0.3)
        assert abs(asymptotics.nevai_integral(kern, c, 0.1)) < 1e-12

    def test_rank_one_reduction(self):
        # n=1: K is constant 1, so the integral is E_mu f - f(x)
        mu = measures.legendre()
        kern = CDKernel(mu, 1)
        got = asymptotics.nevai_integral(kern, functions.get("square"), 0.5)
        assert got == pytest.approx(1.0 / 3.0 - 0.25, abs=1e-10)

    def test_bump_magnitude_decreases(self):
        mu = measures.chebyshev()
        vals = [abs(asymptotics.nevai_integral(CDKernel(mu, n), BUMP, 0.0))
                for n in (25, 50, 100)]
        assert vals[0] > vals[1] > vals[2]


class TestAlphaNevai:
    def test_constant_is_exactly_zero(self):
        kern = CDKernel(measures.chebyshev(), 20)
        c = TestFunction(lambda x: np.full_like(x, 0.9), sup_norm=0.9)
        assert asymptotics.alpha_nevai_functional(kern, c, 0.5, 0.0) < 1e-12

    def test_s_zero_alpha_zero_reduces_to_nevai(self):
        kern = CDKernel(measures.chebyshev(), 15)
        a = asymptotics.alpha_nevai_functional(kern, BUMP, 0.0, 0.0, s_grid=[0.0])
        b = abs(asymptotics.nevai_integral(kern, BUMP, 0.0))
        assert a == pytest.approx(b, rel=1e-8)

    def test_decreasing_along_n(self):
        mu = measures.chebyshev()
        vals = [asymptotics.alpha_nevai_functional(CDKernel(mu, n), BUMP, 0.5, 0.0)
                for n in (50, 100, 200)]
        assert vals[0] > vals[1] > vals[2]

    def test_out_of_support_evaluation_point(self):
        kern = CDKernel(measures.chebyshev(), 10)
        with pytest.raises(DomainError):
            asymptotics.alpha_nevai_functional(kern, BUMP, 0.1, 0.9, s_grid=[2.0])


class TestConcentrationMass:
    def test_full_support_is_one(self):
        kern = CDKernel(measures.chebyshev(), 50)
        assert asymptotics.concentration_mass(kern, 0.0, 2.5) == pytest.approx(
            1.0, abs=1e-9)

    def test_rank_one_is_measure_of_window(self):
        kern = CDKernel(measures.legendre(), 1)
        assert asymptotics.concentration_mass(kern, 0.2, 0.3) == pytest.approx(
            0.3, abs=1e-9)

    def test_increasing_toward_one(self):
        mu = measures.chebyshev()
        vals = [asymptotics.concentration_mass(CDKernel(mu, n), 0.0, 0.1)
                for n in (25, 50, 100)]
        assert vals[0] < vals[1] < vals[2] < 1.0

    def test_monotone_in_delta(self):
        kern = CDKernel(measures.chebyshev(), 40)
        masses = [asymptotics.concentration_mass(kern, 0.0, d)
                  for d in (0.05, 0.1, 0.2)]
        assert masses[0] < masses[1] < masses[2]


class TestUniversality:
    def test_degenerate_box(self):
        kern = CDKernel(measures.chebyshev(), 30)
        assert asymptotics.universality_error(kern, 0.0, box=0.0, grid=1) == pytest.approx(
            0.0, abs=1e-12)

    def test_error_decreases_with_n(self):
        mu = measures.chebyshev()
        e50 = asymptotics.universality_error(CDKernel(mu, 50), 0.0, grid=11)
        e200 = asymptotics.universality_error(CDKernel(mu, 200), 0.0, grid=11)
        assert e200 < e50


class TestTotik:
    def test_self_comparison_is_zero(self):
        kern = CDKernel(measures.chebyshev(), 30)
        x = np.linspace(-0.5, 0.5, 11)
        vals = np.asarray(kernel_tilde(kern, x, x)) / 30.0
        rho = asymptotics.EquilibriumDensity(
            "self", lambda y: np.interp(y, x, vals), (-0.5, 0.5))
        assert asymptotics.totik_error(kern, rho, (-0.5, 0.5), grid=11) == pytest.approx(
            0.0, abs=1e-14)

    def test_chebyshev_converges_to_arcsine(self):
        mu = measures.chebyshev()
        rho = asymptotics.arcsine_density()
        e50 = asymptotics.totik_error(CDKernel(mu, 50), rho, (-0.5, 0.5))
        e200 = asymptotics.totik_error(CDKernel(mu, 200), rho, (-0.5, 0.5))
        assert e200 < e50
        assert e200 <= 0.02 / math.pi


class TestDecayDiagnostic:
    def test_flags_and_slope(self):
        d = asymptotics.decay_diagnostic([10, 20, 40], [0.4, 0.2, 0.1])
        assert d.is_decreasing
        assert d.fit_slope == pytest.approx(-1.0, abs=1e-10)

    def test_non_monotone_flagged(self):
        d = asymptotics.decay_diagnostic([10, 20, 40], [0.4, 0.5, 0.1])
        assert not d.is_decreasing

    def test_constant_function_all_zero(self):
        mu = measures.chebyshev()
        c = TestFunction(lambda x: np.full_like(x, 2.0), sup_norm=2.0)
        d = asymptotics.variance_decay_diagnostic(mu, c, 0.5, 0.0, [10, 20])
        assert np.allclose(d.values, 0.0, atol=1e-12)

    def test_bump_variance_rate(self):
        mu = measures.chebyshev()
        d = asymptotics.variance_decay_diagnostic(mu, BUMP, 0.5, 0.0, [50, 100, 200])
        assert d.is_decreasing and d.fit_slope < 0

    def test_alpha_range(self):
        with pytest.raises(PreconditionError):
            asymptotics.variance_decay_diagnostic(measures.chebyshev(), BUMP,
                                                  1.0, 0.0, [10, 20])
