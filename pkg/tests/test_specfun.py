import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphmax.specfun import (
    ComplexOrder,
    GammaPoleError,
    asymptotic_threshold,
    bessel_envelope,
    bessel_j,
    bessel_j_scaled,
    expansion_residual,
    gamma,
    hankel_coefficients,
    hankel_expansion,
    rgamma,
)

mpmath.mp.dps = 30
GAMMA_TOL = 1e-12
BESSEL_TOL = 1e-10


def mp_j(beta, r):
    return complex(mpmath.besselj(mpmath.mpc(beta.real, beta.imag), r))


def rel_err(got, want, scale):
    return abs(got - want) / scale


class TestComplexOrder:
    @pytest.mark.parametrize("text,z", [("1+0i", 1), ("0+1i", 1j), ("-0.5-2i", -0.5 - 2j), ("3", 3), ("2i", 2j)])
    def test_parse(self, text, z):
        assert complex(ComplexOrder.parse(text)) == z

    def test_round_trip(self):
        a = ComplexOrder(0.25, -1.5)
        assert ComplexOrder.parse(str(a)) == a

    def test_rejects(self):
        with pytest.raises(ValueError):
            ComplexOrder.parse("one")
        with pytest.raises(ValueError):
            ComplexOrder(float("nan"), 0)


class TestGamma:
    def test_classical_values(self):
        assert gamma(1) == pytest.approx(1, rel=1e-15)
        assert abs(gamma(0.5) - math.sqrt(math.pi)) / math.sqrt(math.pi) < GAMMA_TOL

    def test_recurrence_oracle(self):
        g2 = complex(gamma(2 + 4j))
        g3 = complex(gamma(3 + 4j))
        assert abs(g3 - (2 + 4j) * g2) / abs(g3) < GAMMA_TOL

    def test_poles(self):
        for z in (0, -1, -7):
            with pytest.raises(GammaPoleError):
                gamma(z)
            assert rgamma(z) == 0

    def test_against_mpmath(self):
        rng = np.random.default_rng(5)
        zs = rng.uniform(-12, 12, 300) + 1j * rng.uniform(-12, 12, 300)
        zs = np.concatenate([zs, rng.uniform(-9.5, 30, 100) + 0j])
        worst = 0.0
        for z in zs:
            want = complex(mpmath.gamma(mpmath.mpc(z.real, z.imag)))
            worst = max(worst, abs(complex(gamma(z)) - want) / abs(want))
        assert worst < GAMMA_TOL

    def test_vectorized(self):
        z = np.array([1.0, 2.0, 3.0, 4.5])
        np.testing.assert_allclose(gamma(z), [1, 1, 2, math.gamma(4.5)], rtol=1e-14)


class TestBesselJ:
    def test_half_integer_closed_form(self):
        assert abs(bessel_j(0.5, math.pi / 2) - 2 / math.pi) < 1e-14

    def test_first_zero_of_j0(self):
        # independent root: mpmath's own series root-finder
        root = float(mpmath.findroot(lambda x: mpmath.besselj(0, x), 2.4))
        assert abs(root - 2.4048255577) < 1e-9
        assert abs(bessel_j(0, root)) < 1e-8

    def test_small_argument(self):
        r = 1e-8
        assert abs(bessel_j(1, r) - r / 2) < 1e-20

    @pytest.mark.parametrize("beta", [0, 0.5, 1, 2.5, 7, 10, -0.3, -2.5, 1j, 3 - 4j, -1.5 + 2j, 0.5 + 6j, 8 + 6j])
    def test_against_mpmath(self, beta):
        r = np.concatenate([np.geomspace(1e-3, 1e4, 60), [asymptotic_threshold(beta) * (1 + 1e-9)]])
        got = bessel_j(beta, r)
        worst = 0.0
        for ri, gi in zip(r, got):
            want = mp_j(beta, ri)
            scale = max(abs(want), bessel_envelope(beta, ri)) if ri >= 1 else abs(want)
            worst = max(worst, rel_err(gi, want, scale))
        assert worst < BESSEL_TOL

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0, 5), st.floats(0.05, 200))
    def test_realness_for_real_order(self, beta, r):
        v = bessel_j(beta, r)
        assert abs(v.imag) <= 1e-12 * max(abs(v), bessel_envelope(beta, max(r, 1.0)))

    @pytest.mark.parametrize("beta", [0.3, 2.0, 5.5, 1.5 + 2j, -0.7 + 0.5j, 3j])
    def test_three_term_recurrence(self, beta):
        r = np.linspace(0.5, 300, 500)
        lhs = bessel_j(beta - 1, r) + bessel_j(beta + 1, r)
        rhs = 2 * beta / r * bessel_j(beta, r)
        scale = np.abs(rhs) + bessel_envelope(beta + 1, np.maximum(r, 1))
        assert np.max(np.abs(lhs - rhs) / scale) < 1e-8

    @pytest.mark.parametrize("beta", [0, 2.5, 1 + 1j, 4 - 2j])
    def test_cross_regime_agreement(self, beta):
        from sphmax import specfun

        thr = asymptotic_threshold(beta)
        z = np.linspace(thr / 2, 2 * thr, 50)
        a = specfun._miller(complex(beta), z)
        b = specfun._hankel_pq(complex(beta), z)
        assert np.max(np.abs(a - b) / bessel_envelope(beta, z)) < 1e-9

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            bessel_j(0, 0.0)


class TestScaled:
    @pytest.mark.parametrize("beta", [0, 0.5, -0.5, 1j, 2 - 1j])
    def test_origin_value(self, beta):
        want = complex(rgamma(complex(beta) + 1))
        assert abs(bessel_j_scaled(beta, 0.0) - want) < 1e-15

    def test_matches_unscaled(self):
        z = np.linspace(0.1, 80, 100)
        b = 0.7 + 0.3j
        np.testing.assert_allclose(bessel_j_scaled(b, z) * (z / 2) ** b, bessel_j(b, z), rtol=1e-11, atol=1e-15)


class TestHankelCoefficients:
    @pytest.mark.parametrize("beta", [0, 1.5, 2 + 1j])
    def test_leading_coefficients(self, beta):
        c = hankel_coefficients(beta, 3)
        ph = cmath.exp(1j * (complex(beta) * math.pi / 2 + math.pi / 4))
        assert abs(c.b[0] - (2 * math.pi) ** -0.5 / ph) < 1e-15
        assert abs(c.d[0] - (2 * math.pi) ** -0.5 * ph) < 1e-15
        assert c.b[0] != 0 and c.d[0] != 0

    def test_leading_term_against_bessel(self):
        c = hankel_coefficients(1.25, 1)
        r = np.linspace(5e3, 1e4, 20)
        err = np.abs(hankel_expansion(c, r) - bessel_j(1.25, r)) * np.sqrt(r)
        assert err.max() < 1e-3

    @pytest.mark.parametrize("beta", [0, 0.5, 3, 7.25])
    def test_conjugate_symmetry(self, beta):
        c = hankel_coefficients(beta, 6)
        for b, d in zip(c.b, c.d):
            assert abs(b - d.conjugate()) < 1e-15 * max(1, abs(b))

    def test_half_order_is_exact(self):
        r = np.linspace(1, 500, 100)
        for N in (1, 2, 5):
            got = hankel_expansion(hankel_coefficients(0.5, N), r)
            np.testing.assert_allclose(got.real, np.sqrt(2 / (np.pi * r)) * np.sin(r), atol=1e-14)

    def test_rejects_n0(self):
        with pytest.raises(ValueError):
            hankel_coefficients(0, 0)


class TestExpansionResidual:
    def test_decay_slope(self):
        r = 2.0 ** np.arange(3, 10)
        res = expansion_residual(0, 3, r)
        slope = np.polyfit(np.log2(r), np.log2(res), 1)[0]
        assert slope <= -(3 + 0.5) + 0.3
        assert slope >= -(3 + 0.5) - 0.3

    def test_half_order_machine_epsilon(self):
        r = np.geomspace(1, 1e4, 40)
        for N in (1, 3):
            assert expansion_residual(0.5, N, r).max() < 1e-14

    def test_more_terms_help_on_dyadic_samples(self):
        r = 2.0 ** np.arange(4, 11)
        assert np.all(expansion_residual(2, 2, r) < expansion_residual(2, 1, r))

    def test_more_terms_help_on_octave_envelopes(self):
        # pointwise comparison fails near zeros of the oscillating N = 1 residual
        for k in range(4, 10):
            r = np.linspace(2.0 ** k, 2.0 ** (k + 1), 200)
            assert expansion_residual(2, 2, r).max() < expansion_residual(2, 1, r).max()

    def test_rejects_small_r(self):
        with pytest.raises(ValueError):
            expansion_residual(0, 2, [0.5, 2])
