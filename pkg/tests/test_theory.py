"""Tests for theory module."""

import math

import numpy as np
import pytest

from src.theory import (
    SemipassiveConstants,
    SpectralPair,
    derived_constants,
    gamma_star,
    gamma_star_factored,
    gamma_star_numeric,
    gamma_tilde,
    gamma_tilde_direct,
    in_region,
    phi,
    phi_curve,
    quotient_compare,
    tau_star,
    tau_star_from_quotient,
    tau_star_max,
)

UNIT = SemipassiveConstants(1.0, 1.0, 1.0, 1.0)
COMPLETE = SpectralPair(1.0, 1.0)
PATH3 = SpectralPair(1 / 3, 1.0)
PATH4 = SpectralPair(0.1464, 0.8536)


@pytest.fixture
def d():
    return derived_constants(UNIT)


class TestDerivedConstants:
    """Tests for derived_constants function."""

    def test_unit_constants(self, d):
        """alpha = c0 = c1 = c2 = 1 gives gamma' = 2, cbar1 = 4, cbar2 = 2."""
        assert d.gamma_prime == 2.0
        assert d.cbar1 == 4.0
        assert d.cbar2 == 2.0

    def test_general_constants(self):
        """Formulas hold for non-unit constants."""
        derived = derived_constants(SemipassiveConstants(2.0, 0.5, 3.0, 1.5))
        assert derived.gamma_prime == pytest.approx(4.0 / 8.0 + 3.0)
        assert derived.cbar1 == pytest.approx((12.0 + 0.75 + 2.25) / 2.25)
        assert derived.cbar2 == pytest.approx(4.0 / 2.25)

    def test_positive_constants_required(self):
        """Every constant must be strictly positive."""
        with pytest.raises(ValueError):
            SemipassiveConstants(1.0, 0.0, 1.0, 1.0)


class TestPhi:
    """Tests for phi and phi_curve."""

    def test_zero_at_threshold(self, d):
        """phi vanishes where lambda2*gamma = gamma'."""
        value = phi(d.gamma_prime / COMPLETE.lambda2, d, COMPLETE)
        assert value.value == pytest.approx(0.0, abs=1e-15)
        assert not value.below_domain

    def test_negative_below_domain(self, d):
        """Below the threshold phi is negative and flagged."""
        value = phi(1.0, d, COMPLETE)
        assert value.value < 0
        assert value.below_domain

    def test_peak_value(self, d):
        """phi(gamma*) = tau*."""
        assert phi(gamma_star(d, COMPLETE), d, COMPLETE).value == pytest.approx(tau_star(d, COMPLETE))

    def test_decays(self, d):
        """phi tends to zero for large gamma."""
        assert 0 < phi(1e8, d, COMPLETE).value < 1e-7

    def test_non_positive_gamma(self, d):
        """gamma <= 0 is outside the definition."""
        with pytest.raises(ValueError):
            phi(0.0, d, COMPLETE)

    def test_curve(self, d):
        """phi_curve tabulates gamma, phi and the domain flag."""
        frame = phi_curve(np.array([1.0, 2.0, 5.0]), d, COMPLETE)
        assert list(frame.columns) == ['gamma', 'phi', 'below_domain']
        assert frame['below_domain'].tolist() == [True, False, False]
        assert frame['phi'].iloc[1] == pytest.approx(0.0, abs=1e-15)


class TestOptimum:
    """Tests for gamma*, gamma_tilde and tau*."""

    def test_gamma_star_reference(self, d):
        """gamma* = 4.8138 for unit constants and lambda2 = lambda_k = 1."""
        assert gamma_star(d, COMPLETE) == pytest.approx(4.8138, abs=1e-4)

    def test_gamma_tilde_reference(self, d):
        """gamma_tilde = -0.3693 for unit constants."""
        assert gamma_tilde(d, UNIT, COMPLETE) == pytest.approx(-0.3693, abs=1e-4)

    def test_gamma_tilde_forms_agree(self, d):
        """The rationalized and direct gamma_tilde forms agree."""
        for sp in (COMPLETE, PATH3, PATH4):
            assert gamma_tilde(d, UNIT, sp) == pytest.approx(gamma_tilde_direct(d, sp), rel=1e-9)

    def test_gamma_tilde_non_unit_c2(self):
        """With c2 != 1 both gamma_tilde forms still agree."""
        c = SemipassiveConstants(6.406, 2.771, 0.506, 0.264)
        derived = derived_constants(c)
        sp = SpectralPair(0.885, 8.15)
        value = gamma_tilde(derived, c, sp)
        assert value == pytest.approx(gamma_tilde_direct(derived, sp), rel=1e-9)

    def test_tau_star_reference(self, d):
        """tau* = 2 / (12 + sqrt(136)) at quotient 1."""
        assert tau_star_max(d) == pytest.approx(2.0 / (12.0 + math.sqrt(136.0)), rel=1e-12)
        assert tau_star_max(d) == pytest.approx(0.084524, abs=1e-6)

    def test_factored_form(self, d):
        """gamma* factors as gamma'/lambda2 times a function of the quotient."""
        for sp in (COMPLETE, PATH3, PATH4):
            assert gamma_star_factored(d, sp) == pytest.approx(gamma_star(d, sp), rel=1e-12)

    def test_numeric_maximizer(self, d):
        """A bounded scalar search finds the same maximizer."""
        for sp in (COMPLETE, PATH3, PATH4):
            assert gamma_star_numeric(d, sp) == pytest.approx(gamma_star(d, sp), rel=1e-6)

    def test_tau_star_depends_on_quotient_only(self, d):
        """Scaling the spectrum leaves tau* unchanged."""
        assert tau_star(d, SpectralPair(0.5, 1.0)) == pytest.approx(tau_star(d, SpectralPair(2.0, 4.0)))

    def test_tau_star_decreases_with_quotient(self, d):
        """Larger quotients tolerate smaller delays."""
        values = [tau_star_from_quotient(d, q) for q in (1.0, 2.0, 3.0, 5.83)]
        assert values == sorted(values, reverse=True)

    def test_gamma_star_scales_inverse_lambda2(self, d):
        """At fixed quotient gamma* is proportional to 1/lambda2."""
        ratio = gamma_star(d, SpectralPair(0.5, 1.0)) / gamma_star(d, SpectralPair(1.0, 2.0))
        assert ratio == pytest.approx(2.0)

    def test_quotient_below_one(self, d):
        """Quotients below one do not exist."""
        with pytest.raises(ValueError):
            tau_star_from_quotient(d, 0.5)


class TestInRegion:
    """Tests for in_region function."""

    def test_inside(self, d):
        """Half the peak delay at gamma* is inside."""
        gamma = gamma_star(d, COMPLETE)
        assert in_region(gamma, 0.5 * tau_star(d, COMPLETE), d, COMPLETE)

    def test_above_boundary(self, d):
        """Above phi is outside."""
        gamma = gamma_star(d, COMPLETE)
        assert not in_region(gamma, 1.01 * tau_star(d, COMPLETE), d, COMPLETE)

    def test_below_coupling_threshold(self, d):
        """lambda2*gamma <= gamma' is outside even with no delay."""
        assert not in_region(5.9, 0.0, d, PATH3)
        assert in_region(6.1, 0.0, d, PATH3)

    def test_literal_threshold(self, d):
        """The literal threshold compares gamma itself with gamma'."""
        sp = SpectralPair(2.0, 2.0)
        assert in_region(1.5, 0.0, d, sp)
        assert not in_region(1.5, 0.0, d, sp, literal_threshold=True)

    def test_delta_bar(self, d):
        """A coupling bound delta_bar excludes gamma >= delta_bar/2."""
        gamma = gamma_star(d, COMPLETE)
        assert not in_region(gamma, 0.0, d, COMPLETE, delta_bar=8.0)
        assert in_region(gamma, 0.0, d, COMPLETE, delta_bar=10.0)

    def test_negative_arguments(self, d):
        """Negative gamma or tau is an error."""
        with pytest.raises(ValueError):
            in_region(-1.0, 0.0, d, COMPLETE)


class TestQuotientCompare:
    """Tests for quotient_compare function."""

    def test_both_complete(self):
        """Two quotient-1 graphs share the best tau*."""
        prediction = quotient_compare(COMPLETE, SpectralPair(1.0, 1.0))
        assert prediction.tau_order == '='
        assert prediction.gamma_order == '='
        assert prediction.case == 'best-case'
        assert prediction.at_tau_max

    def test_equal_quotient(self):
        """Equal quotients: equal tau*, larger lambda2 needs less coupling."""
        prediction = quotient_compare(SpectralPair(1.0, 2.0), SpectralPair(0.5, 1.0))
        assert prediction.tau_order == '='
        assert prediction.gamma_order == '<='
        assert prediction.case == 'equal-quotient'

    def test_equal_lambda2(self):
        """Equal lambda2: larger quotient gives smaller tau* and smaller gamma*."""
        prediction = quotient_compare(SpectralPair(0.5, 1.5), SpectralPair(0.5, 1.0))
        assert prediction.tau_order == '<'
        assert prediction.gamma_order == '<='
        assert prediction.case == 'ordered'

    def test_incomparable_gamma(self):
        """Different quotients and lambda2 leave gamma* unordered."""
        prediction = quotient_compare(PATH3, PATH4)
        assert prediction.tau_order == '>'
        assert prediction.gamma_order == 'incomparable'

    def test_lambda_k_below_lambda2(self):
        """lambda_k < lambda2 is not a spectrum."""
        with pytest.raises(ValueError):
            SpectralPair(1.0, 0.5)


def random_cases(n=1000, seed=20240517):
    """Seeded random (constants, derived, spectral pair) triples."""
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(n):
        alpha, c0, c1, c2 = rng.uniform(0.2, 5.0, size=4)
        c = SemipassiveConstants(alpha, c0, c1, c2)
        lambda2 = rng.uniform(0.05, 2.0)
        quotient = rng.uniform(1.0, 10.0)
        cases.append((c, derived_constants(c), SpectralPair(lambda2, quotient * lambda2)))
    return cases


@pytest.fixture(scope='module')
def cases():
    return random_cases()


class TestRandomConstants:
    """Closed-form properties over random positive constants and spectra."""

    def test_phi_zero_at_threshold(self, cases):
        """phi(gamma'/lambda2) = 0."""
        for _, d, sp in cases:
            value = phi(d.gamma_prime / sp.lambda2, d, sp).value
            assert abs(value) <= 1e-9 * tau_star(d, sp)

    def test_tau_star_is_peak_value(self, cases):
        """tau* = phi(gamma*) to relative 1e-9."""
        for _, d, sp in cases:
            peak = tau_star(d, sp)
            assert abs(peak - phi(gamma_star(d, sp), d, sp).value) / peak < 1e-9

    def test_gamma_star_is_stationary_maximum(self, cases):
        """The central difference vanishes at gamma* and neighbours lie lower."""
        for _, d, sp in cases:
            g = gamma_star(d, sp)
            peak = phi(g, d, sp).value

            step = 1e-5 * g
            slope = (phi(g + step, d, sp).value - phi(g - step, d, sp).value) / (2.0 * step)
            assert abs(slope) * g / peak < 1e-6

            wide = 1e-3 * g
            assert phi(g - wide, d, sp).value < peak
            assert phi(g + wide, d, sp).value < peak

    def test_gamma_tilde(self, cases):
        """gamma_tilde is negative, its numerator identity holds and both forms agree."""
        for c, d, sp in cases:
            value = gamma_tilde(d, c, sp)
            assert value < 0

            lhs = 2.0 * d.cbar2 * d.gamma_prime - d.cbar1 ** 2
            rhs = -4.0 * c.alpha * c.c1 * (c.c0 * c.c2 + c.alpha * c.c1) / c.c2 ** 4
            assert abs(lhs - rhs) <= 1e-12 * max(2.0 * d.cbar2 * d.gamma_prime, d.cbar1 ** 2)

            assert abs(value - gamma_tilde_direct(d, sp)) <= 1e-10 * gamma_star(d, sp)

    def test_phi_is_unimodal(self, cases):
        """Sampled phi rises up to its peak and falls after it."""
        for _, d, sp in cases:
            start = d.gamma_prime / sp.lambda2 * (1.0 + 1e-6)
            gammas = np.geomspace(start, 50.0 * gamma_star(d, sp), 400)
            values = phi_curve(gammas, d, sp)['phi'].to_numpy()
            steps = np.diff(values)
            peak = int(np.argmax(values))
            assert np.all(steps[:peak] > 0)
            assert np.all(steps[peak:] < 0)

    def test_lambda2_rescaling(self, cases):
        """Scaling the spectrum by s keeps tau* and scales gamma* by 1/s."""
        for _, d, sp in cases:
            base_tau = tau_star(d, sp)
            base_gamma = gamma_star(d, sp)
            for scale in (0.1, 1.0, 10.0):
                scaled = SpectralPair(scale * sp.lambda2, scale * sp.lambda_k)
                assert tau_star(d, scaled) == pytest.approx(base_tau, rel=1e-10)
                assert scale * gamma_star(d, scaled) == pytest.approx(base_gamma, rel=1e-10)

    def test_tau_star_strictly_decreasing(self, cases):
        """tau* falls strictly as the quotient grows."""
        for _, d, _ in cases:
            values = [tau_star_from_quotient(d, q) for q in (1.0, 1.5, 2.0, 3.0, 6.0)]
            assert all(a > b for a, b in zip(values, values[1:]))
