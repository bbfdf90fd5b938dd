"""Service-law and parameter-block unit tests.

High-precision quadrature (mpmath) provides independent reference values for
the heavy-tailed transform code.
"""

import math
import random

import mpmath as mp
import numpy as np
import pytest

from rtq.errors import AssumptionViolation, BadParam, Unstable
from rtq.model import (
    Erlang,
    Exponential,
    Mixture,
    ModelParams,
    ParetoShifted,
    validate,
)


def _mp_lst(dist, s, deriv=False):
    mp.mp.dps = 30
    a, sc = mp.mpf(dist.index), mp.mpf(dist.scale)

    def integrand(t):
        dens = (a / sc) * (1 + t / sc) ** (-(a + 1))
        base = mp.e ** (-s * t) * dens
        return -t * base if deriv else base

    return complex(mp.quad(integrand, [0, mp.inf]))


class TestExponential:
    def test_moments_and_lst(self):
        d = Exponential(10.0 / 3.0)
        assert d.mean == pytest.approx(0.3)
        assert d.moment2 == pytest.approx(2 * 0.3**2)
        s = np.array([0.5, 2.0, 1.0 + 1.0j])
        np.testing.assert_allclose(d.lst(s), d.rate / (d.rate + s), rtol=1e-14)
        np.testing.assert_allclose(
            d.lst_deriv(s), -d.rate / (d.rate + s) ** 2, rtol=1e-14
        )

    def test_equilibrium_is_itself(self):
        d = Exponential(2.0)
        e = d.equilibrium()
        assert e.mean == pytest.approx(d.mean)
        assert complex(e.lst(1.3)) == pytest.approx(complex(d.lst(1.3)))

    def test_tail_descriptor(self):
        t = Exponential(2.0).tail
        assert not t.is_power and t.r == pytest.approx(2.0)

    def test_geometric_batch_pmf(self):
        lam, rate, kmax = 1.0, 2.0, 40
        b = Exponential(rate).poisson_mixture_pmf(lam, kmax)
        succ = rate / (lam + rate)
        expect = succ * (lam / (lam + rate)) ** np.arange(kmax + 1)
        np.testing.assert_allclose(b, expect, rtol=1e-12)

    def test_bad_rate(self):
        with pytest.raises(BadParam):
            Exponential(0.0)


class TestErlang:
    def test_moments_and_lst(self):
        d = Erlang(3, 4.0)
        assert d.mean == pytest.approx(0.75)
        assert d.moment2 == pytest.approx(3 * 4 / 16.0)
        s = np.array([0.7, 2.5, 0.4 + 0.9j])
        np.testing.assert_allclose(d.lst(s), (4.0 / (4.0 + s)) ** 3, rtol=1e-13)

    def test_equilibrium_lst_identity(self):
        d = Erlang(3, 4.0)
        e = d.equilibrium()
        for s in (0.3, 1.7, 5.0, 0.8 + 1.1j):
            expect = (1 - complex(d.lst(s))) / (d.mean * s)
            assert complex(e.lst(s)) == pytest.approx(expect, abs=1e-12)

    def test_batch_pmf_mean(self):
        lam, d = 1.3, Erlang(2, 3.0)
        b = d.poisson_mixture_pmf(lam, 400)
        assert b.sum() == pytest.approx(1.0, abs=1e-12)
        assert (b * np.arange(401)).sum() == pytest.approx(lam * d.mean, abs=1e-10)


class TestParetoShifted:
    def test_from_mean(self):
        d = ParetoShifted.from_mean(2.5, 0.6)
        assert d.scale == pytest.approx(0.9)
        assert d.mean == pytest.approx(0.6)
        assert d.moment2 == pytest.approx(2 * 0.81 / (1.5 * 0.5))
        t = d.tail
        assert t.is_power and t.a == 2.5
        assert t.L0 == pytest.approx(0.9**2.5)

    def test_survival(self):
        d = ParetoShifted(2.5, 0.9)
        for t in (0.0, 1.0, 10.0):
            assert d.survival(t) == pytest.approx((1 + t / 0.9) ** -2.5)

    @pytest.mark.parametrize("s", [0.3, 1.0, 4.0, 1.0 + 1.0j, 0.2 + 2.0j])
    def test_lst_against_quadrature(self, s):
        d = ParetoShifted(2.5, 0.9)
        assert complex(d.lst(s)) == pytest.approx(_mp_lst(d, s), abs=1e-11)

    @pytest.mark.parametrize("s", [0.5, 2.0, 0.6 + 0.8j])
    def test_lst_deriv_against_quadrature(self, s):
        d = ParetoShifted(2.2, 1.1)
        assert complex(d.lst_deriv(s)) == pytest.approx(
            _mp_lst(d, s, deriv=True), abs=1e-10
        )

    def test_lst_on_imaginary_axis(self):
        # the inversion contour maps to Re(s) ~ 0; |lst| must stay <= 1
        d = ParetoShifted.from_mean(2.5, 0.6)
        s = 1j * np.linspace(-3.0, 3.0, 21)
        vals = d.lst(s)
        assert np.all(np.abs(vals) <= 1.0 + 1e-12)
        assert complex(d.lst(0.0 + 0j)) == pytest.approx(1.0, abs=1e-12)

    def test_halfplane_clamp_and_rejection(self):
        d = ParetoShifted(2.5, 0.9)
        # round-off sized negative real parts are snapped to the axis
        assert complex(d.lst(-1e-12 + 0.5j)) == pytest.approx(
            complex(d.lst(0.5j)), abs=1e-9
        )
        with pytest.raises(BadParam):
            d.lst(-0.1)

    def test_equilibrium_identity(self):
        d = ParetoShifted(2.5, 0.9)
        e = d.equilibrium()
        assert isinstance(e, ParetoShifted) and e.index == pytest.approx(1.5)
        for s in (0.4, 1.3, 0.9 + 0.7j):
            expect = (1 - complex(d.lst(s))) / (d.mean * s)
            assert complex(e.lst(s)) == pytest.approx(expect, abs=1e-10)

    def test_batch_pmf_consistency(self):
        lam, d = 1.0, ParetoShifted.from_mean(2.5, 0.6)
        b = d.poisson_mixture_pmf(lam, 2000)
        assert np.all(b >= 0)
        assert b.sum() == pytest.approx(1.0, abs=1e-6)
        assert (b * np.arange(2001)).sum() == pytest.approx(lam * d.mean, abs=1e-4)
        # power-law batch tail: b_k ~ L0 * a * k^-(a+1) up to slow variation
        k = np.arange(400, 800)
        ratio = b[k] / (d.tail.L0 * d.index * k.astype(float) ** -3.5)
        assert 0.8 < ratio.mean() < 1.25

    def test_sampling(self):
        d = ParetoShifted.from_mean(2.5, 0.6)
        rng = np.random.default_rng(11)
        x = d.sample(rng, 400_000)
        assert np.all(x >= 0)
        assert x.mean() == pytest.approx(0.6, abs=0.01)
        y = d.sample_one(random.Random(5))
        assert y >= 0.0

    def test_bad_params(self):
        with pytest.raises(BadParam):
            ParetoShifted(-1.0, 1.0)
        with pytest.raises(BadParam):
            ParetoShifted(2.0, 0.0)
        with pytest.raises(BadParam):
            ParetoShifted.from_mean(0.9, 1.0)


class TestMixture:
    def test_lst_and_moments(self):
        m = Mixture([0.5, 0.5], [Exponential(2.0), Erlang(2, 5.0)])
        assert m.mean == pytest.approx(0.5 * 0.5 + 0.5 * 0.4)
        for s in (0.6, 1.0 + 0.5j):
            expect = 0.5 * complex(Exponential(2.0).lst(s)) + 0.5 * complex(
                Erlang(2, 5.0).lst(s)
            )
            assert complex(m.lst(s)) == pytest.approx(expect, abs=1e-13)

    def test_equilibrium_identity(self):
        m = Mixture([0.3, 0.7], [Exponential(1.5), Erlang(3, 6.0)])
        e = m.equilibrium()
        for s in (0.5, 2.0):
            expect = (1 - complex(m.lst(s))) / (m.mean * s)
            assert complex(e.lst(s)) == pytest.approx(expect, abs=1e-11)


class TestModelParams:
    def test_derived_quantities(self, ref_params):
        p = ref_params
        assert p.lambda1 == pytest.approx(0.5)
        assert p.lambda2 == pytest.approx(0.5)
        assert p.rho1 == pytest.approx(0.3)
        assert p.rho2 == pytest.approx(0.15)
        assert p.rho == pytest.approx(0.45)
        assert p.vartheta == pytest.approx(0.15 / 0.7)
        assert p.psi == pytest.approx(0.45 * 0.5 / (1.0 * 0.55))
        assert p.mixed_service.mean == pytest.approx(0.45)

    def test_validate_passes(self, ref_params, alt_params):
        assert validate(ref_params) is ref_params
        assert validate(alt_params) is alt_params

    def test_validate_rejects_bad_split(self):
        with pytest.raises(BadParam):
            validate(
                ModelParams(1.0, 0.0, 1.0, Exponential(4.0), Exponential(4.0))
            )

    def test_validate_rejects_unstable(self):
        with pytest.raises(Unstable):
            validate(
                ModelParams(4.0, 0.5, 1.0, Exponential(2.0), Exponential(2.0))
            )

    def test_validate_rejects_tail_ordering(self):
        with pytest.raises(AssumptionViolation):
            validate(
                ModelParams(
                    1.0, 0.5, 1.0,
                    ParetoShifted.from_mean(2.5, 0.6),
                    ParetoShifted.from_mean(2.0, 0.3),
                )
            )
