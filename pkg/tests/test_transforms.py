"""Fixed points, factorizations and contour inversion."""

import numpy as np
import pytest

from rtq import transforms as T
from rtq.errors import InversionError
from rtq.model import Erlang, Exponential, ModelParams, ParetoShifted


@pytest.fixture(scope="module")
def exp_params():
    return ModelParams(1.0, 0.5, 1.0, Exponential(2.0), Exponential(10.0 / 3.0))


@pytest.fixture(scope="module")
def erlang_params():
    return ModelParams(1.0, 0.4, 2.0, Erlang(2, 5.0), Exponential(4.0))


class TestFixedPoints:
    def test_alpha_quadratic_oracle(self, exp_params):
        # with an exponential high-priority law the busy-period root solves
        # lam1 a^2 - (nu + s + lam1) a + nu = 0; take the smaller root
        p, nu = exp_params, 2.0
        for s in (0.0, 0.3, 2.0, 0.5 + 1.0j):
            b = nu + s + p.lambda1
            disc = np.sqrt(b**2 - 4 * p.lambda1 * nu + 0j)
            expect = (b - disc) / (2 * p.lambda1)
            assert complex(T.solve_alpha(p, s)) == pytest.approx(
                complex(expect), abs=1e-11
            )

    def test_alpha_solves_its_equation(self, ref_params, erlang_params):
        for p in (ref_params, erlang_params):
            s = np.array([0.1, 1.0, 0.4 + 0.8j])
            a = T.solve_alpha(p, s)
            resid = a - p.dist1.lst(s + p.lambda1 * (1 - a))
            assert np.max(np.abs(resid)) < 1e-11

    def test_h_matches_alpha_composition(self, ref_params, erlang_params):
        for p in (ref_params, erlang_params):
            z = np.linspace(0.0, 1.0, 11) + 0j
            err = np.abs(T.solve_h(p, z) - T.solve_alpha(p, p.lambda2 * (1 - z)))
            assert np.max(err) < 1e-11

    def test_boundary_values(self, ref_params):
        assert complex(T.solve_h(ref_params, 1.0 + 0j)) == pytest.approx(1.0, abs=1e-12)
        assert complex(T.solve_alpha(ref_params, 0.0 + 0j)) == pytest.approx(
            1.0, abs=1e-12
        )

    def test_g_definition(self, ref_params):
        p = ref_params
        z = 0.37 + 0j
        h = T.solve_h(p, z)
        assert complex(T.eval_g(p, z)) == pytest.approx(
            complex(p.q * h + p.p * z), abs=1e-14
        )

    def test_equilibrium_lst_removable_point(self, ref_params):
        assert complex(
            T.alpha_equilibrium_lst(ref_params, 0.0 + 0j)
        ) == pytest.approx(1.0, abs=1e-12)
        near = complex(T.alpha_equilibrium_lst(ref_params, 1e-6 + 0j))
        assert near == pytest.approx(1.0, abs=1e-5)


class TestOrbitFactors:
    def test_factors_are_pgfs_at_one(self, ref_params):
        kf = T.factor_K(ref_params, 1.0 + 0j)
        for v in kf:
            assert complex(v) == pytest.approx(1.0, abs=1e-9)

    def test_product_structure(self, ref_params):
        kf = T.factor_K(ref_params, 0.6 + 0j)
        assert complex(kf.k) == pytest.approx(
            complex(kf.ka * kf.kb * kf.kc), abs=1e-13
        )

    def test_branch_continuity_near_one(self, ref_params):
        # the difference-quotient and geometric-limit branches must agree
        # across the switch point
        vals = [complex(T.factor_K(ref_params, 1.0 - eps + 0j).kc)
                for eps in (1e-5, 1e-6, 1e-8, 0.0)]
        for a, b in zip(vals, vals[1:]):
            assert a == pytest.approx(b, abs=1e-4)

    def test_r0_is_a_pgf_at_one(self, ref_params):
        assert complex(T.eval_R0(ref_params, 1.0 + 0j)) == pytest.approx(
            1.0, abs=1e-10
        )
        mid = complex(T.eval_R0(ref_params, 0.5 + 0j))
        assert 0.0 < mid.real < 1.0 and abs(mid.imag) < 1e-12


class TestStationaryTransforms:
    def test_everything_is_one_at_one(self, ref_params):
        p = ref_params
        one = 1.0 + 0j
        for fn in (T.eval_M1, T.eval_M2, T.eval_R1, T.eval_R2,
                   T.eval_H_beta1, T.eval_H_beta2):
            assert complex(fn(p, one, one)) == pytest.approx(1.0, abs=1e-9)
        for i in (1, 2):
            assert complex(T.eval_S_beta(p, i, one, one)) == pytest.approx(
                1.0, abs=1e-10
            )

    def test_m1_factored_vs_raw(self, ref_params):
        p = ref_params
        for z1, z2 in ((0.2, 0.8), (0.7, 0.3), (0.9, 0.9)):
            assert complex(T.eval_M1(p, z1 + 0j, z2 + 0j)) == pytest.approx(
                complex(T.eval_M1_raw(p, z1 + 0j, z2 + 0j)), abs=1e-11
            )

    def test_h_beta_limit_branch(self, ref_params):
        # approaching the removable singularity z1 -> h(z2) must agree with
        # the derivative-limit branch
        p = ref_params
        z2 = 0.4 + 0j
        h = complex(T.solve_h(p, z2))
        at_limit = complex(T.eval_H_beta1(p, h, z2))
        nearby = complex(T.eval_H_beta1(p, h + 1e-6, z2))
        assert nearby == pytest.approx(at_limit, rel=1e-4)

    def test_raw_forms_interior_points(self, ref_params):
        # the raw balance-equation forms hold on the open square; the
        # factored forms extend continuously to the boundary
        p = ref_params
        for z1, z2 in ((0.5, 0.95), (0.95, 0.5), (0.25, 0.25)):
            assert complex(T.eval_R1(p, z1 + 0j, z2 + 0j)) == pytest.approx(
                complex(T.eval_R1_raw(p, z1 + 0j, z2 + 0j)), abs=1e-9
            )
            assert complex(T.eval_R2(p, z1 + 0j, z2 + 0j)) == pytest.approx(
                complex(T.eval_R2_raw(p, z1 + 0j, z2 + 0j)), abs=1e-9
            )


class TestExtractPmf:
    def test_geometric_exact(self):
        g = 0.35
        pmf = T.extract_pmf(lambda z: (1 - g) / (1 - g * z), 40, radius=0.9)
        expect = (1 - g) * g ** np.arange(41)
        np.testing.assert_allclose(pmf.probs, expect, atol=1e-12)
        assert pmf.deficit == pytest.approx(g**41 * 1, abs=1e-10)

    def test_survival_counts_deficit(self):
        g = 0.5
        pmf = T.extract_pmf(lambda z: (1 - g) / (1 - g * z), 10, radius=0.9)
        surv = pmf.survival()
        np.testing.assert_allclose(surv, g ** np.arange(1, 12), atol=1e-12)

    def test_rejects_bad_radius_and_n(self):
        f = lambda z: np.ones_like(np.asarray(z, dtype=complex))
        with pytest.raises(InversionError):
            T.extract_pmf(f, 10, radius=0.0)
        with pytest.raises(InversionError):
            T.extract_pmf(f, 0, radius=0.9)

    def test_rejects_non_pgf(self):
        with pytest.raises(InversionError):
            T.extract_pmf(lambda z: 0.5 * np.ones_like(np.asarray(z, dtype=complex)),
                          10, radius=0.9)

    def test_rejects_negative_coefficients(self):
        with pytest.raises(InversionError):
            T.extract_pmf(lambda z: 2.0 * z - z**2, 10, radius=0.9)

    def test_rejects_hopeless_roundoff(self):
        g = 0.35
        with pytest.raises(InversionError, match="round-off"):
            T.extract_pmf(lambda z: (1 - g) / (1 - g * z), 500, radius=0.9)

    def test_radius_above_one_for_light_tails(self):
        g = 0.2  # analytic up to 1/g = 5
        pmf = T.extract_pmf(lambda z: (1 - g) / (1 - g * z), 60, radius=2.0)
        expect = (1 - g) * g ** np.arange(61)
        np.testing.assert_allclose(pmf.probs, expect, atol=1e-14)


class TestConditionalPmfs:
    def test_shapes_and_mass(self, bulk_pmfs):
        assert sorted(bulk_pmfs) == ["R0", "R11", "R12", "R21", "R22"]
        for pmf in bulk_pmfs.values():
            assert len(pmf) == 61
            assert np.all(pmf.probs >= 0)
            assert pmf.probs.sum() + pmf.deficit == pytest.approx(1.0, abs=1e-7)

    def test_known_means(self, ref_params, bulk_pmfs):
        p = ref_params
        # orbit-while-idle mean equals the exponent's derivative at 1
        assert bulk_pmfs["R0"].mean() == pytest.approx(p.psi, abs=5e-3)
        # queue-while-serving-type-2 is a Poisson mixture over the
        # equilibrium type-2 service time
        expect = p.lambda1 * p.dist2.moment2 / (2 * p.dist2.mean)
        assert bulk_pmfs["R21"].mean() == pytest.approx(expect, abs=1e-6)

    def test_matches_single_inversions(self, ref_params, bulk_pmfs):
        solo = T.extract_pmf(
            lambda z: T.eval_S_beta(ref_params, 2, np.asarray(z, dtype=complex),
                                    np.ones_like(np.asarray(z, dtype=complex))),
            60, radius=0.8)
        np.testing.assert_allclose(bulk_pmfs["R21"].probs, solo.probs, atol=1e-10)

    def test_roundoff_guard_applies(self, ref_params):
        with pytest.raises(InversionError, match="round-off"):
            T.conditional_pmfs(ref_params, 500, radius=0.9)
