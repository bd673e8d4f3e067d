import math

import numpy as np
import pytest

from fisherrao import approx as A
from fisherrao import bounds as B
from fisherrao import families as F
from fisherrao import spd as S
from fisherrao.errors import ApproximationFailure, CapabilityError, DomainError, InvalidInput
from conftest import GOLDEN_P0, GOLDEN_P1, GOLDEN_RHO, random_normal1d, random_spd

SPD_PAIR = (S.vech(GOLDEN_P0), S.vech(GOLDEN_P1))


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(epsilon=0), dict(delta=-1), dict(max_depth=0),
                                    dict(abs_floor=-1), dict(epsilon=float("nan"))])
    def test_invalid(self, kw):
        with pytest.raises(InvalidInput):
            A.ApproxConfig(**kw)

    def test_estimate_record(self):
        e = A.DistanceEstimate(1.0, "approx", "mult", 1e-3, "x", 3)
        assert e.to_dict()["contract"] == "mult" and e.to_dict()["work"] == 3
        with pytest.raises(InvalidInput):
            A.DistanceEstimate(1.0, "approx", "mult")
        with pytest.raises(InvalidInput):
            A.DistanceEstimate(1.0, "guess")


class TestMetricScaling:
    def test_equal(self):
        assert A.metric_scaling_approx(F.normal1d(), [0.0, 1.0], [0.0, 1.0]) == 0.0
        assert A.metric_scaling_amortized(F.normal1d(), [0.0, 1.0], [0.0, 1.0], k=4) == 0.0

    def test_normal_random_pairs(self, rng):
        fam = F.normal1d()
        for _ in range(50):
            a, b = random_normal1d(rng), random_normal1d(rng)
            d = fam.distance(a, b)
            # the leading error term is proportional to rho * eps_t
            assert abs(A.metric_scaling_approx(fam, a, b, 1e-3) - d) <= 1e-3 * d * max(1.0, d)

    def test_error_is_first_order(self):
        fam = F.spd(2)
        errs = [abs(A.metric_scaling_approx(fam, *SPD_PAIR, h) - GOLDEN_RHO) for h in (1e-2, 1e-3, 1e-4)]
        assert 8 < errs[0] / errs[1] < 12 and 8 < errs[1] / errs[2] < 12

    def test_k1_reduces(self, rng):
        fam = F.normal1d()
        a, b = random_normal1d(rng), random_normal1d(rng)
        assert A.metric_scaling_amortized(fam, a, b, 1e-3, 1) == A.metric_scaling_approx(fam, a, b, 1e-3)

    def test_amortized_matches_single_on_homogeneous_family(self, rng):
        # every anchor of a symmetric-space geodesic gives the same estimate
        fam = F.spd(2)
        single = amort = 0.0
        for _ in range(100):
            a, b = S.vech(random_spd(rng, 2, 1.5)), S.vech(random_spd(rng, 2, 1.5))
            d = fam.distance(a, b)
            single += abs(A.metric_scaling_approx(fam, a, b, 1e-2) - d)
            amort += abs(A.metric_scaling_amortized(fam, a, b, 1e-2, 8) - d)
        assert amort <= single * (1 + 1e-9)

    def test_bad_arguments(self):
        with pytest.raises(InvalidInput):
            A.metric_scaling_approx(F.normal1d(), [0.0, 1.0], [1.0, 1.0], 0.0)
        with pytest.raises(InvalidInput):
            A.metric_scaling_amortized(F.normal1d(), [0.0, 1.0], [1.0, 1.0], 1e-3, 0)

    def test_capability(self):
        with pytest.raises(CapabilityError):
            A.metric_scaling_approx(F.mvn(1), [0.0, 1.0], [1.0, 1.0])


class TestFdivSmallScale:
    def test_equal(self):
        assert A.fdiv_small_scale(F.normal1d(), [0.0, 1.0], [0.0, 1.0]) == 0.0

    def test_normal_jeffreys(self, rng):
        fam = F.normal1d()
        for _ in range(20):
            a = random_normal1d(rng)
            u = rng.normal(size=2)
            b = a + 1e-2 * a[1] * u / np.linalg.norm(u)
            d = fam.distance(a, b)
            assert abs(A.fdiv_small_scale(fam, a, b) - d) <= 1e-3 * d

    def test_kl_variant(self):
        fam = F.normal1d()
        a, b = np.array([0.0, 1.0]), np.array([0.01, 1.0])
        assert abs(A.fdiv_small_scale(fam, a, b, 1.0, "kl") - fam.distance(a, b)) <= 1e-3 * 0.01

    def test_centered_ratio_tends_to_one(self, rng):
        fam = F.spd(2)
        V0 = random_spd(rng, 2)
        E = rng.normal(size=(2, 2))
        E = E + E.T
        ratios = []
        for h in (1e-1, 1e-2, 1e-3):
            a, b = S.vech(V0), S.vech(V0 + h * E)
            ratios.append(A.fdiv_small_scale(fam, a, b) / fam.distance(a, b))
        errs = [abs(r - 1) for r in ratios]
        assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-5

    def test_capability(self):
        with pytest.raises(CapabilityError):
            A.fdiv_small_scale(F.student(3), [0.0, 1.0], [1.0, 1.0])


class TestGeodesicHalving:
    def test_equal(self):
        e = A.approx_mult_geodesic(F.normal1d(), [0.0, 1.0], [0.0, 1.0])
        assert e.value == 0.0 and e.work == 0 and e.kind == "exact"

    @pytest.mark.parametrize("eps", [1e-1, 1e-2, 1e-3])
    def test_spd_golden_pair(self, eps):
        e = A.approx_mult_geodesic(F.spd(2), *SPD_PAIR, A.ApproxConfig(epsilon=eps))
        assert GOLDEN_RHO * (1 - 1e-9) <= e.value <= (1 + eps) * GOLDEN_RHO * (1 + 1e-9)
        assert e.contract == "mult" and e.tolerance == eps

    @pytest.mark.parametrize("eps", [1e-1, 1e-2, 1e-3])
    def test_normal_random_pairs(self, rng, eps):
        fam = F.normal1d()
        for _ in range(100):
            a, b = random_normal1d(rng), random_normal1d(rng)
            d = fam.distance(a, b)
            e = A.approx_mult_geodesic(fam, a, b, A.ApproxConfig(epsilon=eps))
            assert d * (1 - 1e-9) <= e.value <= (1 + eps) * d * (1 + 1e-9)
            assert e.work <= 64

    def test_injected_bounds(self, rng):
        fam = F.normal1d()
        a, b = random_normal1d(rng), random_normal1d(rng)
        lo = lambda x, y: B.bhattacharyya_arc_lb(fam, x, y)
        up = lambda x, y: (B.lerp_curve_ub(fam, x, y, T=65), "lerp")
        e = A.approx_mult_geodesic(fam, a, b, A.ApproxConfig(epsilon=1e-2), lower=lo, upper=up)
        assert "lerp" in e.method
        assert e.value >= fam.distance(a, b) * (1 - 1e-9)

    def test_depth_limit_reports_bracket(self):
        fam = F.normal1d()
        a, b = np.array([0.0, 1.0]), np.array([3.0, 0.5])
        with pytest.raises(ApproximationFailure) as info:
            A.approx_mult_geodesic(fam, a, b, A.ApproxConfig(epsilon=1e-8, max_depth=2))
        err = info.value
        d = fam.distance(a, b)
        assert err.depth == 2 and err.lower <= d <= err.upper

    def test_zero_lower_without_substitute(self):
        fam = F.student(3.0)
        with pytest.raises(ApproximationFailure):
            A.approx_mult_geodesic(fam, [0.0, 1.0], [1.0, 1.0], lower=lambda a, b: 0.0,
                                   upper=lambda a, b: fam.distance(a, b) * 1.5)

    def test_zero_lower_substituted(self, rng):
        fam = F.normal1d()
        a, b = random_normal1d(rng), random_normal1d(rng)
        e = A.approx_mult_geodesic(fam, a, b, A.ApproxConfig(epsilon=1e-2), lower=lambda x, y: 0.0)
        assert "fdiv_small_scale" in e.method

    def test_capability(self):
        with pytest.raises(CapabilityError):
            A.approx_mult_geodesic(F.mvn(1), [0.0, 1.0], [1.0, 1.0])


class TestPregeodesicCutting:
    def test_equal(self):
        assert A.approx_mult_pregeodesic(F.exponential(), [2.0], [2.0]).value == 0.0

    @pytest.mark.parametrize("eps", [1e-1, 1e-2, 1e-3])
    def test_scale_family(self, eps):
        fam = F.exponential()
        e = A.approx_mult_pregeodesic(fam, [0.2], [7.0], A.ApproxConfig(epsilon=eps))
        d = math.log(35.0)
        assert d * (1 - 1e-9) <= e.value <= (1 + eps) * d * (1 + 1e-9)
        assert e.segments >= 2

    @pytest.mark.parametrize("eps", [1e-1, 1e-3])
    def test_spd(self, rng, eps):
        fam = F.spd(3)
        for _ in range(5):
            a, b = S.vech(random_spd(rng, 3)), S.vech(random_spd(rng, 3))
            d = fam.distance(a, b)
            e = A.approx_mult_pregeodesic(fam, a, b, A.ApproxConfig(epsilon=eps))
            assert d * (1 - 1e-9) <= e.value <= (1 + eps) * d * (1 + 1e-9)

    def test_cut_point_outside_domain(self):
        bad = F.FamilyDescriptor("bad", 1, F.exponential().metric,
                                 {"pregeodesic": lambda a, b, u: np.array([-1.0]),
                                  "distance": F.exponential().raw_ops["distance"]})
        with pytest.raises(DomainError):
            A.approx_mult_pregeodesic(bad, [1.0], [5.0], A.ApproxConfig(epsilon=1e-3),
                                      lower=lambda a, b: 0.5 * bad.op("distance")(a, b),
                                      upper=lambda a, b: bad.op("distance")(a, b))


class TestAdditive:
    def test_equal(self):
        e = A.approx_add(F.normal1d(), [0.0, 1.0], [0.0, 1.0], 1e-4)
        assert e.value == 0.0 and e.contract == "add"

    def test_spd_golden_pair(self):
        e = A.approx_add(F.spd(2), *SPD_PAIR, 1e-4)
        assert abs(e.value - GOLDEN_RHO) <= 1e-4 and e.value >= GOLDEN_RHO * (1 - 1e-12)

    @pytest.mark.parametrize("delta", [1e-2, 1e-4])
    def test_normal_random_pairs(self, rng, delta):
        fam = F.normal1d()
        for _ in range(100):
            a, b = random_normal1d(rng), random_normal1d(rng)
            e = A.approx_add(fam, a, b, delta)
            assert abs(e.value - fam.distance(a, b)) <= delta

    def test_pregeodesic_scheme(self):
        e = A.approx_add(F.exponential(), [0.5], [4.0], 1e-3, scheme="pregeodesic")
        assert abs(e.value - math.log(8.0)) <= 1e-3

    def test_unknown_scheme(self):
        with pytest.raises(InvalidInput):
            A.approx_add(F.exponential(), [0.5], [4.0], 1e-3, scheme="bisection")

    def test_small_distance_returns_coarse(self):
        e = A.approx_add(F.exponential(), [1.0], [1.0 + 1e-6], 1e-3)
        assert e.work == 0 and abs(e.value - math.log(1 + 1e-6)) <= 1e-3
