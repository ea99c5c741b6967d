import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knnradar.analysis import (
    BetaQuadrature,
    ConditioningBlock,
    QuadCase,
    block_factor,
    brute_force_probability,
    exchangeable_probability,
    gaussian_toy_brute_force,
    gaussian_toy_probability,
    indicator_Y,
    p0_closed,
    p1_closed,
    semi_analytic_probability,
    quad_coeffs,
)
from knnradar.detectors import kelly_ace_spec, kelly_amf_spec
from knnradar.distributions import StatLaw, sample_stat_pair
from knnradar.exceptions import ConfigError, InvalidCombinatorics
from knnradar.detectors import FeatureSpec
from knnradar.rng import stream

N, K = 8, 16
SNR = 10 ** 1.2


def make_block(seed, spec=None, n_t=5, k=3, m=1, train_snr=SNR, law=None):
    g = stream(seed, 77)
    spec = spec or kelly_amf_spec()
    t, b = sample_stat_pair(law or StatLaw.h0(), N, K, g, ())
    t0, b0 = sample_stat_pair(StatLaw.h0(), N, K, g, k - m)
    t1, b1 = sample_stat_pair(StatLaw.matched(train_snr), N, K, g, n_t - m)
    return ConditioningBlock(float(t), float(b), t0, b0, t1, b1, spec)


class TestQuadCoeffs:
    def test_unit(self):
        assert tuple(map(float, quad_coeffs([1.0], [1.0], [1.0]))) == (1.0, 1.0, 1.0)

    def test_example(self):
        g1, g2, g3 = quad_coeffs([1.0, 2.0], [1.0, 4.0], [1.0, 0.7])
        assert g1 == pytest.approx(1 + 0.49 * 16)
        assert g2 == pytest.approx(1 + 0.49 * 8)
        assert g3 == pytest.approx(1 + 0.49 * 4)

    @settings(max_examples=50, deadline=None)
    @given(
        bt=st.lists(st.floats(0.01, 50), min_size=1, max_size=4),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_expansion_identity(self, bt, seed):
        g = np.random.default_rng(seed)
        bt = np.array(bt)
        bo = g.uniform(0.01, 50, len(bt))
        d = g.uniform(0, 1, len(bt))
        g1, g2, g3 = quad_coeffs(bt, bo, d)
        for s, t in g.uniform(0, 10, (10, 2)):
            direct = np.sum(d**2 * (s * bo - t * bt) ** 2)
            assert g1 * s**2 - 2 * t * g2 * s + g3 * t**2 == pytest.approx(direct, rel=1e-9, abs=1e-9)

    def test_tangency(self):
        g1, g2, g3 = quad_coeffs([1.0, 2.0], [1.0, 2.0], [1.0, 0.7])
        case = QuadCase(g1, g2, g3, 0.0, 1.5)
        assert case.discriminant == pytest.approx(0.0, abs=1e-12)
        lo, hi = case.roots()
        assert lo == pytest.approx(1.5) and hi == pytest.approx(1.5)

    def test_roots_ordered_and_solve(self):
        case = QuadCase(np.array(2.0), np.array(1.0), np.array(3.0), 20.0, 2.0)
        lo, hi = case.roots()
        assert case.discriminant > 0 and lo < hi
        for r in (lo, hi):
            assert 2.0 * r**2 - 2 * 2.0 * 1.0 * r + 3.0 * 4.0 - 20.0 == pytest.approx(0.0, abs=1e-12)


class TestIndicator:
    def test_block0_at_x(self):
        spec = kelly_amf_spec()
        cond = ConditioningBlock(1.0, 0.5, np.full(2, 1.0), np.full(2, 0.5), np.array([3.0]), np.array([0.2]), spec)
        assert cond.c2 == 0 and indicator_Y(cond)

    def test_violated(self):
        spec = kelly_amf_spec()
        cond = ConditioningBlock(1.0, 0.5, np.array([5.0]), np.array([0.5]), np.array([1.1]), np.array([0.5]), spec)
        assert not indicator_Y(cond)


class TestP0P1:
    def test_p0_limits(self):
        spec = kelly_amf_spec()
        at_x = ConditioningBlock(1.0, 0.5, np.full(2, 1.0), np.full(2, 0.5), np.array([3.0]), np.array([0.5]), spec)
        assert p0_closed(at_x, N, K) == 1.0
        far = ConditioningBlock(1.0, 0.5, np.array([1e6]), np.array([0.5]), np.array([3.0]), np.array([0.5]), spec)
        assert p0_closed(far, N, K) < 1e-12

    def test_p1_limits(self):
        spec = kelly_amf_spec()
        at_x = ConditioningBlock(1.0, 0.5, np.array([1.0]), np.array([0.5]), np.full(2, 1.0), np.full(2, 0.5), spec)
        assert p1_closed(at_x, N, K, SNR) == 0.0
        far = ConditioningBlock(1.0, 0.5, np.array([1.0]), np.array([0.5]), np.array([1e7]), np.array([0.5]), spec)
        assert p1_closed(far, N, K, SNR) > 1 - 1e-9

    def test_monotone_in_radius(self):
        base = make_block(3)
        p0s, p1s = [], []
        for scale in (1.0, 1.5, 2.5, 4.0):
            cond = ConditioningBlock(
                base.t, base.beta, base.t + scale * (base.t0 - base.t), base.beta0,
                base.t + scale * (base.t1 - base.t), base.beta1, base.spec,
            )
            p0s.append(p0_closed(cond, N, K))
            p1s.append(p1_closed(cond, N, K, SNR))
        assert all(a >= b - 1e-12 for a, b in zip(p0s, p0s[1:]))

    @pytest.mark.parametrize("spec", [kelly_amf_spec(), kelly_ace_spec()])
    def test_conditional_mc(self, spec):
        cond = make_block(11, spec, law=StatLaw.matched(SNR))
        quad = BetaQuadrature(check=True)
        p0 = p0_closed(cond, N, K, quad)
        p1 = p1_closed(cond, N, K, SNR, quad)
        n = 10**6
        x0 = spec.from_pairs(*sample_stat_pair(StatLaw.h0(), N, K, stream(5, 1), n))
        x1 = spec.from_pairs(*sample_stat_pair(StatLaw.matched(SNR), N, K, stream(5, 2), n))
        d0 = np.sum((x0 - cond.x) ** 2, axis=-1)
        d1 = np.sum((x1 - cond.x) ** 2, axis=-1)
        e0, e1 = np.mean(d0 >= cond.c2), np.mean(d1 <= cond.a2)
        for est, mc in ((p0, e0), (p1, e1)):
            se = np.sqrt(max(mc * (1 - mc), 1e-12) / n)
            assert abs(est - mc) <= 3 * se + 1e-9

    def test_quadrature_refinement_stable(self):
        cond = make_block(21, law=StatLaw.mismatched(SNR, 0.5))
        coarse, fine = BetaQuadrature(), BetaQuadrature().refined()
        assert abs(p0_closed(cond, N, K, coarse) - p0_closed(cond, N, K, fine)) < 1e-6
        assert abs(p1_closed(cond, N, K, SNR, coarse) - p1_closed(cond, N, K, SNR, fine)) < 1e-6

    def test_monotone_p1(self):
        base = make_block(5)
        vals = []
        for scale in (1.0, 1.5, 2.5):
            cond = ConditioningBlock(
                base.t, base.beta, base.t0, base.beta0,
                base.t + scale * (base.t1 - base.t), base.beta1, base.spec,
            )
            vals.append((cond.a2, p1_closed(cond, N, K, SNR)))
        vals.sort()
        assert all(a[1] <= b[1] + 1e-12 for a, b in zip(vals, vals[1:]))


class TestCombinatorics:
    def test_fig1_factor(self):
        assert block_factor(6, 5, 3) == 300

    @pytest.mark.parametrize("n_t,k,m", [(5, 3, 3), (5, 3, -1), (2, 5, 1), (3, 6, 4)])
    def test_invalid(self, n_t, k, m):
        with pytest.raises(InvalidCombinatorics):
            block_factor(n_t, k, m)

    def test_raw_spec_rejected(self):
        with pytest.raises(ConfigError):
            semi_analytic_probability(5, 3, 1, FeatureSpec.raw(), N, K, StatLaw.h0(), SNR, 100, stream(0))


class TestOracles:
    def test_small_instance(self):
        spec = kelly_amf_spec()
        law = StatLaw.matched(10.0)
        est, se = semi_analytic_probability(5, 3, 1, spec, N, K, law, 10.0, 2000, stream(1, 1))
        ref, rse = brute_force_probability(5, 3, 1, spec, N, K, law, 10.0, 20_000, stream(1, 2))
        assert abs(est - ref) <= 3 * np.hypot(se, rse)

    def test_exchangeable(self):
        spec = kelly_amf_spec()
        base = exchangeable_probability(5, 3, 1)
        est, se = semi_analytic_probability(5, 3, 1, spec, N, K, StatLaw.h0(), 0.0, 2000, stream(2, 1))
        ref, rse = brute_force_probability(5, 3, 1, spec, N, K, StatLaw.h0(), 0.0, 20_000, stream(2, 2))
        assert abs(est - base) <= 3 * se + 1e-12
        assert abs(ref - base) <= 3 * rse

    def test_brute_force_nearly_separable(self):
        # test feature and T1 share an overwhelming SNR, far from the H0 cloud
        spec = kelly_amf_spec()
        p, _ = brute_force_probability(5, 3, 1, spec, N, K, StatLaw.matched(1e7), 1e7, 2000, stream(3))
        assert p > 0.95
        p0, _ = brute_force_probability(5, 3, 1, spec, N, K, StatLaw.h0(), 1e7, 2000, stream(4))
        assert p0 == 0.0

    def test_gaussian_symmetric(self):
        m0 = np.zeros(2, complex)
        est, se = gaussian_toy_probability(m0, m0, 1.0, 5, 3, 1, 20_000, stream(4, 1))
        assert abs(est - exchangeable_probability(5, 3, 1)) <= 3 * se + 1e-12

    def test_gaussian_separable(self):
        m0, m1 = np.zeros(2, complex), np.array([2.0, 0.0], complex)
        est, _ = gaussian_toy_probability(m0, m1, 1e-4, 5, 3, 1, 2000, stream(4, 2), test_class=1)
        assert est == pytest.approx(1.0, abs=1e-9)

    def test_gaussian_example(self):
        m0, m1 = np.zeros(2, complex), np.array([2.0, 0.0], complex)
        for cls in (0, 1):
            est, se = gaussian_toy_probability(m0, m1, 1.0, 5, 3, 1, 20_000, stream(5, cls), cls)
            ref, rse = gaussian_toy_brute_force(m0, m1, 1.0, 5, 3, 1, 50_000, stream(6, cls), cls)
            assert abs(est - ref) <= 3 * np.hypot(se, rse)
