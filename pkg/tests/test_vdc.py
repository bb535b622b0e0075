import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import bernoulli_experiment
from vdcmix.averaging import GroupFunction, constant, folner_average, squares
from vdcmix.errors import InequalityViolation
from vdcmix.fuzz import make_trial
from vdcmix.groups import (FiniteSubset, IntegerLattice, lattice_boxes, quotient_set,
                           uniform_defect, z_initial, z_symmetric)
from vdcmix.mixing import gamma_closed_form
from vdcmix.vdc import (BORELNESS_NOTE, avg_norm_inequality, check_inequality, folding_inequality,
                        gamma_quotient_bound, gamma_series, shift_average_gap,
                        shifted_gamma_consistency, triple_avg_inequality, triple_sum_literal,
                        triple_to_double_limit, vdc_verdict)

Z, Z2 = IntegerLattice(1), IntegerLattice(2)
ONE, ZERO = Fraction(1), Fraction(0)


def vec_const(c):
    return GroupFunction(lambda g: c, None, len(c), "c", check_bound=False)


def alternating():
    return GroupFunction(lambda g: (ONE if g[0] % 2 == 0 else -ONE,), ONE, 1, "alt")


def table_fn(table, dim):
    return GroupFunction(table.__getitem__, None, dim, "table", check_bound=False)


def interval(a, b):
    return FiniteSubset(Z, [(n,) for n in range(a, b + 1)])


class TestCheckInequality:
    def test_exact_strict(self):
        assert check_inequality("x", Fraction(1, 3), Fraction(1, 3)).holds
        with pytest.raises(InequalityViolation):
            check_inequality("x", Fraction(1, 3) + Fraction(1, 10 ** 30), Fraction(1, 3))

    def test_float_slack(self):
        assert check_inequality("x", 1.0 + 1e-14, 1.0).holds
        with pytest.raises(InequalityViolation):
            check_inequality("x", 1.0 + 1e-9, 1.0)

    def test_flip(self):
        with pytest.raises(InequalityViolation):
            check_inequality("x", 0, 1, flip=True)


class TestAvgNorm:
    def test_constant_equality(self):
        c = (Fraction(1, 2), Fraction(-3))
        lam = interval(2, 9)
        r = avg_norm_inequality(vec_const(c), lam)
        assert r.lhs == r.rhs == lam.measure ** 2 * (c[0] ** 2 + c[1] ** 2)

    def test_example(self):
        f = table_fn({(0,): (ONE, ZERO), (1,): (-ONE, ZERO)}, 2)
        r = avg_norm_inequality(f, interval(0, 1))
        assert (r.lhs, r.rhs) == (0, 4)

    @pytest.mark.parametrize("rank", [1, 2])
    def test_seeded(self, rank):
        for i in range(300):
            make_trial(11, "avg-norm", rank, i).run()

    def test_complex_values(self):
        f = GroupFunction(lambda g: (1 + 2j, g[0] * 1j), None, 2, check_bound=False)
        assert avg_norm_inequality(f, interval(-3, 3)).holds


class TestShiftGap:
    def test_constant(self):
        f = GroupFunction(lambda g: (Fraction(2),), Fraction(2), 1)
        assert shift_average_gap(f, z_symmetric(), 20, 3).gap_sq == 0

    def test_sign_pattern(self):
        r = shift_average_gap(alternating(), z_symmetric(), 50, 1)
        assert r.bound == Fraction(2, 101) <= 2 * Fraction(4, 101)
        assert r.gap_sq <= r.bound ** 2

    def test_squares_decreasing(self):
        f = squares()
        gaps = [shift_average_gap(f, z_initial(), n, 2).gap_sq for n in (50, 200, 800, 3200)]
        assert gaps[-1] < gaps[0]
        assert gaps[-1] < Fraction(1, 10 ** 4)

    def test_z2(self):
        rng = random.Random(3)
        table = {}
        f = GroupFunction(lambda g: table.setdefault(g, (Fraction(rng.randint(-4, 4), 4),)),
                          ONE, 1)
        r = shift_average_gap(f, lattice_boxes(2), 12, 2)
        assert r.bound == uniform_defect(lattice_boxes(2), 12, 2)

    @settings(max_examples=60)
    @given(st.integers(0, 10 ** 6), st.integers(3, 40), st.integers(1, 5))
    def test_bound_holds(self, seed, n, m):
        rng = random.Random(seed)
        vals = {k: Fraction(rng.randint(-8, 8), 8) for k in range(-60, 61)}
        f = GroupFunction(lambda g: (vals[g[0]],), ONE, 1)
        assert shift_average_gap(f, z_symmetric(), n, m).holds


class TestTriple:
    def test_constant_equality(self):
        c = (Fraction(2), Fraction(1, 3))
        lam1, lam2 = interval(0, 2), interval(-4, 4)
        r = triple_avg_inequality(vec_const(c), lam1, lam2)
        norm = c[0] ** 2 + c[1] ** 2
        assert r.lhs == (3 * 9) ** 2 * norm
        assert r.rhs == 9 * (3 ** 2 * 9 * norm)

    @settings(max_examples=40)
    @given(st.integers(0, 10 ** 6), st.integers(-5, 5))
    def test_singleton_reduces(self, seed, t):
        rng = random.Random(seed)
        table = {(k,): (Fraction(rng.randint(-5, 5), 3), Fraction(rng.randint(-5, 5), 2))
                 for k in range(-20, 21)}
        f = table_fn(table, 2)
        lam2 = interval(-6, 6)
        tri = triple_avg_inequality(f, FiniteSubset(Z, [(t,)]), lam2)
        single = avg_norm_inequality(f, lam2.shift((t,)))
        assert (tri.lhs, tri.rhs) == (single.lhs, single.rhs)

    @pytest.mark.parametrize("rank", [1, 2])
    def test_seeded(self, rank):
        for i in range(200):
            make_trial(5, "triple-avg", rank, i).run()

    def test_literal_matches_fast(self):
        rng = random.Random(9)
        table = {(k,): (Fraction(rng.randint(-4, 4)),) for k in range(-12, 13)}
        f = table_fn(table, 1)
        lam1, lam2 = interval(-2, 3), interval(-5, 5)
        assert lam2.measure * triple_sum_literal(f, lam1, lam2) == \
            triple_avg_inequality(f, lam1, lam2).rhs


class TestFolding:
    def test_equality_example(self):
        f = lambda d: ONE if d == (0,) else ZERO  # noqa: E731
        r = folding_inequality(f, interval(0, 1), interval(-1, 1))
        assert (r.lhs, r.rhs) == (2, 2)

    def test_zero(self):
        r = folding_inequality(lambda d: ZERO, interval(0, 4))
        assert (r.lhs, r.rhs) == (0, 0)

    def test_seeded_z2(self):
        for i in range(300):
            make_trial(17, "folding", 2, i, max_size=25).run()

    def test_small_S_rejected(self):
        with pytest.raises(Exception):
            folding_inequality(lambda d: ONE, interval(0, 3), interval(0, 1))


class TestGammaQuotient:
    def test_zero(self):
        r = gamma_quotient_bound(lambda d: ZERO, z_symmetric(), 4)
        assert (r.lhs, r.rhs) == (0, 0)

    @pytest.mark.parametrize("m", [1, 2, 5, 13])
    def test_delta_equality(self, m):
        r = gamma_quotient_bound(lambda d: ONE if d == (0,) else ZERO, z_symmetric(), m)
        assert r.lhs == Fraction(2 * m + 1, (2 * m + 1) ** 2)
        assert r.rhs == Fraction(1, 2 * m + 1)

    def test_bernoulli_strict_and_decreasing(self):
        exp = bernoulli_experiment((1, 2), seq=z_symmetric(), events=[{(0,): 0, (1,): 0}] * 3)
        gamma = lambda d: gamma_closed_form(exp, d)  # noqa: E731
        results = [gamma_quotient_bound(gamma, z_symmetric(), m) for m in (1, 4, 16, 64)]
        assert all(r.lhs < r.rhs for r in results)
        assert results[-1].rhs < results[0].rhs / 10

    def test_seeded(self):
        for rank in (1, 2):
            for i in range(200):
                make_trial(23, "gamma-quotient", rank, i).run()


class TestGammaSeries:
    def test_constant(self):
        c = (Fraction(1, 2), Fraction(2))
        for h in [(0,), (3,), (-7,)]:
            s = gamma_series(vec_const(c), z_symmetric(), h, 10)
            assert set(s.series.values) == {c[0] ** 2 + c[1] ** 2}

    @pytest.mark.parametrize("h", range(-4, 5))
    def test_alternating(self, h):
        s = gamma_series(alternating(), z_initial(), (h,), 25)
        assert set(s.series.values) == {(-1) ** abs(h)}

    def test_bernoulli_u(self):
        exp = bernoulli_experiment((1,), seq=z_symmetric())
        u = exp.u()
        for h in range(-3, 4):
            s = gamma_series(u, z_symmetric(), (h,), 20, [20], u.inner)
            assert s.series.last == (Fraction(1, 4) if h == 0 else 0) == gamma_closed_form(exp, (h,))

    def test_identity_is_mean_square(self):
        rng = random.Random(1)
        table = {(k,): (Fraction(rng.randint(-3, 3), 3),) for k in range(-40, 41)}
        f = GroupFunction(table.__getitem__, ONE, 1, check_bound=False)
        s = gamma_series(f, z_symmetric(), (0,), 30)
        sq = GroupFunction(lambda g: f(g)[0] ** 2, check_bound=False)
        for n, v in zip(s.series.ns, s.series.values):
            assert v == folner_average(sq, z_symmetric()(n))


class TestShiftedGamma:
    def test_identity_shift(self):
        v = shifted_gamma_consistency(alternating(), z_symmetric(), (0,), (2,), 30)
        assert all(d == 0 for d in v.differences) and v.agree

    def test_even_indicator(self):
        f = GroupFunction(lambda g: (ONE if g[0] % 2 == 0 else ZERO,), ONE, 1, "even")
        v = shifted_gamma_consistency(f, z_symmetric(), (1,), (3,), 400)
        assert v.agree
        assert v.reference.limit_estimate == pytest.approx(0.5, abs=5e-3)

    @settings(max_examples=40)
    @given(st.integers(0, 10 ** 6), st.integers(-5, 5), st.integers(-5, 5))
    def test_per_n_bound(self, seed, a, b):
        rng = random.Random(seed)
        vals = {k: Fraction(rng.randint(-4, 4), 4) for k in range(-60, 61)}
        f = GroupFunction(lambda g: (vals[g[0]],), ONE, 1)
        v = shifted_gamma_consistency(f, z_symmetric(), (a,), (b,), 25)
        assert all(d <= bd for d, bd in zip(v.differences, v.bounds))

    def test_conjugate_symmetry(self):
        rng = random.Random(4)
        vals = {k: Fraction(rng.randint(-4, 4), 4) for k in range(-80, 81)}
        f = GroupFunction(lambda g: (vals[g[0]],), ONE, 1)
        h = 3
        fwd = gamma_series(f, z_symmetric(), (h,), 40).series
        back = shifted_gamma_consistency(f, z_symmetric(), (h,), (0,), 40)
        for n, a, b, bound in zip(fwd.ns, fwd.values, back.shifted.values, back.bounds):
            assert abs(a - b) <= bound


class TestTripleDouble:
    def test_constant(self):
        c = (Fraction(3, 2),)
        v = triple_to_double_limit(vec_const(c), z_symmetric(), 2, 15)
        assert v.double_sum == 25 * c[0] ** 2
        assert set(v.triple.values) == {25 * c[0] ** 2}

    def test_bernoulli_u(self):
        exp = bernoulli_experiment((1,), seq=z_symmetric())
        u = exp.u()
        v = triple_to_double_limit(u, z_symmetric(), 2, 60, ns=[60], inner_product=u.inner,
                                   gamma=lambda d: gamma_closed_form(exp, d),
                                   combine=lambda vals: sum(vals[1:], vals[0]))
        assert v.double_sum == 5 * Fraction(1, 4) == v.triple.last

    def test_alternating(self):
        v = triple_to_double_limit(alternating(), z_initial(), 1, 30)
        oracle = sum((-1) ** abs(b - a) for a in (-1, 0, 1) for b in (-1, 0, 1))
        assert v.double_sum == oracle == 1
        assert v.label == "PASS"


class TestVerdict:
    def test_zero(self):
        v = vdc_verdict(GroupFunction(lambda g: (ZERO,), ONE, 1), z_initial(), (1, 2, 4), 50)
        assert v.label == "PASS"

    def test_alternating(self):
        v = vdc_verdict(alternating(), z_initial(), (1, 2, 4, 8, 16, 32), 400)
        sq = v.conclusion.extra["norm_sq"]
        assert all(x <= Fraction(1, n * n) for n, x in zip(v.conclusion.ns, sq))
        assert v.label == "PASS"
        assert v.hypotheses["gamma Borel measurable"] == BORELNESS_NOTE

    def test_constant(self):
        v = vdc_verdict(vec_const((Fraction(1, 2),)), z_initial(), (1, 2, 4), 40)
        assert set(v.condition.values) == {Fraction(1, 4)}
        assert v.label == "INCONCLUSIVE"

    def test_closed_form_never_fails(self):
        from vdcmix.mixing import order_k_wm_series
        exp = bernoulli_experiment((1, 2), seq=z_symmetric(), m_list=(1, 2, 4, 8, 16, 32))
        norm = order_k_wm_series(exp, list(range(1, 201)), norm_n_max=200)
        v = vdc_verdict(exp.u(), z_symmetric(), exp.m_list, 200,
                        gamma=lambda d: gamma_closed_form(exp, d), conclusion=norm.norm,
                        tau=norm.trends["3[k]"].tau)
        assert v.label == "PASS"
