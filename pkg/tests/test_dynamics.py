import math
import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vdcmix.cyclotomic import Cyclotomic
from vdcmix.dynamics import (BernoulliShift, CylinderPolynomial, FiniteSystem, StepFunction,
                             TorusRotation, TrigPolynomial, cat_map, check_measure_preserving,
                             expect, koopman, multiply, product_system, set_correlation)
from vdcmix.errors import InvariantViolation, StructuralError

HALF = Fraction(1, 2)
FAIR = BernoulliShift([HALF, HALF])


def random_cylinder_poly(rng, system, terms=3, span=4):
    f = CylinderPolynomial.constant(0, system.rank)
    for _ in range(terms):
        sites = rng.sample(range(-span, span + 1), rng.randint(1, 3))
        assign = {(s,) if system.rank == 1 else (s, rng.randint(-1, 1)): rng.randrange(system.symbols)
                  for s in sites}
        f = f + system.cylinder(assign, Fraction(rng.randint(-5, 5), rng.randint(1, 4)))
    return f


def brute_cylinder_measure(system, f):
    """Oracle: enumerate every configuration of the finitely many sites involved."""
    sites = sorted(f.sites)
    total = Fraction(0)
    for config in _configs(len(sites), system.symbols):
        x = dict(zip(sites, config))
        weight = math.prod(system.weights[x[s]] for s in sites)
        value = sum(Fraction(c) for cyl, c in f.terms.items() if all(x[s] == v for s, v in cyl))
        total += weight * value
    return total


def _configs(n, s):
    if n == 0:
        yield ()
        return
    for head in range(s):
        for tail in _configs(n - 1, s):
            yield (head,) + tail


class TestKoopmanExamples:
    def test_site_shift(self):
        f = FAIR.cylinder({(0,): 0})
        assert koopman(FAIR, (3,), f) == FAIR.cylinder({(3,): 0})

    def test_rotation_phase(self):
        rot = TorusRotation(Fraction(1, 4))
        e = TrigPolynomial.character(1)
        assert koopman(rot, (1,), e) == TrigPolynomial.character(1, Cyclotomic.root(4, 1))

    def test_identity(self):
        f = FAIR.cylinder({(0,): 1, (2,): 0})
        assert koopman(FAIR, (0,), f) == f


class TestExpect:
    def test_examples(self):
        assert expect(FAIR, FAIR.cylinder({(0,): 0})) == HALF
        assert expect(FAIR, FAIR.cylinder({(0,): 0, (5,): 1})) == Fraction(1, 4)
        assert expect(TorusRotation(Fraction(1, 3)), TrigPolynomial.character(1)) == 0

    @settings(max_examples=60)
    @given(st.integers(0, 10 ** 6))
    def test_against_enumeration(self, seed):
        rng = random.Random(seed)
        system = BernoulliShift([Fraction(1, 6), Fraction(1, 3), HALF])
        f = random_cylinder_poly(rng, system)
        assert expect(system, f) == brute_cylinder_measure(system, f)

    def test_bad_weights(self):
        with pytest.raises(InvariantViolation):
            BernoulliShift([HALF, Fraction(1, 3)])

    def test_alphabet(self):
        with pytest.raises(StructuralError):
            FAIR.cylinder({(0,): 2})


class TestMultiply:
    def test_contradiction(self):
        assert multiply(FAIR.cylinder({(0,): 0}), FAIR.cylinder({(0,): 1})) == \
            CylinderPolynomial.constant(0)

    def test_disjoint(self):
        assert multiply(FAIR.cylinder({(0,): 0}), FAIR.cylinder({(2,): 1})) == \
            FAIR.cylinder({(0,): 0, (2,): 1})

    def test_frequency_cancel(self):
        e = TrigPolynomial.character(1)
        assert multiply(e, e.conjugate()) == TrigPolynomial.constant(1)

    @settings(max_examples=40)
    @given(st.integers(0, 10 ** 6))
    def test_symmetric_bilinear(self, seed):
        rng = random.Random(seed)
        f, g, h = (random_cylinder_poly(rng, FAIR) for _ in range(3))
        c = Fraction(rng.randint(-4, 4), 3)
        assert expect(FAIR, f * g) == expect(FAIR, g * f)
        assert expect(FAIR, (f + c * g) * h) == expect(FAIR, f * h) + c * expect(FAIR, g * h)


class TestCorrelation:
    def test_bernoulli(self):
        a = FAIR.cylinder({(0,): 0})
        assert set_correlation(FAIR, a, a, (0,)) == HALF
        assert set_correlation(FAIR, a, a, (7,)) == Fraction(1, 4)

    @pytest.mark.parametrize("n", [1, 3, 10, 57])
    def test_rotation_overlap(self, n):
        rot = TorusRotation("(sqrt(5)-1)/2")
        a = StepFunction.interval(0, HALF)
        alpha = (mpmath.sqrt(5) - 1) / 2
        frac = float(n * alpha % 1)
        oracle = 0.5 - min(frac, 1 - frac)
        assert float(set_correlation(rot, a, a, (n,))) == pytest.approx(oracle, abs=1e-12)

    @settings(max_examples=40)
    @given(st.integers(0, 10 ** 6), st.integers(-20, 20))
    def test_no_collision_independence(self, seed, g):
        rng = random.Random(seed)
        a = FAIR.cylinder({(0,): rng.randrange(2)})
        b = FAIR.cylinder({(0,): rng.randrange(2)})
        if g != 0:
            assert set_correlation(FAIR, a, b, (g,)) == expect(FAIR, a) * expect(FAIR, b)


class TestProduct:
    def test_marginal(self):
        prod = product_system(FAIR, FAIR)
        a = FAIR.cylinder({(0,): 0})
        assert expect(prod, prod.rectangle(a, FAIR.one())) == HALF

    def test_single_site_events(self):
        prod = product_system(FAIR, FAIR)
        a = FAIR.cylinder({(0,): 0})
        r = prod.rectangle(a, a)
        assert set_correlation(prod, r, r, (3,)) == Fraction(1, 16)

    @settings(max_examples=30)
    @given(st.integers(0, 10 ** 6), st.integers(-4, 4))
    def test_rectangles_factorise(self, seed, g):
        rng = random.Random(seed)
        prod = product_system(FAIR, FAIR)
        a, b, c, d = (FAIR.cylinder({(rng.randint(-2, 2),): rng.randrange(2)}) for _ in range(4))
        lhs = set_correlation(prod, prod.rectangle(a, c), prod.rectangle(b, d), (g,))
        assert lhs == set_correlation(FAIR, a, b, (g,)) * set_correlation(FAIR, c, d, (g,))


class TestMeasurePreserving:
    @given(st.integers(0, 10 ** 6), st.integers(-30, 30))
    def test_bernoulli(self, seed, g):
        f = random_cylinder_poly(random.Random(seed), FAIR)
        assert check_measure_preserving(FAIR, (g,), f)

    @given(st.integers(-5, 5), st.integers(-30, 30))
    def test_rotation(self, k, g):
        f = TrigPolynomial.character(k) + TrigPolynomial.constant(Fraction(1, 3))
        assert check_measure_preserving(TorusRotation(Fraction(2, 7)), (g,), f)

    def test_cat_map(self):
        cat = cat_map()
        k = TrigPolynomial.character((1, 2))
        assert check_measure_preserving(cat, (1,), k)
        assert expect(cat, cat.koopman((1,), k)) == 0

    def test_finite_system(self):
        sys = FiniteSystem.trivial([Fraction(1, 3), Fraction(2, 3)])
        f = sys.indicator([0])
        assert expect(sys, f) == Fraction(1, 3)
        assert check_measure_preserving(sys, (5,), f)


class TestAlgebraLaws:
    @settings(max_examples=50)
    @given(st.integers(0, 10 ** 6), st.integers(-9, 9), st.integers(-9, 9))
    def test_bernoulli(self, seed, g, h):
        rng = random.Random(seed)
        f, k = random_cylinder_poly(rng, FAIR), random_cylinder_poly(rng, FAIR)
        assert koopman(FAIR, (g,), f * k) == koopman(FAIR, (g,), f) * koopman(FAIR, (g,), k)
        assert koopman(FAIR, (g,), koopman(FAIR, (h,), f)) == koopman(FAIR, (g + h,), f)

    @settings(max_examples=50)
    @given(st.lists(st.tuples(st.integers(-4, 4), st.integers(-3, 3)), min_size=1, max_size=4),
           st.integers(-9, 9), st.integers(-9, 9))
    def test_rotation(self, coeffs, g, h):
        rot = TorusRotation(Fraction(3, 8))
        f = TrigPolynomial.constant(0)
        for k, c in coeffs:
            f = f + TrigPolynomial.character(k, Fraction(c))
        k2 = TrigPolynomial.character(1) + TrigPolynomial.constant(2)
        assert koopman(rot, (g,), f * k2) == koopman(rot, (g,), f) * koopman(rot, (g,), k2)
        assert koopman(rot, (g,), koopman(rot, (h,), f)) == koopman(rot, (g + h,), f)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_cat_map_action(self, n):
        cat = cat_map()
        f = TrigPolynomial.character((1, 0)) + TrigPolynomial.character((0, -1))
        assert cat.koopman((n,), cat.koopman((1,), f)) == cat.koopman((n + 1,), f)
