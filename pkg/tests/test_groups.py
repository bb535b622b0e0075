import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vdcmix.errors import InvariantViolation, StructuralError
from vdcmix.groups import (CyclicGroup, FiniteSubset, IntegerLattice, ScaledLattice,
                           TranslationalFamily, compose, diagonal, difference_counts,
                           folner_defect, identity_hom, lattice_boxes, multiplier, quotient_set,
                           scaled_ball, symmetric_difference_measure, uniform_defect,
                           verify_translational, z_initial, z_symmetric)

Z, Z2 = IntegerLattice(1), IntegerLattice(2)


def brute_sym_diff(points, g):
    """Independent oracle: plain python sets."""
    pts = set(points)
    moved = {tuple(a + b for a, b in zip(p, g)) for p in pts}
    return len(pts ^ moved)


class TestCompose:
    def test_examples(self):
        assert compose(Z, (3,), (4,)) == (7,)
        assert compose(Z2, (1, -2), (0, 5)) == (1, 3)
        assert compose(CyclicGroup(7), (5,), (4,)) == (2,)

    def test_rank_mismatch(self):
        with pytest.raises(StructuralError):
            compose(Z2, (1,), (1, 2))

    def test_residues_reduced(self):
        assert CyclicGroup(7).element(-3) == (4,)

    @given(st.integers(-50, 50), st.integers(-50, 50), st.integers(-50, 50))
    def test_axioms_cyclic(self, a, b, c):
        G = CyclicGroup(11)
        x, y, w = G.element(a), G.element(b), G.element(c)
        assert G.compose(G.compose(x, y), w) == G.compose(x, G.compose(y, w))
        assert G.compose(x, y) == G.compose(y, x)
        assert G.compose(x, G.inverse(x)) == G.identity

    def test_bad_models(self):
        with pytest.raises(StructuralError):
            CyclicGroup(1)
        with pytest.raises(StructuralError):
            ScaledLattice(2, 0)


class TestSymmetricDifference:
    def test_identity_shift(self):
        assert symmetric_difference_measure(z_symmetric()(9), (0,)) == 0

    def test_interval(self):
        assert symmetric_difference_measure(z_symmetric()(3), (1,)) == 2

    def test_square(self):
        assert symmetric_difference_measure(lattice_boxes(2)(2), (1, 0)) == 10

    def test_scaled_weight(self):
        lam = scaled_ball(2, Fraction(1, 4))(1)
        count = brute_sym_diff(lam.elements, (1, 0))
        assert symmetric_difference_measure(lam, (1, 0)) == count * Fraction(1, 16)


class TestDefects:
    def test_examples(self):
        assert folner_defect(z_symmetric(), 10, (1,)) == Fraction(2, 21)
        assert folner_defect(z_initial(), 100, (5,)) == Fraction(10, 100)
        assert folner_defect(lattice_boxes(2), 4, (0, 0)) == 0

    def test_uniform(self):
        assert uniform_defect(z_symmetric(), 100, 2) == Fraction(4, 201)

    def test_squares_uniform_matches_enumeration(self):
        seq = lattice_boxes(2)
        pts = list(seq(50).elements)
        worst = max(brute_sym_diff(pts, g) for g in seq(1).elements)
        assert uniform_defect(seq, 50, 1) == Fraction(worst, len(pts))
        assert uniform_defect(seq, 50, 1) == Fraction(402, 10201)

    @given(st.integers(1, 40), st.integers(1, 6), st.integers(0, 12))
    def test_sup_dominates(self, n, m, i):
        seq = z_symmetric()
        inner = seq(m).elements
        g = inner[i % len(inner)]
        assert uniform_defect(seq, n, m) >= folner_defect(seq, n, g)

    def test_range(self):
        seq = z_initial()
        for n in range(1, 30):
            for g in range(-40, 40):
                assert 0 <= folner_defect(seq, n, (g,)) <= 2

    @pytest.mark.parametrize("g", [1, 3, 8])
    def test_monotone_decrease(self, g):
        seq = z_symmetric()
        start = next(n for n in range(1, 100) if 2 * n + 1 > g)
        vals = [folner_defect(seq, n, (g,)) for n in range(start, 80)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_zero_measure(self):
        with pytest.raises((InvariantViolation, StructuralError)):
            from vdcmix.groups import FolnerSequence
            FolnerSequence(Z, lambda n: [], "empty")(1)


class TestQuotient:
    @pytest.mark.parametrize("n", [1, 2, 7, 30])
    def test_interval(self, n):
        q = quotient_set(z_symmetric()(n))
        assert q.elements == tuple((d,) for d in range(-2 * n, 2 * n + 1))
        assert q.measure == 4 * n + 1 <= 2 * (2 * n + 1)

    def test_singleton(self):
        assert quotient_set(FiniteSubset(Z2, [(3, 4)])).elements == ((0, 0),)

    @pytest.mark.parametrize("n", range(1, 6))
    def test_square(self, n):
        lam = lattice_boxes(2)(n)
        brute = {(a[0] - b[0], a[1] - b[1]) for a in lam for b in lam}
        q = quotient_set(lam)
        assert set(q.elements) == brute
        assert q.measure == (4 * n + 1) ** 2

    def test_difference_counts(self):
        lam = z_symmetric()(2)
        counts = difference_counts(lam)
        brute = {}
        for a, b in itertools.product(lam, lam):
            d = (b[0] - a[0],)
            brute[d] = brute.get(d, 0) + 1
        assert counts == brute

    @settings(max_examples=30)
    @given(st.sets(st.tuples(st.integers(-6, 6), st.integers(-6, 6)), min_size=1, max_size=25))
    def test_methods_agree(self, pts):
        lam = FiniteSubset(Z2, pts)
        assert quotient_set(lam, "brute") == quotient_set(lam, "convolution")


class TestMeasureInvariance:
    @pytest.mark.parametrize("group", [Z, Z2, CyclicGroup(13), ScaledLattice(2, Fraction(1, 3))])
    def test_seeded(self, group):
        rng = random.Random(7)
        for _ in range(200):
            pts = [group.element(*(rng.randint(-9, 9) for _ in range(group.rank)))
                   for _ in range(rng.randint(1, 20))]
            lam = FiniteSubset(group, pts)
            g = group.element(*(rng.randint(-20, 20) for _ in range(group.rank)))
            assert lam.shift(g).measure == lam.measure
            assert lam.measure == len(set(pts)) * group.measure_weight


class TestTranslational:
    def test_truncated_multipliers_closed_rule(self):
        members = tuple(multiplier(k) for k in range(-5, 6) if k)
        assert verify_translational(TranslationalFamily(members, "nonzero-multipliers")).passed

    def test_truncated_multipliers_as_given(self):
        members = tuple(multiplier(k) for k in range(-5, 6) if k)
        verdict = verify_translational(TranslationalFamily(members))
        assert not verdict.passed
        p1, p2, d = verdict.witness
        assert d == p2.difference(p1)

    def test_diagonal_enumeration(self):
        members = tuple(diagonal((a, b)) for a in range(-2, 3) for b in range(-2, 3) if a and b)
        # diag(2,1) - diag(1,1) = diag(1,0) is not among the members
        assert not verify_translational(TranslationalFamily(members)).passed
        assert verify_translational(TranslationalFamily(members, "nonzero-diagonal")).passed

    def test_identity_only(self):
        assert verify_translational(TranslationalFamily((identity_hom(Z),))).passed

    def test_duplicates_rejected(self):
        with pytest.raises(StructuralError):
            TranslationalFamily((multiplier(2), multiplier(2)))

    @given(st.permutations([multiplier(k) for k in (-2, -1, 1, 2, 3)]))
    def test_permutation_invariant(self, perm):
        base = TranslationalFamily(tuple(multiplier(k) for k in (-2, -1, 1, 2, 3)))
        assert verify_translational(TranslationalFamily(tuple(perm))).passed == \
            verify_translational(base).passed

    @given(st.integers(-9, 9), st.integers(-9, 9), st.integers(-30, 30), st.integers(-30, 30))
    def test_linearity(self, a, b, x, y):
        phi = diagonal((a, b))
        assert phi((x + y, y - x)) == tuple(u + v for u, v in zip(phi((x, y)), phi((y, -x))))


class TestEntry:
    def test_examples(self):
        assert z_initial().entry((0,), 100) is None
        assert z_symmetric().entry((-7,), 100) == 7
        assert lattice_boxes(2).entry((3, -5), 10) == 5

    @given(st.integers(-30, 30))
    def test_matches_scan(self, g):
        seq = z_initial()
        scan = next((n for n in range(1, 41) if (g,) in seq(n)), None)
        assert seq.entry((g,), 40) == scan
