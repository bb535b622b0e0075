"""Følner averages, density-zero sets and density limits, and the averaging equivalences.

Averages over a finite Λ are weighted sums Σ f(g)·w / μ(Λ) with w the group's
point weight; since every point carries the same weight this is the plain
mean over the elements of Λ. Exact inputs give exact outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence, Union

from .errors import InputError, InvariantViolation
from .groups import FiniteSubset, FolnerSequence
from .numeric import (VectorAccumulator, is_exact, norm_sq, real_part, simplify, to_float,
                      vscale, vsub)
from .series import DEFAULT_TAU, Series, TrendResult

DEFAULT_EPSILONS = tuple(Fraction(1, 2 ** k) for k in range(1, 7))
FLOAT_SLACK = 1e-12


@dataclass(frozen=True)
class GroupFunction:
    """A bounded map G → value, value being a scalar or a coordinate vector (tuple).

    ``sup_bound`` is the declared bound b ≥ sup ‖f‖; every evaluation is checked
    against it when ``check_bound`` is set.
    """

    evaluator: Callable
    sup_bound: object = None
    dim: Optional[int] = None
    name: str = "f"
    check_bound: bool = True

    def __call__(self, g):
        v = self.evaluator(g)
        if self.check_bound and self.sup_bound is not None:
            sq = norm_sq(v)
            bound = self.sup_bound * self.sup_bound
            if isinstance(sq, Fraction) and isinstance(bound, (Fraction, int)):
                ok = sq <= bound
            else:
                ok = to_float(sq) <= to_float(bound) * (1 + FLOAT_SLACK)
            if not ok:
                raise InputError(f"{self.name}({g}) = {v} exceeds declared bound {self.sup_bound}")
        return v

    def map(self, fn: Callable, name: Optional[str] = None, sup_bound=None,
            dim: Optional[int] = None) -> "GroupFunction":
        return GroupFunction(lambda g: fn(self(g)), sup_bound, dim, name or self.name, self.check_bound)


def constant(c, dim: Optional[int] = None, name: str = "const") -> GroupFunction:
    c = simplify(c) if not isinstance(c, tuple) else c
    bound = abs(c) if not isinstance(c, tuple) else math.sqrt(to_float(norm_sq(c)))
    return GroupFunction(lambda g: c, bound, dim, name, check_bound=False)


def indicator(predicate: Callable, name: str = "chi") -> GroupFunction:
    one, zero = Fraction(1), Fraction(0)
    return GroupFunction(lambda g: one if predicate(g) else zero, Fraction(1), None, name,
                         check_bound=False)


def is_square(g) -> bool:
    n = g[0]
    return n >= 0 and math.isqrt(n) ** 2 == n


def is_cube(g) -> bool:
    n = g[0]
    r = round(abs(n) ** (1 / 3))
    return any((r + d) ** 3 == abs(n) for d in (-1, 0, 1))


def squares() -> GroupFunction:
    """χ of the perfect squares {0, 1, 4, 9, ...} ⊂ Z."""
    return indicator(is_square, "chi_squares")


def cubes() -> GroupFunction:
    """χ of the perfect cubes (both signs) in Z."""
    return indicator(is_cube, "chi_cubes")


# ---------------------------------------------------------------------------
# averages


def _divide(v, count: int):
    if isinstance(v, tuple):
        return tuple(_divide(x, count) for x in v)
    if isinstance(v, (int, Fraction)):
        return Fraction(v) / count
    return v / count


def folner_average(f: GroupFunction, subset: FiniteSubset):
    """(1/μ(Λ)) Σ_{g∈Λ} f(g)·w, summed in sorted order with exact accumulation."""
    if not subset.elements:
        raise InvariantViolation("average over a set of measure zero")
    acc = VectorAccumulator(f.dim)
    for g in subset.elements:
        acc.add(f(g))
    return _divide(acc.value(), len(subset))


def weighted_sum(f: GroupFunction, subset: FiniteSubset):
    """Σ_{g∈Λ} f(g)·w (the finite integral ∫_Λ f dμ)."""
    acc = VectorAccumulator(f.dim)
    for g in subset.elements:
        acc.add(f(g))
    w = subset.group.measure_weight
    total = acc.value()
    return total if w == 1 else vscale(total, w)


def running_sums(integrand: Callable, seq: FolnerSequence, ns: Sequence[int],
                 dim: Optional[int] = None) -> Iterable[tuple]:
    """Yield ``(n, Σ_{g∈Λ_n} integrand(g), |Λ_n|)`` for n in ``ns`` (sorted).

    Nested sequences are accumulated shell by shell.
    """
    ns = sorted(set(ns))
    if seq.nested:
        acc = VectorAccumulator(dim)
        size = 0
        wanted = set(ns)
        for n in range(1, ns[-1] + 1):
            for g in seq.shell(n):
                acc.add(integrand(g))
                size += 1
            if n in wanted:
                yield n, acc.value(), size
    else:
        for n in ns:
            subset = seq(n)
            acc = VectorAccumulator(dim)
            for g in subset.elements:
                acc.add(integrand(g))
            yield n, acc.value(), len(subset)


def average_series(f: Union[GroupFunction, Callable], seq: FolnerSequence, n_max: int,
                   ns: Optional[Sequence[int]] = None, name: Optional[str] = None,
                   dim: Optional[int] = None) -> Series:
    """Series n ↦ (1/μ(Λ_n)) Σ_{Λ_n} f for n in ``ns`` (default 1..n_max)."""
    ns = list(ns) if ns is not None else list(range(1, n_max + 1))
    if dim is None:
        dim = getattr(f, "dim", None)
    series = Series(name or getattr(f, "name", "average"))
    w = seq.group.measure_weight
    for n, total, size in running_sums(f, seq, ns, dim):
        series.append(n, size * w, _divide(total, size))
    return series


# ---------------------------------------------------------------------------
# densities


def _membership(S) -> Callable:
    if isinstance(S, FiniteSubset):
        return S.__contains__
    if callable(S):
        return S
    raise InputError("density set must be a predicate or a FiniteSubset")


def density_of(S, seq: FolnerSequence, n: int) -> Fraction:
    """μ(Λ_n ∩ S)/μ(Λ_n), exact."""
    member = _membership(S)
    subset = seq(n)
    hits = sum(1 for g in subset.elements if member(g))
    return Fraction(hits, len(subset))


def _exceeds(value, target, eps) -> bool:
    """‖value − target‖ ≥ ε, decided exactly when the inputs are exact."""
    sq = norm_sq(vsub(value, target))
    e2 = eps * eps
    if isinstance(sq, Fraction) and isinstance(e2, Fraction):
        return sq >= e2
    return to_float(sq) >= to_float(e2)


def exceedance_set(f: GroupFunction, target, eps, subset: FiniteSubset) -> FiniteSubset:
    """Λ ∩ S_ε with S_ε = {h : ‖f(h) − target‖ ≥ ε}."""
    return FiniteSubset(subset.group, (g for g in subset.elements if _exceeds(f(g), target, eps)))


@dataclass
class DensityReport:
    """Densities of the exceedance sets S_ε along the sequence, per ε."""

    target: object
    epsilons: tuple
    series: dict
    trends: dict
    tau: object

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.trends.values())

    @property
    def verdict(self) -> str:
        return "PASS-TREND" if self.passed else "FAIL"


def density_limit_check(f: GroupFunction, a, seq: FolnerSequence,
                        epsilons: Optional[Sequence] = None, n_max: int = 1000, tau=DEFAULT_TAU,
                        ns: Optional[Sequence[int]] = None) -> DensityReport:
    """Test the density limit f → a: each S_ε density series must trend to 0."""
    eps = tuple(epsilons) if epsilons is not None else DEFAULT_EPSILONS
    one, zero = Fraction(1), Fraction(0)

    def integrand(g):
        v = f(g)
        return tuple(one if _exceeds(v, a, e) else zero for e in eps)

    ns = list(ns) if ns is not None else list(range(1, n_max + 1))
    per_eps = {e: Series(f"density_{f.name}_eps{e}", value_label="density") for e in eps}
    w = seq.group.measure_weight
    for n, total, size in running_sums(integrand, seq, ns, len(eps)):
        for e, count in zip(eps, total):
            d = Fraction(count) / size
            if not 0 <= d <= 1:
                raise InvariantViolation(f"density {d} outside [0, 1]")
            per_eps[e].append(n, size * w, d)
    trends = {e: s.trend(0, tau) for e, s in per_eps.items()}
    return DensityReport(a, eps, per_eps, trends, tau)


@dataclass
class AlgebraVerdict:
    """Set-inclusion checks behind the density-limit algebra."""

    sum_inclusion: bool
    scalar_inclusion: bool
    order: Optional[bool]
    witness: Optional[tuple] = None
    prerequisites: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.sum_inclusion and self.scalar_inclusion and self.order is not False

    @property
    def label(self) -> str:
        return "PASS" if self.passed else "FAIL"


def density_limit_algebra_check(f: GroupFunction, g: GroupFunction, a, b, beta,
                                seq: FolnerSequence, n_max: int,
                                epsilons: Optional[Sequence] = None,
                                tau=DEFAULT_TAU) -> AlgebraVerdict:
    """Check S_ε(f+g) ⊆ S_{ε/2}(f) ∪ S_{ε/2}(g), the scalar case, and the order statement.

    Inclusions are tested literally on Λ_{n_max}. The order statement (f ≤ g
    pointwise forces a ≤ b) is evaluated only when f ≤ g holds on Λ_{n_max};
    otherwise ``order`` is None.
    """
    eps = tuple(epsilons) if epsilons is not None else DEFAULT_EPSILONS
    subset = seq(n_max)
    beta = simplify(beta)
    sum_ok = scalar_ok = True
    pointwise_le = True
    witness = None
    for h in subset.elements:
        fv, gv = f(h), g(h)
        sv = tuple(x + y for x, y in zip(fv, gv)) if isinstance(fv, tuple) else fv + gv
        target = tuple(x + y for x, y in zip(a, b)) if isinstance(a, tuple) else a + b
        bf, ba = vscale(fv, beta), vscale(a, beta)
        for e in eps:
            if _exceeds(sv, target, e) and not (_exceeds(fv, a, e / 2) or _exceeds(gv, b, e / 2)):
                sum_ok = False
                witness = witness or ("sum", h, e)
            if _exceeds(bf, ba, e):
                if beta == 0 or not _exceeds(fv, a, e / abs(beta)):
                    scalar_ok = False
                    witness = witness or ("scalar", h, e)
        if not isinstance(fv, tuple) and real_part(fv) > real_part(gv):
            pointwise_le = False
    order = (real_part(simplify(a)) <= real_part(simplify(b))) if pointwise_le and \
        not isinstance(a, tuple) else None
    prereq = {"f": density_limit_check(f, a, seq, eps, n_max, tau),
              "g": density_limit_check(g, b, seq, eps, n_max, tau)}
    return AlgebraVerdict(sum_ok, scalar_ok, order, witness, prereq)


def split_average(f: GroupFunction, subset: FiniteSubset, target, eps) -> tuple:
    """The two parts (1/μ)Σ_{Λ∩S_ε} f and (1/μ)Σ_{Λ∖S_ε} f of the average."""
    inside, outside = VectorAccumulator(f.dim), VectorAccumulator(f.dim)
    for g in subset.elements:
        v = f(g)
        (inside if _exceeds(v, target, eps) else outside).add(v)
    size = len(subset)
    return _divide(inside.value(), size), _divide(outside.value(), size)


# ---------------------------------------------------------------------------
# equivalences


@dataclass
class KvnReport:
    """Both sides of the density-zero / vanishing-average equivalence for f ≥ 0."""

    density: DensityReport
    average: Series
    average_trend: TrendResult

    @property
    def density_to_zero(self) -> bool:
        return self.density.passed

    @property
    def average_to_zero(self) -> bool:
        return self.average_trend.passed

    @property
    def consistent(self) -> bool:
        return self.density_to_zero == self.average_to_zero

    @property
    def label(self) -> str:
        return "CONSISTENT" if self.consistent else "INCONSISTENT"


def _nonnegative(f: GroupFunction) -> GroupFunction:
    def checked(g):
        v = f(g)
        if isinstance(v, tuple) or real_part(v) < 0 or (hasattr(v, "imag") and v.imag):
            raise InputError(f"{f.name}({g}) = {v} is not a nonnegative real")
        return v

    return GroupFunction(checked, f.sup_bound, None, f.name, check_bound=False)


def kvn_equivalence(f: GroupFunction, seq: FolnerSequence, n_max: int,
                    epsilons: Optional[Sequence] = None, tau=DEFAULT_TAU,
                    density_tau=None, ns: Optional[Sequence[int]] = None) -> KvnReport:
    """Density limit 0 versus vanishing Følner average, for bounded f ≥ 0."""
    g = _nonnegative(f)
    density = density_limit_check(g, Fraction(0), seq, epsilons, n_max,
                                  density_tau if density_tau is not None else tau, ns)
    avg = average_series(g, seq, n_max, ns, name=f"avg_{f.name}")
    return KvnReport(density, avg, avg.trend(0, tau))


@dataclass
class PairReport:
    """avg f² and avg |f| series with their trends to 0."""

    square: Series
    absolute: Series
    square_trend: TrendResult
    absolute_trend: TrendResult

    @property
    def consistent(self) -> bool:
        return self.square_trend.passed == self.absolute_trend.passed

    @property
    def label(self) -> str:
        return "CONSISTENT" if self.consistent else "INCONSISTENT"


def square_abs_equivalence(f: GroupFunction, seq: FolnerSequence, n_max: int,
                           tau_square=DEFAULT_TAU, tau_abs=DEFAULT_TAU,
                           ns: Optional[Sequence[int]] = None) -> PairReport:
    """avg f² → 0 iff avg |f| → 0, for real bounded f."""
    def both(g):
        v = simplify(f(g))
        return (v * v, abs(v))

    ns = list(ns) if ns is not None else list(range(1, n_max + 1))
    sq = Series(f"avg_sq_{f.name}")
    ab = Series(f"avg_abs_{f.name}")
    w = seq.group.measure_weight
    for n, (s2, s1), size in running_sums(both, seq, ns, 2):
        sq.append(n, size * w, _divide(s2, size))
        ab.append(n, size * w, _divide(s1, size))
    return PairReport(sq, ab, sq.trend(0, tau_square), ab.trend(0, tau_abs))


@dataclass
class MeanSquareReport:
    """avg f, avg f², avg (f−β)² and the verdict on the mean-square identity."""

    beta: object
    mean: Series
    mean_square: Series
    centered: Series
    identity_holds: bool
    hypothesis: bool
    conclusion: bool
    witness: Optional[int] = None

    @property
    def verdict(self) -> str:
        if not self.identity_holds:
            return "FAIL"
        if not self.hypothesis:
            return "VACUOUS-PASS"
        return "PASS" if self.conclusion else "FAIL"


def _close(x, y) -> bool:
    if is_exact(x) and is_exact(y):
        return simplify(x) == simplify(y)
    x, y = to_float(x), to_float(y)
    return abs(x - y) <= FLOAT_SLACK * max(1.0, abs(x), abs(y))


def mean_square_identity_check(f: GroupFunction, beta, seq: FolnerSequence, n_max: int,
                               tau=DEFAULT_TAU, ns: Optional[Sequence[int]] = None
                               ) -> MeanSquareReport:
    """Per-index identity avg(f−β)² = avg f² − 2β avg f + β², plus the limit implication.

    f and β are real here; the hypothesis is avg f → β and avg f² → β².
    """
    beta = simplify(beta)

    def triple(g):
        v = simplify(f(g))
        d = v - beta
        return (v, v * v, d * d)

    ns = list(ns) if ns is not None else list(range(1, n_max + 1))
    mean, msq, cen = Series("avg_f"), Series("avg_f_sq"), Series("avg_centered_sq")
    identity, witness = True, None
    w = seq.group.measure_weight
    for n, (s1, s2, s3), size in running_sums(triple, seq, ns, 3):
        a1, a2, a3 = _divide(s1, size), _divide(s2, size), _divide(s3, size)
        mean.append(n, size * w, a1)
        msq.append(n, size * w, a2)
        cen.append(n, size * w, a3)
        if not _close(a3, a2 - 2 * beta * a1 + beta * beta):
            identity = False
            witness = witness or n
    hyp = mean.trend(beta, tau).passed and msq.trend(beta * beta, tau).passed
    concl = cen.trend(0, tau).passed
    return MeanSquareReport(beta, mean, msq, cen, identity, hyp, concl, witness)
