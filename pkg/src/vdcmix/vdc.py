"""The van der Corput inequality chain, checked exactly on finite sets.

Each inequality operation evaluates both sides and raises
:class:`InequalityViolation` when ``lhs <= rhs`` fails. Float-valued inputs
are converted to Fractions without rounding before the comparison, so every
check is exact; vector values with complex entries are split into real and
imaginary coordinates, which leaves all norms unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .averaging import GroupFunction, running_sums
from .cyclotomic import Cyclotomic
from .errors import InequalityViolation, InputError, StructuralError
from .groups import (FiniteSubset, FolnerSequence, difference_counts, folner_defect,
                     quotient_set, uniform_defect)
from .numeric import (Accumulator, MPC, as_fraction, inner, is_exact, norm, real_part,
                      simplify, to_float)
from .series import DEFAULT_TAU, Series, TrendResult

BORELNESS_NOTE = "not applicable (discrete)"


# ---------------------------------------------------------------------------
# exact real coordinates


def _real_coords(v) -> tuple:
    """Exact real coordinate vector with the same Euclidean norm as ``v``."""
    items = v if isinstance(v, tuple) else (v,)
    out = []
    for x in items:
        x = simplify(x)
        if isinstance(x, Cyclotomic):
            x = complex(x)
        if isinstance(x, (complex, MPC)):
            out.append(as_fraction(x.real))
            out.append(as_fraction(x.imag))
        else:
            out.append(as_fraction(x))
    return tuple(out)


def _sq(vec) -> Fraction:
    return sum((c * c for c in vec), Fraction(0))


def _vsum(vectors, dim: int) -> list:
    acc = [Fraction(0)] * dim
    for v in vectors:
        for i, c in enumerate(v):
            acc[i] += c
    return acc


def _common(vectors: Sequence[tuple]) -> tuple:
    """Integer vectors and one denominator D with vectors[i] = ints[i] / D exactly."""
    den = math.lcm(*(c.denominator for v in vectors for c in v)) if vectors else 1
    ints = [tuple(c.numerator * (den // c.denominator) for c in v) for v in vectors]
    return ints, den


def _isq(vec) -> int:
    return sum(c * c for c in vec)


def _isum(vectors, dim: int) -> list:
    acc = [0] * dim
    for v in vectors:
        for i, c in enumerate(v):
            acc[i] += c
    return acc


@dataclass(frozen=True)
class InequalityResult:
    """Both sides of an inequality lhs ≤ rhs and whether it held."""

    name: str
    lhs: object
    rhs: object
    holds: bool
    witness: object = None

    @property
    def label(self) -> str:
        return "PASS" if self.holds else "FAIL"

    @property
    def slack(self):
        return self.rhs - self.lhs


def check_inequality(name: str, lhs, rhs, witness=None, flip: bool = False,
                     raise_on_fail: bool = True) -> InequalityResult:
    """Decide lhs ≤ rhs (exactly when both sides are exact).

    ``flip`` tests the reversed inequality instead; it exists only so the fuzz
    harness can prove that it notices a wrong inequality.
    """
    if flip:
        lhs, rhs = rhs, lhs
    if isinstance(lhs, (int, Fraction)) and isinstance(rhs, (int, Fraction)):
        holds = lhs <= rhs
    else:
        a, b = to_float(lhs), to_float(rhs)
        holds = a <= b * (1 + 1e-12) if b >= 0 else a <= b * (1 - 1e-12)
    result = InequalityResult(name, lhs, rhs, holds, witness)
    if not holds and raise_on_fail:
        raise InequalityViolation(f"{name}: lhs {lhs} > rhs {rhs}", witness)
    return result


# ---------------------------------------------------------------------------
# single-set inequalities


def avg_norm_inequality(f: GroupFunction, subset: FiniteSubset, flip: bool = False,
                        raise_on_fail: bool = True) -> InequalityResult:
    """‖∫_Λ f dμ‖² ≤ μ(Λ) ∫_Λ ‖f‖² dμ."""
    if not subset.elements:
        raise InputError("empty set")
    vals, den = _common([_real_coords(f(g)) for g in subset.elements])
    dim = len(vals[0])
    w = subset.group.measure_weight
    lhs = Fraction(_isq(_isum(vals, dim)), den * den) * w * w
    rhs = subset.measure * Fraction(sum(_isq(v) for v in vals), den * den) * w
    return check_inequality("avg-norm", lhs, rhs, subset, flip, raise_on_fail)


@dataclass(frozen=True)
class GapResult:
    """Distance between the Følner average and the shifted double average."""

    n: int
    m: int
    gap_sq: Fraction
    bound: Fraction
    holds: bool

    @property
    def gap(self) -> float:
        return float(self.gap_sq) ** 0.5


def shift_average_gap(f: GroupFunction, seq: FolnerSequence, n: int, m: int) -> GapResult:
    """‖avg_{Λ_n} f − (1/μ(Λ_n)μ(Λ_m)) Σ_{Λ_n}Σ_{Λ_m} f(gh)‖ against b·uniform_defect(n, m)."""
    if f.sup_bound is None:
        raise InputError("shift_average_gap needs a declared sup bound")
    outer, inner_set = seq(n), seq(m)
    add = seq.group._add
    mult: dict = {}
    for g in outer.elements:
        for h in inner_set.elements:
            x = add(g, h)
            mult[x] = mult.get(x, 0) + 1
    cache: dict = {}

    def val(x):
        hit = cache.get(x)
        if hit is None:
            hit = cache[x] = _real_coords(f(x))
        return hit

    dim = len(val(outer.elements[0]))
    single = _vsum((val(g) for g in outer.elements), dim)
    double = [Fraction(0)] * dim
    for x, c in mult.items():
        for i, comp in enumerate(val(x)):
            double[i] += c * comp
    size_n, size_m = len(outer), len(inner_set)
    diff = [a / size_n - b / (size_n * size_m) for a, b in zip(single, double)]
    gap_sq = _sq(diff)
    b = as_fraction(simplify(f.sup_bound)) if is_exact(f.sup_bound) else as_fraction(f.sup_bound)
    bound = b * uniform_defect(seq, n, m)
    holds = gap_sq <= bound * bound
    if not holds:
        raise InequalityViolation(f"shift gap {float(gap_sq) ** 0.5} exceeds bound {bound}",
                                  (n, m))
    return GapResult(n, m, gap_sq, bound, holds)


def triple_avg_inequality(f: GroupFunction, lam1: FiniteSubset, lam2: FiniteSubset,
                          flip: bool = False, raise_on_fail: bool = True) -> InequalityResult:
    """‖∫_{Λ₂}∫_{Λ₁} f(gh) dh dg‖² ≤ μ(Λ₂) ∫_{Λ₁}∫_{Λ₁}∫_{Λ₂} ⟨f(gh₁), f(gh₂)⟩.

    The triple integral is evaluated as Σ_{g∈Λ₂} ‖Σ_{h∈Λ₁} f(gh)‖² w³, which
    equals it term by term by bilinearity.
    """
    if lam1.group != lam2.group:
        raise StructuralError("sets from different groups")
    add = lam1.group._add
    w = lam1.group.measure_weight
    cache: dict = {}

    def val(x):
        hit = cache.get(x)
        if hit is None:
            hit = cache[x] = _real_coords(f(x))
        return hit

    points = {add(g, h) for g in lam2.elements for h in lam1.elements}
    keys = sorted(points)
    ints, den = _common([val(x) for x in keys])
    table = dict(zip(keys, ints))
    dim = len(ints[0])
    inner_sums = [_isum((table[add(g, h)] for h in lam1.elements), dim) for g in lam2.elements]
    total = _isum(inner_sums, dim)
    lhs = Fraction(_isq(total), den * den) * w ** 4
    rhs = lam2.measure * Fraction(sum(_isq(v) for v in inner_sums), den * den) * w ** 3
    return check_inequality("triple-avg", lhs, rhs, (lam1, lam2), flip, raise_on_fail)


def triple_sum_literal(f: GroupFunction, lam1: FiniteSubset, lam2: FiniteSubset):
    """Σ_{h₁,h₂∈Λ₁} Σ_{g∈Λ₂} ⟨f(gh₁), f(gh₂)⟩ by direct enumeration (unweighted)."""
    add = lam1.group._add
    acc = Accumulator()
    for h1 in lam1.elements:
        for h2 in lam1.elements:
            for g in lam2.elements:
                acc.add(inner(f(add(g, h1)), f(add(g, h2))))
    return acc.value()


def folding_inequality(f: Callable, subset: FiniteSubset, S: Optional[FiniteSubset] = None,
                       flip: bool = False, raise_on_fail: bool = True) -> InequalityResult:
    """∫_Λ∫_Λ f(h₁⁻¹h₂) ≤ μ(Λ) ∫_S f for f ≥ 0 and S ⊇ Λ⁻¹Λ."""
    quotient = quotient_set(subset)
    if S is None:
        S = quotient
    elif not quotient.members <= S.members:
        raise InputError("S must contain the quotient set of Λ")
    vals = {}
    for h in S.elements:
        v = simplify(f(h))
        if real_part(v) < 0 or (hasattr(v, "imag") and not isinstance(v, Fraction) and v.imag):
            raise InputError(f"f({h}) = {v} is not a nonnegative real")
        vals[h] = as_fraction(v)
    w = subset.group.measure_weight
    keys = list(vals)
    ints, den = _common([(vals[d],) for d in keys])
    table = {d: v[0] for d, v in zip(keys, ints)}
    lhs = Fraction(sum(c * table[d] for d, c in difference_counts(subset).items()), den) * w * w
    rhs = subset.measure * Fraction(sum(table.values()), den) * w
    return check_inequality("folding", lhs, rhs, subset, flip, raise_on_fail)


def gamma_quotient_bound(gamma: Callable, seq_or_set, m: Optional[int] = None,
                         flip: bool = False, raise_on_fail: bool = True) -> InequalityResult:
    """|(1/μ²)∫_Λ∫_Λ γ_{h₁⁻¹h₂}| ≤ (1/μ)∫_{Λ⁻¹Λ} |γ_h| for Λ = Λ_m."""
    subset = seq_or_set(m) if isinstance(seq_or_set, FolnerSequence) else seq_or_set
    counts = difference_counts(subset)
    size = len(subset)
    vals = {d: simplify(gamma(d)) for d in counts}
    if all(isinstance(v, (Fraction, float)) for v in vals.values()):
        keys = list(vals)
        ints, den = _common([(as_fraction(vals[d]),) for d in keys])
        table = {d: v[0] for d, v in zip(keys, ints)}
        double = sum(c * table[d] for d, c in counts.items())
        lhs = Fraction(abs(double), den * size * size)
        rhs = Fraction(sum(abs(v) for v in table.values()), den * size)
    else:
        exact_vals = {d: _real_coords(v) for d, v in vals.items()}
        re = sum((c * exact_vals[d][0] for d, c in counts.items()), Fraction(0))
        im = sum((c * (exact_vals[d][1] if len(exact_vals[d]) > 1 else 0)
                  for d, c in counts.items()), Fraction(0))
        lhs = float(re * re + im * im) ** 0.5 / (size * size)
        rhs = sum(norm(exact_vals[d]) for d in counts) / size
    return check_inequality("gamma-quotient", lhs, rhs, m, flip, raise_on_fail)


# ---------------------------------------------------------------------------
# correlation series


@dataclass
class CorrelationSeries:
    """γ_h^{(n)} = (1/μ(Λ_n)) ∫_{Λ_n} ⟨f(g), f(gh)⟩ dg along the sequence."""

    h: tuple
    series: Series
    bound: object = None

    @property
    def limit_estimate(self):
        idx = range(min(len(self.series) - 1, (3 * len(self.series)) // 4), len(self.series))
        vals = [self.series.values[i] for i in idx]
        if all(isinstance(v, Fraction) for v in vals):
            return sum(vals, Fraction(0)) / len(vals)
        acc = Accumulator()
        for v in vals:
            acc.add(v)
        return acc.value() / len(vals)

    def trend(self, target, tau=DEFAULT_TAU) -> TrendResult:
        return self.series.trend(target, tau)


def _inner_fn(inner_product):
    return inner_product if inner_product is not None else inner


def _bound_sq(f):
    b = f.sup_bound if hasattr(f, "sup_bound") else None
    if b is None:
        return None
    b = simplify(b)
    return b * b


def gamma_series(f, seq: FolnerSequence, h: tuple, n_max: int,
                 ns: Optional[Sequence[int]] = None,
                 inner_product: Optional[Callable] = None) -> CorrelationSeries:
    """Per-n estimates of γ_h; raises InequalityViolation if some |γ_h^{(n)}| exceeds b²."""
    ip = _inner_fn(inner_product)
    add = seq.group._add
    ns = list(ns) if ns is not None else list(range(1, n_max + 1))
    series = Series(f"gamma_h{'_'.join(map(str, h))}")
    bsq = _bound_sq(f)
    w = seq.group.measure_weight
    for n, total, size in running_sums(lambda g: ip(f(g), f(add(g, h))), seq, ns):
        val = simplify(total / size if not isinstance(total, int) else Fraction(total, size))
        if bsq is not None:
            check_inequality("gamma-bound", abs(val) if isinstance(val, Fraction) else abs(complex(val)),
                             bsq, (h, n))
        series.append(n, size * w, val)
    return CorrelationSeries(h, series, bsq)


@dataclass
class ShiftedGammaVerdict:
    h1: tuple
    h2: tuple
    shifted: Series
    reference: CorrelationSeries
    differences: list
    bounds: list
    agree: bool

    @property
    def label(self) -> str:
        return "PASS" if self.agree else "FAIL"


def shifted_gamma_consistency(f, seq: FolnerSequence, h1: tuple, h2: tuple, n_max: int,
                              tol=DEFAULT_TAU, ns: Optional[Sequence[int]] = None,
                              inner_product: Optional[Callable] = None) -> ShiftedGammaVerdict:
    """(1/μ)∫⟨f(gh₁), f(gh₂)⟩ versus γ_{h₁⁻¹h₂}^{(n)}, with the per-n bound b²·defect(n, h₁)."""
    ip = _inner_fn(inner_product)
    group = seq.group
    add = group._add
    d = group._sub(h2, h1)
    ns = list(ns) if ns is not None else list(range(1, n_max + 1))
    ref = gamma_series(f, seq, d, n_max, ns, inner_product)
    shifted = Series("shifted_gamma")
    w = group.measure_weight
    for n, total, size in running_sums(lambda g: ip(f(add(g, h1)), f(add(g, h2))), seq, ns):
        shifted.append(n, size * w, simplify(total / size if not isinstance(total, int)
                                             else Fraction(total, size)))
    bsq = _bound_sq(f)
    diffs, bounds = [], []
    for i, n in enumerate(ns):
        diff = simplify(shifted.values[i] - ref.series.values[i])
        diff_abs = abs(diff) if isinstance(diff, Fraction) else abs(complex(diff))
        diffs.append(diff_abs)
        if bsq is not None:
            bound = bsq * folner_defect(seq, n, h1)
            bounds.append(bound)
            check_inequality("shifted-gamma", diff_abs, bound, (h1, h2, n))
    tail = shifted.trend(ref.limit_estimate, tol)
    return ShiftedGammaVerdict(h1, h2, shifted, ref, diffs, bounds, tail.passed)


def _pair_sum(values_by_diff: dict, counts: dict):
    acc = Accumulator()
    for d, c in counts.items():
        acc.add(values_by_diff[d] * c)
    return acc.value()


@dataclass
class TripleDoubleVerdict:
    m: int
    triple: Series
    double_sum: object
    trend: TrendResult

    @property
    def label(self) -> str:
        return "PASS" if self.trend.passed else "FAIL"


def triple_to_double_limit(f, seq: FolnerSequence, m: int, n_max: int, tol=DEFAULT_TAU,
                           ns: Optional[Sequence[int]] = None,
                           inner_product: Optional[Callable] = None,
                           gamma: Optional[Callable] = None,
                           combine: Optional[Callable] = None) -> TripleDoubleVerdict:
    """(1/μ(Λ_n)) ∫_{Λ_m}∫_{Λ_m}∫_{Λ_n} ⟨f(gh₁), f(gh₂)⟩ → ∫_{Λ_m}∫_{Λ_m} γ_{h₁⁻¹h₂}.

    γ comes from ``gamma`` (an exact closed form) when supplied, else from
    limit estimates of :func:`gamma_series`. The triple integrand at g is
    ⟨F(g), F(g)⟩ with F(g) = Σ_{h∈Λ_m} f(gh); ``combine`` adds values (defaults
    to ``+`` / coordinatewise addition).
    """
    ip = _inner_fn(inner_product)
    group = seq.group
    add = group._add
    lam_m = seq(m)
    ns = list(ns) if ns is not None else list(range(1, n_max + 1))
    counts = difference_counts(lam_m)
    if gamma is not None:
        gam = {d: simplify(gamma(d)) for d in counts}
    else:
        gam = {d: gamma_series(f, seq, d, n_max, ns, inner_product).limit_estimate for d in counts}
    w = group.measure_weight
    double = simplify(_pair_sum(gam, counts)) * w * w

    def summed(g):
        vals = [f(add(g, h)) for h in lam_m.elements]
        if combine is not None:
            return combine(vals)
        out = vals[0]
        for v in vals[1:]:
            out = tuple(a + b for a, b in zip(out, v)) if isinstance(out, tuple) else out + v
        return out

    triple = Series(f"triple_m{m}")
    for n, total, size in running_sums(lambda g: (lambda F: ip(F, F))(summed(g)), seq, ns):
        val = total / size if not isinstance(total, int) else Fraction(total, size)
        triple.append(n, size * w, simplify(val) * w * w)
    return TripleDoubleVerdict(m, triple, double, triple.trend(double, tol))


# ---------------------------------------------------------------------------
# the sequence form of the van der Corput lemma


@dataclass
class VdcVerdict:
    condition: Series
    conclusion: Series
    condition_trend: TrendResult
    conclusion_trend: TrendResult
    hypotheses: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        if not self.condition_trend.passed:
            return "INCONCLUSIVE"
        return "PASS" if self.conclusion_trend.passed else "FAIL"


def condition_series(gamma: Callable, seq: FolnerSequence, m_list: Sequence[int]) -> Series:
    """m ↦ (1/μ(Λ_m)²) ∫_{Λ_m}∫_{Λ_m} γ_{h₁⁻¹h₂}."""
    out = Series("vdc_condition")
    w = seq.group.measure_weight
    for m in m_list:
        lam = seq(m)
        counts = difference_counts(lam)
        vals = {d: simplify(gamma(d)) for d in counts}
        total = simplify(_pair_sum(vals, counts))
        size = len(lam)
        out.append(m, size * w, simplify(total / (size * size)))
    return out


def norm_average_series(f: GroupFunction, seq: FolnerSequence, n_max: int,
                        ns: Optional[Sequence[int]] = None) -> Series:
    """n ↦ ‖(1/μ(Λ_n)) ∫_{Λ_n} f‖ (as a float; the square is exact for exact f)."""
    ns = list(ns) if ns is not None else list(range(1, n_max + 1))
    out = Series(f"norm_avg_{f.name}")
    w = seq.group.measure_weight
    for n, total, size in running_sums(f, seq, ns, f.dim):
        vec = _real_coords(total)
        out.append(n, size * w, float(_sq(vec) / (size * size)) ** 0.5, norm_sq=_sq(vec) / (size * size))
    return out


def uniformity_spot_check(seq: FolnerSequence, m: int, n_probe: int) -> dict:
    """uniform_defect(n, m) at n_probe/2 and n_probe; decreasing values pass."""
    n_hi = max(n_probe, 2)
    n_lo = max(n_hi // 2, 1)
    lo, hi = uniform_defect(seq, n_lo, m), uniform_defect(seq, n_hi, m)
    return {"m": m, "n": (n_lo, n_hi), "uniform_defect": (lo, hi), "passed": hi < lo or hi == 0}


def vdc_verdict(f, seq: FolnerSequence, m_list: Sequence[int], n_max: int, tau=DEFAULT_TAU,
                gamma: Optional[Callable] = None, conclusion: Optional[Series] = None,
                ns: Optional[Sequence[int]] = None, inner_product: Optional[Callable] = None,
                uniformity_probe: int = 64, condition_tau=None) -> VdcVerdict:
    """Condition series over m_list and conclusion series ‖avg f‖, combined into a verdict.

    γ is taken from ``gamma`` when supplied, otherwise estimated by
    :func:`gamma_series` at n_max. ``conclusion`` may be supplied precomputed
    (the mixing module evaluates it through the expectation oracle).
    """
    if gamma is None:
        cache: dict = {}

        def gamma(d):
            if d not in cache:
                cache[d] = gamma_series(f, seq, d, n_max, [n_max], inner_product).series.last
            return cache[d]

    cond = condition_series(gamma, seq, m_list)
    if conclusion is None:
        conclusion = norm_average_series(f, seq, n_max, ns)
    hyp = {"uniformly space-filling (spot check)": uniformity_spot_check(
        seq, m_list[0], min(uniformity_probe, n_max)),
        "gamma Borel measurable": BORELNESS_NOTE}
    ctau = condition_tau if condition_tau is not None else tau
    return VdcVerdict(cond, conclusion, cond.trend(0, ctau), conclusion.trend(0, tau), hyp)
