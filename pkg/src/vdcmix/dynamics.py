"""Measure-preserving systems with exactly integrable observable algebras.

Every system exposes the Koopman action ``koopman(g, f) = f ∘ T_g``, an exact
expectation ``expect(f) = ∫ f dν`` and the constant observable ``one()``.
Points of the underlying space are never materialised: Bernoulli shifts work
on cylinder polynomials, torus maps on trigonometric polynomials (and, for
rotations, on finite unions of boxes), finite systems on value tables, and
product systems on finite sums of tensors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Optional, Sequence

import mpmath
from mpmath.ctx_mp_python import _mpc as MPC, _mpf as MPF

from .cyclotomic import Cyclotomic
from .exprs import evaluate
from .errors import InvariantViolation, StructuralError
from .groups import CyclicGroup, GroupModel, IntegerLattice
from .numeric import conj, simplify

_SCALARS = (int, Fraction, float, complex, Cyclotomic, MPF, MPC)


def _is_scalar(x) -> bool:
    return isinstance(x, _SCALARS) or isinstance(x, Rational)


class Observable:
    """Base class: arithmetic is delegated to ``_mul``/``_add``/``_scale``."""

    algebra = "abstract"

    def __mul__(self, other):
        if _is_scalar(other):
            return self._scale(other)
        self._check_same(other)
        return self._mul(other)

    def __rmul__(self, other):
        if _is_scalar(other):
            return self._scale(other)
        return NotImplemented

    def __add__(self, other):
        if _is_scalar(other):
            return self._add(self._constant(other))
        self._check_same(other)
        return self._add(other)

    __radd__ = __add__

    def __neg__(self):
        return self._scale(-1)

    def __sub__(self, other):
        return self + (-other if not _is_scalar(other) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def _check_same(self, other):
        if not isinstance(other, Observable) or other.algebra != self.algebra:
            raise StructuralError(
                f"cannot combine {self.algebra} with {getattr(other, 'algebra', type(other).__name__)}")


# ---------------------------------------------------------------------------
# cylinder polynomials (Bernoulli shifts)


def _merge_cylinders(c1: tuple, c2: tuple):
    """Site-map union of two cylinders, or None when they assign different symbols."""
    if not c1:
        return c2
    if not c2:
        return c1
    d = dict(c1)
    for site, sym in c2:
        have = d.get(site)
        if have is None:
            d[site] = sym
        elif have != sym:
            return None
    return tuple(sorted(d.items()))


class CylinderPolynomial(Observable):
    """Finite rational combination of cylinder indicators 1_{x_{s1}=a1, ..., x_{sr}=ar}.

    ``terms`` maps a cylinder (sorted tuple of ``(site, symbol)``, sites being
    rank-q tuples) to its coefficient.
    """

    algebra = "cylinder"
    __slots__ = ("rank", "terms")

    def __init__(self, rank: int, terms: Mapping[tuple, object]):
        self.rank = rank
        self.terms = {c: v for c, v in terms.items() if v != 0}

    @classmethod
    def cylinder(cls, assignment, coef=1, rank: int = 1) -> "CylinderPolynomial":
        """Indicator of a cylinder given as ``{site: symbol}``; int sites allowed for rank 1."""
        items = assignment.items() if isinstance(assignment, Mapping) else assignment
        cyl = {}
        for site, sym in items:
            site = (site,) if isinstance(site, int) else tuple(site)
            if len(site) != rank:
                raise StructuralError(f"site {site} is not in Z^{rank}")
            if site in cyl and cyl[site] != sym:
                return cls(rank, {})
            cyl[site] = int(sym)
        return cls(rank, {tuple(sorted(cyl.items())): Fraction(coef)})

    @classmethod
    def constant(cls, c, rank: int = 1) -> "CylinderPolynomial":
        return cls(rank, {(): Fraction(c) if isinstance(c, Rational) else c})

    def _constant(self, c):
        return CylinderPolynomial.constant(c, self.rank)

    def _scale(self, c):
        return CylinderPolynomial(self.rank, {k: v * c for k, v in self.terms.items()})

    def _add(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return CylinderPolynomial(self.rank, out)

    def _mul(self, other):
        out: dict = {}
        for c1, v1 in self.terms.items():
            for c2, v2 in other.terms.items():
                c = _merge_cylinders(c1, c2)
                if c is not None:
                    out[c] = out.get(c, 0) + v1 * v2
        return CylinderPolynomial(self.rank, out)

    def shifted(self, g: tuple) -> "CylinderPolynomial":
        if not any(g):
            return self
        out = {}
        for cyl, v in self.terms.items():
            out[tuple((tuple(a + b for a, b in zip(site, g)), sym) for site, sym in cyl)] = v
        return CylinderPolynomial(self.rank, out)

    @property
    def sites(self) -> frozenset:
        return frozenset(site for cyl in self.terms for site, _ in cyl)

    def sup_bound(self):
        return sum(abs(v) for v in self.terms.values())

    @property
    def is_real(self) -> bool:
        return True

    def __eq__(self, other):
        return (isinstance(other, CylinderPolynomial) and self.rank == other.rank
                and self.terms == other.terms)

    def __hash__(self):
        return hash((self.rank, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for cyl, v in sorted(self.terms.items()):
            body = ",".join(f"x{s[0] if self.rank == 1 else s}={a}" for s, a in cyl) or "1"
            parts.append(f"{v}·1[{body}]")
        return " + ".join(parts)


# ---------------------------------------------------------------------------
# trigonometric polynomials (torus maps)


def _coerce(a, b):
    """Bring an exact Cyclotomic into the mpmath context of its float partner."""
    if isinstance(a, Cyclotomic) and isinstance(b, (MPF, MPC)):
        return a.to_mp(type(b).context), b
    if isinstance(b, Cyclotomic) and isinstance(a, (MPF, MPC)):
        return a, b.to_mp(type(a).context)
    return a, b


def _cmul(a, b):
    a, b = _coerce(a, b)
    return a * b


def _cadd(a, b):
    a, b = _coerce(a, b)
    return a + b


class TrigPolynomial(Observable):
    """Finite sum Σ c_k e^{2πi⟨k,x⟩} on the d-torus.

    Coefficients are :class:`Cyclotomic` (exact) or mpmath complex numbers.
    """

    algebra = "trig"
    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: Mapping[tuple, object]):
        self.dim = dim
        clean = {}
        for k, v in terms.items():
            k = (k,) if isinstance(k, int) else tuple(k)
            if len(k) != dim:
                raise StructuralError(f"frequency {k} is not in Z^{dim}")
            if isinstance(v, Rational):
                v = Cyclotomic.rational(v)
            if v != 0:
                clean[k] = v
        self.terms = clean

    @classmethod
    def character(cls, k, coef=1, dim: Optional[int] = None) -> "TrigPolynomial":
        k = (k,) if isinstance(k, int) else tuple(k)
        return cls(dim or len(k), {k: coef})

    @classmethod
    def cosine(cls, k, coef=1) -> "TrigPolynomial":
        """coef · cos(2π⟨k,x⟩)."""
        k = (k,) if isinstance(k, int) else tuple(k)
        half = Fraction(coef) / 2
        return cls(len(k), {k: half}) + cls(len(k), {tuple(-c for c in k): half})

    @classmethod
    def constant(cls, c, dim: int = 1) -> "TrigPolynomial":
        return cls(dim, {(0,) * dim: c})

    def _constant(self, c):
        return TrigPolynomial.constant(c, self.dim)

    def _scale(self, c):
        return TrigPolynomial(self.dim, {k: _cmul(v, c) for k, v in self.terms.items()})

    def _add(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = _cadd(out[k], v) if k in out else v
        return TrigPolynomial(self.dim, out)

    def _mul(self, other):
        out: dict = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                p = _cmul(v1, v2)
                out[k] = _cadd(out[k], p) if k in out else p
        return TrigPolynomial(self.dim, out)

    def conjugate(self) -> "TrigPolynomial":
        return TrigPolynomial(self.dim, {tuple(-c for c in k): conj(v) for k, v in self.terms.items()})

    @property
    def is_real(self) -> bool:
        for k, v in self.terms.items():
            mirror = self.terms.get(tuple(-c for c in k))
            if mirror is None:
                return False
            if isinstance(v, Cyclotomic) and isinstance(mirror, Cyclotomic):
                if mirror != v.conjugate():
                    return False
            elif abs(complex(mirror) - complex(v).conjugate()) > 1e-12 * (1 + abs(complex(v))):
                return False
        return True

    def sup_bound(self):
        return sum(abs(complex(v)) for v in self.terms.values())

    def coefficient(self, k):
        k = (k,) if isinstance(k, int) else tuple(k)
        return self.terms.get(k, Cyclotomic.rational(0))

    def __eq__(self, other):
        if not isinstance(other, TrigPolynomial) or other.dim != self.dim:
            return False
        keys = set(self.terms) | set(other.terms)
        zero = Cyclotomic.rational(0)
        return all(self.terms.get(k, zero) == other.terms.get(k, zero) for k in keys)

    __hash__ = None

    def __repr__(self):
        return " + ".join(f"({v})e[{k}]" for k, v in sorted(self.terms.items())) or "0"


# ---------------------------------------------------------------------------
# step functions on the torus: combinations of box indicators


def _arc_normalise(arcs):
    arcs = sorted((lo, hi) for lo, hi in arcs if hi > lo)
    out = []
    for lo, hi in arcs:
        if out and lo <= out[-1][1]:
            if hi > out[-1][1]:
                out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return tuple(out)


def _arc_intersect(a, b):
    ref = next((x for arc in a + b for x in arc if isinstance(x, MPF)), None)
    if ref is not None:
        to_mp = _mp_converter(type(ref).context)
        a = tuple((to_mp(lo), to_mp(hi)) for lo, hi in a)
        b = tuple((to_mp(lo), to_mp(hi)) for lo, hi in b)
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if hi > lo:
            out.append((lo, hi))
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return tuple(out)


def _mp_converter(ctx):
    def conv(x):
        if isinstance(x, Fraction):
            return ctx.mpf(x.numerator) / x.denominator
        return ctx.mpf(x)
    return conv


def _arc_shift(arcs, t):
    """Translate a subset of [0,1) by t ∈ [0,1) modulo 1."""
    if not t:
        return arcs
    if isinstance(t, MPF):
        to_mp = _mp_converter(type(t).context)
        arcs = tuple((to_mp(lo), to_mp(hi)) for lo, hi in arcs)
    out = []
    for lo, hi in arcs:
        a, b = lo + t, hi + t
        if b <= 1:
            out.append((a, b))
        elif a >= 1:
            out.append((a - 1, b - 1))
        else:
            out.append((a, a * 0 + 1))
            out.append((a * 0, b - 1))
    return _arc_normalise(out)


def _arc_length(arcs):
    return sum((hi - lo for lo, hi in arcs), 0)


class StepFunction(Observable):
    """Finite combination Σ c_i 1_{B_i} of box indicators on the d-torus [0,1)^d.

    A box is a tuple of per-coordinate arc sets, each a sorted tuple of
    disjoint half-open intervals ``(lo, hi)`` inside [0, 1].
    """

    algebra = "step"
    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: Iterable[tuple]):
        self.dim = dim
        self.terms = tuple((c, box) for c, box in terms if c != 0 and all(box))

    @classmethod
    def box(cls, intervals: Sequence, coef=1) -> "StepFunction":
        """Indicator of a box; ``intervals`` holds one ``(lo, hi)`` (or list of them) per coordinate.

        Intervals are taken modulo 1, so ``(0.9, 1.1)`` wraps around.
        """
        box = []
        for spec in intervals:
            pieces = [spec] if len(spec) == 2 and not isinstance(spec[0], (tuple, list)) else spec
            arcs = []
            for lo, hi in pieces:
                length = hi - lo
                if length < 0:
                    raise StructuralError("interval with hi < lo")
                if length >= 1:
                    arcs.append((lo * 0, lo * 0 + 1))
                    continue
                start = lo - math.floor(lo)
                arcs.extend(_arc_shift(((start * 0, length),), start))
            box.append(_arc_normalise(arcs))
        return cls(len(box), ((Fraction(coef) if isinstance(coef, Rational) else coef, tuple(box)),))

    @classmethod
    def interval(cls, lo, hi, coef=1) -> "StepFunction":
        return cls.box([(lo, hi)], coef)

    @classmethod
    def constant(cls, c, dim: int = 1) -> "StepFunction":
        full = tuple(((Fraction(0), Fraction(1)),) for _ in range(dim))
        return cls(dim, ((c, full),))

    def _constant(self, c):
        return StepFunction.constant(c, self.dim)

    def _scale(self, c):
        return StepFunction(self.dim, ((v * c, b) for v, b in self.terms))

    def _add(self, other):
        return StepFunction(self.dim, self.terms + other.terms)

    def _mul(self, other):
        out = []
        for v1, b1 in self.terms:
            for v2, b2 in other.terms:
                box = tuple(_arc_intersect(x, y) for x, y in zip(b1, b2))
                if all(box):
                    out.append((v1 * v2, box))
        return StepFunction(self.dim, out)

    def shifted(self, t: Sequence) -> "StepFunction":
        """Translate every box by the vector t (entries in [0,1))."""
        return StepFunction(self.dim, ((v, tuple(_arc_shift(arcs, s) for arcs, s in zip(b, t)))
                                       for v, b in self.terms))

    def integral(self):
        total = 0
        for v, box in self.terms:
            vol = 1
            for arcs in box:
                vol = vol * _arc_length(arcs)
            total = total + v * vol
        return total

    def sup_bound(self):
        return sum(abs(v) for v, _ in self.terms)

    @property
    def is_real(self) -> bool:
        return all(not isinstance(v, (complex, MPC)) for v, _ in self.terms)

    def __eq__(self, other):
        return isinstance(other, StepFunction) and self.dim == other.dim and self.terms == other.terms

    __hash__ = None

    def __repr__(self):
        return " + ".join(f"{v}·1{list(b)}" for v, b in self.terms) or "0"


# ---------------------------------------------------------------------------
# tables (finite systems) and tensors (product systems)


class TableFunction(Observable):
    algebra = "table"
    __slots__ = ("values",)

    def __init__(self, values: Sequence):
        self.values = tuple(Fraction(v) if isinstance(v, int) else v for v in values)

    @classmethod
    def indicator(cls, points: Iterable[int], size: int) -> "TableFunction":
        pts = set(points)
        return cls([1 if i in pts else 0 for i in range(size)])

    def _constant(self, c):
        return TableFunction([c] * len(self.values))

    def _scale(self, c):
        return TableFunction([v * c for v in self.values])

    def _add(self, other):
        self._check_size(other)
        return TableFunction([a + b for a, b in zip(self.values, other.values)])

    def _mul(self, other):
        self._check_size(other)
        return TableFunction([a * b for a, b in zip(self.values, other.values)])

    def _check_size(self, other):
        if len(other.values) != len(self.values):
            raise StructuralError("tables of different sizes")

    def sup_bound(self):
        return max((abs(v) for v in self.values), default=0)

    @property
    def is_real(self) -> bool:
        return all(not isinstance(v, (complex, MPC)) for v in self.values)

    def __eq__(self, other):
        return isinstance(other, TableFunction) and self.values == other.values

    def __hash__(self):
        return hash(self.values)

    def __repr__(self):
        return f"Table{list(map(str, self.values))}"


class TensorSum(Observable):
    """Σ c_i (l_i ⊗ r_i) on a product space."""

    algebra = "tensor"
    __slots__ = ("terms",)

    def __init__(self, terms: Iterable[tuple]):
        self.terms = tuple((c, l, r) for c, l, r in terms if c != 0)

    @classmethod
    def tensor(cls, left: Observable, right: Observable, coef=1) -> "TensorSum":
        return cls(((Fraction(coef), left, right),))

    def _constant(self, c):
        if not self.terms:
            raise StructuralError("cannot build a constant from an empty tensor sum")
        _, l, r = self.terms[0]
        return TensorSum(((Fraction(1) if isinstance(c, int) else 1, l._constant(c), r._constant(1)),))

    def _scale(self, c):
        return TensorSum((v * c, l, r) for v, l, r in self.terms)

    def _add(self, other):
        return TensorSum(self.terms + other.terms)

    def _mul(self, other):
        return TensorSum((v1 * v2, l1 * l2, r1 * r2)
                         for v1, l1, r1 in self.terms for v2, l2, r2 in other.terms)

    def sup_bound(self):
        return sum(abs(v) * l.sup_bound() * r.sup_bound() for v, l, r in self.terms)

    @property
    def is_real(self) -> bool:
        return all(l.is_real and r.is_real for _, l, r in self.terms)

    def __eq__(self, other):
        return isinstance(other, TensorSum) and self.terms == other.terms

    __hash__ = None

    def __repr__(self):
        return " + ".join(f"{v}·({l})⊗({r})" for v, l, r in self.terms) or "0"


def tensor(left: Observable, right: Observable) -> TensorSum:
    return TensorSum.tensor(left, right)


# ---------------------------------------------------------------------------
# systems


class MPSystem:
    """Common interface of every measure-preserving system."""

    group: GroupModel
    algebras: tuple = ()
    exact: bool = True
    name = "system"

    def koopman(self, g: tuple, f: Observable) -> Observable:
        raise NotImplementedError

    def expect(self, f: Observable):
        raise NotImplementedError

    def one(self) -> Observable:
        raise NotImplementedError

    def accepts(self, f) -> bool:
        return isinstance(f, Observable) and f.algebra in self.algebras

    def _require(self, f):
        if not self.accepts(f):
            raise StructuralError(f"{getattr(f, 'algebra', type(f).__name__)} observable "
                                  f"is not in the algebra of {self.name}")

    def _require_element(self, g):
        self.group.check(g)

    def l2_distance_sq(self, f: Observable, h: Observable):
        d = f - h
        return self.expect(d * _conjugate(d))

    def same(self, f: Observable, h: Observable) -> bool:
        """Equality in L²(ν), decided exactly on exact systems."""
        dist = self.l2_distance_sq(f, h)
        if self.exact and not isinstance(dist, (float, MPF, MPC, complex)):
            return dist == 0
        return abs(complex(dist)) <= 1e-20

    def describe(self) -> dict:
        return {"system": self.name}


def _conjugate(f: Observable) -> Observable:
    if isinstance(f, TrigPolynomial):
        return f.conjugate()
    if isinstance(f, TensorSum):
        return TensorSum((conj(v), _conjugate(l), _conjugate(r)) for v, l, r in f.terms)
    return f


class BernoulliShift(MPSystem):
    """Shift on {0..s-1}^{Z^q} with i.i.d. symbol weights; (T_g x)_s = x_{s+g}."""

    algebras = ("cylinder",)

    def __init__(self, weights: Sequence, rank: int = 1):
        weights = tuple(Fraction(w) for w in weights)
        if len(weights) < 2:
            raise InvariantViolation("need at least two symbols")
        if sum(weights) != 1 or any(w < 0 for w in weights):
            raise InvariantViolation(f"symbol weights {weights} do not form a distribution")
        self.weights = weights
        self._den = math.lcm(*(w.denominator for w in weights))
        self._nums = tuple(int(w * self._den) for w in weights)
        self.rank = rank
        self.group = IntegerLattice(rank)
        self.name = f"bernoulli(s={len(weights)}, q={rank})"
        self._cache: dict = {}

    @property
    def symbols(self) -> int:
        return len(self.weights)

    def cylinder(self, assignment, coef=1) -> CylinderPolynomial:
        for _, sym in (assignment.items() if isinstance(assignment, Mapping) else assignment):
            if not 0 <= int(sym) < self.symbols:
                raise StructuralError(f"symbol {sym} outside alphabet of size {self.symbols}")
        return CylinderPolynomial.cylinder(assignment, coef, self.rank)

    def one(self):
        return CylinderPolynomial.constant(1, self.rank)

    def koopman(self, g, f):
        self._require_element(g)
        self._require(f)
        return f.shifted(g)

    def cylinder_measure(self, cyl: tuple) -> Fraction:
        hit = self._cache.get(cyl)
        if hit is None:
            hit = Fraction(1)
            w = self.weights
            for _, sym in cyl:
                hit *= w[sym]
            if len(self._cache) < 100_000:
                self._cache[cyl] = hit
        return hit

    def expect(self, f):
        self._require(f)
        # weights are a_i / D over a common D, so a cylinder of length L has
        # measure (product of a_i) / D^L; terms are grouped by L
        nums = self._nums
        by_len: dict = {}
        for cyl, v in f.terms.items():
            num = 1
            for _, sym in cyl:
                num *= nums[sym]
            size = len(cyl)
            by_len[size] = by_len.get(size, 0) + v * num
        total = Fraction(0)
        for size, v in by_len.items():
            total += Fraction(v) / self._den ** size if size else Fraction(v)
        return simplify(total)

    def _measure_uncached(self, cyl):
        if not cyl:
            return 1
        w = self.weights
        m = w[cyl[0][1]]
        for _, sym in cyl[1:]:
            m = m * w[sym]
        return m

    def accepts(self, f):
        return isinstance(f, CylinderPolynomial) and f.rank == self.rank

    def describe(self):
        return {"system": "bernoulli", "weights": [str(w) for w in self.weights], "rank": self.rank}


def _parse_real(x, ctx):
    if isinstance(x, str):
        x = evaluate(x, ctx)
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    if isinstance(x, float):
        return ctx.mpf(x)
    return ctx.mpf(x)


class TorusRotation(MPSystem):
    """x ↦ x + gα on the d-torus, acting by Z.

    Rational α keeps every computation exact (phases become roots of unity);
    otherwise α is held as an mpmath real at ``precision`` bits. Strings such as
    ``"(sqrt(5)-1)/2"`` are evaluated at that precision.
    """

    algebras = ("trig", "step")

    def __init__(self, alpha, precision: int = 128):
        self.ctx = mpmath.MPContext()
        self.ctx.prec = precision
        self.precision = precision
        alpha = alpha if isinstance(alpha, (list, tuple)) else [alpha]
        self.alpha = tuple(_parse_real(a, self.ctx) for a in alpha)
        self.dim = len(self.alpha)
        self.exact = all(isinstance(a, Fraction) for a in self.alpha)
        self.group = IntegerLattice(1)
        self.name = f"rotation(d={self.dim})"

    def one(self):
        return TrigPolynomial.constant(1, self.dim)

    def _frac(self, x):
        if isinstance(x, Fraction):
            return x - math.floor(x)
        return self.ctx.frac(x)

    def koopman(self, g, f):
        self._require_element(g)
        self._require(f)
        n = g[0]
        if n == 0:
            return f
        if isinstance(f, StepFunction):
            # 1_B ∘ T_n = 1_{B - nα}
            return f.shifted([self._frac(-n * a) for a in self.alpha])
        out = {}
        for k, v in f.terms.items():
            if self.exact:
                turns = sum(kk * a for kk, a in zip(k, self.alpha)) * n
                out[k] = _cmul(v, Cyclotomic.from_phase(self._frac(Fraction(turns))))
            else:
                turns = self.ctx.fsum(kk * a for kk, a in zip(k, self.alpha)) * n
                if isinstance(v, Cyclotomic):
                    v = v.to_mp(self.ctx)
                out[k] = v * self.ctx.expjpi(2 * self._frac(turns))
        return TrigPolynomial(f.dim, out)

    def expect(self, f):
        self._require(f)
        if isinstance(f, StepFunction):
            return simplify(f.integral())
        return simplify(f.coefficient((0,) * self.dim))

    def accepts(self, f):
        return isinstance(f, (TrigPolynomial, StepFunction)) and f.dim == self.dim

    def describe(self):
        return {"system": "rotation", "alpha": [str(a) for a in self.alpha],
                "exact": self.exact, "precision_bits": self.precision}


def _matmul(a, b):
    return tuple(tuple(sum(a[i][k] * b[k][j] for k in range(len(b))) for j in range(len(b[0])))
                 for i in range(len(a)))


def _det_and_inverse(m):
    """Determinant and inverse of a square integer matrix by Gauss-Jordan over Q."""
    n = len(m)
    a = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(m)]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col]), None)
        if piv is None:
            return Fraction(0), None
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = -det
        p = a[col][col]
        det *= p
        a[col] = [v / p for v in a[col]]
        for r in range(n):
            if r != col and a[r][col]:
                c = a[r][col]
                a[r] = [x - c * y for x, y in zip(a[r], a[col])]
    return det, tuple(tuple(row[n:]) for row in a)


class TorusEndomorphism(MPSystem):
    """Iteration of an integer matrix A with |det A| = 1 on the torus (a Z-action)."""

    algebras = ("trig",)

    def __init__(self, matrix):
        m = tuple(tuple(int(v) for v in row) for row in matrix)
        det, inv = _det_and_inverse(m)
        if abs(det) != 1:
            raise InvariantViolation(f"|det A| = {abs(det)} != 1")
        self.matrix = m
        self.dim = len(m)
        self.group = IntegerLattice(1)
        self.name = f"endomorphism(d={self.dim})"
        self._transpose = tuple(zip(*m))
        self._transpose_inv = tuple(zip(*((int(v) for v in row) for row in inv)))
        self._powers: dict[int, tuple] = {0: tuple(tuple(int(i == j) for j in range(self.dim))
                                                   for i in range(self.dim))}

    def _power(self, n: int):
        hit = self._powers.get(n)
        if hit is None:
            step = self._transpose if n > 0 else self._transpose_inv
            prev = self._power(n - 1 if n > 0 else n + 1)
            hit = _matmul(step, prev)
            self._powers[n] = hit
        return hit

    def frequency_image(self, k: tuple, n: int) -> tuple:
        """(Aᵀ)^n k."""
        p = self._power(n)
        return tuple(sum(p[i][j] * k[j] for j in range(self.dim)) for i in range(self.dim))

    def one(self):
        return TrigPolynomial.constant(1, self.dim)

    def koopman(self, g, f):
        self._require_element(g)
        self._require(f)
        n = g[0]
        if n == 0:
            return f
        return TrigPolynomial(f.dim, {self.frequency_image(k, n): v for k, v in f.terms.items()})

    def expect(self, f):
        self._require(f)
        return simplify(f.coefficient((0,) * self.dim))

    def accepts(self, f):
        return isinstance(f, TrigPolynomial) and f.dim == self.dim

    def describe(self):
        return {"system": "endomorphism", "matrix": [list(r) for r in self.matrix]}


def cat_map() -> TorusEndomorphism:
    return TorusEndomorphism(((2, 1), (1, 1)))


def _perm_order(p):
    seen = [False] * len(p)
    order = 1
    for i in range(len(p)):
        if not seen[i]:
            length = 0
            j = i
            while not seen[j]:
                seen[j] = True
                j = p[j]
                length += 1
            order = order * length // math.gcd(order, length)
    return order


def _perm_compose(p, q):
    # (p ∘ q)(x) = p(q(x))
    return tuple(p[x] for x in q)


def _perm_power(p, k):
    out = tuple(range(len(p)))
    base = p
    while k:
        if k & 1:
            out = _perm_compose(base, out)
        base = _perm_compose(base, base)
        k >>= 1
    return out


class FiniteSystem(MPSystem):
    """Finitely many weighted points with commuting permutation generators.

    Generator i realises T_{e_i}; the acting group is Z^q (q generators) or,
    with ``modulus`` set, the cyclic group Z_m for a single generator of order
    dividing m. Every generator must preserve the weights.
    """

    algebras = ("table",)

    def __init__(self, weights: Sequence, generators: Sequence[Sequence[int]],
                 modulus: Optional[int] = None):
        self.weights = tuple(Fraction(w) for w in weights)
        if sum(self.weights) != 1 or any(w < 0 for w in self.weights):
            raise InvariantViolation("point weights must form a distribution")
        size = len(self.weights)
        gens = tuple(tuple(int(v) for v in p) for p in generators)
        for p in gens:
            if sorted(p) != list(range(size)):
                raise StructuralError(f"{p} is not a permutation of {size} points")
            if any(self.weights[p[i]] != self.weights[i] for i in range(size)):
                raise InvariantViolation(f"permutation {p} does not preserve the weights")
        for a in gens:
            for b in gens:
                if _perm_compose(a, b) != _perm_compose(b, a):
                    raise StructuralError("generators do not commute")
        self.generators = gens
        self._orders = tuple(_perm_order(p) for p in gens)
        if modulus is not None:
            if len(gens) != 1 or modulus % self._orders[0]:
                raise StructuralError("cyclic action needs one generator of order dividing m")
            self.group = CyclicGroup(modulus)
        else:
            self.group = IntegerLattice(max(1, len(gens)))
        self.size = size
        self.name = f"finite(points={size})"

    @classmethod
    def trivial(cls, weights: Sequence, rank: int = 1) -> "FiniteSystem":
        ident = tuple(range(len(weights)))
        return cls(weights, [ident] * rank)

    def transformation(self, g) -> tuple:
        """T_g as a point permutation."""
        perm = tuple(range(self.size))
        for p, order, k in zip(self.generators, self._orders, g):
            perm = _perm_compose(_perm_power(p, k % order), perm)
        return perm

    def one(self):
        return TableFunction([1] * self.size)

    def indicator(self, points) -> TableFunction:
        return TableFunction.indicator(points, self.size)

    def koopman(self, g, f):
        self._require_element(g)
        self._require(f)
        t = self.transformation(g)
        return TableFunction([f.values[t[x]] for x in range(self.size)])

    def expect(self, f):
        self._require(f)
        total = 0
        for w, v in zip(self.weights, f.values):
            total = total + w * v
        return simplify(total)

    def accepts(self, f):
        return isinstance(f, TableFunction) and len(f.values) == self.size

    def describe(self):
        return {"system": "finite", "weights": [str(w) for w in self.weights],
                "generators": [list(p) for p in self.generators]}


class ProductSystem(MPSystem):
    """(X×X, ν⊗ν) with the diagonal action T_g × T_g."""

    algebras = ("tensor",)

    def __init__(self, left: MPSystem, right: MPSystem):
        if left.group != right.group:
            raise StructuralError("product of systems over different groups")
        self.left = left
        self.right = right
        self.group = left.group
        self.exact = left.exact and right.exact
        self.name = f"product({left.name}, {right.name})"

    def one(self):
        return TensorSum.tensor(self.left.one(), self.right.one())

    def rectangle(self, a: Observable, b: Observable) -> TensorSum:
        return TensorSum.tensor(a, b)

    def koopman(self, g, f):
        self._require_element(g)
        self._require(f)
        return TensorSum((v, self.left.koopman(g, l), self.right.koopman(g, r)) for v, l, r in f.terms)

    def expect(self, f):
        self._require(f)
        total = 0
        for v, l, r in f.terms:
            total = total + v * self.left.expect(l) * self.right.expect(r)
        return simplify(total)

    def accepts(self, f):
        return isinstance(f, TensorSum) and all(
            self.left.accepts(l) and self.right.accepts(r) for _, l, r in f.terms)

    def describe(self):
        return {"system": "product", "left": self.left.describe(), "right": self.right.describe()}


# ---------------------------------------------------------------------------
# module-level operations


def koopman(sys: MPSystem, g: tuple, f: Observable) -> Observable:
    """f ∘ T_g."""
    return sys.koopman(g, f)


def expect(sys: MPSystem, f: Observable):
    """ω(f) = ∫ f dν, exact whenever the system and f are."""
    return sys.expect(f)


def multiply(f: Observable, h: Observable) -> Observable:
    return f * h


def set_correlation(sys: MPSystem, a0: Observable, a1: Observable, g: tuple):
    """ν(A₀ ∩ T_g⁻¹A₁) = ω(1_{A₀} · 1_{A₁}∘T_g)."""
    return sys.expect(a0 * sys.koopman(g, a1))


def product_system(s1: MPSystem, s2: MPSystem) -> ProductSystem:
    return ProductSystem(s1, s2)


def is_event(sys: MPSystem, f: Observable) -> bool:
    """Indicator check: 1_A · 1_A = 1_A in L²(ν)."""
    return sys.same(f * f, f)


def check_measure_preserving(sys: MPSystem, g: tuple, f: Observable) -> bool:
    """True iff ω(f ∘ T_g) = ω(f) (exact on exact systems)."""
    a = sys.expect(sys.koopman(g, f))
    b = sys.expect(f)
    if sys.exact:
        return a == b
    return abs(complex(a) - complex(b)) <= 1e-25 * (1 + abs(complex(b)))


@dataclass(frozen=True)
class ObservableInfo:
    """Summary used in reports."""

    algebra: str
    sup_bound: float
    real: bool


def info(f: Observable) -> ObservableInfo:
    return ObservableInfo(f.algebra, float(f.sup_bound()), f.is_real)
