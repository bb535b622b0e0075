"""Scalar helpers shared by the averaging code paths.

Values flowing through the package are ints, Fractions, floats, mpmath numbers,
:class:`~vdcmix.cyclotomic.Cyclotomic` elements, or tuples of those (vectors).
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational

import mpmath
from mpmath.ctx_mp_python import _mpc as MPC, _mpf as MPF

from .cyclotomic import Cyclotomic


def is_exact(x) -> bool:
    if isinstance(x, tuple):
        return all(is_exact(v) for v in x)
    if isinstance(x, Cyclotomic):
        return True
    return isinstance(x, Rational)


def as_fraction(x) -> Fraction:
    """Exact conversion of a real scalar to a Fraction (floats and mpf included)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, Cyclotomic):
        return x.to_fraction()
    if isinstance(x, MPF):
        man, exp = x.man_exp
        return Fraction(man) * Fraction(2) ** exp if exp >= 0 else Fraction(man, 2 ** -exp)
    if isinstance(x, MPC):
        return as_fraction(x.real)
    if isinstance(x, complex):
        return Fraction(x.real)
    raise TypeError(f"cannot convert {type(x).__name__} to Fraction")


def real_part(x):
    """Real part, keeping Fractions exact."""
    if isinstance(x, Cyclotomic):
        if x.is_rational:
            return x.to_fraction()
        return complex(x).real
    if isinstance(x, (MPC, complex)):
        return x.real
    return x


def simplify(x):
    """Collapse rational Cyclotomics to Fractions and ints to Fractions."""
    if isinstance(x, Cyclotomic) and x.is_rational:
        return x.to_fraction()
    if isinstance(x, int) and not isinstance(x, bool):
        return Fraction(x)
    return x


def to_float(x) -> float:
    if isinstance(x, Cyclotomic):
        return complex(x).real
    if isinstance(x, (MPC, complex)):
        return float(x.real)
    return float(x)


def conj(x):
    if isinstance(x, Rational):
        return x
    return x.conjugate()


def inner(a, b):
    """Standard inner product ⟨a, b⟩ = Σ a_i conj(b_i); scalars are 1-vectors."""
    if isinstance(a, tuple):
        total = 0
        for x, y in zip(a, b):
            total += x * conj(y)
        return total
    return a * conj(b)


def norm_sq(a):
    v = inner(a, a)
    return real_part(v)


def vadd(a, b):
    if isinstance(a, tuple):
        return tuple(x + y for x, y in zip(a, b))
    return a + b


def vsub(a, b):
    if isinstance(a, tuple):
        return tuple(x - y for x, y in zip(a, b))
    return a - b


def vscale(a, c):
    if isinstance(a, tuple):
        return tuple(x * c for x in a)
    return a * c


def zero_like(a):
    if isinstance(a, tuple):
        return (Fraction(0),) * len(a)
    return Fraction(0)


def render(x) -> str:
    """CSV rendering: ``p/q`` for exact values, shortest round-trip decimal otherwise."""
    x = simplify(x)
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (MPF, MPC, complex, Cyclotomic)):
        x = to_float(x)
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, tuple):
        return ";".join(render(v) for v in x)
    return str(x)


def norm(a) -> float:
    """Euclidean norm as a float."""
    sq = norm_sq(a)
    if isinstance(sq, Fraction):
        return math.sqrt(float(sq))
    return math.sqrt(max(to_float(sq), 0.0))


class Accumulator:
    """Order-independent summation of scalars.

    Exact inputs (Fractions, rational or irrational Cyclotomics) are summed
    exactly. Floats and mpmath values are converted to Fractions without
    rounding, summed exactly and rounded once when read, so the result does not
    depend on the summation order.
    """

    __slots__ = ("exact", "re", "im", "inexact", "count")

    def __init__(self):
        self.exact = Fraction(0)
        self.re = Fraction(0)
        self.im = Fraction(0)
        self.inexact = False
        self.count = 0

    def add(self, x):
        self.count += 1
        if isinstance(x, (Rational, Cyclotomic)):
            self.exact = self.exact + x
            return
        self.inexact = True
        if isinstance(x, (complex, MPC)):
            self.re += as_fraction(x.real)
            self.im += as_fraction(x.imag)
        else:
            self.re += as_fraction(x)

    def add_scaled(self, x, w):
        self.add(x * w if w != 1 else x)

    def value(self):
        if not self.inexact:
            return simplify(self.exact)
        base = complex(self.exact) if isinstance(self.exact, Cyclotomic) else float(self.exact)
        if self.im or isinstance(base, complex):
            return complex(float(self.re), float(self.im)) + base
        return float(self.re) + base


class VectorAccumulator:
    """Coordinatewise :class:`Accumulator` for tuple-valued data (scalars when dim is None)."""

    def __init__(self, dim=None):
        self.dim = dim
        self.parts = [Accumulator() for _ in range(dim or 1)]

    def add(self, x):
        if self.dim is None:
            self.parts[0].add(x)
        else:
            for acc, v in zip(self.parts, x):
                acc.add(v)

    def value(self):
        if self.dim is None:
            return self.parts[0].value()
        return tuple(acc.value() for acc in self.parts)


def exact_sum(values, dim=None):
    acc = VectorAccumulator(dim)
    for v in values:
        acc.add(v)
    return acc.value()
