"""Exact arithmetic in cyclotomic fields Q(ζ_N).

A rotation by a rational angle only ever multiplies Fourier coefficients by
roots of unity, so trigonometric polynomials over such rotations stay exact
when their coefficients live here. Elements are stored as coefficient vectors
of the power basis 1, ζ, ..., ζ^{φ(N)-1}, reduced modulo the N-th cyclotomic
polynomial, which makes the representation canonical.
"""

from __future__ import annotations

import cmath
import math
from fractions import Fraction
from functools import lru_cache
from numbers import Rational


@lru_cache(maxsize=None)
def cyclotomic_poly(n: int) -> tuple:
    """Integer coefficients of Φ_n, lowest degree first."""
    num = [-1] + [0] * (n - 1) + [1]  # x^n - 1
    for d in range(1, n):
        if n % d == 0:
            num = _exact_div(num, list(cyclotomic_poly(d)))
    return tuple(num)


def _exact_div(num, den):
    num = list(num)
    out = [0] * (len(num) - len(den) + 1)
    for i in range(len(out) - 1, -1, -1):
        c = num[i + len(den) - 1] // den[-1]
        out[i] = c
        for j, d in enumerate(den):
            num[i + j] -= c * d
    assert not any(num), "non-exact cyclotomic division"
    return out


def _reduce(coeffs, n):
    phi = cyclotomic_poly(n)
    deg = len(phi) - 1
    c = list(coeffs)
    for i in range(len(c) - 1, deg - 1, -1):
        lead = c[i]
        if lead:
            for j in range(deg + 1):
                c[i - deg + j] -= lead * phi[j]
    c = c[:deg] + [Fraction(0)] * max(0, deg - len(c))
    return tuple(Fraction(v) for v in c)


class Cyclotomic:
    """An element of Q(ζ_N), ζ_N = exp(2πi/N)."""

    __slots__ = ("order", "coeffs")

    def __init__(self, order: int, coeffs):
        self.order = order
        self.coeffs = _reduce(coeffs, order)

    @classmethod
    def rational(cls, value) -> "Cyclotomic":
        return cls(1, [Fraction(value)])

    @classmethod
    def root(cls, order: int, power: int, coef=1) -> "Cyclotomic":
        """coef · ζ_order^power."""
        power %= order
        c = [Fraction(0)] * (power + 1)
        c[power] = Fraction(coef)
        return cls(order, c)

    @classmethod
    def from_phase(cls, turns: Fraction) -> "Cyclotomic":
        """exp(2πi·turns) for rational ``turns``."""
        turns = Fraction(turns)
        return cls.root(turns.denominator, turns.numerator)

    @classmethod
    def gaussian(cls, re, im) -> "Cyclotomic":
        return cls(4, [Fraction(re), Fraction(im)])

    def lift(self, order: int) -> "Cyclotomic":
        if order == self.order:
            return self
        if order % self.order:
            raise ValueError("can only lift to a multiple of the order")
        step = order // self.order
        c = [Fraction(0)] * (step * len(self.coeffs) + 1)
        for i, v in enumerate(self.coeffs):
            c[i * step] = v
        return Cyclotomic(order, c)

    def _common(self, other):
        if not isinstance(other, Cyclotomic):
            if isinstance(other, (Rational, int)):
                other = Cyclotomic.rational(other)
            else:
                return None, None
        order = self.order * other.order // math.gcd(self.order, other.order)
        return self.lift(order), other.lift(order)

    def __add__(self, other):
        a, b = self._common(other)
        if a is None:
            return NotImplemented
        n = max(len(a.coeffs), len(b.coeffs))
        ca = a.coeffs + (Fraction(0),) * (n - len(a.coeffs))
        cb = b.coeffs + (Fraction(0),) * (n - len(b.coeffs))
        return Cyclotomic(a.order, [x + y for x, y in zip(ca, cb)])

    __radd__ = __add__

    def __pow__(self, k: int):
        out = Cyclotomic.rational(1)
        base = self
        if k < 0:
            raise ValueError("negative powers are not supported")
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __neg__(self):
        return Cyclotomic(self.order, [-v for v in self.coeffs])

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (Rational, int)):
            return Cyclotomic(self.order, [v * other for v in self.coeffs])
        a, b = self._common(other)
        if a is None:
            return NotImplemented
        out = [Fraction(0)] * (len(a.coeffs) + len(b.coeffs))
        for i, x in enumerate(a.coeffs):
            if x:
                for j, y in enumerate(b.coeffs):
                    out[i + j] += x * y
        return Cyclotomic(a.order, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (Rational, int)):
            return self * (Fraction(1) / Fraction(other))
        return NotImplemented

    def conjugate(self) -> "Cyclotomic":
        n = self.order
        c = [Fraction(0)] * n
        for i, v in enumerate(self.coeffs):
            c[(-i) % n] += v
        return Cyclotomic(n, c)

    def __eq__(self, other):
        a, b = self._common(other)
        if a is None:
            return NotImplemented
        return a.coeffs == b.coeffs

    def __hash__(self):
        if self.is_rational:
            return hash(self.coeffs[0] if self.coeffs else Fraction(0))
        # orders differ between equal elements, so no cheap canonical key exists
        return 0

    @property
    def is_rational(self) -> bool:
        return all(v == 0 for v in self.coeffs[1:])

    def to_fraction(self) -> Fraction:
        if not self.is_rational:
            raise ValueError(f"{self} is not rational")
        return self.coeffs[0] if self.coeffs else Fraction(0)

    def __complex__(self):
        z = cmath.exp(2j * math.pi / self.order)
        return sum((float(v) * z ** i for i, v in enumerate(self.coeffs)), 0j)

    def to_mp(self, ctx):
        """Value as a complex number of the mpmath context ``ctx``."""
        z = ctx.mpc(0)
        for i, v in enumerate(self.coeffs):
            if v:
                z += ctx.mpf(v.numerator) / v.denominator * ctx.expjpi(ctx.mpf(2 * i) / self.order)
        return z

    def __abs__(self):
        return abs(complex(self))

    def __bool__(self):
        return any(self.coeffs)

    def __repr__(self):
        if self.is_rational:
            return f"Cyclotomic({self.to_fraction()})"
        terms = [f"{v}·ζ{self.order}^{i}" for i, v in enumerate(self.coeffs) if v]
        return "Cyclotomic(" + " + ".join(terms) + ")"
