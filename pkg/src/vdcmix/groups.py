"""Abelian group carriers, finite subsets, Følner sequences and homomorphisms.

Elements are plain tuples of ints. For a :class:`GroupModel` of kind
``"scaled"`` a tuple ``x`` stands for the point ``spacing * x`` of R^q and every
lattice point carries the Riemann-sum weight ``spacing**q``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Optional, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import InvariantViolation, StructuralError

Element = tuple

_KINDS = ("lattice", "cyclic", "scaled")


@dataclass(frozen=True)
class GroupModel:
    kind: str
    rank: int = 1
    modulus: Optional[int] = None
    spacing: Optional[Fraction] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise StructuralError(f"unknown group kind {self.kind!r}")
        if self.rank < 1:
            raise StructuralError("group rank must be >= 1")
        if self.kind == "cyclic" and (self.modulus is None or self.modulus < 2 or self.rank != 1):
            raise StructuralError("cyclic groups need rank 1 and modulus >= 2")
        if self.kind == "scaled" and (self.spacing is None or self.spacing <= 0):
            raise StructuralError("scaled lattices need a positive spacing")

    @property
    def measure_weight(self) -> Fraction:
        if self.kind == "scaled":
            return Fraction(self.spacing) ** self.rank
        return Fraction(1)

    @property
    def identity(self) -> Element:
        return (0,) * self.rank

    def element(self, *coords) -> Element:
        if len(coords) == 1 and isinstance(coords[0], (tuple, list)):
            coords = tuple(coords[0])
        if len(coords) != self.rank:
            raise StructuralError(f"expected {self.rank} coordinates, got {len(coords)}")
        coords = tuple(int(c) for c in coords)
        if self.kind == "cyclic":
            coords = (coords[0] % self.modulus,)
        return coords

    def check(self, g: Element) -> None:
        if not isinstance(g, tuple) or len(g) != self.rank:
            raise StructuralError(f"{g!r} is not an element of {self}")
        if self.kind == "cyclic" and not 0 <= g[0] < self.modulus:
            raise StructuralError(f"residue {g[0]} not reduced mod {self.modulus}")

    def compose(self, g: Element, h: Element) -> Element:
        self.check(g)
        self.check(h)
        return self._add(g, h)

    def inverse(self, g: Element) -> Element:
        self.check(g)
        return self._neg(g)

    def _add(self, g, h):
        if self.kind == "cyclic":
            return ((g[0] + h[0]) % self.modulus,)
        return tuple(a + b for a, b in zip(g, h))

    def _neg(self, g):
        if self.kind == "cyclic":
            return ((-g[0]) % self.modulus,)
        return tuple(-a for a in g)

    def _sub(self, g, h):
        # h^{-1} g in multiplicative notation
        if self.kind == "cyclic":
            return ((g[0] - h[0]) % self.modulus,)
        return tuple(a - b for a, b in zip(g, h))

    def point(self, g: Element) -> tuple:
        """Coordinates of ``g`` in the ambient space (scaled for ``"scaled"``)."""
        if self.kind == "scaled":
            return tuple(self.spacing * c for c in g)
        return g


def IntegerLattice(q: int = 1) -> GroupModel:
    return GroupModel("lattice", q)


def CyclicGroup(m: int) -> GroupModel:
    return GroupModel("cyclic", 1, modulus=m)


def ScaledLattice(q: int, spacing) -> GroupModel:
    return GroupModel("scaled", q, spacing=Fraction(spacing))


def compose(group: GroupModel, g: Element, h: Element) -> Element:
    return group.compose(g, h)


# ---------------------------------------------------------------------------
# finite subsets


class FiniteSubset:
    """Deduplicated, lexicographically sorted finite set of group elements."""

    __slots__ = ("group", "elements", "_members")

    def __init__(self, group: GroupModel, elements: Iterable[Element]):
        members = frozenset(elements)
        for g in itertools.islice(members, 4):
            group.check(g)
        self.group = group
        self._members = members
        self.elements = tuple(sorted(members))

    @property
    def measure(self) -> Fraction:
        return len(self.elements) * self.group.measure_weight

    def __len__(self):
        return len(self.elements)

    def __iter__(self) -> Iterator[Element]:
        return iter(self.elements)

    def __contains__(self, g) -> bool:
        return g in self._members

    def __eq__(self, other):
        if not isinstance(other, FiniteSubset):
            return NotImplemented
        return self.group == other.group and self._members == other._members

    def __hash__(self):
        return hash((self.group, self._members))

    def __repr__(self):
        head = ", ".join(map(str, self.elements[:4]))
        more = ", ..." if len(self.elements) > 4 else ""
        return f"FiniteSubset({head}{more}; size={len(self)})"

    @property
    def members(self) -> frozenset:
        return self._members

    def shift(self, g: Element) -> "FiniteSubset":
        """The translate Λg."""
        add = self.group._add
        return FiniteSubset(self.group, (add(x, g) for x in self.elements))

    def intersection(self, other: "FiniteSubset") -> "FiniteSubset":
        _same_group(self, other)
        return FiniteSubset(self.group, self._members & other._members)

    def union(self, other: "FiniteSubset") -> "FiniteSubset":
        _same_group(self, other)
        return FiniteSubset(self.group, self._members | other._members)

    def symmetric_difference(self, other: "FiniteSubset") -> "FiniteSubset":
        _same_group(self, other)
        return FiniteSubset(self.group, self._members ^ other._members)


def _same_group(a: FiniteSubset, b: FiniteSubset):
    if a.group != b.group:
        raise StructuralError("subsets belong to different group models")


def symmetric_difference_measure(subset: FiniteSubset, g: Element) -> Fraction:
    """Exact μ(Λ Δ Λg)."""
    group = subset.group
    group.check(g)
    add, members = group._add, subset.members
    # |Λg \ Λ| = |Λ \ Λg| since translation preserves cardinality
    escaped = sum(1 for x in subset.elements if add(x, g) not in members)
    return 2 * escaped * group.measure_weight


def quotient_set(subset: FiniteSubset, method: str = "auto") -> FiniteSubset:
    """The set Λ⁻¹Λ = {h₁⁻¹h₂ : h₁, h₂ ∈ Λ}.

    ``method`` is ``"brute"`` (all pairs), ``"convolution"`` (support of the
    autocorrelation of the indicator bitmap, lattice kinds only) or ``"auto"``.
    """
    group = subset.group
    if not subset.elements:
        return FiniteSubset(group, ())
    if method == "auto":
        method = "convolution" if group.kind != "cyclic" and len(subset) > 600 else "brute"
    if method == "brute":
        sub = group._sub
        els = subset.elements
        return FiniteSubset(group, {sub(b, a) for a in els for b in els})
    if method != "convolution" or group.kind == "cyclic":
        raise StructuralError(f"quotient method {method!r} unavailable for {group.kind}")
    pts = np.array(subset.elements, dtype=np.int64)
    lo = pts.min(axis=0)
    shape = tuple(pts.max(axis=0) - lo + 1)
    grid = np.zeros(shape, dtype=np.float64)
    grid[tuple((pts - lo).T)] = 1.0
    # autocorrelation counts pairs per difference; counts are integers so 0.5 separates
    corr = fftconvolve(grid, grid[tuple(slice(None, None, -1) for _ in shape)], mode="full")
    offset = np.array(shape) - 1
    hits = np.argwhere(corr > 0.5) - offset
    return FiniteSubset(group, (tuple(int(c) for c in row) for row in hits))


def difference_counts(subset: FiniteSubset) -> dict:
    """d ↦ #{(h₁, h₂) ∈ Λ² : h₁⁻¹h₂ = d}, the multiplicities behind double sums over Λ×Λ."""
    group = subset.group
    els = subset.elements
    if group.kind == "cyclic" or len(els) <= 600:
        counts: dict = {}
        sub = group._sub
        for a in els:
            for b in els:
                d = sub(b, a)
                counts[d] = counts.get(d, 0) + 1
        return dict(sorted(counts.items()))
    pts = np.array(els, dtype=np.int64)
    lo = pts.min(axis=0)
    shape = tuple(pts.max(axis=0) - lo + 1)
    grid = np.zeros(shape, dtype=np.float64)
    grid[tuple((pts - lo).T)] = 1.0
    corr = fftconvolve(grid, grid[tuple(slice(None, None, -1) for _ in shape)], mode="full")
    offset = np.array(shape) - 1
    rounded = np.rint(corr).astype(np.int64)
    if np.abs(corr - rounded).max() > 0.25:
        raise InvariantViolation("FFT autocorrelation too inaccurate for exact counts")
    hits = np.argwhere(rounded > 0)
    return {tuple(int(c) for c in row - offset): int(rounded[tuple(row)]) for row in hits}


# ---------------------------------------------------------------------------
# Følner sequences


class FolnerSequence:
    """An indexed family n ↦ Λ_n of finite subsets (n = 1, 2, ...).

    ``shell(n)`` may be supplied for nested sequences; it must return
    Λ_n \\ Λ_{n-1} (with Λ_0 = ∅) and lets series be accumulated in O(|Λ_N|)
    total work instead of rebuilding every Λ_n.
    """

    def __init__(self, group: GroupModel, generator: Callable[[int], Iterable[Element]],
                 description: str, shell: Optional[Callable[[int], Iterable[Element]]] = None,
                 quotient_factory: Optional[Callable[[], "FolnerSequence"]] = None,
                 size: Optional[Callable[[int], int]] = None, cache_size: int = 8,
                 entry: Optional[Callable[[Element, int], Optional[int]]] = None):
        self.group = group
        self._entry = entry
        self._generator = generator
        self.description = description
        self._shell = shell
        self._quotient_factory = quotient_factory
        self._size = size
        self._cache: dict[int, FiniteSubset] = {}
        self._cache_size = cache_size

    def __repr__(self):
        return f"FolnerSequence({self.description})"

    @property
    def nested(self) -> bool:
        return self._shell is not None

    def __call__(self, n: int) -> FiniteSubset:
        if n < 1:
            raise StructuralError("Følner index starts at 1")
        hit = self._cache.get(n)
        if hit is not None:
            return hit
        subset = FiniteSubset(self.group, self._generator(n))
        if not subset.elements:
            raise InvariantViolation(f"{self.description}: Λ_{n} has measure zero")
        if len(self._cache) >= self._cache_size:
            self._cache.pop(next(iter(self._cache)))
        self._cache[n] = subset
        return subset

    def size(self, n: int) -> int:
        if self._size is not None:
            return self._size(n)
        return len(self(n))

    def measure(self, n: int) -> Fraction:
        return self.size(n) * self.group.measure_weight

    def shell(self, n: int) -> list:
        if self._shell is None:
            raise StructuralError(f"{self.description} is not declared nested")
        return list(self._shell(n))

    def entry(self, g: Element, n_max: int) -> Optional[int]:
        """Smallest n ≤ n_max with g ∈ Λ_n (None if there is none); meaningful for nested sequences."""
        if self._entry is not None:
            n = self._entry(g, n_max)
            return n if n is not None and n <= n_max else None
        for n in range(1, n_max + 1):
            if g in self(n).members:
                return n
        return None

    def increments(self, n_max: int) -> Iterator[tuple[int, list]]:
        """Yield ``(n, Λ_n \\ Λ_{n-1})`` for n = 1..n_max."""
        for n in range(1, n_max + 1):
            yield n, self.shell(n)

    def quotient(self) -> "FolnerSequence":
        """The sequence n ↦ Λ_n⁻¹Λ_n."""
        if self._quotient_factory is not None:
            return self._quotient_factory()
        return FolnerSequence(self.group, lambda n: quotient_set(self(n)).elements,
                              f"quotient of {self.description}")


def interval_sequence(lo: Callable[[int], int], hi: Callable[[int], int],
                      description: str) -> FolnerSequence:
    """Λ_n = {lo(n), ..., hi(n)} in Z, nested when lo is non-increasing and hi non-decreasing."""
    group = IntegerLattice(1)

    def gen(n):
        return ((k,) for k in range(lo(n), hi(n) + 1))

    def shell(n):
        if n == 1:
            return [(k,) for k in range(lo(1), hi(1) + 1)]
        a0, b0, a1, b1 = lo(n - 1), hi(n - 1), lo(n), hi(n)
        return [(k,) for k in range(a1, a0)] + [(k,) for k in range(b0 + 1, b1 + 1)]

    def quotient():
        return interval_sequence(lambda n: lo(n) - hi(n), lambda n: hi(n) - lo(n),
                                 f"quotient of {description}")

    def entry(g, n_max):
        # lo non-increasing and hi non-decreasing, so membership is monotone in n
        k = g[0]
        if lo(1) <= k <= hi(1):
            return 1
        if not lo(n_max) <= k <= hi(n_max):
            return None
        low, top = 1, n_max
        while top - low > 1:
            mid = (low + top) // 2
            if lo(mid) <= k <= hi(mid):
                top = mid
            else:
                low = mid
        return top

    return FolnerSequence(group, gen, description, shell=shell, quotient_factory=quotient,
                          size=lambda n: hi(n) - lo(n) + 1, entry=entry)


def z_symmetric() -> FolnerSequence:
    """Λ_n = {-n, ..., n}."""
    return interval_sequence(lambda n: -n, lambda n: n, "z-symmetric {-n..n}")


def z_initial() -> FolnerSequence:
    """Λ_n = {1, ..., n}."""
    return interval_sequence(lambda n: 1, lambda n: n, "z-initial {1..n}")


def lattice_boxes(q: int = 2, scale: int = 1) -> FolnerSequence:
    """Λ_n = [-scale·n, scale·n]^q in Z^q (``scale`` = 2 gives the quotient boxes)."""
    group = IntegerLattice(q)

    def gen(n):
        r = range(-scale * n, scale * n + 1)
        return itertools.product(r, repeat=q)

    def shell(n):
        outer = scale * n
        inner = scale * (n - 1)
        if n == 1:
            return list(gen(1))
        r = range(-outer, outer + 1)
        return [p for p in itertools.product(r, repeat=q) if max(abs(c) for c in p) > inner]

    desc = f"z{q}-squares [-{scale}n,{scale}n]^{q}" if scale != 1 else f"z{q}-squares [-n,n]^{q}"
    return FolnerSequence(group, gen, desc, shell=shell,
                          quotient_factory=lambda: lattice_boxes(q, 2 * scale),
                          size=lambda n: (2 * scale * n + 1) ** q,
                          entry=lambda g, n_max: max(1, -(-max(abs(c) for c in g) // scale)))


def scaled_ball(q: int, spacing, radius_scale=1) -> FolnerSequence:
    """Λ_n = lattice points of spacing δ inside the open ball of radius ``radius_scale·n``."""
    group = ScaledLattice(q, spacing)
    delta = Fraction(spacing)
    rs = Fraction(radius_scale)

    def inside(p, n):
        return sum(c * c for c in p) * delta * delta < (rs * n) ** 2

    def gen(n):
        bound = int(rs * n / delta) + 1
        r = range(-bound, bound + 1)
        return (p for p in itertools.product(r, repeat=q) if inside(p, n))

    def shell(n):
        return [p for p in gen(n) if n == 1 or not inside(p, n - 1)]

    return FolnerSequence(group, gen, f"scaled-ball q={q} δ={delta} radius {rs}·n", shell=shell)


# ---------------------------------------------------------------------------
# homomorphisms


@dataclass(frozen=True)
class Homomorphism:
    """Integer-matrix endomorphism of a lattice (or residue multiplier of Z_m)."""

    group: GroupModel
    matrix: tuple

    def __post_init__(self):
        m = tuple(tuple(int(v) for v in row) for row in self.matrix)
        q = self.group.rank
        if len(m) != q or any(len(row) != q for row in m):
            raise StructuralError(f"homomorphism of rank-{q} group needs a {q}x{q} matrix")
        if self.group.kind == "cyclic":
            m = ((m[0][0] % self.group.modulus,),)
        object.__setattr__(self, "matrix", m)

    def __call__(self, g: Element) -> Element:
        if self.group.kind == "cyclic":
            return ((self.matrix[0][0] * g[0]) % self.group.modulus,)
        return tuple(sum(a * b for a, b in zip(row, g)) for row in self.matrix)

    @property
    def is_trivial(self) -> bool:
        """True for φ₀ (every element mapped to the identity)."""
        return all(v == 0 for row in self.matrix for v in row)

    def difference(self, other: "Homomorphism") -> "Homomorphism":
        """g ↦ self(g)·other(g)⁻¹ (additively: self - other)."""
        if other.group != self.group:
            raise StructuralError("homomorphisms on different groups")
        return Homomorphism(self.group, tuple(
            tuple(a - b for a, b in zip(r1, r2)) for r1, r2 in zip(self.matrix, other.matrix)))

    def __repr__(self):
        if self.group.rank == 1:
            return f"φ[×{self.matrix[0][0]}]"
        return f"φ{[list(r) for r in self.matrix]}"


def multiplier(k: int, group: Optional[GroupModel] = None) -> Homomorphism:
    return Homomorphism(group or IntegerLattice(1), ((k,),))


def diagonal(entries: Sequence[int], group: Optional[GroupModel] = None) -> Homomorphism:
    group = group or IntegerLattice(len(entries))
    q = len(entries)
    return Homomorphism(group, tuple(tuple(entries[i] if i == j else 0 for j in range(q))
                                     for i in range(q)))


def identity_hom(group: GroupModel) -> Homomorphism:
    return diagonal([1] * group.rank, group)


def trivial_hom(group: GroupModel) -> Homomorphism:
    """φ₀: the constant-identity map (never a family member)."""
    return diagonal([0] * group.rank, group)


# closure rules for families that are truncations of infinite translational sets

def rule_nonzero(phi: Homomorphism) -> bool:
    return not phi.is_trivial


def rule_nonzero_diagonal(phi: Homomorphism) -> bool:
    m = phi.matrix
    off = any(m[i][j] for i in range(len(m)) for j in range(len(m)) if i != j)
    return not off and not phi.is_trivial


CLOSURE_RULES = {
    "nonzero-integer-matrices": rule_nonzero,
    "nonzero-multipliers": rule_nonzero,
    "nonzero-diagonal": rule_nonzero_diagonal,
}


@dataclass(frozen=True)
class TranslationalFamily:
    """Finite list of pairwise distinct homomorphisms, optionally with a closure rule.

    With ``closure_rule`` set, the family stands for the (possibly infinite) set of
    homomorphisms accepted by that rule and ``members`` lists the ones in use.
    """

    members: tuple
    closure_rule: Optional[str] = None
    _rule: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        members = tuple(self.members)
        if len(set(members)) != len(members):
            raise StructuralError("family members must be pairwise distinct")
        groups = {m.group for m in members}
        if len(groups) > 1:
            raise StructuralError("family mixes homomorphisms of different groups")
        object.__setattr__(self, "members", members)
        if self.closure_rule is not None:
            if self.closure_rule not in CLOSURE_RULES:
                raise StructuralError(f"unknown closure rule {self.closure_rule!r}")
            object.__setattr__(self, "_rule", CLOSURE_RULES[self.closure_rule])
            bad = [m for m in members if not self._rule(m)]
            if bad:
                raise StructuralError(f"members {bad} violate closure rule {self.closure_rule}")

    def __contains__(self, phi: Homomorphism) -> bool:
        if phi in self.members:
            return True
        return self._rule is not None and self._rule(phi)


@dataclass(frozen=True)
class TranslationalVerdict:
    passed: bool
    witness: Optional[tuple] = None  # (φ₁, φ₂, φ₂φ₁⁻¹) for the first violating pair

    @property
    def label(self) -> str:
        return "PASS" if self.passed else "FAIL"


def verify_translational(family: TranslationalFamily) -> TranslationalVerdict:
    """Check that g ↦ φ₂(g)φ₁(g)⁻¹ lies in the family for every ordered distinct pair."""
    members = sorted(family.members, key=lambda p: p.matrix)
    for p1 in members:
        for p2 in members:
            if p1 == p2:
                continue
            d = p2.difference(p1)
            if d not in family:
                return TranslationalVerdict(False, (p1, p2, d))
    return TranslationalVerdict(True)


# ---------------------------------------------------------------------------
# defects


def folner_defect(seq: FolnerSequence, n: int, g: Element) -> Fraction:
    """μ(Λ_n Δ Λ_n g)/μ(Λ_n)."""
    subset = seq(n)
    return symmetric_difference_measure(subset, g) / subset.measure


def uniform_defect(seq: FolnerSequence, n: int, m: int) -> Fraction:
    """max over g ∈ Λ_m of folner_defect(seq, n, g)."""
    inner = seq(m)
    if not inner.elements:
        raise StructuralError("empty Λ_m")
    outer = seq(n)
    return max(symmetric_difference_measure(outer, g) for g in inner) / outer.measure
