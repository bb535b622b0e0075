"""Indexed series of finite-n estimates, the trend convention and CSV output."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

from .numeric import is_exact, norm, render, simplify

DEFAULT_TAU = Fraction(1, 100)


@dataclass(frozen=True)
class TrendResult:
    """Outcome of the last-quartile trend test ``mean |v - target| < tau``."""

    passed: bool
    tail_mean: object
    tau: object
    target: object
    window: tuple  # (first n, last n) of the tail

    @property
    def label(self) -> str:
        return "PASS-TREND" if self.passed else "FAIL"

    def describe(self) -> str:
        return (f"{self.label}: tail mean {float(self.tail_mean):.6g} vs tau {float(self.tau):.6g} "
                f"over n in [{self.window[0]}, {self.window[1]}]")


def _distance(v, target):
    if isinstance(v, tuple):
        if isinstance(target, tuple):
            return norm(tuple(a - b for a, b in zip(v, target)))
        return norm(tuple(a - target for a in v))
    d = simplify(v - target)
    if isinstance(d, Fraction):
        return abs(d)
    return float(abs(d))


def tail_indices(count: int) -> range:
    """Positions making up the last quartile (at least one entry)."""
    start = min(count - 1, (3 * count) // 4)
    return range(max(start, 0), count)


def rate_tau(rate: Callable[[int], float], n_max: int, factor: int = 10) -> float:
    """Threshold calibrated from a known convergence rate: factor · rate(N_max)."""
    return factor * rate(n_max)


@dataclass
class Series:
    """Values indexed by the Følner index n.

    ``values[i]`` belongs to ``ns[i]``; ``mus[i]`` is μ(Λ_{ns[i]}). ``extra``
    holds further named columns of the same length.
    """

    name: str
    ns: list = field(default_factory=list)
    mus: list = field(default_factory=list)
    values: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    value_label: str = "value"

    def append(self, n: int, mu, value, **extra):
        self.ns.append(n)
        self.mus.append(mu)
        self.values.append(value)
        for key, v in extra.items():
            self.extra.setdefault(key, []).append(v)

    def __len__(self):
        return len(self.ns)

    @property
    def exact(self) -> bool:
        return all(is_exact(v) for v in self.values)

    @property
    def last(self):
        return self.values[-1]

    def at(self, n: int):
        return self.values[self.ns.index(n)]

    def tail_mean(self, target=0):
        idx = tail_indices(len(self.values))
        dists = [_distance(self.values[i], target) for i in idx]
        if all(d == 0 for d in dists):
            return Fraction(0)
        # a float mean suffices for a threshold test and avoids huge denominators
        return math.fsum(float(d) for d in dists) / len(dists)

    def trend(self, target=0, tau=DEFAULT_TAU) -> TrendResult:
        if not self.values:
            raise ValueError(f"series {self.name} is empty")
        mean = self.tail_mean(target)
        if isinstance(mean, Fraction) and isinstance(tau, (Fraction, int)):
            passed = mean < tau
        else:
            passed = float(mean) < float(tau)
        idx = tail_indices(len(self.values))
        return TrendResult(passed, mean, tau, target, (self.ns[idx[0]], self.ns[idx[-1]]))

    def max_abs(self):
        return max(_distance(v, 0) for v in self.values)

    def columns(self) -> list:
        first = self.values[0] if self.values else None
        if isinstance(first, tuple):
            cols = [f"{self.value_label}{i + 1}" for i in range(len(first))]
        else:
            cols = [self.value_label]
        return ["n", "mu"] + cols + list(self.extra)

    def rows(self):
        for i, n in enumerate(self.ns):
            v = self.values[i]
            vals = [render(x) for x in v] if isinstance(v, tuple) else [render(v)]
            yield [str(n), render(self.mus[i])] + vals + [render(self.extra[k][i]) for k in self.extra]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns())
        writer.writerows(self.rows())
        return buf.getvalue()

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv(), encoding="utf-8")
        return path


def read_csv(path) -> Series:
    """Load a series written by :meth:`Series.write_csv` (values as Fractions or floats)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    series = Series(Path(path).stem)
    width = len(header) - 2

    def parse(text):
        try:
            return Fraction(text) if "e" not in text and "." not in text else float(text)
        except ValueError:
            return float(text)

    for row in body:
        vals = [parse(x) for x in row[2:]]
        series.append(int(row[0]), parse(row[1]), vals[0] if width == 1 else tuple(vals))
    return series


def checkpoints(n_max: int, count: Optional[int] = None) -> list:
    """All n up to n_max, or ``count`` roughly geometric checkpoints ending at n_max."""
    if count is None or count >= n_max:
        return list(range(1, n_max + 1))
    pts = {max(1, round(n_max ** (i / (count - 1)))) for i in range(count)}
    pts.add(n_max)
    return sorted(pts)
