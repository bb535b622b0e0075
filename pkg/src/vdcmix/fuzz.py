"""Seeded randomized trials of the inequality chain.

Every trial draws its data from a string seed built from (seed, inequality, rank, index) so a
trial can be replayed alone and trials can run in any order or in parallel.
"""

from __future__ import annotations

import itertools
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .averaging import GroupFunction
from .errors import InequalityViolation
from .groups import FiniteSubset, IntegerLattice, quotient_set
from .vdc import (avg_norm_inequality, folding_inequality, gamma_quotient_bound,
                  triple_avg_inequality)

INEQUALITIES = ("avg-norm", "triple-avg", "folding", "gamma-quotient")
MAX_SIZE = 30
MAX_DIM = 8


def _rng(seed: int, name: str, rank: int, index: int) -> random.Random:
    return random.Random(f"{seed}:{name}:{rank}:{index}")


def _random_set(rng: random.Random, rank: int, max_size: int) -> FiniteSubset:
    size = rng.randint(1, max_size)
    radius = max(2, int(size ** (1 / rank)) + 2)
    pts = set()
    while len(pts) < size:
        pts.add(tuple(rng.randint(-radius, radius) for _ in range(rank)))
    return FiniteSubset(IntegerLattice(rank), pts)


def _random_scalar(rng: random.Random, exact: bool):
    if exact:
        return Fraction(rng.randint(-20, 20), rng.randint(1, 12))
    return rng.uniform(-1.0, 1.0)


def _random_function(rng: random.Random, points, dim: int, exact: bool) -> GroupFunction:
    table = {p: tuple(_random_scalar(rng, exact) for _ in range(dim)) for p in sorted(points)}
    return GroupFunction(table.__getitem__, None, dim, "random", check_bound=False)


@dataclass(frozen=True)
class Trial:
    name: str
    rank: int
    index: int
    data: tuple

    def run(self, flip: bool = False):
        if self.name == "avg-norm":
            f, lam = self.data
            return avg_norm_inequality(f, lam, flip)
        if self.name == "triple-avg":
            f, lam1, lam2 = self.data
            return triple_avg_inequality(f, lam1, lam2, flip)
        if self.name == "folding":
            f, lam = self.data
            return folding_inequality(f, lam, flip=flip)
        gamma, lam = self.data
        return gamma_quotient_bound(gamma, lam, flip=flip)

    def shrink(self, flip: bool) -> "Trial":
        """Greedily drop points of the (first) set while the trial still fails."""
        current = self
        changed = True
        while changed:
            changed = False
            lam = current.data[-1] if current.name != "triple-avg" else current.data[1]
            if len(lam) <= 1:
                break
            for p in lam.elements:
                smaller = FiniteSubset(lam.group, [q for q in lam.elements if q != p])
                data = list(current.data)
                data[-1 if current.name != "triple-avg" else 1] = smaller
                candidate = Trial(current.name, current.rank, current.index, tuple(data))
                try:
                    candidate.run(flip)
                except InequalityViolation:
                    current, changed = candidate, True
                    break
        return current


def make_trial(seed: int, name: str, rank: int, index: int, max_size: int = MAX_SIZE,
               max_dim: int = MAX_DIM) -> Trial:
    rng = _rng(seed, name, rank, index)
    exact = rng.random() < 0.5
    if name in ("avg-norm", "triple-avg"):
        dim = rng.randint(1, max_dim)
        lam = _random_set(rng, rank, max_size)
        if name == "avg-norm":
            return Trial(name, rank, index, (_random_function(rng, lam.elements, dim, exact), lam))
        lam1 = _random_set(rng, rank, max(1, max_size // 3))
        pts = {tuple(a + b for a, b in zip(g, h)) for g in lam.elements for h in lam1.elements}
        return Trial(name, rank, index, (_random_function(rng, pts, dim, exact), lam1, lam))
    lam = _random_set(rng, rank, max_size)
    quotient = quotient_set(lam)
    if name == "folding":
        table = {d: abs(_random_scalar(rng, exact)) for d in quotient.elements}
        return Trial(name, rank, index, (table.__getitem__, lam))
    table = {d: _random_scalar(rng, exact) for d in quotient.elements}
    return Trial(name, rank, index, (table.__getitem__, lam))


@dataclass
class FuzzReport:
    seed: int
    trials: int
    counts: dict = field(default_factory=dict)  # (name, rank) -> trials run
    violations: list = field(default_factory=list)  # (trial, shrunk trial, message)

    @property
    def passed(self) -> bool:
        return not self.violations

    def rows(self):
        if not self.trials:
            return
        for (name, rank), count in sorted(self.counts.items()):
            bad = sum(1 for t, _, _ in self.violations if (t.name, t.rank) == (name, rank))
            yield [name, f"Z^{rank}", str(count), str(bad)]


def _run_block(args) -> list:
    seed, name, rank, start, stop, flip, max_size, max_dim = args
    failures = []
    for i in range(start, stop):
        trial = make_trial(seed, name, rank, i, max_size, max_dim)
        try:
            trial.run(flip)
        except InequalityViolation as exc:
            failures.append((i, str(exc)))
    return failures


def run_fuzz(seed: int, trials: int, ranks=(1, 2), names=INEQUALITIES, flip: Optional[str] = None,
             threads: int = 1, max_size: int = MAX_SIZE, max_dim: int = MAX_DIM) -> FuzzReport:
    """Run ``trials`` trials per inequality and rank; ``flip`` names one inequality to reverse."""
    report = FuzzReport(seed, trials)
    jobs = []
    for name, rank in itertools.product(names, ranks):
        report.counts[(name, rank)] = trials
        step = max(1, trials // max(threads, 1))
        for start in range(0, trials, step):
            jobs.append((seed, name, rank, start, min(trials, start + step), flip == name,
                         max_size, max_dim))
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_block, jobs))
    else:
        results = [_run_block(job) for job in jobs]
    shrunk = set()
    for job, failures in zip(jobs, results):
        _, name, rank, _, _, flipped, _, _ = job
        for index, message in failures:
            trial = make_trial(seed, name, rank, index, max_size, max_dim)
            # only the first witness per inequality and rank is minimized
            small = trial if (name, rank) in shrunk else trial.shrink(flipped)
            shrunk.add((name, rank))
            report.violations.append((trial, small, message))
    return report
