from fractions import Fraction

import pytest

from vdcmix.dynamics import BernoulliShift
from vdcmix.groups import TranslationalFamily, diagonal, multiplier, z_initial
from vdcmix.mixing import MixingExperiment

HALF = Fraction(1, 2)


def bernoulli_experiment(ks=(1, 2), seq=None, events=None, n_max=200, **kw):
    """Fair-coin Bernoulli over Z with multipliers ``ks`` and single-site events by default."""
    sys = BernoulliShift([HALF, HALF])
    seq = seq or z_initial()
    events = events or [{(0,): 0}] * (len(ks) + 1)
    obs = [sys.cylinder(e) for e in events]
    fam = TranslationalFamily(tuple(multiplier(k) for k in ks), "nonzero-multipliers")
    return MixingExperiment(sys, seq, fam, tuple(multiplier(k) for k in ks), obs, n_max, **kw)


def bernoulli_z2_experiment(diags, seq, events=None, n_max=8, **kw):
    sys = BernoulliShift([HALF, HALF], rank=2)
    phis = tuple(diagonal(d) for d in diags)
    events = events or [{(0, 0): 0}] * (len(phis) + 1)
    obs = [sys.cylinder(e) for e in events]
    fam = TranslationalFamily(phis, "nonzero-diagonal")
    return MixingExperiment(sys, seq, fam, phis, obs, n_max, **kw)


@pytest.fixture
def k2_experiment():
    from vdcmix.groups import z_symmetric
    return bernoulli_experiment((1, 2), seq=z_symmetric())


ACCEPTANCE_LINES: list = []


def record_criterion(number: int, passed: bool, detail: str):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
