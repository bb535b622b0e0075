"""Command-line experiment runner.

Usage::

    vdcmix run <config.yaml|preset> [--out DIR] [--seed N] [--threads N]
    vdcmix fuzz <config.yaml|preset> [--out DIR] [--seed N] [--threads N] [--flip NAME]
    vdcmix --list-presets

Exit codes: 0 all verdicts as declared, 1 inequality violation, failed stage or
verdict contradicting the declaration, 2 configuration error, 3 hypothesis refusal.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from . import averaging, groups, mixing, vdc
from .dynamics import (BernoulliShift, FiniteSystem, StepFunction, TorusRotation, TrigPolynomial,
                       cat_map)
from .errors import (ConfigError, HypothesisRefusal, InequalityViolation, StageFailure,
                     StructuralError, VdcMixError)
from .exprs import evaluate
from .fuzz import INEQUALITIES, run_fuzz
from .numeric import render
from .series import Series

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_REFUSAL = 0, 1, 2, 3

EXPERIMENTS = ("wm", "ergodic", "l2wm", "product-equivalence", "vdc-suite", "gamma", "order-k",
               "theorem-4-4", "inequality-fuzz")


# ---------------------------------------------------------------------------
# config parsing


def _num(x, what: str):
    """Exact rational from an int, a decimal or an expression string."""
    if isinstance(x, bool):
        raise ConfigError(f"{what}: expected a number, got {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        return evaluate(x)
    raise ConfigError(f"{what}: expected a number, got {x!r}")


def _int(cfg: dict, key: str, default=None) -> int:
    v = cfg.get(key, default)
    if v is None:
        raise ConfigError(f"missing required key {key!r}")
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise ConfigError(f"{key} must be a non-negative integer, got {v!r}")
    return v


def _section(cfg: dict, key: str) -> dict:
    v = cfg.get(key)
    if not isinstance(v, dict):
        raise ConfigError(f"missing or malformed section {key!r}")
    return v


def build_sequence(spec: dict) -> groups.FolnerSequence:
    preset = spec.get("preset")
    if preset == "z-symmetric":
        return groups.z_symmetric()
    if preset == "z-initial":
        return groups.z_initial()
    if preset == "z2-squares":
        return groups.lattice_boxes(int(spec.get("rank", 2)), int(spec.get("scale", 1)))
    if preset == "scaled-ball":
        return groups.scaled_ball(int(spec.get("rank", 2)), _num(spec.get("spacing", "1/8"), "spacing"))
    raise ConfigError(f"unknown sequence preset {preset!r}")


def build_system(spec: dict):
    preset = spec.get("preset")
    try:
        if preset == "bernoulli":
            weights = [_num(w, "weights") for w in spec.get("weights", ["1/2", "1/2"])]
            return BernoulliShift(weights, int(spec.get("rank", 1)))
        if preset == "rotation":
            alpha = spec.get("alpha")
            if alpha is None:
                raise ConfigError("rotation needs alpha")
            return TorusRotation(alpha if isinstance(alpha, (str, list)) else str(alpha),
                                 int(spec.get("precision", 128)))
        if preset == "cat-map":
            return cat_map()
        if preset == "trivial":
            weights = [_num(w, "weights") for w in spec.get("weights", ["1/2", "1/2"])]
            return FiniteSystem.trivial(weights, int(spec.get("rank", 1)))
    except VdcMixError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"system: {exc}") from None
    raise ConfigError(f"unknown system preset {preset!r}")


def _site(key, rank: int) -> tuple:
    if isinstance(key, int):
        return (key,) + (0,) * (rank - 1) if rank > 1 else (key,)
    if isinstance(key, str):
        return tuple(int(p) for p in key.split(","))
    return tuple(int(p) for p in key)


def build_observable(system, spec: dict):
    """One observable from its declaration; the kind must match the system's algebra."""
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError(f"observable declarations have exactly one kind, got {spec!r}")
    kind, arg = next(iter(spec.items()))
    try:
        if kind == "cylinder":
            if not isinstance(system, BernoulliShift):
                raise ConfigError("cylinder observables need a Bernoulli system")
            return system.cylinder({_site(k, system.rank): int(v) for k, v in arg.items()})
        if kind == "interval":
            lo, hi = (_num(x, "interval") for x in arg)
            return StepFunction.interval(lo, hi)
        if kind == "cosine":
            return TrigPolynomial.cosine(tuple(int(c) for c in arg))
        if kind == "indicator":
            if not isinstance(system, FiniteSystem):
                raise ConfigError("indicator observables need a finite system")
            return system.indicator(arg)
    except (StructuralError, TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"observable {spec!r}: {exc}") from None
    raise ConfigError(f"unknown observable kind {kind!r}")


def build_hom(spec, group) -> groups.Homomorphism:
    try:
        if isinstance(spec, int):
            if group.rank != 1:
                raise ConfigError(f"multiplier {spec} given for a rank-{group.rank} group")
            return groups.multiplier(spec, group)
        if isinstance(spec, list) and all(isinstance(r, list) for r in spec):
            return groups.Homomorphism(group, tuple(tuple(r) for r in spec))
        if isinstance(spec, list):
            return groups.diagonal(spec, group)
    except StructuralError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"cannot read homomorphism {spec!r}")


# ---------------------------------------------------------------------------
# reports


@dataclass
class ReportRecord:
    experiment: str
    seed: Optional[int]
    expected: str
    hypotheses: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)  # file name -> Series
    verdicts: dict = field(default_factory=dict)  # name -> (label, series file)
    notes: list = field(default_factory=list)
    exact: bool = True
    wall_clock: float = 0.0

    def add_series(self, name: str, series: Series) -> str:
        fname = f"{name}.csv"
        self.series[fname] = series
        self.exact = self.exact and series.exact
        return fname

    def verdict(self, name: str, label: str, source: str):
        self.verdicts[name] = (label, source)

    @property
    def overall(self) -> str:
        labels = [v[0] for v in self.verdicts.values()]
        bad = {"FAIL", "INCONCLUSIVE", "INCONSISTENT"}
        return "FAIL" if any(l in bad for l in labels) else "PASS"

    def summary(self) -> str:
        lines = [f"experiment: {self.experiment}", f"seed: {self.seed}",
                 f"expected: {self.expected}", f"overall: {self.overall}",
                 f"exact: {self.exact}"]
        if self.hypotheses:
            lines.append("hypotheses:")
            lines += [f"  {k}: {v}" for k, v in self.hypotheses.items()]
        lines.append("verdicts:")
        lines += [f"  {k}: {label} [{src}]" for k, (label, src) in self.verdicts.items()]
        lines += [f"note: {n}" for n in self.notes]
        lines.append(f"wall_clock_s: {self.wall_clock:.3f}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# experiments


def _common(cfg: dict):
    seq = build_sequence(_section(cfg, "sequence"))
    n_max = _int(cfg, "n_max")
    if n_max < 1:
        raise ConfigError("n_max must be at least 1")
    tau = _num(cfg.get("tau", "1/100"), "tau")
    return seq, n_max, tau


def _events(cfg: dict, system, key: str = "events") -> list:
    decls = cfg.get("observables", {})
    names = cfg.get(key)
    if not isinstance(names, list) or not names:
        raise ConfigError(f"{key!r} must list observable names")
    out = []
    for name in names:
        if name not in decls:
            raise ConfigError(f"observable {name!r} is not declared")
        out.append(build_observable(system, decls[name]))
    return out


def _phi(cfg: dict, group):
    return build_hom(cfg["phi"], group) if "phi" in cfg else groups.identity_hom(group)


def run_order_one(cfg: dict, rec: ReportRecord):
    system = build_system(_section(cfg, "system"))
    seq, n_max, tau = _common(cfg)
    a0, a1 = (_events(cfg, system) * 2)[:2]
    phi = _phi(cfg, seq.group)
    fn = {"wm": mixing.wm_average, "ergodic": mixing.ergodic_average,
          "l2wm": mixing.l2_wm_average}[cfg["experiment"]]
    result = fn(system, a0, a1, phi, seq, n_max, tau)
    src = rec.add_series(cfg["experiment"], result.series)
    rec.verdict(cfg["experiment"], result.label, src)
    rec.notes.append(f"last value {render(result.series.last)} at n={result.series.ns[-1]}; "
                     f"{result.trend.describe()}")


def run_product_equivalence(cfg: dict, rec: ReportRecord):
    system = build_system(_section(cfg, "system"))
    seq, n_max, tau = _common(cfg)
    event = _events(cfg, system)[0]
    matrix = mixing.product_equivalence_check(system, event, _phi(cfg, seq.group), seq, n_max, tau)
    for name, result in matrix.results.items():
        src = rec.add_series(name, result.series)
        rec.verdict(name, result.label, src)
    rec.notes.append(f"equivalence matrix {matrix.label}")
    if not matrix.consistent:
        rec.verdict("consistency", "INCONSISTENT", ",".join(rec.series))


FUNCTIONS = {
    "alternating": lambda: averaging.GroupFunction(
        lambda g: (Fraction((-1) ** (g[0] % 2)),), Fraction(1), 1, "alternating"),
    "even": lambda: averaging.GroupFunction(
        lambda g: (Fraction(1 if g[0] % 2 == 0 else 0),), Fraction(1), 1, "even"),
    "squares": lambda: averaging.squares(),
}


def _function(cfg: dict):
    name = cfg.get("function")
    if isinstance(name, dict) and "constant" in name:
        return averaging.constant(_num(name["constant"], "constant"))
    if name not in FUNCTIONS:
        raise ConfigError(f"unknown function {name!r}; choose from {sorted(FUNCTIONS)} or constant")
    return FUNCTIONS[name]()


def run_vdc_suite(cfg: dict, rec: ReportRecord):
    seq, n_max, tau = _common(cfg)
    f = _function(cfg)
    m_list = [int(m) for m in cfg.get("m_list", [1, 2, 4, 8, 16])]
    verdict = vdc.vdc_verdict(f, seq, m_list, n_max, tau)
    c = rec.add_series("vdc_condition", verdict.condition)
    s = rec.add_series("vdc_conclusion", verdict.conclusion)
    rec.hypotheses.update({k: str(v) for k, v in verdict.hypotheses.items()})
    rec.verdict("vdc", verdict.label, f"{c},{s}")
    gap = vdc.shift_average_gap(f, seq, min(n_max, 200), m_list[0])
    rec.notes.append(f"shift gap at n={gap.n}, m={gap.m}: {gap.gap:.6g} <= {render(gap.bound)}")


def _experiment(cfg: dict) -> mixing.MixingExperiment:
    system = build_system(_section(cfg, "system"))
    seq, n_max, tau = _common(cfg)
    phis = tuple(build_hom(p, seq.group) for p in cfg.get("phis", []))
    fam_spec = cfg.get("family", {})
    members = tuple(build_hom(p, seq.group) for p in fam_spec.get("members", [])) or phis
    closure = fam_spec.get("closure")
    try:
        family = groups.TranslationalFamily(members, closure)
    except StructuralError as exc:
        raise ConfigError(f"family: {exc}") from None
    fs = _events(cfg, system, "f")
    m_list = tuple(int(m) for m in cfg.get("m_list", [1, 2, 4, 8, 16]))
    return mixing.MixingExperiment(system, seq, family, phis, tuple(fs), n_max,
                                   _num(cfg.get("c_bound", 2), "c_bound"), m_list, tau)


def run_gamma(cfg: dict, rec: ReportRecord):
    exp = _experiment(cfg)
    for h in cfg.get("h", [[0]]):
        h = tuple(h) if isinstance(h, list) else (h,)
        cmp = mixing.gamma_estimate_vs_closed_form(exp, h, exp.n_max)
        tag = "_".join(str(c) for c in h)
        src = rec.add_series(f"gamma_h{tag}", cmp.estimate.series)
        rec.verdict(f"gamma[{tag}]", cmp.label, src)
        rec.notes.append(f"h={h}: closed form {render(cmp.closed_form)}, collisions "
                         f"{sorted(cmp.collisions)}, exact from n={cmp.exact_from}")


def _emit_order_k(rec: ReportRecord, res: mixing.OrderKResult, prefix: str = ""):
    for key, series in (("1[k]", res.squared), ("1[k]-abs", res.absolute), ("2[k]", res.uncentred),
                        ("3[k]", res.norm)):
        if series is None:
            continue
        name = prefix + key.replace("[", "").replace("]", "")
        src = rec.add_series(name, series)
        rec.verdict(prefix + key, "PASS" if res.trends[key].passed else "FAIL", src)


def run_order_k(cfg: dict, rec: ReportRecord):
    exp = _experiment(cfg)
    res = mixing.order_k_wm_series(exp, norm_n_max=cfg.get("norm_n_max"))
    _emit_order_k(rec, res)
    rec.notes.append(f"method {res.method}; collision set {sorted(res.collisions or [])}")
    if not res.bridge_consistent or not res.implication_holds:
        rec.verdict("bridge", "FAIL", "1k.csv")


def run_theorem(cfg: dict, rec: ReportRecord):
    exp = _experiment(cfg)
    report = mixing.theorem_4_4_pipeline(exp, cfg.get("norm_n_max"), cfg.get("n_wm"))
    rec.hypotheses.update(report.hypotheses)
    rec.notes.append(f"weak-mixing stage: {len(report.wm_checks)} checks passed")
    for stage in report.stages:
        j = stage.order
        c = rec.add_series(f"order{j}_condition", stage.vdc.condition)
        rec.verdict(f"3[{j}] via vdc", stage.vdc.label, c)
        _emit_order_k(rec, stage.order_k, f"order{j}_")
        rec.notes.append(f"order {j}: quotient bounds {[r.label for r in stage.quotient_bounds]}, "
                         f"telescoping {[r.label for r in stage.telescoping]}")


def run_fuzz_experiment(cfg: dict, rec: ReportRecord, threads: int, flip: Optional[str]) -> int:
    if cfg.get("seed") is None:
        raise ConfigError("inequality-fuzz needs a seed")
    trials = _int(cfg, "trials", 1000)
    flip = flip or cfg.get("flip")
    if flip is not None and flip not in INEQUALITIES:
        raise ConfigError(f"flip must name one of {INEQUALITIES}")
    report = run_fuzz(int(cfg["seed"]), trials, flip=flip, threads=threads)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["inequality", "group", "trials", "violations"])
    writer.writerows(report.rows())
    rec.series["fuzz_report.csv"] = buf.getvalue()
    for trial, small, message in report.violations[:10]:
        rec.notes.append(f"violation {trial.name} on Z^{trial.rank} trial {trial.index}: {message}; "
                         f"minimized set {list(small.data[-1 if small.name != 'triple-avg' else 1].elements)}")
    rec.verdict("inequalities", "PASS" if report.passed else "FAIL", "fuzz_report.csv")
    return EXIT_OK if report.passed else EXIT_VIOLATION


RUNNERS = {
    "wm": run_order_one, "ergodic": run_order_one, "l2wm": run_order_one,
    "product-equivalence": run_product_equivalence, "vdc-suite": run_vdc_suite,
    "gamma": run_gamma, "order-k": run_order_k, "theorem-4-4": run_theorem,
}


# ---------------------------------------------------------------------------
# entry points


def list_presets() -> list:
    root = resources.files("vdcmix") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_config(ref: str) -> dict:
    path = Path(ref)
    if path.exists():
        text = path.read_text(encoding="utf-8")
    elif ref in list_presets():
        text = (resources.files("vdcmix") / "presets" / f"{ref}.yaml").read_text(encoding="utf-8")
    else:
        raise ConfigError(f"no config file or preset named {ref!r}")
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    if cfg.get("experiment") not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
    if cfg.get("expected", "pass") not in ("pass", "fail"):
        raise ConfigError("expected must be 'pass' or 'fail'")
    return cfg


def _write(rec: ReportRecord, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    for fname, series in rec.series.items():
        if isinstance(series, str):
            (out / fname).write_text(series, encoding="utf-8")
        else:
            series.write_csv(out / fname)
    (out / "summary.txt").write_text(rec.summary(), encoding="utf-8")


def execute(ref: str, out: Optional[str] = None, seed: Optional[int] = None, threads: int = 1,
            fuzz_mode: bool = False, flip: Optional[str] = None, stream=None) -> int:
    """Run one config and return the exit code."""
    stream = stream or sys.stdout
    start = time.perf_counter()
    try:
        cfg = load_config(ref)
        if seed is not None:
            cfg["seed"] = seed
        name = cfg.get("name") or Path(ref).stem
        expected = cfg.get("expected", "pass")
        rec = ReportRecord(cfg["experiment"], cfg.get("seed"), expected)
        out_dir = Path(out or "vdcmix-out") / name
        if fuzz_mode or cfg["experiment"] == "inequality-fuzz":
            if cfg["experiment"] != "inequality-fuzz":
                raise ConfigError("fuzz needs an inequality-fuzz config")
            code = run_fuzz_experiment(cfg, rec, threads, flip)
            rec.wall_clock = time.perf_counter() - start
            _write(rec, out_dir)
            stream.write(rec.summary())
            return code
        RUNNERS[cfg["experiment"]](cfg, rec)
    except ConfigError as exc:
        stream.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except HypothesisRefusal as exc:
        stream.write(f"refused at stage {exc.stage}: {exc}\n")
        if "expected" in locals() and expected == "fail":
            if isinstance(exc.witness, mixing.AverageResult):
                rec.add_series("refusal", exc.witness.series)
                rec.verdict(f"refusal ({exc.stage})", "FAIL", "refusal.csv")
            rec.wall_clock = time.perf_counter() - start
            _write(rec, out_dir)
            stream.write(rec.summary())
            return EXIT_OK
        return EXIT_REFUSAL
    except (InequalityViolation, StageFailure) as exc:
        stream.write(f"violation: {exc}\n")
        return EXIT_VIOLATION
    rec.wall_clock = time.perf_counter() - start
    _write(rec, out_dir)
    stream.write(rec.summary())
    if expected == "pass":
        return EXIT_OK if rec.overall == "PASS" else EXIT_VIOLATION
    return EXIT_OK if rec.overall == "FAIL" else EXIT_VIOLATION


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="vdcmix", description="Følner-average and mixing experiments")
    parser.add_argument("--list-presets", action="store_true", help="list bundled presets and exit")
    sub = parser.add_subparsers(dest="command")
    for cmd in ("run", "fuzz"):
        p = sub.add_parser(cmd)
        p.add_argument("config", help="YAML config path or bundled preset name")
        p.add_argument("--out", default="vdcmix-out", help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes for fuzz trials")
        if cmd == "fuzz":
            p.add_argument("--flip", choices=INEQUALITIES,
                           help="self-test: reverse one inequality so the harness must fail")
    args = parser.parse_args(argv)
    if args.list_presets:
        for name in list_presets():
            print(name)
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("config error: seed must be an unsigned 64-bit integer")
        return EXIT_CONFIG
    return execute(args.config, args.out, args.seed, max(1, args.threads),
                   fuzz_mode=args.command == "fuzz", flip=getattr(args, "flip", None))


if __name__ == "__main__":
    sys.exit(main())
