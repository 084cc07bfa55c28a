"""Command-line front end: ``fcbio solve | verify | gen-data``.

Exit codes: 0 success, 1 check failure, 2 usage or config error, 3 I/O or
parse error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .core import FCBiOError, InvalidData, Setting, Tolerances
from .driver import BudgetPolicy, certify, fc_bio
from .io import DatasetParseError, load_dataset, write_csv, write_libsvm
from .problems import (
    DesignMatrix,
    make_lipschitz_hard_instance,
    make_logistic_problem,
    make_min_norm_problem,
    make_smooth_hard_instance,
    synthetic_logistic,
    synthetic_min_norm,
)
from . import verify

EXPERIMENTS = ("min_norm", "logistic", "hard_smooth", "hard_lipschitz", "lower_bound", "custom")
SUITE_NAMES = tuple(verify.SUITES) + ("all",)

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

# per-experiment defaults: (eps, radius, dims, horizon)
_DEFAULTS = {
    "min_norm": (1e-6, 2.0, (40, 80), None),
    "logistic": (1e-3, 10.0, (200, 50), None),
    "hard_smooth": (1e-3, 1.0, None, 50),
    "hard_lipschitz": (1e-3, 1.0, None, 50),
    "lower_bound": (1e-2, 1.0, None, 20),
    "custom": (1e-3, 2.0, None, None),
}


class ConfigError(FCBiOError, ValueError):
    """A configuration field is missing or has an invalid value."""

    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


@dataclass
class RunConfig:
    experiment: str
    eps_f: float
    eps_g: float
    budget: BudgetPolicy
    seed: int
    data: Optional[str]
    fmt: Optional[str]
    out: Optional[str]
    radius: float
    dims: Optional[tuple[int, int]]
    nonneg_f: bool
    horizon: Optional[int]
    setting: Setting
    level: str
    trace_every: Optional[int]


def parse_budget(text: str) -> BudgetPolicy:
    """``certified``, ``total:T`` (or a bare integer T) or ``cap:K``."""
    text = str(text).strip()
    try:
        if text == "certified":
            return BudgetPolicy.certified()
        if text.isdigit():
            return BudgetPolicy.fixed_total(int(text))
        mode, _, num = text.partition(":")
        if mode == "total":
            return BudgetPolicy.fixed_total(int(num))
        if mode == "cap":
            return BudgetPolicy.capped(int(num))
    except ValueError as exc:
        raise ConfigError("budget", str(exc)) from None
    raise ConfigError("budget", f"expected 'certified', 'total:T' or 'cap:K', got {text!r}")


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment; keys use - or _."""
    out = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ConfigError("config", f"{path}:{ln}: expected 'key = value'")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _num(field: str, value, kind=float, positive=True):
    try:
        v = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(field, f"not a valid {kind.__name__}: {value!r}") from None
    if kind is float and not math.isfinite(v):
        raise ConfigError(field, f"must be finite, got {value!r}")
    if positive and not v > 0:
        raise ConfigError(field, f"must be positive, got {value!r}")
    return v


def build_config(args: argparse.Namespace) -> RunConfig:
    file_vals = read_config_file(args.config) if args.config else {}
    known = {f.name for f in fields(RunConfig)} | {"format"}
    for key in file_vals:
        if key not in known:
            raise ConfigError(key, "unknown key in config file")

    def pick(name, default=None):
        v = getattr(args, name, None)
        if v is not None:
            return v
        return file_vals.get(name, default)

    experiment = pick("experiment")
    if experiment is None:
        raise ConfigError("experiment", "required")
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {EXPERIMENTS}, got {experiment!r}")
    eps0, radius0, dims0, horizon0 = _DEFAULTS[experiment]
    eps_f = _num("eps_f", pick("eps_f", eps0))
    eps_g = _num("eps_g", pick("eps_g", eps_f))
    seed = _num("seed", pick("seed", 7), int, positive=False)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed", "must fit in an unsigned 64-bit integer")
    dims = pick("dims", dims0)
    if isinstance(dims, str):
        dims = dims.replace(",", " ").split()
    if dims is not None:
        if len(dims) != 2:
            raise ConfigError("dims", "expected two integers m n")
        dims = (_num("dims", dims[0], int), _num("dims", dims[1], int))
    horizon = pick("horizon", horizon0)
    horizon = None if horizon is None else _num("horizon", horizon, int)
    trace_every = pick("trace_every")
    trace_every = None if trace_every is None else _num("trace_every", trace_every, int)
    nonneg = pick("nonneg_f", False)
    if isinstance(nonneg, str):
        if nonneg.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError("nonneg_f", f"expected a boolean, got {nonneg!r}")
        nonneg = nonneg.lower() in ("true", "1", "yes")
    setting = pick("setting", "smooth")
    try:
        setting = Setting(setting)
    except ValueError:
        raise ConfigError("setting", f"must be 'smooth' or 'lipschitz', got {setting!r}") from None
    level = pick("level", "upper")
    if level not in ("upper", "lower"):
        raise ConfigError("level", f"must be 'upper' or 'lower', got {level!r}")
    fmt = pick("format")
    if fmt is not None and fmt not in ("csv", "libsvm"):
        raise ConfigError("format", f"must be 'csv' or 'libsvm', got {fmt!r}")
    data = pick("data")
    if experiment == "custom" and data is None:
        raise ConfigError("data", "the custom experiment needs --data")
    return RunConfig(
        experiment=experiment, eps_f=eps_f, eps_g=eps_g, budget=parse_budget(pick("budget", "certified")),
        seed=seed, data=data, fmt=fmt, out=pick("out"), radius=_num("radius", pick("radius", radius0)),
        dims=dims, nonneg_f=bool(nonneg), horizon=horizon, setting=setting, level=level,
        trace_every=trace_every,
    )


def _split(data: DesignMatrix) -> tuple[DesignMatrix, DesignMatrix]:
    k = data.shape[0] // 2
    if k < 1:
        raise InvalidData("logistic data needs at least two rows for a train/validation split")
    return DesignMatrix(data.A[:k], data.b[:k]), DesignMatrix(data.A[k:], data.b[k:])


def _gap(value, ref):
    return None if ref is None else float(value - ref)


def run_solve(cfg: RunConfig) -> tuple[dict, int, object]:
    """Run one experiment; returns (summary, exit code, report)."""
    tol = Tolerances(cfg.eps_f, cfg.eps_g)
    exp = cfg.experiment
    extra: dict = {}

    if exp in ("hard_smooth", "hard_lipschitz"):
        make = make_smooth_hard_instance if exp == "hard_smooth" else make_lipschitz_hard_instance
        res = verify.run_stall(make(cfg.horizon), cfg.eps_f)
        rep = res.report
        gt = make(cfg.horizon).ground_truth
        extra = {"T": cfg.horizon, "stall": res.stalled, "f_constant": res.stalled,
                 "abs_gap_x0": res.abs_gap_x0, "zero_respecting_violations": len(res.violations)}
        summary = _summary(exp, rep, gt.f_star, gt.g_star, tol)
        summary.update(extra)
        ok = res.stalled and res.abs_gap_x0 >= (1 / 48 if exp == "hard_smooth" else 0.25)
        return summary, EXIT_OK if ok else EXIT_CHECK, rep

    if exp == "lower_bound":
        res = verify.run_floor(cfg.setting, cfg.horizon, cfg.eps_f)
        rep = res.report
        summary = _summary(exp, rep, None, None, tol)
        summary.update({"T": cfg.horizon, "setting": cfg.setting.value,
                        "best_f_gap_before_T": res.best_gap, "floor": res.floor,
                        "floor_holds": res.holds})
        return summary, EXIT_OK if res.holds else EXIT_CHECK, rep

    f_star = g_star = None
    if exp == "min_norm" or (exp == "custom" and _custom_kind(cfg) == "csv"):
        if exp == "custom":
            data = load_dataset(cfg.data, "csv")
        else:
            m, n = cfg.dims
            data = synthetic_min_norm(m, n, cfg.seed)
        problem = make_min_norm_problem(data, cfg.radius)
        try:
            x_star, f_star = verify.min_norm_ground_truth(data)
            g_star = 0.0
            if np.linalg.norm(x_star) > cfg.radius:
                f_star = g_star = None  # optimum outside Z: no closed form
        except FCBiOError:
            f_star = g_star = None
        # f = |x|^2 / 2 and g = |Ax - b|^2 / 2 are both nonnegative
        rep = fc_bio(problem, tol, cfg.budget, f_nonneg=True, g_lower_bound=0.0,
                     trace_every=cfg.trace_every)
    else:
        if exp == "custom":
            train, val = _split(load_dataset(cfg.data, "libsvm"))
        else:
            m, n = cfg.dims
            train, val = synthetic_logistic(m, n, cfg.seed)
        problem = make_logistic_problem(train, val, cfg.radius)
        rep = fc_bio(problem, tol, cfg.budget, f_nonneg=True, trace_every=cfg.trace_every)
    summary = _summary(exp, rep, f_star, g_star, tol)
    code = EXIT_OK if summary["certified"] in (True, None) else EXIT_CHECK
    return summary, code, rep


def _custom_kind(cfg: RunConfig) -> str:
    if cfg.fmt is not None:
        return cfg.fmt
    return "libsvm" if str(cfg.data).endswith((".svm", ".libsvm", ".txt")) else "csv"


def _summary(exp, rep, f_star, g_star, tol) -> dict:
    certified = None
    if f_star is not None and g_star is not None:
        certified = certify(rep, (f_star, g_star)).certified
    return {
        "experiment": exp,
        "f_gap": _gap(rep.f_value, f_star),
        "g_gap": _gap(rep.g_value, g_star),
        "oracle_calls": rep.oracle_calls,
        "wall_seconds": rep.wall_seconds,
        "certified": certified,
        "f_value": rep.f_value,
        "g_value": rep.g_value,
        "eps_f": tol.eps_f,
        "eps_g": tol.eps_g,
        "rounds": rep.rounds,
        "truncated": rep.truncated,
    }


def cmd_solve(args) -> int:
    cfg = build_config(args)
    summary, code, rep = run_solve(cfg)
    out = cfg.out or f"{cfg.experiment}_trace.csv"
    rep.write_trace(out)
    summary["trace"] = out
    print(json.dumps(summary, default=_json_default))
    return code


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o).__name__)


def cmd_verify(args) -> int:
    checks = verify.run_suite(args.suite, seed=args.seed)
    width = max(len(c.name) for c in checks)
    for c in checks:
        mark = "PASS" if c.passed else "FAIL"
        print(f"{mark}  {c.suite:<12} {c.name:<{width}}  {c.detail}")
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK


def cmd_gen_data(args) -> int:
    exp = args.experiment
    if exp not in ("min_norm", "logistic"):
        raise ConfigError("experiment", "gen-data supports 'min_norm' and 'logistic'")
    m, n = args.dims if args.dims else _DEFAULTS[exp][2]
    if m < 1 or n < 1:
        raise ConfigError("dims", "must be positive")
    if exp == "min_norm":
        data = synthetic_min_norm(m, n, args.seed)
        path = args.out or "min_norm.csv"
        write_csv(data, path)
    else:
        train, val = synthetic_logistic(m, n, args.seed)
        data = DesignMatrix(np.vstack([train.A, val.A]), np.concatenate([train.b, val.b]))
        path = args.out or "logistic.svm"
        write_libsvm(data, path)
    print(json.dumps({"experiment": exp, "rows": m, "cols": n, "seed": args.seed, "out": path}))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fcbio", description="First-order simple bilevel optimization.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="run an experiment and write a trace")
    s.add_argument("--experiment", choices=EXPERIMENTS)
    s.add_argument("--config", help="flat key=value file; flags override it")
    s.add_argument("--eps-f", dest="eps_f", type=float)
    s.add_argument("--eps-g", dest="eps_g", type=float)
    s.add_argument("--budget", help="certified (default), total:T or cap:K")
    s.add_argument("--seed", type=int)
    s.add_argument("--data")
    s.add_argument("--format", choices=("csv", "libsvm"))
    s.add_argument("--out", help="trace CSV path (default <experiment>_trace.csv)")
    s.add_argument("--radius", type=float)
    s.add_argument("--dims", nargs=2, type=int, metavar=("M", "N"))
    s.add_argument("--nonneg-f", dest="nonneg_f", action="store_const", const=True)
    s.add_argument("--horizon", type=int, help="T for hard and lower-bound instances")
    s.add_argument("--setting", choices=("smooth", "lipschitz"))
    s.add_argument("--level", choices=("upper", "lower"))
    s.add_argument("--trace-every", dest="trace_every", type=int,
                   help="also record every k-th inner iterate")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="run an invariant suite")
    v.add_argument("suite", choices=SUITE_NAMES)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("gen-data", help="write a synthetic dataset")
    g.add_argument("--experiment", choices=("min_norm", "logistic"), required=True)
    g.add_argument("--dims", nargs=2, type=int, metavar=("M", "N"))
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_data)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"fcbio: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DatasetParseError, InvalidData) as exc:
        print(f"fcbio: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
