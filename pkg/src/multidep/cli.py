"""Command line interface: ``multidep {test,moments,qform,study}``.

Exit codes: 0 success, 2 invalid configuration, 3 unusable data.
"""

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import qform
from .engine import METHODS, ConfigError, EstimatorConfig, TestSpec, run_test
from .moments import PreconditionError, biased_moments, unbiased_moments
from .psi_kernels import DataError, PsiFunction, matrix_stats
from .statistics import Dataset, StatisticKind
from .study import parse_scenario, rows_to_csv, run_study

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


class SpecError(ConfigError):
    pass


@dataclass(frozen=True)
class VariableSpec:
    """Groups of 1-based column indices, one group per variable."""

    groups: tuple

    def check_bounds(self, ncols):
        for g in self.groups:
            if g[-1] > ncols:
                raise ConfigError(f"column {g[-1]} out of range: file has {ncols} columns")


def parse_variable_spec(text):
    """``"1-5,6-10"`` gives two groups of five columns; single integers allowed."""
    if not text or not text.strip():
        raise SpecError("empty variable spec")
    groups, used, pos = [], set(), 0
    for item in text.split(","):
        where = f"at position {pos + 1}"
        pos += len(item) + 1
        item = item.strip()
        lo, sep, hi = item.partition("-")
        try:
            a = int(lo)
            b = int(hi) if sep else a
        except ValueError:
            raise SpecError(f"cannot parse {item!r} {where}") from None
        if a < 1:
            raise SpecError(f"columns are 1-based, got {a} {where}")
        if b < a:
            raise SpecError(f"reversed range {item!r} {where}")
        cols = tuple(range(a, b + 1))
        if used & set(cols):
            raise SpecError(f"overlapping range {item!r} {where}")
        used |= set(cols)
        groups.append(cols)
    return VariableSpec(tuple(groups))


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_table(path):
    """Numeric CSV with an optional header row; returns (names, array)."""
    try:
        handle = sys.stdin if path == "-" else open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with handle:
        rows = [r for r in csv.reader(handle) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError("input is empty")
    names = None
    if not all(_is_number(c) for c in rows[0]):
        names, rows = [c.strip() for c in rows[0]], rows[1:]
    if not rows:
        raise DataError("input has a header but no data rows")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    first = 2 if names else 1
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"row {i + first}: expected {width} cells, got {len(row)}")
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise DataError(f"row {i + first}, column {j + 1}: non-numeric cell {cell!r}") from None
    return names, out


def _parse_betas(text, count):
    vals = [float(v) for v in text.split(",")]
    if len(vals) == 1:
        vals = vals * count
    if len(vals) != count:
        raise ConfigError(f"{len(vals)} beta values for {count} variables")
    try:
        return tuple(PsiFunction(v) for v in vals)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_dataset(args):
    _, table = read_table(args.input)
    spec = parse_variable_spec(args.vars) if args.vars else VariableSpec(
        tuple((j + 1,) for j in range(table.shape[1])))
    spec.check_bounds(table.shape[1])
    blocks = tuple(table[:, [c - 1 for c in g]] for g in spec.groups)
    return Dataset(blocks, _parse_betas(args.beta, len(blocks)))


def _threads(args):
    env = os.environ.get("MULTIDEP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"MULTIDEP_THREADS must be an integer, got {env!r}") from None
    return args.threads or os.cpu_count() or 1


def _kind(args):
    try:
        return StatisticKind(args.kind, args.m, not args.raw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _dump(obj):
    return json.dumps(obj, sort_keys=True, allow_nan=False, default=_json_default)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _finite(obj):
    """Replace non-finite floats by None so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def cmd_test(args):
    data = load_dataset(args)
    spec = TestSpec(
        kind=_kind(args),
        method=args.method,
        estimator=EstimatorConfig("biased" if args.biased else "unbiased",
                                  "limit" if args.limit else "finite"),
        resamples=args.resamples,
        seed=args.seed,
        threads=_threads(args),
    )
    result = run_test(data, spec)
    report = _finite(result.to_dict())
    if args.format == "json":
        print(_dump(report))
    else:
        print(f"{result.kind.label}: statistic {_fmt(result.statistic)}, "
              f"p-value {_fmt(result.p_value)} ({result.method}, n={result.n}, N={result.N})")
    if not result.valid:
        print("warning: tail bound not guaranteed at this statistic value", file=sys.stderr)
    for w in result.warnings:
        if args.format != "json":
            print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_moments(args):
    data = load_dataset(args)
    out = []
    for i, (psi, block) in enumerate(zip(data.psis, data.blocks)):
        stats = matrix_stats(psi.pairwise(block))
        mom = unbiased_moments(stats) if args.bias == "unbiased" else biased_moments(stats)
        out.append({"variable": i + 1, **mom.as_dict()})
    if args.format == "json":
        print(_dump(_finite(out)))
    else:
        for row in out:
            print(" ".join(f"{k}={_fmt(v)}" for k, v in row.items()))
    return EXIT_OK


def cmd_qform(args):
    if args.alphas:
        alphas = np.array([float(v) for v in args.alphas.split(",")])
        mom = qform.qform_moments(alphas)
        mean, var, skew = mom.mean, mom.variance, mom.skewness
    elif args.mean is not None and args.variance is not None:
        mean, var, skew, alphas = args.mean, args.variance, args.skewness, None
    else:
        raise ConfigError("give --alphas or both --mean and --variance")
    results = [
        qform.pvalue_classical(args.x, mean),
        qform.pvalue_variance(args.x, mean, var),
        qform.pvalue_clt(args.x, mean, var),
    ]
    if skew is not None:
        results.append(qform.pvalue_pearson(args.x, mean, var, skew))
    if alphas is not None:
        results.append(qform.pvalue_exact(args.x, alphas))
    report = {r.method: {"p_value": r.p, "valid": r.valid, "note": r.note} for r in results}
    if args.format == "json":
        print(_dump(_finite({"x": args.x, "mean": mean, "variance": var, "skewness": skew,
                             "tails": report})))
    else:
        for name, r in report.items():
            flag = "" if r["valid"] else "  (bound not guaranteed)"
            print(f"{name:10s} {_fmt(r['p_value'])}{flag}")
    return EXIT_OK


def cmd_study(args):
    try:
        scenarios = [parse_scenario(s, args.N) for s in args.scenario]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    methods = tuple(m.strip() for m in args.methods.split(","))
    for mid in methods:
        TestSpec.from_id(mid)
    rows = run_study(scenarios, methods, args.replicates, args.seed, args.benchmark_size,
                     args.kind, args.m)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            rows_to_csv(rows, fh)
    else:
        sys.stdout.write(rows_to_csv(rows))
    return EXIT_OK


def _add_data_args(p):
    p.add_argument("input", help="CSV file ('-' for stdin)")
    p.add_argument("--vars", help="column groups, e.g. '1-5,6-10' (default: one column per variable)")
    p.add_argument("--beta", default="1", help="distance exponent(s), one or one per variable")
    p.add_argument("--format", choices=("json", "text"), default="json")


def build_parser():
    parser = argparse.ArgumentParser(prog="multidep", description="Distance multivariance independence tests.")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run an independence test")
    _add_data_args(t)
    t.add_argument("--kind", choices=("multivariance", "total", "m"), default="multivariance")
    t.add_argument("--m", type=int, help="subset size for --kind m")
    t.add_argument("--method", choices=METHODS, default="pearson")
    g = t.add_mutually_exclusive_group()
    g.add_argument("--unbiased", action="store_true", default=True)
    g.add_argument("--biased", action="store_true")
    g = t.add_mutually_exclusive_group()
    g.add_argument("--finite-sample", action="store_true", default=True)
    g.add_argument("--limit", action="store_true")
    g = t.add_mutually_exclusive_group()
    g.add_argument("--normalized", action="store_true", default=True)
    g.add_argument("--raw", action="store_true")
    t.add_argument("--resamples", type=int, default=999)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--threads", type=int, default=None)
    t.set_defaults(func=cmd_test)

    mo = sub.add_parser("moments", help="per-variable moment estimates")
    _add_data_args(mo)
    mo.add_argument("--bias", choices=("biased", "unbiased"), default="unbiased")
    mo.set_defaults(func=cmd_moments)

    q = sub.add_parser("qform", help="quadratic form tail probabilities")
    q.add_argument("--x", type=float, required=True, help="value to evaluate the upper tail at")
    q.add_argument("--alphas", help="comma separated spectrum")
    q.add_argument("--mean", type=float)
    q.add_argument("--variance", type=float)
    q.add_argument("--skewness", type=float)
    q.add_argument("--format", choices=("json", "text"), default="json")
    q.set_defaults(func=cmd_qform)

    s = sub.add_parser("study", help="simulation study, long CSV output")
    s.add_argument("--scenario", action="append", required=True,
                   help="e.g. 'tetrahedron:r=0.5' or 'bernoulli:n=5'; repeatable")
    s.add_argument("--methods", default="pe.Nu,cv.Nu,c1.Nu")
    s.add_argument("--kind", choices=("multivariance", "total", "m"), default="multivariance")
    s.add_argument("--m", type=int)
    s.add_argument("--N", type=int, default=100)
    s.add_argument("--replicates", type=int, default=100)
    s.add_argument("--benchmark-size", type=int, default=2000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="write CSV here instead of stdout")
    s.set_defaults(func=cmd_study)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (DataError, PreconditionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # ConfigError and other argument-level problems
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
