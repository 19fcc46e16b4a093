"""Command-line interface.

Subcommands:

* ``thresholds``: print the detection thresholds and regime for (n, d, s).
* ``test``: run one test on a histogram read from CSV or JSON.
* ``calibrate``: print Monte-Carlo null cutoffs for the statistics.
* ``phase-diagram``: run a power grid from a JSON config and emit CSV/JSON.
* ``lower-bound``: print the likelihood-ratio second moment and risk bound
  for a prior.
* ``verify``: run the variational-identity and second-moment cross-checks.

Exit codes: 0 success, 1 domain errors, 2 I/O / configuration / usage
errors.  ``--seed`` selects the root seed everywhere; ``--threads``
(fallback: env ``SPARSE_UNIF_THREADS``) controls parallelism without
changing any result.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from . import lowerbound as lb
from .errors import ConfigError, DomainError
from .harness import emit_grid, load_config, run_phase_diagram
from .model import (
    Density,
    ProblemParams,
    c_alpha,
    classify_regime,
    epsilon_max,
    threshold_eps1,
    threshold_eps2,
)
from .sampling import Histogram, Scheme, SeedSpec
from .statistics import (
    AnalyticCalibration,
    COMBINED_COMPONENTS,
    MonteCarloCalibration,
    STATISTIC_NAMES,
    TestReport,
    batch_statistic,
    calibrate_many,
    calibrate_null,
    chi_sq_test_analytic,
    combined_test,
    ghc_grid_test,
    grid_tail_table,
    max_tests_analytic,
)


def _default_threads() -> int:
    env = os.environ.get("SPARSE_UNIF_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError as err:
            raise ConfigError(f"SPARSE_UNIF_THREADS={env!r} is not an integer") from err
    return 1


def _add_seed_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
    sub.add_argument("--stream", type=int, default=0, help="stream id (default 0)")


def _add_params_args(sub: argparse.ArgumentParser, need_n: bool = True) -> None:
    sub.add_argument("--n", type=int, required=need_n, help="sample size")
    sub.add_argument("--d", type=int, required=True, help="domain size")
    group = sub.add_mutually_exclusive_group(required=False)
    group.add_argument("--s", type=int, help="sparsity")
    group.add_argument("--alpha", type=float, help="sparsity exponent (s = round(d^(1-alpha)))")
    sub.add_argument("--epsilon", type=float, default=0.0, help="L1 signal strength")


def _build_params(args, n: int | None = None) -> ProblemParams:
    n = n if n is not None else args.n
    if args.s is not None:
        return ProblemParams(n=n, d=args.d, s=args.s, epsilon=args.epsilon)
    if args.alpha is not None:
        return ProblemParams.from_alpha(n=n, d=args.d, alpha=args.alpha, epsilon=args.epsilon)
    raise ConfigError("one of --s or --alpha is required")


def _print_json(obj) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _cmd_thresholds(args) -> int:
    params = _build_params(args)
    alpha = params.sparsity_exponent
    out = {
        "n": params.n,
        "d": params.d,
        "s": params.s,
        "alpha": alpha,
        "eps1": threshold_eps1(params),
        "eps2": threshold_eps2(params) if params.d >= 2 else None,
        "c_alpha": c_alpha(alpha) if 0.5 < alpha < 1.0 else None,
        "eps_max": epsilon_max(params.d, params.s) if params.s >= 2 else None,
    }
    regime = classify_regime(params)
    out["regime"] = {
        "density": regime.density.value,
        "sample_size": regime.sample_size.value,
    }
    _print_json(out)
    return 0


def _read_histogram(path: str, args) -> Histogram:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read histogram {path}: {err}") from err
    if path.endswith(".json"):
        try:
            data = json.loads(text)
            counts = np.asarray(data["counts"], dtype=np.int64)
            n = int(data.get("n", counts.sum()))
            scheme = Scheme(data.get("scheme", "multinomial"))
        except (json.JSONDecodeError, KeyError, ValueError) as err:
            raise ConfigError(f"invalid histogram JSON {path}: {err}") from err
    else:
        try:
            counts = np.asarray(
                [int(tok) for tok in text.replace("\n", ",").split(",") if tok.strip()],
                dtype=np.int64,
            )
        except ValueError as err:
            raise ConfigError(f"invalid histogram CSV {path}: {err}") from err
        scheme = Scheme(args.scheme)
        n = args.n if args.n is not None else int(counts.sum())
    if args.n is not None:
        n = args.n
    return Histogram(counts=counts, n=n, scheme=scheme)


def _mc_report(z: Histogram, params: ProblemParams, args) -> TestReport:
    seed = SeedSpec(args.seed, args.stream)
    scheme = Scheme(args.scheme)
    mode = MonteCarloCalibration(level=args.level, b=args.b, seed=seed, scheme=scheme)
    if args.stat == "combined":
        return combined_test(z, params, mode)
    stat = batch_statistic(args.stat, params)
    cutoff = calibrate_null(stat, params, args.level, args.b, seed, scheme)
    value = float(np.asarray(stat(z.counts[None, :]))[0])
    reject = value >= cutoff if args.stat == "chisq" else value > cutoff
    return TestReport(
        statistic_name=STATISTIC_NAMES[args.stat],
        value=value,
        cutoff=cutoff,
        reject=reject,
        calibration=mode,
    )


def _cmd_test(args) -> int:
    z = _read_histogram(args.input, args)
    d = z.d
    if args.d is not None and args.d != d:
        raise DomainError(f"--d {args.d} does not match histogram length {d}")
    n = z.n
    s = args.s
    if s is None and args.alpha is not None:
        s = max(1, round(d ** (1.0 - args.alpha)))
    if s is None:
        s = min(2, d)
    params = ProblemParams(n=n, d=d, s=s, epsilon=args.epsilon)
    if args.mode == "mc":
        report = _mc_report(z, params, args)
    elif args.stat == "chisq":
        report = chi_sq_test_analytic(z, params)
    elif args.stat == "ghc":
        report = ghc_grid_test(z, params, one_sided=args.one_sided)
    elif args.stat == "combined":
        report = combined_test(z, params, AnalyticCalibration(max_test_c=args.max_c))
    elif args.stat in ("max_std", "max_count"):
        report = max_tests_analytic(z, params, c=args.max_c)
        report = report.components[args.stat]
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown statistic {args.stat!r}")
    _print_json(report.to_json_dict())
    return 0


def _cmd_calibrate(args) -> int:
    params = ProblemParams(n=args.n, d=args.d, s=min(2, args.d))
    seed = SeedSpec(args.seed, args.stream)
    scheme = Scheme(args.scheme)
    if args.stat == "combined":
        names = COMBINED_COMPONENTS
        level = args.level / 3.0
    elif args.stat == "all":
        names = ("chisq", "max_std", "max_count", "ghc")
        level = args.level
    else:
        names = (args.stat,)
        level = args.level
    table = grid_tail_table(params) if ("ghc" in names) else None
    stats = {name: batch_statistic(name, params, table=table) for name in names}
    cutoffs = calibrate_many(stats, params, level, args.b, seed, scheme)
    _print_json(
        {
            "n": args.n,
            "d": args.d,
            "level": args.level,
            "per_statistic_level": level,
            "b": args.b,
            "scheme": scheme.value,
            "cutoffs": cutoffs,
        }
    )
    return 0


def _cmd_phase_diagram(args) -> int:
    spec = load_config(args.config)
    if args.seed is not None:
        spec = dataclasses.replace(
            spec, seed=SeedSpec(args.seed, spec.seed.stream_id)
        )
    grid = run_phase_diagram(spec, threads=args.threads)
    emit_grid(grid, args.out, fmt=args.format)
    return 0


def _cmd_lower_bound(args) -> int:
    params = _build_params(args)
    seed = SeedSpec(args.seed, args.stream)
    if args.prior == "paired":
        report = lb.paired_second_moment_exact(params)
        if args.mc:
            mc = lb.paired_second_moment_mc(
                params, args.mc, seed, inner_samples=args.inner
            )
            _print_json({"exact": report.to_json_dict(), "mc": mc.to_json_dict()})
        else:
            _print_json(report.to_json_dict())
        return 0
    if args.prior == "sparse":
        report = lb.sparse_twosided_second_moment_exact(params, args.delta)
        _print_json(report.to_json_dict())
        return 0
    spec = lb.PriorSpec(
        lb.PriorKind.IMPOSSIBILITY,
        params,
        delta=args.delta,
        gamma_d=args.gamma_d,
        r_n=args.r_n,
    )
    b = args.mc if args.mc else 10000
    report = lb.second_moment_mc(spec, b, seed, inner_samples=args.inner)
    _print_json(report.to_json_dict())
    return 0


def _cmd_verify(args) -> int:
    rng = np.random.Generator(np.random.Philox(seed=np.random.SeedSequence(args.seed)))
    failures = 0
    for i in range(20):
        c_star = float(rng.uniform(0.05, 0.95))
        params = ProblemParams(n=10**4, d=10**4, s=16, epsilon=0.0, alpha=0.75)
        ok = lb.check_variational_identity(params, c_star, grid_size=2000, tol=1e-6)
        print(f"{'PASS' if ok else 'FAIL'} variational identity draw {i}: C*={c_star:.4f}")
        failures += 0 if ok else 1
    triples = ((4, 2, 2, 0.1), (8, 4, 4, 0.05), (16, 4, 8, 0.05))
    for d, s, n, eps in triples:
        params = ProblemParams(n=n, d=d, s=s, epsilon=eps)
        exact = lb.paired_second_moment_exact(params)
        mc = lb.paired_second_moment_mc(params, 100000, SeedSpec(args.seed, 1))
        gap = abs(mc.value - exact.value)
        ok = gap <= 3.0 * mc.se and exact.value <= exact.binomial_upper_bound + 1e-12
        print(
            f"{'PASS' if ok else 'FAIL'} second moment (d={d}, s={s}, n={n}, "
            f"eps={eps}): exact={exact.value:.8f} mc={mc.value:.8f} "
            f"se={mc.se:.2e} bound={exact.binomial_upper_bound:.8f}"
        )
        failures += 0 if ok else 1
    print(f"{'PASS' if failures == 0 else 'FAIL'} verify: {failures} failure(s)")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparse-unif",
        description="Sparse uniformity testing: statistics, thresholds, "
        "lower bounds, and Monte-Carlo power experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("thresholds", help="print detection thresholds and regime")
    _add_params_args(p)
    p.set_defaults(func=_cmd_thresholds)

    p = sub.add_parser("test", help="run a test on a histogram file")
    p.add_argument("--stat", required=True, choices=list(STATISTIC_NAMES))
    p.add_argument("--input", required=True, help="histogram CSV (one row) or JSON")
    p.add_argument("--n", type=int, default=None, help="nominal sample size override")
    p.add_argument("--d", type=int, default=None, help="expected domain size (checked)")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--s", type=int, default=None)
    group.add_argument("--alpha", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--mode", choices=("analytic", "mc"), default="analytic")
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--b", type=int, default=999, help="calibration replications")
    p.add_argument("--scheme", choices=("multinomial", "poissonized"), default="multinomial")
    p.add_argument("--max-c", dest="max_c", type=float, default=1.2)
    p.add_argument("--one-sided", dest="one_sided", action="store_true")
    _add_seed_args(p)
    p.set_defaults(func=_cmd_test)

    p = sub.add_parser("calibrate", help="emit Monte-Carlo null cutoffs")
    p.add_argument("--stat", default="all", choices=list(STATISTIC_NAMES) + ["all"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--b", type=int, default=999)
    p.add_argument("--scheme", choices=("multinomial", "poissonized"), default="poissonized")
    _add_seed_args(p)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("phase-diagram", help="run a power grid from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="override config root seed")
    p.set_defaults(func=_cmd_phase_diagram)

    p = sub.add_parser("lower-bound", help="second moment and risk bound for a prior")
    p.add_argument("--prior", required=True, choices=("paired", "sparse", "impossibility"))
    _add_params_args(p)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--gamma-d", dest="gamma_d", type=float, default=None)
    p.add_argument("--r-n", dest="r_n", type=float, default=None)
    p.add_argument("--mc", type=int, default=0, help="Monte-Carlo replications")
    p.add_argument("--inner", type=int, default=None, help="inner prior draws when atoms explode")
    _add_seed_args(p)
    p.set_defaults(func=_cmd_lower_bound)

    p = sub.add_parser("verify", help="variational and second-moment cross-checks")
    _add_seed_args(p)
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is None and hasattr(args, "threads"):
        args.threads = _default_threads()
    try:
        return args.func(args)
    except DomainError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"io error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
