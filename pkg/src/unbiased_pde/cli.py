"""Command-line interface: ``unbiased-pde <command> [options]``.

Exit status is 0 on success, 2 for configuration errors and 3 when a
non-finite sample aborts a run.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, EmptyInput, NumericFailure, ParameterError
from .params import derive_parameters, override_parameters
from .problems import load_problem
from .runner import (compare, convergence, estimate, histogram, read_samples_csv,
                     resolve_params, write_histogram_csv, write_per_copy_csv)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _levels(text: str) -> list[int]:
    """``"2-7"`` or ``"2,3,5"``."""
    try:
        if "-" in text:
            lo, hi = (int(v) for v in text.split("-"))
            return list(range(lo, hi + 1))
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level list {text!r}")


def _add_params(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scheme parameters")
    g.add_argument("--epsilon", type=float, help="derive gamma, theta from this epsilon")
    g.add_argument("--gamma", type=float, help="override gamma (needs --theta)")
    g.add_argument("--theta", type=float, help="override theta (needs --gamma)")
    g.add_argument("--n0", type=int, help="inner base level")
    g.add_argument("--n1", type=int, help="outer base level")


def _add_run(p: argparse.ArgumentParser, copies: int = 10_000) -> None:
    p.add_argument("--problem", default="ou-example1", help="builtin name or JSON file")
    p.add_argument("--copies", type=int, default=copies)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")
    _add_params(p)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="unbiased-pde",
                                 description="Unbiased Monte Carlo for PDEs with random drift.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="show derived parameters and admissibility checks")
    p.add_argument("--q", type=float, help="field decay exponent (default: from --problem or 5)")
    p.add_argument("--problem", help="take q and defaults from this problem")
    p.add_argument("--out", type=Path)
    _add_params(p)

    p = sub.add_parser("estimate", help="i.i.d. copies of W (or Z) with a 95%% CI")
    _add_run(p)
    p.add_argument("--target", choices=["W", "Z"], default="W")
    p.add_argument("--biased", action="store_true", help="drop the randomized corrections")
    p.add_argument("--per-copy-csv", type=Path, help="also write every copy's value and cost")

    p = sub.add_parser("convergence", help="second moments of level differences")
    p.add_argument("--problem", default="ou-example1")
    p.add_argument("--levels", type=_levels, default=list(range(2, 8)))
    p.add_argument("--nested-levels", type=_levels)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--nested-samples", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", type=Path)
    _add_params(p)

    p = sub.add_parser("compare", help="unbiased W against the uncorrected baseline")
    _add_run(p)

    p = sub.add_parser("histogram", help="equal-width bin counts as CSV")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--samples", type=Path, help="per-copy CSV written by estimate")
    src.add_argument("--problem", help="run estimate inline on this problem")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--copies", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--target", choices=["W", "Z"], default="W")
    p.add_argument("--out", type=Path, help="CSV path (default stdout)")
    _add_params(p)
    return ap


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text + "\n")
    else:
        out.write_text(text + "\n")


def _params_for(args, problem):
    return resolve_params(problem, args.epsilon, args.gamma, args.theta, args.n0, args.n1)


def _cmd_params(args) -> None:
    if args.problem:
        prm = _params_for(args, load_problem(args.problem))
    else:
        q = args.q if args.q is not None else 5.0
        n0 = args.n0 if args.n0 is not None else 5
        n1 = args.n1 if args.n1 is not None else 5
        if (args.gamma is None) != (args.theta is None):
            raise ConfigError("--gamma and --theta must be given together")
        if args.gamma is not None:
            prm = override_parameters(args.gamma, args.theta, q, n0, n1)
        else:
            prm = derive_parameters(args.epsilon, q, n0, n1)
    _emit(json.dumps(prm.to_dict(), indent=2), args.out)


def _cmd_estimate(args) -> None:
    problem = load_problem(args.problem)
    run = estimate(problem, _params_for(args, problem), args.copies, args.seed, args.threads,
                   biased=args.biased, target=args.target)
    if args.per_copy_csv:
        write_per_copy_csv(run, args.per_copy_csv)
    _emit(run.report.to_json(), args.out)


def _cmd_convergence(args) -> None:
    problem = load_problem(args.problem)
    rep = convergence(problem, _params_for(args, problem), args.levels, args.samples, args.seed,
                      args.nested_levels, args.nested_samples, args.threads)
    _emit(rep.to_json(), args.out)


def _cmd_compare(args) -> None:
    problem = load_problem(args.problem)
    rep = compare(problem, _params_for(args, problem), args.copies, args.seed, args.threads)
    _emit(rep.to_json(), args.out)


def _cmd_histogram(args) -> None:
    if args.samples is not None:
        values = read_samples_csv(args.samples)
    else:
        problem = load_problem(args.problem or "ou-example1")
        values = estimate(problem, _params_for(args, problem), args.copies, args.seed,
                          args.threads, target=args.target).values
    edges, counts = histogram(values, args.bins)
    write_histogram_csv(edges, counts, args.out if args.out is not None else sys.stdout)


COMMANDS = {"params": _cmd_params, "estimate": _cmd_estimate, "convergence": _cmd_convergence,
            "compare": _cmd_compare, "histogram": _cmd_histogram}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ParameterError, EmptyInput, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
