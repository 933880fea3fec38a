"""Command-line entry point.

Subcommands: ``cud gen``, ``cud check``, ``sample``, ``experiment``, ``report``.
Exit status is 0 on success, 1 on configuration errors and 2 on runtime
errors; errors go to stderr as ``error[<code>]: <message>``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import runner
from .discrepancy import MAX_POINTS, nonoverlapping_tuples, overlapping_tuples, star_discrepancy
from .driving import build_lfsr_cud, make_tuple_schedule, pseudo_random_stream, van_der_corput
from .errors import ConfigError, MPQMCError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mpqmc", description="Multiple-proposal MCMC with CUD driving sequences.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    cud = sub.add_parser("cud", help="generate or check driving sequences")
    cud_sub = cud.add_subparsers(dest="cud_command", required=True, parser_class=_Parser)
    gen = cud_sub.add_parser("gen", help="write a driving sequence as CSV")
    gen.add_argument("--kind", choices=("lfsr", "vdc", "psr"), default="lfsr")
    gen.add_argument("--m", type=int, default=10, help="register size (lfsr)")
    gen.add_argument("--d", type=int, default=None,
                     help="lay the sequence out as the width-d tuple schedule (lfsr)")
    gen.add_argument("--n", type=int, default=None, help="number of values (vdc, psr)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--variant", type=int, default=0, help="feedback polynomial index (lfsr)")
    gen.add_argument("--out", required=True)

    chk = cud_sub.add_parser("check", help="exact star discrepancy of d-tuples")
    chk.add_argument("--in", dest="path", required=True)
    chk.add_argument("--d", type=int, default=2)
    chk.add_argument("--mode", choices=("overlap", "nonoverlap"), default="nonoverlap")

    smp = sub.add_parser("sample", help="run one sampler from a TOML config")
    smp.add_argument("--config", required=True)
    smp.add_argument("--out", required=True)
    smp.add_argument("--workers", type=int, default=None)

    exp = sub.add_parser("experiment", help="run a replicate grid from a TOML spec")
    exp.add_argument("--spec", required=True)
    exp.add_argument("--out", default=None)
    exp.add_argument("--workers", type=int, default=None)
    exp.add_argument("--checkpoints", type=int, default=1,
                     help="number of log-spaced sample sizes per run")
    exp.add_argument("--per-run", action="store_true", help="also write every run's outputs")

    rep = sub.add_parser("report", help="print the summary tables of an experiment")
    rep.add_argument("--in", dest="path", required=True)
    return p


def _cud_gen(args) -> None:
    if args.kind == "lfsr":
        stream = build_lfsr_cud(args.m, args.seed, args.variant)
        if args.d is not None:
            values = make_tuple_schedule(stream, args.d).tuples()
        else:
            values = stream.values[:, None]
    else:
        if args.n is None or args.n < 1:
            raise ConfigError(f"--n is required for --kind {args.kind}")
        stream = van_der_corput() if args.kind == "vdc" else pseudo_random_stream(args.seed)
        values = stream.take(args.n)[:, None]
        if args.d is not None:
            values = values[: (args.n // args.d) * args.d].reshape(-1, args.d)
    header = ",".join(f"u_{j}" for j in range(values.shape[1]))
    np.savetxt(args.out, values, delimiter=",", header=header, comments="", fmt="%.17g")


def _cud_check(args) -> None:
    try:
        arr = np.loadtxt(args.path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.path}: {exc}") from exc
    seq = arr.ravel()
    if args.d not in MAX_POINTS:
        raise ConfigError(f"--d must be one of {sorted(MAX_POINTS)}")
    make = overlapping_tuples if args.mode == "overlap" else nonoverlapping_tuples
    ps = make(seq, args.d)
    print(f"n={ps.n} d={args.d} mode={args.mode} star_discrepancy={star_discrepancy(ps):.17g}")


def _sample(args) -> None:
    cfg = runner.load_toml(args.config)
    workers = runner.default_workers(args.workers)
    out = runner.run_config(cfg, workers=workers)
    outdir = runner.output_root(args.out)
    runner.write_run(out, outdir)
    print(f"wrote {outdir}")


def _experiment(args) -> None:
    raw = runner.load_toml(args.spec)
    body = dict(raw.get("experiment", raw))
    if args.per_run:
        body["per_run"] = True
    spec = runner.ExperimentSpec.from_dict(body)
    out = args.out or spec.out or f"results/{spec.name}"
    outdir = runner.output_root(out)
    result = runner.run_experiment(spec, runner.default_workers(args.workers), outdir,
                                   args.checkpoints)
    runner.report(outdir)
    if result.meta["failures"]:
        print(f"{len(result.meta['failures'])} cell(s) failed; see {outdir / 'meta.json'}",
              file=sys.stderr)


def _report(args) -> None:
    path = Path(args.path)
    if not path.exists():
        raise ConfigError(f"no such file or directory: {path}")
    runner.report(path)


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
        if args.command == "cud":
            (_cud_gen if args.cud_command == "gen" else _cud_check)(args)
        elif args.command == "sample":
            _sample(args)
        elif args.command == "experiment":
            _experiment(args)
        else:
            _report(args)
    except MPQMCError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 1 if isinstance(exc, ConfigError) else 2
    except (ValueError, KeyError, TypeError) as exc:
        # malformed config values surface here from the builders
        print(f"error[config]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
