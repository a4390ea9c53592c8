"""Command-line entry point: ``ggc {exact,estimate,fig1,fig2,threshold}``.

Exit codes: 0 success, 1 usage/configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .causality import dual_regression_all_pairs, gc_all_pairs_ss, single_regression_gc
from .errors import GGCError, NumericalError, UsageError
from .io import (
    RunManifest,
    fmt,
    load_config,
    load_timeseries_csv,
    write_spectral_csv,
    write_sweep_csv,
)
from .montecarlo import (
    DEFAULT_T_SWEEP,
    default_workers,
    null_threshold,
    run_bias_variance_experiment,
    run_spectral_experiment,
)
from .statespace import var_to_ss

log = logging.getLogger("ggc")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_run_flags(p, out_default):
    p.add_argument("--model", required=True, help="JSON model config (optionally with an experiment block)")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--realisations", type=int, help="number of realisations (overrides config)")
    p.add_argument("--null-realisations", type=int, help="null-model realisations per pair")
    p.add_argument("--T", type=int, nargs="+", help="series length(s)")
    p.add_argument("--out", default=out_default, help="output CSV path")
    p.add_argument("--workers", type=int, help="parallel worker processes (default $GGC_WORKERS or 1)")


def build_parser():
    parser = _Parser(prog="ggc", description="Granger-Geweke causality via single-regression state-space models.")
    parser.add_argument("--version", action="version", version=f"ggc {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("exact", help="exact all-pairs time and spectral GGC of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--n-freq", type=int, default=256)
    p.add_argument("--out", help="optional CSV of exact spectral GGC (source,target,freq,exact)")

    p = sub.add_parser("estimate", help="single- and dual-regression GGC from a data file")
    p.add_argument("--data", required=True, help="headerless CSV, rows = time steps, columns = channels")
    p.add_argument("--order", "-p", type=int, required=True, help="VAR model order")
    p.add_argument("--reduced-order", type=int, help="dual-regression reduced order (default: --order)")

    p = sub.add_parser("fig1", help="spectral GGC Monte Carlo experiment -> CSV")
    _add_run_flags(p, "fig1.csv")
    p = sub.add_parser("fig2", help="bias / MAD sweep over series length -> CSV")
    _add_run_flags(p, "fig2.csv")
    p = sub.add_parser("threshold", help="null-model significance thresholds only")
    _add_run_flags(p, None)
    return parser


def _overrides(args, kind):
    ov = {"master_seed": args.seed, "n_realisations": args.realisations, "n_null": args.null_realisations}
    if args.T:
        ov["T"] = args.T[0] if len(args.T) == 1 and kind != "fig2" else tuple(args.T)
    return ov


def _workers(args):
    return args.workers if args.workers is not None else default_workers()


def _cmd_exact(args):
    model, _ = load_config(args.model)
    tres, sres = gc_all_pairs_ss(var_to_ss(model), n_freq=args.n_freq)
    print("source,target,F")
    for j in range(model.n):
        for i in range(model.n):
            if i != j:
                print(f"{j},{i},{fmt(tres.F[i, j])}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("source,target,freq,exact\n")
            for j in range(model.n):
                for i in range(model.n):
                    if i != j:
                        for w, v in zip(sres.grid, sres.f[i, j]):
                            fh.write(f"{j},{i},{fmt(w)},{fmt(v)}\n")
    return 0


def _cmd_estimate(args):
    ts = load_timeseries_csv(args.data)
    single = single_regression_gc(ts, args.order, n_freq=None)
    dual = dual_regression_all_pairs(ts, args.order, args.reduced_order)
    print("source,target,single,dual")
    for j in range(ts.n):
        for i in range(ts.n):
            if i != j:
                print(f"{j},{i},{fmt(single.F[i, j])},{fmt(dual.F[i, j])}")
    return 0


def _cmd_fig1(args):
    _, cfg = load_config(args.model, **_overrides(args, "fig1"))
    if len(cfg.T_list) != 1:
        raise UsageError("fig1 takes a single series length T")
    t0 = time.perf_counter()
    summary = run_spectral_experiment(cfg, workers=_workers(args))
    out = write_spectral_csv(summary, args.out)
    _manifest(cfg, summary, out, t0)
    return 0


def _cmd_fig2(args):
    ov = _overrides(args, "fig2")
    _, cfg = load_config(args.model, **ov)
    if len(cfg.T_list) < 2:
        if args.T:
            raise UsageError("fig2 needs at least two series lengths")
        _, cfg = load_config(args.model, **{**ov, "T": DEFAULT_T_SWEEP})
    if "dual" not in cfg.estimators:
        _, cfg = load_config(args.model, **{**ov, "T": cfg.T, "estimators": ("single", "dual")})
    t0 = time.perf_counter()
    summary = run_bias_variance_experiment(cfg, workers=_workers(args))
    out = write_sweep_csv(summary, args.out)
    _manifest(cfg, summary, out, t0)
    return 0


def _cmd_threshold(args):
    model, cfg = load_config(args.model, **_overrides(args, "threshold"))
    lines = ["source,target,threshold"]
    for j in range(model.n):
        for i in range(model.n):
            if i != j:
                thr = null_threshold(model, j, i, cfg, workers=_workers(args))
                lines.append(f"{j},{i},{fmt(thr)}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _manifest(cfg, summary, out, t0):
    man = RunManifest(config={"model": cfg.model.to_dict(), "experiment": cfg.echo()},
                      duration_s=round(time.perf_counter() - t0, 3),
                      failures=summary.failures, outputs=[out])
    man.write(str(out) + ".manifest.json")
    log.info("wrote %s", out)


COMMANDS = {
    "exact": _cmd_exact,
    "estimate": _cmd_estimate,
    "fig1": _cmd_fig1,
    "fig2": _cmd_fig2,
    "threshold": _cmd_threshold,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"ggc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (UsageError, GGCError) as exc:
        print(f"ggc: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"ggc: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
