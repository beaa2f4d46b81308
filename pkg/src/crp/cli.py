"""Command line interface.

Subcommands: ``fit``, ``eval``, ``bench``, ``trace`` and ``check-lemmas``.

Exit codes: 0 success, 1 lemma violation, 2 configuration error, 3 data
error, 4 numerical failure.
"""
import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    NumericalError,
    TrialError,
)

EXIT_OK = 0
EXIT_LEMMA = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

logger = logging.getLogger("crp")


def _exit_code(exc):
    if isinstance(exc, TrialError):
        exc = exc.cause
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, NumericalError):
        return EXIT_NUMERIC
    if isinstance(exc, (DataError, DimensionError, OSError, ValueError)):
        return EXIT_DATA
    return None


def _config(args):
    from .experiment import load_config

    if args.config is None:
        raise ConfigError("--config is required for this command")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, split=replace(cfg.split, seed=args.seed))
    if getattr(args, "jobs", None) is not None:
        if args.jobs < 1:
            raise ConfigError("--jobs must be positive")
        cfg = replace(cfg, jobs=args.jobs)
    return cfg


def cmd_eval(args):
    from .experiment import run_experiment

    cfg = _config(args)
    summary = run_experiment(cfg, args.out)
    if "best" in summary:
        b = summary["best"]
        lam = "" if b["lambda"] is None else f" at lambda={b['lambda']:g}"
        print(f"{cfg.method}: {100 * b['mean']:.1f} +- {100 * b['std']:.1f}%{lam}")
    else:
        sweep = summary["sweep"]
        for point in sweep["points"]:
            b = point["best"]
            print(f"{sweep['param']}={point['value']}: {100 * b['mean']:.1f} +- "
                  f"{100 * b['std']:.1f}% (lambda={b['lambda']:g})")
    return EXIT_OK


def cmd_fit(args):
    from .experiment import fit_model

    cfg = _config(args)
    model = fit_model(cfg, args.out, args.lam)
    if model is None:
        print("method 'raw' has no model to fit")
    else:
        print(f"wrote {Path(args.out) / 'model.json'}")
    return EXIT_OK


def cmd_trace(args):
    from .experiment import trace_convergence

    cfg = _config(args)
    trace, meta = trace_convergence(cfg, args.out, args.seed)
    print(f"pair {meta['pair_index']} of {meta['h']}: {len(trace)} iterations, "
          f"final objective {trace[-1]:.6g}")
    return EXIT_OK


def cmd_bench(args):
    from .experiment import format_bench, run_bench

    kwargs = {}
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh).get("bench", {})
        if "sizes" in raw:
            kwargs["sizes"] = [tuple(s) for s in raw["sizes"]]
        for key in ("k", "h", "repeat"):
            if key in raw:
                kwargs[key] = int(raw[key])
    if args.seed is not None:
        kwargs["seed"] = args.seed
    rows = run_bench(args.out, **kwargs)
    print(format_bench(rows))
    return EXIT_OK


def cmd_check_lemmas(args):
    from .lemmas import check_lemmas, format_report

    raw = {}
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh).get("lemmas", {})
    trials = args.trials if args.trials is not None else int(raw.get("trials", 200))
    seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
    results = check_lemmas(trials, seed, tol=args.tol)
    print(format_report(results, args.tol))
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        payload = {"trials": trials, "seed": seed, "tol": args.tol,
                   "results": [r.__dict__ for r in results]}
        (out / "lemmas.json").write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"violated: {', '.join(failed)}", file=sys.stderr)
        return EXIT_LEMMA
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="crp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True, out_required=True):
        p.add_argument("--config", required=config_required, help="experiment config (JSON)")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p = sub.add_parser("eval", help="run the split / fit / 1-NN protocol over the lambda grid")
    common(p)
    p.add_argument("--jobs", type=int, default=None, help="worker processes")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fit", help="fit the configured method on the whole dataset")
    common(p)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="regularizer (default: first grid value)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("trace", help="objective-vs-iteration trace of one seeded random pair")
    common(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("bench", help="compare compiled and numpy kernels")
    common(p, config_required=False, out_required=False)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("check-lemmas", help="verify the vec/Kronecker/trace identities")
    common(p, config_required=False, out_required=False)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_check_lemmas)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        code = _exit_code(exc)
        if code is None:
            raise
        print(f"crp {args.command}: error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
