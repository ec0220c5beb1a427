"""``gem`` command line: fit, analyze, simulate, demo pca-vs-pls.

Exit codes: 0 success, 1 data or model error, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings

import numpy as np

from .dataset import DataError
from .design import DesignError
from .reports import RunConfig, UsageError, cmd_analyze, cmd_demo_pca_vs_pls, cmd_fit, cmd_simulate

log = logging.getLogger("gem")


def _shave_fraction(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("shave fraction must be in (0, 1)")
    return v


def _common(p: argparse.ArgumentParser) -> None:
    # defaults are None so that only flags given on the command line override --config
    p.add_argument("--config", help="JSON run configuration; flags override its values")
    p.add_argument("--data", help="input CSV (header row, comma separated)")
    p.add_argument("--responses", help="response columns: name prefix or first:last range")
    p.add_argument("--id-column", dest="id_column", help="sample id column (default: row number)")
    p.add_argument("--categorical", action="append", help="force a column to be a factor (repeatable)")
    p.add_argument("--continuous", action="append", help="force a column to be continuous (repeatable)")
    p.add_argument("--model", help='model formula, e.g. "proteins ~ ms + group + sex + age"')
    p.add_argument("--out", help="output directory (default gem_out)")
    p.add_argument("--seed", type=int, help="seed for k-fold splits and the demo")
    p.add_argument("--log", action="store_true", default=None, help="log-transform responses")
    p.add_argument("--add-intercept", dest="add_intercept", action="store_true", default=None,
                   help="add the intercept row back to exported/analysed ER matrices")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gem", description="General effect modelling")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="GLM decomposition into effect and ER matrices")
    _common(p_fit)
    p_fit.add_argument("--embed-matrices", dest="embed_matrices", action="store_true", default=None)
    p_fit.add_argument("--export-er", dest="export_er", action="store_true", default=None,
                       help="write one ER matrix CSV per term")

    p_an = sub.add_parser("analyze", help="PCA, PLS or elastic net on an ER matrix")
    _common(p_an)
    p_an.add_argument("--fit", help="gemfit.json from a previous 'gem fit' (instead of --model)")
    p_an.add_argument("--effect", help="term to analyse; join several with ',' for a combined ER matrix")
    p_an.add_argument("--analysis", choices=["pca", "pls", "enet"])
    p_an.add_argument("--ncomp", type=int, help="components to fit (pca default 2, pls default 10)")
    p_an.add_argument("--use-ncomp", dest="use_ncomp", type=int,
                      help="components used for significance and shaving (default: one-SE rule)")
    p_an.add_argument("--cv", help="loo or kfold:K")
    p_an.add_argument("--alpha", type=float, help="elastic-net L1 share in [0, 1]")
    p_an.add_argument("--family", choices=["gaussian", "binomial"])
    p_an.add_argument("--nlambda", type=int)
    p_an.add_argument("--shave", nargs="?", const=0.2, type=_shave_fraction,
                      help="shave variables, dropping this fraction per step (default 0.2)")
    p_an.add_argument("--jackknife", action="store_true", default=None)
    p_an.add_argument("--scale", action="store_true", default=None, help="autoscale ER columns")

    p_sim = sub.add_parser("simulate", help="write a synthetic designed dataset")
    p_sim.add_argument("--spec", required=True, help="simulation spec JSON")
    p_sim.add_argument("--out", required=True, help="output CSV; ground truth goes to <out>.truth.json")

    p_demo = sub.add_parser("demo", help="built-in demonstrations")
    demo_sub = p_demo.add_subparsers(dest="demo", required=True)
    p_pvp = demo_sub.add_parser("pca-vs-pls", help="first PCA and PLS components on a 2-d toy")
    p_pvp.add_argument("--out", default="gem_out")
    p_pvp.add_argument("--seed", type=int, default=2)
    p_pvp.add_argument("--isotropic", action="store_true")
    return parser


def config_from_args(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if getattr(args, "config", None) else RunConfig()
    values = {k: v for k, v in vars(args).items() if k not in ("config", "command", "verbose", "demo", "isotropic")}
    return cfg.updated(values)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "simulate":
            spec = cmd_simulate(args.spec, args.out)
            print(f"wrote {args.out} (seed {spec.seed})")
            return 0
        cfg = config_from_args(args)
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore", RuntimeWarning)
            if args.command == "fit":
                res = cmd_fit(cfg)
                for term, share in res["shares"].items():
                    print(f"{term}\t{share:.4f}")
                if not res["balanced"]:
                    print("note: unbalanced design; effect shares need not add up to 1")
            elif args.command == "analyze":
                res = cmd_analyze(cfg)
                summary = res.get("summary")
                if summary:
                    for k in sorted(summary):
                        print(f"{k}\t{summary[k]}")
            elif args.command == "demo":
                res = cmd_demo_pca_vs_pls(cfg, isotropic=args.isotropic)
                for method, r in res.items():
                    print(f"{method}\texplvar_X={r['explvar_X']:.4f}\texplvar_y={r['explvar_y']:.4f}")
    except UsageError as exc:
        print(f"gem: usage error: {exc}", file=sys.stderr)
        return 2
    except (DataError, DesignError, ValueError, KeyError, np.linalg.LinAlgError, OSError) as exc:
        print(f"gem: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
