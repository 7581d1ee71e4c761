"""Command-line entry point: ``cssdpp gen|select|bench|bounds|risk``."""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bench
from .errors import CssDppError, InputError
from .linalg import k_leverage_scores
from .matrixgen import TOY_SPECTRA, dirichlet_leverage_profile, matrix_generator, toy_spectrum
from .rng import RngState
from .samplers import SELECTOR_NAMES


def _floats(text: str) -> np.ndarray:
    return np.array([float(x) for x in text.split(",") if x.strip()])


def _add_dataset(p):
    p.add_argument("--dataset", help="CSV file, rows are observations")
    p.add_argument("--toy", help="toy spec NAME[:p=P][:k=K][:N=N]; names: " + ", ".join(sorted(TOY_SPECTRA)))
    p.add_argument("--header", action="store_true", help="skip one header line in the CSV")
    p.add_argument("--standardize", action="store_true", help="center and scale columns")


def _add_common(p):
    p.add_argument("--k", type=int, required=True, help="number of columns to select")
    p.add_argument("--seed", type=int, default=0, help="master seed (also seeds toy generation)")
    p.add_argument("--theta", type=float, default=2.0, help="rejection parameter, must exceed 1")
    p.add_argument("--c", type=int, default=None, help="double-phase preselection size (default 10k)")


def _algos(text: str) -> list:
    names = [a.strip() for a in text.split(",") if a.strip()]
    for a in names:
        if a not in SELECTOR_NAMES and a != "ols":
            raise InputError(f"unknown algorithm {a!r}; choose from {', '.join(SELECTOR_NAMES)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cssdpp", description="Column subset selection experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a matrix with prescribed spectrum and leverage scores")
    g.add_argument("--toy", help="named spectrum: " + ", ".join(sorted(TOY_SPECTRA)))
    g.add_argument("--sigma", help="comma-separated singular values (instead of --toy)")
    g.add_argument("--ell", help="comma-separated leverage scores (default: random Dirichlet profile)")
    g.add_argument("--p", type=int, help="number of nonzero leverage scores for the random profile")
    g.add_argument("--k", type=int)
    g.add_argument("--N", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output prefix; writes PREFIX.csv and PREFIX.json")

    s = sub.add_parser("select", help="run one selector once")
    _add_dataset(s)
    _add_common(s)
    s.add_argument("--algo", default="dpp", choices=SELECTOR_NAMES)

    b = sub.add_parser("bench", help="repeated selections and boosting")
    _add_dataset(b)
    _add_common(b)
    b.add_argument("--algo", default="dpp,vs,leverage,pivoted-qr,double-phase",
                   help="comma-separated selectors")
    b.add_argument("--reps", type=int, default=50, help="selections per algorithm")
    b.add_argument("--boost-rounds", type=int, default=0, help="rounds of best-of-batch boosting")
    b.add_argument("--boost-batch", type=int, default=50, help="draws per boosting round")
    b.add_argument("--out", default="-", help="output file, '-' for stdout")
    b.add_argument("--format", choices=("json", "csv"), default="json")
    b.add_argument("--timings", action="store_true", help="include wall times (breaks bit-identical output)")

    bo = sub.add_parser("bounds", help="bound table with exact expectations where enumerable")
    _add_dataset(bo)
    _add_common(bo)
    bo.add_argument("--out", default="-", help="output file, '-' for stdout")

    r = sub.add_parser("risk", help="Monte Carlo excess risk of sparse OLS")
    _add_dataset(r)
    _add_common(r)
    r.add_argument("--algo", default="ols,dpp,vs,rejection-dpp",
                   help="comma-separated selectors; 'ols' uses all columns")
    r.add_argument("--reps", type=int, default=1000, help="Monte Carlo trials")
    r.add_argument("--noise", type=float, default=1.0, help="noise variance")
    r.add_argument("--out", default="-", help="output file, '-' for stdout")
    return parser


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def _dump(obj, path):
    fh = _open_out(path)
    try:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_gen(args) -> int:
    state = RngState(args.seed)
    gen = state.generator()
    if (args.toy is None) == (args.sigma is None):
        raise InputError("give exactly one of --toy or --sigma")
    if args.toy is not None:
        sigma, k_default = toy_spectrum(args.toy)
    else:
        sigma, k_default = _floats(args.sigma), None
    d = sigma.size
    if args.ell is not None:
        ell = _floats(args.ell)
        k = int(round(ell.sum()))
    else:
        k = args.k or k_default
        if k is None:
            raise InputError("--k is required for this spectrum")
        p = args.p if args.p is not None else d
        ell = dirichlet_leverage_profile(k, p, d, gen).scores
    X = matrix_generator(ell, sigma, args.N, gen)
    np.savetxt(args.out + ".csv", X.values, delimiter=",", fmt="%.17g")
    profile = k_leverage_scores(X.svd, k)
    side = {
        "seed": args.seed,
        "N": args.N,
        "d": d,
        "k": k,
        "spectrum": sigma.tolist(),
        "leverage": profile.scores.tolist(),
        "target_leverage": np.asarray(ell).tolist(),
        "p": profile.sparsity_p,
        "beta": profile.beta,
    }
    with open(args.out + ".json", "w") as fh:
        json.dump(side, fh, indent=2)
        fh.write("\n")
    print(f"wrote {args.out}.csv ({args.N}x{d}) and {args.out}.json")
    return 0


def _load(args):
    return bench.load_dataset(args.dataset, args.toy, args.seed, args.header, args.standardize)


def cmd_select(args) -> int:
    X, name = _load(args)
    rec = bench.run_selection(X, args.algo, args.k, args.seed, args.theta, args.c, name)
    out = {
        "dataset": name,
        "algorithm": args.algo,
        "k": args.k,
        "seed": args.seed,
        "selection": rec.selections[0],
        "frobenius": rec.errors[0],
        "spectral": rec.spectral_errors[0],
        "pca_frobenius": rec.pca_frobenius,
        "pca_spectral": rec.pca_spectral,
    }
    print(json.dumps(out, indent=2))
    return 0


def cmd_bench(args) -> int:
    config = bench.ExperimentConfig(
        k=args.k, algorithms=_algos(args.algo), dataset=args.dataset, toy=args.toy,
        repetitions=args.reps, boost_rounds=args.boost_rounds, boost_batch=args.boost_batch,
        seed=args.seed, theta=args.theta, c=args.c, header=args.header, standardize=args.standardize,
    )
    records = bench.run_bench(config)
    fh = _open_out(args.out)
    try:
        bench.write_records(records, fh, args.format, timings=args.timings)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_bounds(args) -> int:
    X, name = _load(args)
    rows = bench.bounds_table(X, args.k, args.theta)
    _dump({"dataset": name, "k": args.k, "theta": args.theta, "rows": rows}, args.out)
    flagged = [r for r in rows if r["violation"]]
    if flagged:
        print(f"warning: {len(flagged)} bound violation(s)", file=sys.stderr)
        return 3
    return 0


def cmd_risk(args) -> int:
    X, name = _load(args)
    rows = bench.run_risk(X, args.k, _algos(args.algo), args.reps, args.seed, args.noise,
                          args.theta, args.c)
    _dump({"dataset": name, "rows": rows}, args.out)
    return 0


COMMANDS = {"gen": cmd_gen, "select": cmd_select, "bench": cmd_bench, "bounds": cmd_bounds, "risk": cmd_risk}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CssDppError as exc:
        print(f"cssdpp: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cssdpp: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
