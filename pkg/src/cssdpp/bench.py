"""Experiment harness behind the command-line interface.

Each repetition of each algorithm draws from its own substream
``RngState(seed, (algorithm_index, repetition))``, so results are identical
for any number of worker threads.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bounds as bnd
from .errors import CapacityError, InputError
from .linalg import (
    FROBENIUS,
    SPECTRAL,
    DataMatrix,
    best_rank_k_error,
    effective_sparsity,
    frobenius_projection_residual,
    k_leverage_scores,
)
from .matrixgen import TOY_SPECTRA, toy_matrix
from .oracle import (
    exact_avoiding_probability,
    exact_conditional_expected_error,
    exact_expected_error,
)
from .regression import RegressionProblem, excess_risk_mc
from .rng import RngState
from .samplers import SELECTOR_NAMES, SelectorKind, select

PCA_FLOOR_TOL = 1e-9


def thread_count() -> int:
    """Worker threads, capped by the CSSDPP_THREADS environment variable."""
    raw = os.environ.get("CSSDPP_THREADS")
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise InputError(f"CSSDPP_THREADS must be an integer, got {raw!r}") from None


# ---------------------------------------------------------------- datasets


def read_csv_matrix(path, header: bool = False, standardize: bool = False) -> DataMatrix:
    """Rows are observations; values parsed as float64."""
    X = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, dtype=np.float64, ndmin=2)
    if standardize:
        X = X - X.mean(axis=0)
        sd = X.std(axis=0)
        sd[sd == 0] = 1.0
        X = X / sd
    return DataMatrix(X)


def parse_toy_spec(spec: str) -> dict:
    """Parse ``name[:p=P][:k=K][:N=N]`` into keyword arguments."""
    parts = spec.split(":")
    name = parts[0]
    if name not in TOY_SPECTRA:
        raise InputError(f"unknown toy spectrum {name!r}; choose from {sorted(TOY_SPECTRA)}")
    out = {"name": name}
    for part in parts[1:]:
        key, _, val = part.partition("=")
        if key not in ("p", "k", "N") or not val:
            raise InputError(f"bad toy option {part!r}; expected p=, k= or N=")
        out[key] = int(val)
    return out


def load_dataset(dataset: str | None = None, toy: str | None = None, seed: int = 0,
                 header: bool = False, standardize: bool = False):
    """Return ``(DataMatrix, dataset_id)`` from a CSV path or a toy spec."""
    if (dataset is None) == (toy is None):
        raise InputError("give exactly one of a CSV dataset or a toy spec")
    if dataset is not None:
        return read_csv_matrix(dataset, header, standardize), os.path.basename(dataset)
    opts = parse_toy_spec(toy)
    sigma, k_default = TOY_SPECTRA[opts["name"]]
    k = opts.get("k", k_default)
    if k is None:
        raise InputError("the identity toy needs k=, e.g. identity:k=3:p=10")
    p = opts.get("p", sigma.size)
    X, _ = toy_matrix(opts["name"], p, RngState(seed, (2**31,)), k=k, N=opts.get("N", 100))
    return X, toy


# ---------------------------------------------------------------- records


@dataclass
class ExperimentConfig:
    k: int
    algorithms: list
    dataset: str | None = None
    toy: str | None = None
    repetitions: int = 50
    boost_rounds: int = 0
    boost_batch: int = 50
    seed: int = 0
    theta: float = 2.0
    c: int | None = None
    header: bool = False
    standardize: bool = False

    def __post_init__(self):
        if self.repetitions < 1:
            raise InputError("repetitions must be >= 1")
        for a in self.algorithms:
            if a not in SELECTOR_NAMES:
                raise InputError(f"unknown algorithm {a!r}; choose from {SELECTOR_NAMES}")


@dataclass
class ResultRecord:
    dataset: str
    algorithm: str
    k: int
    seed: int
    errors: list = field(default_factory=list)
    spectral_errors: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    boosted: list = field(default_factory=list)
    selections: list = field(default_factory=list)
    pca_frobenius: float = 0.0
    pca_spectral: float = 0.0


def selector_kind(name: str, k: int, theta: float = 2.0, c: int | None = None) -> SelectorKind:
    if name == "threshold":
        return SelectorKind(name, theta=k - 0.5 if theta >= k or theta < k - 1 else theta)
    if name == "rejection-dpp":
        return SelectorKind(name, theta=theta)
    if name == "double-phase":
        return SelectorKind(name, c=c if c is not None else 10 * k)
    return SelectorKind(name)


def _one(X, k, kind, state: RngState):
    t0 = time.perf_counter()
    S = select(X, k, kind, state)
    dt = time.perf_counter() - t0
    return (
        S,
        frobenius_projection_residual(X, S, FROBENIUS),
        frobenius_projection_residual(X, S, SPECTRAL),
        dt,
    )


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def run_selection(X: DataMatrix, algorithm: str, k: int, seed: int, theta: float = 2.0,
                  c: int | None = None, dataset_id: str = "matrix", rep: int = 0) -> ResultRecord:
    kind = selector_kind(algorithm, k, theta, c)
    a = SELECTOR_NAMES.index(algorithm)
    S, fro, spe, dt = _one(X, k, kind, RngState(seed, (a, rep)))
    return ResultRecord(
        dataset=dataset_id, algorithm=algorithm, k=k, seed=seed,
        errors=[fro], spectral_errors=[spe], seconds=[dt], selections=[list(S.indices)],
        pca_frobenius=best_rank_k_error(X, k, FROBENIUS),
        pca_spectral=best_rank_k_error(X, k, SPECTRAL),
    )


def run_bench(config: ExperimentConfig, X: DataMatrix | None = None, dataset_id: str | None = None) -> list:
    """Residuals of every repetition of every algorithm, plus optional boosting.

    Boosting repeats ``boost_rounds`` times: draw ``boost_batch`` subsets and
    keep the smallest Frobenius residual.
    """
    if X is None:
        X, dataset_id = load_dataset(config.dataset, config.toy, config.seed,
                                     config.header, config.standardize)
    threads = thread_count()
    pca_f = best_rank_k_error(X, config.k, FROBENIUS)
    pca_s = best_rank_k_error(X, config.k, SPECTRAL)
    records = []
    for name in config.algorithms:
        kind = selector_kind(name, config.k, config.theta, config.c)
        a = SELECTOR_NAMES.index(name)
        reps = _map(lambda j: _one(X, config.k, kind, RngState(config.seed, (a, j))),
                    range(config.repetitions), threads)
        rec = ResultRecord(dataset=dataset_id, algorithm=name, k=config.k, seed=config.seed,
                           pca_frobenius=pca_f, pca_spectral=pca_s)
        for S, fro, spe, dt in reps:
            rec.selections.append(list(S.indices))
            rec.errors.append(fro)
            rec.spectral_errors.append(spe)
            rec.seconds.append(dt)
        base = config.repetitions
        for r in range(config.boost_rounds):
            batch = _map(
                lambda j: _one(X, config.k, kind, RngState(config.seed, (a, base + r * config.boost_batch + j)))[1],
                range(config.boost_batch), threads,
            )
            rec.boosted.append(min(batch))
        records.append(rec)
    return records


def record_to_json(rec: ResultRecord, timings: bool = False) -> dict:
    out = {
        "dataset": rec.dataset,
        "algorithm": rec.algorithm,
        "k": rec.k,
        "seed": rec.seed,
        "errors": rec.errors,
        "boosted": rec.boosted,
        "spectral_errors": rec.spectral_errors,
        "pca_frobenius": rec.pca_frobenius,
        "pca_spectral": rec.pca_spectral,
        "selections": rec.selections,
    }
    if timings:
        out["seconds"] = rec.seconds
    return out


def write_records(records, out, fmt: str = "json", timings: bool = False):
    """Write bench records to a path or an open text stream."""
    if fmt not in ("json", "csv"):
        raise InputError("format must be json or csv")
    close = False
    if isinstance(out, (str, os.PathLike)):
        out = open(out, "w", newline="")
        close = True
    try:
        if fmt == "json":
            json.dump([record_to_json(r, timings) for r in records], out, indent=2)
            out.write("\n")
        else:
            w = csv.writer(out)
            w.writerow(["dataset", "algorithm", "k", "seed", "kind", "index", "frobenius", "spectral"])
            for r in records:
                for i, (f, s) in enumerate(zip(r.errors, r.spectral_errors)):
                    w.writerow([r.dataset, r.algorithm, r.k, r.seed, "rep", i, repr(f), repr(s)])
                for i, b in enumerate(r.boosted):
                    w.writerow([r.dataset, r.algorithm, r.k, r.seed, "boosted", i, repr(b), ""])
    finally:
        if close:
            out.close()


# ---------------------------------------------------------------- bounds table


def bounds_table(X: DataMatrix, k: int, theta: float = 2.0, exact: bool = True) -> list:
    """Every applicable bound next to the exact expectation when enumerable.

    Errors are squared; ``ratio`` columns use the squared PCA error as unit.
    A row is flagged when an exact expectation exceeds its bound.
    """
    svd = X.svd
    d = X.n_cols
    profile = k_leverage_scores(svd, k)
    pca_f2 = best_rank_k_error(X, k, FROBENIUS) ** 2
    pca_s2 = best_rank_k_error(X, k, SPECTRAL) ** 2
    beta = profile.beta if profile.beta is not None else 1.0
    p = profile.sparsity_p
    p_eff = effective_sparsity(profile, theta)
    rows = []

    def add(selector, norm, factor, unit, exact_value=None, **inputs):
        rep = bnd.report(selector, norm, factor, unit, **inputs)
        row = {
            "selector": selector,
            "norm": norm,
            "bound_factor": rep.bound_factor,
            "bound_value": rep.bound_value,
            "bound_value_root": math.sqrt(rep.bound_value),
            "pca_error_sq": unit,
            "exact": exact_value,
            "exact_ratio": None if exact_value is None or unit == 0 else exact_value / unit,
            "violation": bool(exact_value is not None and exact_value > rep.bound_value * (1 + 1e-9) + 1e-12),
            "inputs": inputs,
        }
        rows.append(row)

    def maybe(fn, *a):
        if not exact:
            return None
        try:
            return fn(*a)
        except CapacityError:
            return None

    vs_f = maybe(exact_expected_error, X, k, "vs", FROBENIUS)
    dpp_f = maybe(exact_expected_error, X, k, "dpp", FROBENIUS)
    cond_f = maybe(exact_conditional_expected_error, X, k, theta, FROBENIUS)
    if k < d:
        add("vs", FROBENIUS, bnd.vs_bound(k, d, FROBENIUS), pca_f2, vs_f, k=k, d=d)
        add("vs", SPECTRAL, bnd.vs_bound(k, d, SPECTRAL), pca_f2, None, k=k, d=d)
        spec_f, fro_f = bnd.dpp_sparse_bounds(k, d, p, beta)
        add("dpp", FROBENIUS, fro_f, pca_f2, dpp_f, k=k, d=d, p=p, beta=beta)
        add("dpp", SPECTRAL, spec_f, pca_s2, None, k=k, d=d, p=p)
        add("dpp-generic", FROBENIUS, bnd.dpp_generic_bound(k, d), pca_f2, dpp_f, k=k, d=d)
        s_pe, f_pe, lb = bnd.dpp_peff_bounds(k, d, p_eff, theta, beta)
        add("rejection-dpp", FROBENIUS, f_pe, pca_f2, cond_f, k=k, d=d, p_eff=p_eff, theta=theta, beta=beta)
        add("rejection-dpp", SPECTRAL, s_pe, pca_s2, None, k=k, d=d, p_eff=p_eff, theta=theta)
        acc = maybe(exact_avoiding_probability, svd.V[:, :k], profile, theta)
        rows.append({
            "selector": "rejection-dpp",
            "norm": "acceptance",
            "bound_factor": None,
            "bound_value": lb,
            "exact": acc,
            "violation": bool(acc is not None and acc < lb - 1e-12),
            "inputs": {"theta": theta, "p_eff": p_eff},
        })
    return rows


# ---------------------------------------------------------------- risk


def run_risk(X: DataMatrix, k: int, algorithms, trials: int, seed: int, noise: float = 1.0,
             theta: float = 2.0, c: int | None = None) -> list:
    """Monte Carlo excess risk of sparse OLS per algorithm, with the matching bounds."""
    w = RngState(seed, (2**31 + 1,)).generator().standard_normal(X.n_cols)
    w /= np.linalg.norm(w)
    problem = RegressionProblem(X, w, noise)
    svd = X.svd
    profile = k_leverage_scores(svd, k)
    sig = svd.full_sigma()
    sigma_next = float(sig[k]) if k < sig.size else 0.0
    common = dict(k=k, N=X.n_rows, v=noise, w_norm=1.0, sigma_next=sigma_next)
    bounds = {
        "pcr": bnd.excess_risk_bounds("pcr", **common),
        "dpp": bnd.excess_risk_bounds("dpp", p=profile.sparsity_p, **common),
        "rejection-dpp": bnd.excess_risk_bounds(
            "dpp_conditional", p_eff=effective_sparsity(profile, theta), theta=theta, **common),
        "ols": bnd.excess_risk_bounds("ols", v=noise, rank=svd.rank, N=X.n_rows),
    }
    out = []
    for name in algorithms:
        state = RngState(seed, (SELECTOR_NAMES.index(name) if name in SELECTOR_NAMES else 99,))
        if name == "ols":
            mean, se = excess_risk_mc(problem, "ols", trials, state)
        else:
            mean, se = excess_risk_mc(problem, selector_kind(name, k, theta, c), trials, state, k=k)
        out.append({
            "algorithm": name,
            "k": k,
            "seed": seed,
            "trials": trials,
            "noise_variance": noise,
            "risk_mean": mean,
            "risk_stderr": se,
            "bound": bounds.get(name),
        })
    return out

