"""Experiment runners behind the command line, and the built-in suites."""
from __future__ import annotations

import csv
import json
import math
import os
import platform
import time
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from . import generators as gen
from . import invlap, montecarlo as mc, mosco, subpaths, timefrac
from ._streams import mean_and_se
from .config import ExperimentConfig, from_dict

OUTPUT_ENV = "FRACMOSCO_OUTPUT_ROOT"

# fixed CSV layouts, one per experiment kind
COLUMNS = {
    "symbol-table": ["symbol", "lam", "value"],
    "simulate": ["symbol", "statistic", "value", "std_error"],
    "weights": ["symbol", "t", "mu", "h", "method", "flag"],
    "solve": ["symbol", "t", "x", "u"],
    "potential-check": mc.CSV_COLUMNS,
    "lifetime": mc.CSV_COLUMNS,
    "local-time": mc.CSV_COLUMNS,
    "converge": ["n", "metric", "value"],
    "distribution": ["n", "t", "ks_distance", "null_band", "killed_n", "killed_limit", "killed_z"],
}

STREAMS_DOC = {
    "scheme": "Philox keyed by SeedSequence(seed, spawn_key=(stream, block)), blocks of 4096 paths",
    "streams": {"1": "subordinator increments", "2": "base diffusion increments",
                "3": "independent subordinator ensemble", "4": "limit-process base paths",
                "5": "killing thresholds"},
}


@dataclass
class Outcome:
    columns: list
    rows: list
    flagged: bool = False
    meta: dict = field(default_factory=dict)
    report: object = None


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _test_function(cfg: ExperimentConfig, G: gen.DiscreteGenerator) -> np.ndarray:
    x = G.grid
    l, ell = cfg.generator.l, cfg.generator.ell
    w = ell - l
    if cfg.f == "phi1":
        return G.eigenpairs.phi[:, 0].copy()
    if cfg.f == "one":
        return np.ones(G.size)
    if cfg.f == "sin":
        return np.sin(np.pi * (x - l) / w)
    return np.exp(-((x - (l + 0.5 * w)) / (0.1 * w)) ** 2)


def _limit(cfg: ExperimentConfig) -> gen.DiscreteGenerator:
    g = cfg.generator
    return gen.build_limit_generator(g.l, g.ell, g.regime_value(), g.n_cells)


def _generator(cfg: ExperimentConfig) -> gen.DiscreteGenerator:
    g = cfg.generator
    if g.alpha is not None:
        eps = g.eps if g.eps is not None else (g.ell - g.l) / 64
        return gen.build_skew_generator(g.l, g.ell, g.ell + eps, g.alpha, g.eta or 1.0, g.n_cells, g.layer_cells)
    return _limit(cfg)


def _symbols(cfg: ExperimentConfig):
    return [s.build() for s in cfg.symbols]


# runners -----------------------------------------------------------------------------

def run_symbol_table(cfg):
    rows = [[str(sym), lam, float(sym(lam))] for sym in _symbols(cfg) for lam in cfg.grids.lam]
    return Outcome(COLUMNS["symbol-table"], rows)


def run_simulate(cfg):
    rows = []
    ds = cfg.mc.ds or 1e-3
    for sym in _symbols(cfg):
        # one ensemble of H_1 serves every lambda
        h1 = subpaths.terminal_values(sym, 1.0, ds, cfg.mc.n_paths, cfg.seed, workers=cfg.mc.workers)
        for lam in cfg.grids.lam:
            m, se, _ = mean_and_se([np.exp(-lam * h1)])
            rows.append([str(sym), f"mean exp(-{lam:g} H_1)", m, se])
            rows.append([str(sym), f"exact exp(-Phi({lam:g}))", math.exp(-float(sym(lam))), 0.0])
        for t in cfg.grids.t:
            if t <= 0:
                continue
            r = subpaths.empirical_cdf_check(sym, t, 1.0, max(cfg.mc.n_paths, 1000), cfg.seed, ds,
                                             cfg.mc.workers)
            rows.append([str(sym), f"P(L_{t:g} < 1)", r["lhs"], r["lhs_se"]])
            rows.append([str(sym), f"P(H_1 > {t:g})", r["rhs"], r["rhs_se"]])
            rows.append([str(sym), f"z_score t={t:g}", r["z_score"], 0.0])
    return Outcome(COLUMNS["simulate"], rows)


def run_weights(cfg):
    rows, flagged = [], False
    for sym in _symbols(cfg):
        for t in cfg.grids.t:
            if t <= 0:
                continue
            h, fl = invlap.l_laplace_weights(sym, cfg.grids.mu, t)
            method = "talbot" if sym.is_analytic and sym.kind != "identity" else (
                "exact" if sym.kind == "identity" else "gaver-stehfest")
            for mu, hv, f in zip(cfg.grids.mu, h, fl):
                rows.append([str(sym), t, mu, hv, method, bool(f)])
                flagged |= bool(f)
    return Outcome(COLUMNS["weights"], rows, flagged)


def run_solve(cfg):
    G = _generator(cfg)
    f = _test_function(cfg, G)
    rows, flagged, meta = [], False, {}
    for sym in _symbols(cfg):
        sol = timefrac.solve(G, sym, f, cfg.grids.t)
        flagged |= sol.flagged
        meta[str(sym)] = sol.metadata()
        xs = G.grid if cfg.grids.x is None else np.asarray(cfg.grids.x, dtype=float)
        for t, row in zip(sol.t_grid, sol.values):
            us = row if cfg.grids.x is None else np.interp(xs, G.grid, row)
            rows.extend([str(sym), t, x, u] for x, u in zip(xs, us))
    return Outcome(COLUMNS["solve"], rows, flagged, {"solutions": meta})


def _mc_spec(cfg, dt=None):
    g = cfg.generator
    return mc.DiffusionSpec.plain(g.l, g.ell, dt or cfg.mc.dt)


def _at(G, u, x0):
    return float(np.interp(x0, G.grid, u))


def run_potential_check(cfg):
    G = _limit(cfg)
    f = _test_function(cfg, G)
    fx = mc.as_function(f, G.grid)
    spec = _mc_spec(cfg)
    rows, flagged = [], False
    for sym in _symbols(cfg):
        for lam in cfg.grids.lam:
            tag = f"{sym}:lam={lam:g}"
            ref = _at(G, timefrac.potential(G, sym, f, lam), cfg.mc.x0)
            res = mc.estimate_potential(spec, sym, fx, lam, cfg.mc.x0, cfg.mc.n_paths, cfg.seed,
                                        workers=cfg.mc.workers)
            flagged |= res.flagged
            rows.append(res.row(cfg.name, f"mc {tag}"))
            rows.append([cfg.name, f"spectral {tag}", repr(ref), repr(0.0), 0, cfg.seed])
    return Outcome(COLUMNS["potential-check"], rows, flagged)


def run_lifetime(cfg):
    G = _limit(cfg)
    spec = _mc_spec(cfg)
    rows, flagged = [], False
    for sym in _symbols(cfg):
        res = mc.estimate_lifetime(spec, sym, cfg.mc.x0, cfg.mc.n_paths, cfg.seed, cfg.mc.t_max, cfg.mc.workers)
        flagged |= res.flagged and math.isfinite(res.value)
        rows.append(res.row(cfg.name, f"mc {sym}"))
        rows.append([cfg.name, f"formula {sym}", repr(timefrac.lifetime_mean(G, sym, cfg.mc.x0)), repr(0.0), 0,
                     cfg.seed])
    return Outcome(COLUMNS["lifetime"], rows, flagged)


def run_local_time(cfg):
    g = cfg.generator
    rows, flagged = [], False
    spec = mc.DiffusionSpec.reflecting(g.l, g.ell, 0.0, cfg.mc.dt)
    for sym in _symbols(cfg):
        for c in cfg.grids.c:
            res = mc.local_time_functional(spec, sym, c, cfg.mc.x0, cfg.mc.n_paths, cfg.seed, cfg.mc.estimator,
                                           cfg.mc.t_max, cfg.mc.workers)
            flagged |= res.flagged
            rows.append(res.row(cfg.name, f"mc {sym}:c={c:g}"))
            rows.append([cfg.name, f"ode {sym}:c={c:g}",
                         repr(mc.local_time_oracle(sym, c, cfg.mc.x0, g.l, g.ell)), repr(0.0), 0, cfg.seed])
    return Outcome(COLUMNS["local-time"], rows, flagged)


def run_converge(cfg):
    g = cfg.generator
    seq = gen.build_sequence(g.l, g.ell, g.regime_value(), g.ns, g.n_cells, g.layer_cells)
    syms = _symbols(cfg) or [subpaths.BernsteinSymbol.identity()]
    thresholds = dict(mosco.DEFAULT_THRESHOLDS, **cfg.thresholds)
    t1 = max(t for t in cfg.grids.t) if cfg.grids.t else 1.0
    rep = mosco.timechanged_convergence(seq, seq.limit, syms[0], cfg.grids.lam,
                                        [t for t in mosco.default_t_grid(t1)], thresholds=thresholds)
    rows = [[r["n"], m, r[m]] for r in rep.rows for m in mosco.METRICS if r.get(m) is not None]
    meta = rep.metadata()
    meta["iff_agreement"] = mosco.iff_agreement(rep)
    return Outcome(COLUMNS["converge"], rows, rep.meta.get("inversion_flags", 0) > 0, meta, rep)


def run_distribution(cfg):
    g = cfg.generator
    sym = _symbols(cfg)[0]
    specs = mosco.skew_specs(g.regime_value(), g.ns, g.l, g.ell, cfg.mc.dt)
    lim = mosco.limit_spec(g.regime_value(), g.l, g.ell, cfg.mc.dt)
    res = mosco.distributional_check(specs, lim, sym, [t for t in cfg.grids.t if t > 0], cfg.mc.x0,
                                     cfg.mc.n_paths, cfg.seed, ns=g.ns, workers=cfg.mc.workers)
    rows = [[r[k] for k in COLUMNS["distribution"]] for r in res["rows"]]
    return Outcome(COLUMNS["distribution"], rows)


RUNNERS = {
    "symbol-table": run_symbol_table,
    "simulate": run_simulate,
    "weights": run_weights,
    "solve": run_solve,
    "potential-check": run_potential_check,
    "lifetime": run_lifetime,
    "local-time": run_local_time,
    "converge": run_converge,
    "distribution": run_distribution,
}


def output_dir(cfg: ExperimentConfig, override=None) -> str:
    if override:
        return str(override)
    if cfg.output_dir:
        return cfg.output_dir
    root = os.environ.get(OUTPUT_ENV, "fracmosco-runs")
    return os.path.join(root, f"{cfg.name}-{cfg.hash()[:12]}")


def execute(cfg: ExperimentConfig, out=None) -> tuple[str, Outcome]:
    """Run one experiment and write ``results.csv`` and ``metadata.json``."""
    t0 = time.perf_counter()
    outcome = RUNNERS[cfg.kind](cfg)
    wall = time.perf_counter() - t0
    d = output_dir(cfg, out)
    os.makedirs(d, exist_ok=True)
    with open(os.path.join(d, "results.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(outcome.columns)
        for row in outcome.rows:
            w.writerow([_fmt(v) for v in row])
    if outcome.report is not None:
        outcome.report.write(d, "convergence")
    meta = {
        "name": cfg.name, "kind": cfg.kind, "config_hash": cfg.hash(), "seed": cfg.seed,
        "config": cfg.canonical(), "wall_time_s": wall, "flagged": outcome.flagged,
        "versions": {"fracmosco": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "random_streams": STREAMS_DOC, "details": outcome.meta,
    }
    with open(os.path.join(d, "metadata.json"), "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True, default=_json_default)
    return d, outcome


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


# built-in suites ----------------------------------------------------------------------

_SYMS = [{"kind": "stable", "beta": 0.5}, {"kind": "gamma", "a": 1.0, "b": 1.0},
         {"kind": "inverse_gaussian", "sigma": 1.0, "mu": 1.0}]

SUITES = {
    "symbols": ("Bernstein symbols on a lambda grid", "<1 s",
                {"kind": "symbol-table", "symbols": _SYMS, "grids": {"lam": [0.5, 1.0, 2.0, 4.0]}}),
    "subordinators": ("Laplace functionals of sampled subordinators and the L/H duality", "~90 s",
                      {"kind": "simulate", "symbols": _SYMS[:2], "mc": {"n_paths": 100000, "ds": 0.001},
                       "grids": {"lam": [0.5, 1.0, 2.0], "t": [1.0]}}),
    "weights": ("Marginal weights E exp(-mu L_t) by Laplace inversion", "<1 s",
                {"kind": "weights", "symbols": _SYMS, "grids": {"t": [0.1, 0.5, 1.0, 2.0], "mu": [0.5, 1.0, 2.0]}}),
    "solve-dirichlet": ("Spectral time-fractional solution on (0, pi), Dirichlet ends", "~1 s",
                        {"kind": "solve", "symbols": [{"kind": "identity"}, _SYMS[0]], "f": "bump",
                         "generator": {"n_cells": 200}, "grids": {"t": [0.0, 0.1, 0.5, 1.0, 2.0]}}),
    "potential-mc": ("Monte Carlo potential versus the spectral potential identity", "~20 s",
                     {"kind": "potential-check", "symbols": [_SYMS[0]], "mc": {"n_paths": 100000, "dt": 0.004},
                      "grids": {"lam": [1.0]}}),
    "lifetime-mc": ("Mean lifetime of the time-changed process versus Phi'(0) E[zeta]", "~50 s",
                    {"kind": "lifetime", "symbols": [{"kind": "gamma", "a": 1.0, "b": 2.0},
                                                      {"kind": "inverse_gaussian", "sigma": 1.0, "mu": 1.0}],
                     "mc": {"n_paths": 100000, "dt": 0.002}}),
    "local-time": ("Feynman-Kac local-time functional for c = 0, 1, inf", "~60 s",
                   {"kind": "local-time", "symbols": [{"kind": "gamma", "a": 1.0, "b": 1.0}],
                    "mc": {"n_paths": 10000, "dt": 0.002}, "grids": {"c": [0.0, 1.0, math.inf]}}),
    "converge-dirichlet": ("Skew sequence with alpha/eps -> inf against the Dirichlet limit", "~1 s",
                           {"kind": "converge", "symbols": [_SYMS[0]], "generator": {"regime": "dirichlet",
                                                                                     "n_cells": 200}}),
    "converge-neumann": ("Skew sequence with alpha/eps -> 0 against the Neumann limit", "~1 s",
                         {"kind": "converge", "symbols": [_SYMS[0]], "generator": {"regime": "neumann",
                                                                                   "n_cells": 200}}),
    "converge-robin": ("Skew sequence with alpha/((1-alpha) eps) = 1 against the Robin limit", "~1 s",
                       {"kind": "converge", "symbols": [_SYMS[0]],
                        "generator": {"regime": "robin", "robin_c": 1.0, "n_cells": 200}}),
    "distribution-robin": ("KS distances of time-changed skew processes to the Robin limit", "~40 s",
                           {"kind": "distribution", "symbols": [_SYMS[0]],
                            "generator": {"regime": "robin", "robin_c": 1.0, "ns": [4, 16, 64]},
                            "mc": {"n_paths": 10000, "dt": 0.001}, "grids": {"t": [0.25, 1.0]}}),
}


def suite_config(name: str) -> ExperimentConfig:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; see 'fracmosco list'")
    return from_dict({"name": name, **SUITES[name][2]})
