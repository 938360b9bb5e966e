"""Convergence harness for sequences of skew-interface generators.

Strong operator convergence is probed on a fixed dictionary of test
functions: the first eight limit eigenfunctions, two smooth bumps and one
indicator, each normalised in ``L^2(dx)``. Functions on the limit domain
are extended by zero to the thin layer of each approximating problem, and
all errors are ``L^2(dx)`` norms on the approximating grid.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _streams
from . import generators as gen
from .bernstein import BernsteinSymbol
from .generators import DiscreteGenerator, FormSequence
from .invlap import l_laplace_weights
from .montecarlo import DiffusionSpec, sample_timechanged

METRICS = ("resolvent_err", "semigroup_err", "tc_resolvent_err", "tc_semigroup_err", "ks_distance")


class EmbeddingError(ValueError):
    pass


# test dictionary ----------------------------------------------------------------

def default_dictionary(limit: DiscreteGenerator, n_modes: int = 8) -> dict:
    x = limit.grid
    lo, hi = limit.edges[0], limit.edges[-1]
    w = hi - lo
    ep = limit.eigenpairs
    out = {f"phi{k + 1}": ep.phi[:, k].copy() for k in range(min(n_modes, limit.size))}
    out["bump_mid"] = np.exp(-((x - (lo + 0.5 * w)) / (0.1 * w)) ** 2)
    out["bump_edge"] = np.exp(-((x - (lo + 0.85 * w)) / (0.08 * w)) ** 2)
    out["indicator"] = ((x > lo + 0.6 * w) & (x < lo + 0.9 * w)).astype(float)
    h = limit.widths
    return {k: v / math.sqrt(np.sum(h * v * v)) for k, v in out.items()}


def _lebesgue_norm(G: DiscreteGenerator, u: np.ndarray) -> float:
    return math.sqrt(float(np.sum(G.widths * u * u)))


def _check_embedding(G: DiscreteGenerator, limit: DiscreteGenerator) -> None:
    m = limit.size
    if G.size < m or not np.allclose(G.edges[:m + 1], limit.edges, rtol=0, atol=1e-12):
        raise EmbeddingError("approximating grid does not contain the limit grid")


# reports --------------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    rows: list
    dictionary: list
    lam_grid: list = field(default_factory=list)
    t_grid: list = field(default_factory=list)
    thresholds: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def series(self, metric: str) -> np.ndarray:
        return np.array([r[metric] for r in self.rows if r.get(metric) is not None], dtype=float)

    def tail_nonincreasing(self, metric: str, rtol: float = 1e-9) -> bool:
        v = self.series(metric)
        if len(v) == 0:
            return False
        q = max(2, math.ceil(len(v) / 4))
        tail = v[-q:]
        return bool(np.all(np.diff(tail) <= rtol * np.abs(tail[:-1]) + 1e-15))

    def below_threshold(self, metric: str) -> bool:
        v = self.series(metric)
        thr = self.thresholds.get(metric, math.inf)
        return bool(len(v) and v[-1] < thr)

    def verdict(self, metric: str) -> bool:
        return self.tail_nonincreasing(metric) and self.below_threshold(metric)

    @property
    def verdicts(self) -> dict:
        return {m: {"nonincreasing_tail": self.tail_nonincreasing(m), "below_threshold": self.below_threshold(m),
                    "verdict": self.verdict(m)}
                for m in METRICS if len(self.series(m))}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "metric", "value"])
            for r in self.rows:
                for m in METRICS:
                    if r.get(m) is not None:
                        w.writerow([r["n"], m, repr(float(r[m]))])

    def metadata(self) -> dict:
        return {"dictionary": self.dictionary, "lam_grid": self.lam_grid, "t_grid": self.t_grid,
                "thresholds": self.thresholds, "verdicts": self.verdicts, **self.meta}

    def write(self, directory, stem: str = "convergence") -> None:
        os.makedirs(directory, exist_ok=True)
        self.to_csv(os.path.join(directory, f"{stem}.csv"))
        with open(os.path.join(directory, f"{stem}.json"), "w") as fh:
            json.dump(self.metadata(), fh, indent=1, sort_keys=True, default=float)
        for m in METRICS:
            v = [(r["n"], r[m]) for r in self.rows if r.get(m) is not None]
            if v:
                with open(os.path.join(directory, f"{stem}_{m}.dat"), "w") as fh:
                    fh.write(f"# n {m}\n")
                    fh.writelines(f"{n} {val!r}\n" for n, val in v)


DEFAULT_THRESHOLDS = {"resolvent_err": 0.1, "semigroup_err": 0.1, "tc_resolvent_err": 0.1,
                      "tc_semigroup_err": 0.1}


def _spectral(G: DiscreteGenerator, f: np.ndarray, weights: np.ndarray) -> np.ndarray:
    ep = G.eigenpairs
    return ep.phi @ (weights * gen.coefficients(G, f))


def _resolvent_errors(seq: FormSequence, limit: DiscreteGenerator, lam_points, dictionary: dict,
                      scale) -> list:
    limit_res = {(k, lam): gen.resolvent_apply(limit, lam, f) for k, f in dictionary.items() for lam in lam_points}
    out = []
    for G in seq.generators:
        _check_embedding(G, limit)
        worst = 0.0
        for k, f in dictionary.items():
            fe = gen.embed(G, f)
            for lam, sc in zip(lam_points, scale):
                d = gen.resolvent_apply(G, lam, fe) - gen.embed(G, limit_res[(k, lam)])
                worst = max(worst, sc * _lebesgue_norm(G, d))
        out.append(worst)
    return out


def _semigroup_errors(seq: FormSequence, limit: DiscreteGenerator, t_grid, dictionary: dict, weight_fn) -> list:
    lim_w = {t: weight_fn(limit.eigenpairs.mu, t) for t in t_grid}
    limit_val = {(k, t): _spectral(limit, f, lim_w[t]) for k, f in dictionary.items() for t in t_grid}
    out = []
    for G in seq.generators:
        _check_embedding(G, limit)
        ws = {t: weight_fn(G.eigenpairs.mu, t) for t in t_grid}
        worst = 0.0
        for k, f in dictionary.items():
            fe = gen.embed(G, f)
            for t in t_grid:
                d = _spectral(G, fe, ws[t]) - gen.embed(G, limit_val[(k, t)])
                worst = max(worst, _lebesgue_norm(G, d))
        out.append(worst)
    return out


def _heat_weights(mu, t):
    return np.exp(-mu * t)


def resolvent_convergence(seq: FormSequence, limit: DiscreteGenerator, lam_grid, dictionary: dict | None = None,
                          thresholds: dict | None = None) -> ConvergenceReport:
    dictionary = dictionary or default_dictionary(limit)
    errs = _resolvent_errors(seq, limit, list(lam_grid), dictionary, [1.0] * len(lam_grid))
    rows = [{"n": n, "resolvent_err": e} for n, e in zip(seq.ns, errs)]
    return ConvergenceReport(rows, list(dictionary), list(lam_grid), [], dict(thresholds or DEFAULT_THRESHOLDS))


def default_t_grid(t1: float) -> list:
    return [t1 / 100, t1 / 30, t1 / 10, t1 / 3, t1 / 2, t1]


def semigroup_convergence(seq: FormSequence, limit: DiscreteGenerator, t1: float, t_grid=None,
                          dictionary: dict | None = None, thresholds: dict | None = None) -> ConvergenceReport:
    dictionary = dictionary or default_dictionary(limit)
    t_grid = list(t_grid) if t_grid is not None else default_t_grid(t1)
    if any(not 0 < t <= t1 for t in t_grid):
        raise ValueError("t_grid must lie in (0, t1]")
    errs = _semigroup_errors(seq, limit, t_grid, dictionary, _heat_weights)
    rows = [{"n": n, "semigroup_err": e} for n, e in zip(seq.ns, errs)]
    return ConvergenceReport(rows, list(dictionary), [], t_grid, dict(thresholds or DEFAULT_THRESHOLDS))


def timechanged_convergence(seq: FormSequence, limit: DiscreteGenerator, sym: BernsteinSymbol, lam_grid, t_grid,
                            dictionary: dict | None = None, thresholds: dict | None = None) -> ConvergenceReport:
    """Plain and time-changed resolvent/semigroup errors in one report.

    The time-changed resolvent is ``(Phi(lam)/lam) R_{Phi(lam)}``; the
    time-changed semigroup uses the weights ``h(t; mu)``.
    """
    dictionary = dictionary or default_dictionary(limit)
    lam_grid, t_grid = list(lam_grid), list(t_grid)
    flags = []

    def tc_weights(mu, t):
        if sym.kind == "identity":
            return _heat_weights(mu, t)
        h, fl = l_laplace_weights(sym, mu, t)
        flags.append(int(fl.sum()))
        return h

    phis = [float(sym(lam)) for lam in lam_grid]
    res = _resolvent_errors(seq, limit, lam_grid, dictionary, [1.0] * len(lam_grid))
    semi = _semigroup_errors(seq, limit, t_grid, dictionary, _heat_weights)
    tc_res = _resolvent_errors(seq, limit, phis, dictionary, [p / lam for p, lam in zip(phis, lam_grid)])
    tc_semi = _semigroup_errors(seq, limit, t_grid, dictionary, tc_weights)
    mapped = _resolvent_errors(seq, limit, phis, dictionary, [1.0] * len(phis))
    bound = max(p / lam for p, lam in zip(phis, lam_grid))
    rows = []
    for i, n in enumerate(seq.ns):
        rows.append({"n": n, "resolvent_err": res[i], "semigroup_err": semi[i], "tc_resolvent_err": tc_res[i],
                     "tc_semigroup_err": tc_semi[i], "mapped_resolvent_err": mapped[i],
                     "mapped_bound_ok": bool(tc_res[i] <= bound * mapped[i] * (1 + 1e-12) + 1e-300)})
    meta = {"symbol": sym.to_dict(), "inversion_flags": int(sum(flags)), "regime": list(seq.regime)}
    return ConvergenceReport(rows, list(dictionary), lam_grid, t_grid, dict(thresholds or DEFAULT_THRESHOLDS), meta)


def iff_agreement(report: ConvergenceReport) -> bool:
    """Plain and time-changed verdicts coincide for resolvents and semigroups."""
    return (report.verdict("resolvent_err") == report.verdict("tc_resolvent_err")
            and report.verdict("semigroup_err") == report.verdict("tc_semigroup_err"))


def potential_identity_defect(seq: FormSequence, sym: BernsteinSymbol, f_inner: np.ndarray, lam: float) -> float:
    """``max_n |lam R^{Phi,n}_lam f - Phi(lam) R^n_{Phi(lam)} f|`` with the left side built spectrally."""
    worst = 0.0
    p = float(sym(lam))
    for G in seq.generators:
        fe = gen.embed(G, f_inner)
        ep = G.eigenpairs
        c = gen.coefficients(G, fe)
        # Laplace transform of h(t; mu) is Phi / (lam (mu + Phi))
        left = lam * (ep.phi @ (c * p / (lam * (ep.mu + p))))
        right = p * gen.resolvent_apply(G, p, fe)
        worst = max(worst, _lebesgue_norm(G, left - right) / max(_lebesgue_norm(G, right), 1e-300))
    return worst


# distributional convergence -------------------------------------------------------------

def skew_specs(regime, ns, l: float, ell: float, dt: float) -> list:
    """Monte Carlo specs of a skew sequence; ``dt`` is reduced where the layer needs it."""
    out = []
    for n in ns:
        a, eta, eps = gen.regime_schedule(regime, n)
        dt_n = min(dt, 0.9 * eps * eps / (16.0 * eta))
        out.append(DiffusionSpec.skew(l, ell, eps, a, eta, dt_n))
    return out


def limit_spec(regime, l: float, ell: float, dt: float) -> DiffusionSpec:
    kind, c = gen._parse_regime(regime)
    if kind == "dirichlet":
        return DiffusionSpec.plain(l, ell, dt)
    return DiffusionSpec.reflecting(l, ell, 0.0 if kind == "neumann" else c, dt)


def ks_null_band(n: int, m: int, scale: float = 1.0) -> float:
    """Asymptotic 95% two-sample KS critical value times ``scale``."""
    if n == 0 or m == 0:
        return math.inf
    return scale * 1.358 * math.sqrt((n + m) / (n * m))


def two_proportion_z(k1: int, n1: int, k2: int, n2: int) -> float:
    p = (k1 + k2) / (n1 + n2)
    se = math.sqrt(p * (1 - p) * (1 / n1 + 1 / n2))
    if se == 0:
        return 0.0
    return (k1 / n1 - k2 / n2) / se


def distributional_check(seq_specs: list, lim_spec: DiffusionSpec, sym: BernsteinSymbol, t_points, x0: float,
                         n_paths: int, seed: int, ns=None, workers: int = 1) -> dict:
    """Per-``(n, t)`` KS distances between ``X^{Phi,n}_t`` and the limit ``X^Phi_t``.

    Every member of the sequence reuses one subordinator ensemble (stream
    ``CLOCK``); the limit sample uses the independent streams ``CLOCK_ALT``
    and ``LIMIT``. Killed paths are excluded from the KS statistic and their
    fractions compared with a two-proportion z-test.
    """
    ns = list(ns) if ns is not None else list(range(len(seq_specs)))
    rows = []
    for t in t_points:
        lim = sample_timechanged(lim_spec, sym, t, x0, n_paths, seed, _streams.CLOCK_ALT, _streams.LIMIT,
                                 workers=workers)
        lim_alive = lim[np.isfinite(lim)]
        for n, spec in zip(ns, seq_specs):
            xs = sample_timechanged(spec, sym, t, x0, n_paths, seed, _streams.CLOCK, _streams.BASE,
                                    ds=lim_spec.dt, workers=workers)
            alive = xs[np.isfinite(xs)]
            ks = float(stats.ks_2samp(alive, lim_alive).statistic) if len(alive) and len(lim_alive) else math.nan
            band = ks_null_band(len(alive), len(lim_alive))
            z = two_proportion_z(n_paths - len(alive), n_paths, n_paths - len(lim_alive), n_paths)
            rows.append({"n": n, "t": t, "ks_distance": ks, "null_band": band,
                         "killed_n": 1 - len(alive) / n_paths, "killed_limit": 1 - len(lim_alive) / n_paths,
                         "killed_z": z})
    return {"rows": rows, "n_paths": n_paths, "seed": seed}
