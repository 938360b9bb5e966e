"""Subordinator paths on an operational-time grid and their inverses.

Increments over a step ``ds`` are drawn exactly for the closed-form
families:

* stable: Kanter's representation of a one-sided stable variable;
* gamma: gamma variates with shape ``a*ds`` and rate ``b``;
* inverse Gaussian: the Michael-Schucany-Haas transformation;
* generalized stable: stable proposals accepted with prob. ``exp(-gam*S)``.

Triplet symbols use drift plus a compound Poisson process of the jumps
larger than a cutoff ``delta``; the mean of the smaller jumps is added to
the drift.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _streams
from .bernstein import BernsteinSymbol, _quad

DEFAULT_CUTOFF = 1e-4


class PathExhaustedError(ValueError):
    """The path never exceeds the requested level."""

    def __init__(self, t: float, h_max: float):
        super().__init__(f"path too short: max H = {h_max:.6g} does not exceed t = {t:.6g}")
        self.t = t
        self.h_max = h_max


# exact increment samplers ---------------------------------------------------

def _stable_unit(beta: float, size, rng: np.random.Generator) -> np.ndarray:
    """One-sided stable variables with E exp(-lam S) = exp(-lam**beta)."""
    u = rng.uniform(0.0, 1.0, size)
    w = rng.standard_exponential(size)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        a = (np.sin(beta * np.pi * u) ** (beta / (1.0 - beta)) * np.sin((1.0 - beta) * np.pi * u)
             / np.sin(np.pi * u) ** (1.0 / (1.0 - beta)))
        s = (a / w) ** ((1.0 - beta) / beta)
    return np.where(np.isfinite(s), s, 0.0)


def _inverse_gaussian(mean: np.ndarray, shape: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    nu = rng.standard_normal(mean.shape) ** 2
    u = rng.uniform(0.0, 1.0, mean.shape)
    r = mean * nu / (2.0 * shape)
    # m*(1 + r - sqrt(r^2 + 2r)) rewritten to avoid cancellation for large r
    x = mean / (1.0 + r + np.sqrt(r * r + 2.0 * r))
    return np.where(u <= mean / (mean + x), x, mean * mean / x)


@dataclass(frozen=True)
class _JumpTable:
    rate: float
    log_z: np.ndarray
    log_tail: np.ndarray
    drift_eff: float


@lru_cache(maxsize=16)
def _jump_table(sym: BernsteinSymbol, delta: float) -> _JumpTable:
    tr = sym.to_triplet()
    pi = tr.levy_density
    rate = tr.tail(delta) - tr.killing_rate
    small_mean = _quad(lambda u: (delta * math.exp(-u)) ** 2 * pi(delta * math.exp(-u)), 0.0, np.inf,
                       "small-jump mean")
    zs = [delta]
    tails = [rate]
    z = delta
    while tails[-1] > 1e-10 * rate and len(zs) < 4000:
        z *= 1.05
        zs.append(z)
        tails.append(tr.tail(z) - tr.killing_rate)
    tails_arr = np.maximum(np.array(tails), 1e-300)
    return _JumpTable(rate, np.log(zs), np.log(tails_arr), tr.drift + small_mean)


def increments(sym: BernsteinSymbol, dt, size, rng: np.random.Generator,
               cutoff: float | None = DEFAULT_CUTOFF) -> np.ndarray:
    """Draw independent copies of ``H_dt``; ``dt`` may broadcast against ``size``."""
    dt = np.broadcast_to(np.asarray(dt, dtype=float), size).astype(float)
    kind = sym.kind
    if kind == "identity":
        return dt.copy()
    if kind == "stable":
        (beta,) = sym.params
        return dt ** (1.0 / beta) * _stable_unit(beta, size, rng)
    if kind == "gamma":
        a, b = sym.params
        out = np.zeros(size)
        pos = dt > 0
        out[pos] = rng.gamma(a * dt[pos], 1.0 / b)
        return out
    if kind == "inverse_gaussian":
        sigma, mu = sym.params
        out = np.zeros(size)
        pos = dt > 0
        out[pos] = _inverse_gaussian(dt[pos] / mu, dt[pos] ** 2 / sigma ** 2, rng)
        return out
    if kind == "generalized_stable":
        alpha, gam = sym.params
        out = np.empty(size)
        todo = np.ones(size, dtype=bool)
        while np.any(todo):
            n = int(todo.sum())
            s = dt[todo] ** (1.0 / alpha) * _stable_unit(alpha, n, rng)
            keep = rng.uniform(0.0, 1.0, n) <= np.exp(-gam * s)
            idx = np.flatnonzero(todo.ravel())
            flat = out.reshape(-1)
            flat[idx[keep]] = s[keep]
            todo.reshape(-1)[idx[keep]] = False
        return out
    if sym.killing_rate > 0:
        raise ValueError("killed subordinators are not sampled as paths")
    if cutoff is None or not cutoff > 0:
        raise ValueError("triplet sampling needs a positive small-jump cutoff")
    table = _jump_table(sym, float(cutoff))
    counts = rng.poisson(table.rate * dt)
    total = int(counts.sum())
    out = table.drift_eff * dt
    if total:
        u = rng.uniform(0.0, 1.0, total)
        log_sizes = np.interp(np.log(u * table.rate), table.log_tail[::-1], table.log_z[::-1])
        owner = np.repeat(np.arange(counts.size), counts.ravel())
        out = out + np.bincount(owner, weights=np.exp(log_sizes), minlength=counts.size).reshape(size)
    return out


# paths ------------------------------------------------------------------------

@dataclass(frozen=True)
class SubordinatorPath:
    s_grid: np.ndarray
    h_values: np.ndarray
    symbol: BernsteinSymbol
    seed: int

    @property
    def ds(self) -> float:
        return float(self.s_grid[1] - self.s_grid[0])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "H_s"])
            for s, h in zip(self.s_grid, self.h_values):
                w.writerow([repr(float(s)), repr(float(h))])


@dataclass(frozen=True)
class InversePathView:
    t_query: float
    l_value: float


def _grid(s_max: float, ds: float) -> np.ndarray:
    if not ds > 0:
        raise ValueError(f"ds must be positive, got {ds}")
    if not s_max >= ds:
        raise ValueError(f"s_max must be >= ds, got s_max={s_max}, ds={ds}")
    n = int(round(s_max / ds))
    return np.arange(n + 1) * ds


def sample_path(sym: BernsteinSymbol, s_max: float, ds: float, seed: int,
                cutoff: float = DEFAULT_CUTOFF) -> SubordinatorPath:
    s = _grid(s_max, ds)
    if sym.kind == "identity":
        return SubordinatorPath(s, s.copy(), sym, seed)
    rng = _streams.generator(seed, _streams.CLOCK, 0)
    h = np.concatenate([[0.0], np.cumsum(increments(sym, ds, len(s) - 1, rng, cutoff))])
    return SubordinatorPath(s, h, sym, seed)


def sample_paths(sym: BernsteinSymbol, s_max: float, ds: float, n_paths: int, seed: int,
                 stream: int = _streams.CLOCK, cutoff: float = DEFAULT_CUTOFF,
                 workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble of paths as an ``(n_paths, n_steps + 1)`` array.

    Row ``i`` depends only on ``(seed, stream, i)`` through its block.
    """
    s = _grid(s_max, ds)
    n_steps = len(s) - 1

    def run(b, lo, hi):
        if sym.kind == "identity":
            return np.broadcast_to(s, (hi - lo, len(s))).copy()
        rng = _streams.generator(seed, stream, b)
        inc = increments(sym, ds, (hi - lo, n_steps), rng, cutoff)
        out = np.zeros((hi - lo, n_steps + 1))
        np.cumsum(inc, axis=1, out=out[:, 1:])
        return out

    return s, np.vstack(_streams.map_blocks(run, n_paths, workers))


def invert_path(path: SubordinatorPath, t: float, interpolate: bool = False) -> InversePathView:
    """First passage ``L_t = inf{s in grid : H_s > t}``.

    With ``interpolate=True`` the crossing is located by linear
    interpolation of ``H`` inside the crossing step, which is exact for the
    identity symbol and keeps ``L`` continuous in ``t``.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    h = path.h_values
    j = int(np.searchsorted(h, t, side="right"))
    if j >= len(h):
        raise PathExhaustedError(t, float(h[-1]))
    s = path.s_grid
    if not interpolate or j == 0:
        return InversePathView(t, float(s[j]))
    frac = (t - h[j - 1]) / (h[j] - h[j - 1])
    return InversePathView(t, float(s[j - 1] + frac * (s[j] - s[j - 1])))


def first_passage(s_grid: np.ndarray, h: np.ndarray, t, interpolate: bool = True) -> np.ndarray:
    """Vectorized :func:`invert_path` over rows of ``h`` (``t`` per row or scalar).

    Rows that never exceed ``t`` get ``inf``.
    """
    h = np.atleast_2d(h)
    t = np.broadcast_to(np.asarray(t, dtype=float), (h.shape[0],))
    above = h > t[:, None]
    j = np.argmax(above, axis=1)
    hit = above[np.arange(h.shape[0]), j]
    out = np.full(h.shape[0], np.inf)
    jj = j[hit]
    rows = np.flatnonzero(hit)
    if interpolate:
        prev = np.maximum(jj - 1, 0)
        h0, h1 = h[rows, prev], h[rows, jj]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(jj > 0, (t[rows] - h0) / (h1 - h0), 0.0)
        out[rows] = np.where(jj > 0, s_grid[prev] + frac * (s_grid[jj] - s_grid[prev]), s_grid[jj])
    else:
        out[rows] = s_grid[jj]
    return out


# distributional checks -------------------------------------------------------

def terminal_values(sym: BernsteinSymbol, s: float, ds: float, n_paths: int, seed: int,
                    stream: int = _streams.CLOCK, cutoff: float = DEFAULT_CUTOFF,
                    workers: int = 1) -> np.ndarray:
    """``H_s`` for each path, accumulated step by step without storing paths."""
    n_steps = max(int(round(s / ds)), 1)
    step = s / n_steps

    def run(b, lo, hi):
        if sym.kind == "identity":
            return np.full(hi - lo, float(s))
        rng = _streams.generator(seed, stream, b)
        acc = np.zeros(hi - lo)
        for _ in range(n_steps):
            acc += increments(sym, step, hi - lo, rng, cutoff)
        return acc

    return np.concatenate(_streams.map_blocks(run, n_paths, workers))


def laplace_functional(sym: BernsteinSymbol, lam: float, s: float = 1.0, ds: float = 1e-3,
                       n_paths: int = 100_000, seed: int = 0, workers: int = 1) -> tuple[float, float]:
    """Monte Carlo mean and standard error of ``exp(-lam * H_s)``."""
    h = terminal_values(sym, s, ds, n_paths, seed, workers=workers)
    mean, se, _ = _streams.mean_and_se([np.exp(-lam * h)])
    return mean, se


def empirical_cdf_check(sym: BernsteinSymbol, t: float, s: float, n_paths: int, seed: int,
                        ds: float = 1e-3, workers: int = 1) -> dict:
    """Compare ``P(L_t < s)`` and ``P(H_s > t)`` on independent ensembles.

    ``L_t < s`` holds exactly when the path exceeds ``t`` at a grid time
    strictly before ``s``.
    """
    if n_paths < 1000:
        raise ValueError("empirical_cdf_check needs n_paths >= 1000")
    n_before = int(math.ceil(s / ds - 1e-9)) - 1
    if n_before >= 1:
        h_before = terminal_values(sym, n_before * ds, ds, n_paths, seed, stream=_streams.CLOCK,
                                   workers=workers)
        lhs_samples = (h_before > t).astype(float)
    else:
        lhs_samples = np.zeros(n_paths)
    rhs_samples = (terminal_values(sym, s, ds, n_paths, seed, stream=_streams.CLOCK_ALT,
                                   workers=workers) > t).astype(float)
    lhs, lse, _ = _streams.mean_and_se([lhs_samples])
    rhs, rse, _ = _streams.mean_and_se([rhs_samples])
    denom = math.hypot(lse, rse)
    z = 0.0 if denom == 0.0 else (lhs - rhs) / denom
    return {"lhs": lhs, "rhs": rhs, "z_score": z, "lhs_se": lse, "rhs_se": rse}
