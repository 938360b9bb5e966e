"""Monte Carlo for base diffusions and their time changes ``X(L_t)``.

Base processes
--------------
* plain: half Brownian motion on ``(l, r)`` killed at finite ends;
* skew: inner region ``(l, ell)`` with unit variance and an outer layer
  ``(ell, r)`` with variance ``eta``, interface skewness ``alpha``, killed at
  both ends. After the change of scale ``y = x - ell`` (inner) and
  ``y = (x - ell)/sqrt(eta)`` (outer) the process is a skew Brownian motion
  with parameter ``p = alpha / (alpha + (1 - alpha) sqrt(eta))``, which is
  stepped exactly: ``|y|`` is a reflected Brownian motion, and the sign is
  redrawn with probability ``p`` whenever the step touches 0;
* reflect: half Brownian motion on ``(l, r)`` killed at ``l`` and reflected
  at ``r``, with its boundary local time sampled exactly from the joint law
  of the endpoint and minimum of a Brownian step. A Robin coefficient ``c``
  kills the path once ``c * local_time`` exceeds an Exp(1) threshold.

Killing at a boundary between grid times is detected with the Brownian
bridge crossing probability ``exp(-2 d0 d1 / h)``.

Random streams: subordinator draws use ``CLOCK``, base increments ``BASE``
and killing thresholds ``EXTRA`` (see :mod:`fracmosco._streams`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _streams
from .bernstein import BernsteinSymbol, mean_of_H1
from .subpaths import DEFAULT_CUTOFF, PathExhaustedError, increments

MAX_STEPS = 2_000_000


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class DiffusionSpec:
    """Base diffusion on ``(l, r)``.

    ``ell`` set and ``right == "kill"`` selects the skew-layer process with
    layer ``(ell, r)``. ``right == "reflect"`` reflects at ``r`` with elastic
    killing rate ``robin_c`` per unit local time (``inf`` absorbs at the
    first visit). ``kill_rate`` adds killing at a constant rate.
    """

    l: float = 0.0
    r: float = math.pi
    ell: float | None = None
    alpha: float = 0.5
    eta: float = 1.0
    dt: float = 1e-3
    scheme: str = "exact"
    right: str = "kill"
    robin_c: float = 0.0
    kill_rate: float = 0.0

    def __post_init__(self):
        if not self.l < self.r:
            raise SpecError(f"need l < r, got l={self.l}, r={self.r}")
        if not 0.0 < self.alpha < 1.0:
            raise SpecError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.eta > 0:
            raise SpecError(f"eta must be positive, got {self.eta}")
        if not self.dt > 0:
            raise SpecError(f"dt must be positive, got {self.dt}")
        if self.scheme not in ("exact", "euler"):
            raise SpecError(f"unknown scheme {self.scheme!r}")
        if self.right not in ("kill", "reflect"):
            raise SpecError(f"right must be 'kill' or 'reflect', got {self.right!r}")
        if self.right == "reflect" and (self.ell is not None or not math.isfinite(self.r)):
            raise SpecError("a reflecting end needs a finite r and no layer")
        if self.robin_c < 0 or self.kill_rate < 0:
            raise SpecError("killing rates must be >= 0")
        if self.ell is not None:
            if not self.l < self.ell < self.r or not math.isfinite(self.r):
                raise SpecError("need l < ell < r with finite r for a layer")
            eps = self.r - self.ell
            if not math.sqrt(self.eta * self.dt) < eps / 4.0:
                raise SpecError(
                    f"dt={self.dt} too coarse for the layer: sqrt(eta*dt)={math.sqrt(self.eta * self.dt):.3g} "
                    f">= eps/4={eps / 4:.3g}")

    @property
    def mode(self) -> str:
        if self.right == "reflect":
            return "reflect"
        return "skew" if self.ell is not None else "plain"

    @property
    def eps(self) -> float:
        return 0.0 if self.ell is None else self.r - self.ell

    @property
    def skewness(self) -> float:
        """Sign probability of the mapped skew Brownian motion."""
        a = self.alpha
        return a / (a + (1.0 - a) * math.sqrt(self.eta))

    @classmethod
    def plain(cls, l: float = 0.0, r: float = math.pi, dt: float = 1e-3, **kw) -> "DiffusionSpec":
        return cls(l=l, r=r, dt=dt, **kw)

    @classmethod
    def skew(cls, l: float, ell: float, eps: float, alpha: float, eta: float, dt: float, **kw) -> "DiffusionSpec":
        return cls(l=l, r=ell + eps, ell=ell, alpha=alpha, eta=eta, dt=dt, **kw)

    @classmethod
    def reflecting(cls, l: float, ell: float, c: float = 0.0, dt: float = 1e-3) -> "DiffusionSpec":
        return cls(l=l, r=ell, right="reflect", robin_c=c, dt=dt)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("l", "r", "ell", "alpha", "eta", "dt", "scheme",
                                               "right", "robin_c", "kill_rate")}


@dataclass
class EstimatorResult:
    value: float
    std_error: float
    n_paths: int
    seed: int
    flagged: bool = False
    note: str = ""
    extra: dict = field(default_factory=dict)

    def z_score(self, target: float) -> float:
        if self.std_error == 0.0:
            return 0.0 if self.value == target else math.copysign(math.inf, self.value - target)
        return (self.value - target) / self.std_error

    def row(self, experiment_id: str, estimator: str) -> list:
        return [experiment_id, estimator, repr(float(self.value)), repr(float(self.std_error)),
                self.n_paths, self.seed]


CSV_COLUMNS = ["experiment_id", "estimator", "value", "std_error", "n_paths", "seed"]


def _result(chunks, n_paths: int, seed: int, **kw) -> EstimatorResult:
    mean, se, n = _streams.mean_and_se(chunks)
    assert n == n_paths
    return EstimatorResult(mean, se, n_paths, seed, **kw)


def as_function(f, grid=None) -> Callable[[np.ndarray], np.ndarray]:
    """Callable from a callable, a constant, or grid values (linear interpolation)."""
    if callable(f):
        return f
    if np.isscalar(f):
        c = float(f)
        return lambda x: np.full(np.shape(x), c)
    if grid is None:
        raise ValueError("grid values need their grid")
    g, v = np.asarray(grid, dtype=float), np.asarray(f, dtype=float)
    return lambda x: np.interp(x, g, v)


# base-process stepping -----------------------------------------------------------

@dataclass
class _State:
    x: np.ndarray
    alive: np.ndarray
    s: np.ndarray          # operational time reached
    zeta: np.ndarray       # lifetime (inf while alive)
    lt: np.ndarray         # local time at a reflecting end
    occ: np.ndarray        # occupation times of boundary shells (2 columns)
    v_rate: np.ndarray     # Exp(1) thresholds for constant-rate killing
    v_robin: np.ndarray    # Exp(1) thresholds for elastic killing


def _init_state(spec: DiffusionSpec, x0: float, n: int, extra: np.random.Generator) -> _State:
    if spec.mode == "reflect":
        inside = spec.l < x0 <= spec.r
    else:
        inside = spec.l < x0 < spec.r
    if not inside:
        raise SpecError(f"x0={x0} must lie inside the domain")
    v = extra.standard_exponential((2, n))
    return _State(np.full(n, float(x0)), np.ones(n, bool), np.zeros(n), np.full(n, math.inf),
                  np.zeros(n), np.zeros((n, 2)), v[0], v[1])


def _bridge_prob(d0, d1, h):
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        p = np.exp(-2.0 * np.maximum(d0, 0.0) * np.maximum(d1, 0.0) / h)
    return np.where((d0 > 0) & (d1 > 0), p, 1.0)


def _step_plain(spec, x, h, rng):
    z = rng.standard_normal(len(x))
    u = rng.random(len(x))
    sh = np.sqrt(h)
    xn = x + sh * z
    p = np.zeros(len(x))
    if math.isfinite(spec.l):
        p += _bridge_prob(x - spec.l, xn - spec.l, h)
    if math.isfinite(spec.r):
        p += _bridge_prob(spec.r - x, spec.r - xn, h)
    return xn, u < p


def _step_skew(spec, x, h, rng):
    n = len(x)
    z = rng.standard_normal(n)
    u_touch = rng.random(n)
    u_side = rng.random(n)
    u_kill = rng.random(n)
    se = math.sqrt(spec.eta)
    ell = spec.ell
    y = np.where(x < ell, x - ell, (x - ell) / se)
    yl, yr = spec.l - ell, (spec.r - ell) / se
    sh = np.sqrt(h)
    if spec.scheme == "exact":
        a = np.abs(y)
        w = a + sh * z
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            p_touch = np.where(w <= 0, 1.0, np.exp(-2.0 * a * np.maximum(w, 0.0) / h))
        touched = u_touch < p_touch
        side = np.where(touched, np.where(u_side < spec.skewness, 1.0, -1.0), np.where(y >= 0, 1.0, -1.0))
        yn = side * np.abs(w)
    else:
        # Euler: move with the local variance, redraw the side with prob. alpha on crossing
        yf = y + sh * z
        crossed = (y >= 0) != (yf >= 0)
        side = np.where(u_side < spec.alpha, 1.0, -1.0)
        yn = np.where(crossed, side * np.abs(yf), yf)
    p = _bridge_prob(y - yl, yn - yl, h) + _bridge_prob(yr - y, yr - yn, h)
    xn = np.where(yn < 0, ell + yn, ell + se * yn)
    return xn, u_kill < p


def _step_reflect(spec, x, h, rng):
    n = len(x)
    z = rng.standard_normal(n)
    u_min = rng.random(n)
    u_kill = rng.random(n)
    sh = np.sqrt(h)
    a = spec.r - x
    w = a + sh * z
    # minimum of the free step given its endpoints, then the Skorokhod push
    low = 0.5 * (a + w - np.sqrt((a - w) ** 2 - 2.0 * h * np.log(u_min)))
    dl = np.maximum(0.0, -low)
    an = w + dl
    xn = spec.r - an
    p = _bridge_prob(x - spec.l, xn - spec.l, h) if math.isfinite(spec.l) else np.zeros(n)
    return xn, u_kill < p, dl


def _advance(spec: DiffusionSpec, st: _State, idx: np.ndarray, h, rng: np.random.Generator,
             shells: tuple | None = None) -> None:
    """Advance the paths ``idx`` (all alive) by ``h``."""
    if len(idx) == 0:
        return
    h = np.broadcast_to(np.asarray(h, dtype=float), idx.shape)
    x0 = st.x[idx]
    dl = None
    if spec.mode == "plain":
        xn, killed = _step_plain(spec, x0, h, rng)
    elif spec.mode == "skew":
        xn, killed = _step_skew(spec, x0, h, rng)
    else:
        xn, killed, dl = _step_reflect(spec, x0, h, rng)
    s0 = st.s[idx]
    s1 = s0 + h
    zeta = np.where(killed, s0 + 0.5 * h, math.inf)
    if dl is not None:
        lt1 = st.lt[idx] + dl
        if shells is not None:
            for k, delta in enumerate(shells):
                inside = 0.5 * ((spec.r - x0 < delta).astype(float) + (spec.r - xn < delta))
                st.occ[idx, k] += inside * h
        if spec.robin_c == math.inf:
            hit = dl > 0
        elif spec.robin_c > 0:
            hit = spec.robin_c * lt1 >= st.v_robin[idx]
        else:
            hit = np.zeros(len(idx), bool)
        zeta = np.where(hit & ~killed, s0 + 0.5 * h, zeta)
        killed = killed | hit
        st.lt[idx] = lt1
    if spec.kill_rate > 0:
        t_rate = st.v_rate[idx] / spec.kill_rate
        rate_kill = t_rate <= s1
        zeta = np.minimum(zeta, np.where(rate_kill, t_rate, math.inf))
        killed = killed | rate_kill
    st.x[idx] = xn
    st.s[idx] = s1
    st.alive[idx] = ~killed
    st.zeta[idx] = zeta


def _simulate_to(spec: DiffusionSpec, x0: float, targets: np.ndarray, rng, extra) -> _State:
    """Run each path to its own operational time ``targets[i]`` (or death)."""
    n = len(targets)
    st = _init_state(spec, x0, n, extra)
    dt = spec.dt
    n_full = np.floor(targets / dt * (1.0 + 1e-12)).astype(np.int64)
    rem = targets - n_full * dt
    rem = np.where(rem < 1e-9 * dt, 0.0, rem)
    for k in range(int(n_full.max(initial=0))):
        idx = np.flatnonzero(st.alive & (n_full > k))
        if len(idx) == 0:
            break
        _advance(spec, st, idx, dt, rng)
    idx = np.flatnonzero(st.alive & (rem > 0))
    _advance(spec, st, idx, rem[idx], rng)
    return st


@dataclass
class BasePath:
    s: np.ndarray
    x: np.ndarray
    zeta: float
    local_time: np.ndarray | None = None


def simulate_base_path(spec: DiffusionSpec, x0: float, t_max: float, seed: int) -> BasePath:
    """One path on the grid ``k * dt`` up to ``t_max`` or its lifetime."""
    rng = _streams.generator(seed, _streams.BASE, 0)
    extra = _streams.generator(seed, _streams.EXTRA, 0)
    st = _init_state(spec, x0, 1, extra)
    s, xs, lts = [0.0], [float(x0)], [0.0]
    n_steps = int(math.ceil(t_max / spec.dt - 1e-9))
    idx = np.array([0])
    for _ in range(n_steps):
        _advance(spec, st, idx, spec.dt, rng)
        s.append(float(st.s[0]))
        xs.append(float(st.x[0]))
        lts.append(float(st.lt[0]))
        if not st.alive[0]:
            break
    return BasePath(np.array(s), np.array(xs), float(st.zeta[0]),
                    np.array(lts) if spec.mode == "reflect" else None)


def exit_statistics(spec: DiffusionSpec, x0: float, n_paths: int, seed: int, t_max: float = 200.0,
                    workers: int = 1) -> dict:
    """Mean lifetime and probability of leaving through the right end."""
    def run(b, lo, hi):
        rng = _streams.generator(seed, _streams.BASE, b)
        extra = _streams.generator(seed, _streams.EXTRA, b)
        st = _run_to_death(spec, x0, hi - lo, rng, extra, t_max)
        right = (st.x >= (spec.l + spec.r) / 2) & ~st.alive
        return np.minimum(st.zeta, t_max), right.astype(float), st.alive.astype(float)

    out = _streams.map_blocks(run, n_paths, workers)
    life = _result([o[0] for o in out], n_paths, seed)
    right = _result([o[1] for o in out], n_paths, seed)
    cens = float(np.mean(np.concatenate([o[2] for o in out])))
    return {"lifetime": life, "exit_right": right, "censored": cens}


def _run_to_death(spec, x0, n, rng, extra, t_max, shells=None) -> _State:
    st = _init_state(spec, x0, n, extra)
    for _ in range(int(math.ceil(t_max / spec.dt))):
        idx = np.flatnonzero(st.alive)
        if len(idx) == 0:
            break
        _advance(spec, st, idx, spec.dt, rng, shells)
    return st


# subordinator helpers ---------------------------------------------------------------

def inverse_at(sym: BernsteinSymbol, t: float, n: int, ds: float, rng: np.random.Generator,
               cutoff: float = DEFAULT_CUTOFF) -> np.ndarray:
    """``L_t`` for ``n`` independent paths, by streaming first passage.

    The crossing is located by linear interpolation inside the crossing step.
    """
    if sym.kind == "identity":
        return np.full(n, float(t))
    h = np.zeros(n)
    out = np.full(n, math.nan)
    todo = np.arange(n)
    s = 0.0
    for _ in range(MAX_STEPS):
        inc = increments(sym, ds, len(todo), rng, cutoff)
        h_new = h[todo] + inc
        cross = h_new > t
        if np.any(cross):
            ci = todo[cross]
            with np.errstate(invalid="ignore", divide="ignore"):
                frac = np.where(inc[cross] > 0, (t - h[ci]) / inc[cross], 0.0)
            out[ci] = s + np.clip(frac, 0.0, 1.0) * ds
        h[todo] = h_new
        todo = todo[~cross]
        s += ds
        if len(todo) == 0:
            return out
    raise PathExhaustedError(t, float(np.min(h[todo])))


# estimators ----------------------------------------------------------------------------

def estimate_base(spec: DiffusionSpec, f, t: float, x0: float, n_paths: int, seed: int,
                  workers: int = 1) -> EstimatorResult:
    """Plain ``E_x[f(X_t), t < zeta]``."""
    return estimate_timechanged(spec, BernsteinSymbol.identity(), f, t, x0, n_paths, seed, workers=workers)


def estimate_timechanged(spec: DiffusionSpec, sym: BernsteinSymbol, f, t: float, x0: float, n_paths: int,
                         seed: int, ds: float | None = None, workers: int = 1) -> EstimatorResult:
    """``E_x[f(X_{L_t}), L_t < zeta]`` with independent ``X`` and ``L``."""
    f = as_function(f)
    ds = spec.dt if ds is None else ds

    def run(b, lo, hi):
        L = inverse_at(sym, t, hi - lo, ds, _streams.generator(seed, _streams.CLOCK, b))
        st = _simulate_to(spec, x0, L, _streams.generator(seed, _streams.BASE, b),
                          _streams.generator(seed, _streams.EXTRA, b))
        return np.where(st.alive, f(st.x), 0.0)

    return _result(_streams.map_blocks(run, n_paths, workers), n_paths, seed)


def sample_timechanged(spec: DiffusionSpec, sym: BernsteinSymbol, t: float, x0: float, n_paths: int, seed: int,
                       clock_stream: int = _streams.CLOCK, base_stream: int = _streams.BASE,
                       ds: float | None = None, workers: int = 1) -> np.ndarray:
    """Positions ``X_{L_t}``; killed paths are ``nan``."""
    ds = spec.dt if ds is None else ds

    def run(b, lo, hi):
        L = inverse_at(sym, t, hi - lo, ds, _streams.generator(seed, clock_stream, b))
        st = _simulate_to(spec, x0, L, _streams.generator(seed, base_stream, b),
                          _streams.generator(seed, _streams.EXTRA + 10 * base_stream, b))
        return np.where(st.alive, st.x, math.nan)

    return np.concatenate(_streams.map_blocks(run, n_paths, workers))


def estimate_potential(spec: DiffusionSpec, sym: BernsteinSymbol, f, lam: float, x0: float, n_paths: int,
                       seed: int, ds: float | None = None, tol: float = 1e-12, max_steps: int = MAX_STEPS,
                       workers: int = 1) -> EstimatorResult:
    """``E_x int_0^inf exp(-lam t) f(X_{L_t}) dt``.

    Substituting ``t = H_s`` the integral becomes a Stieltjes sum over the
    operational grid, ``sum_j (f(X_{s_j-1}) + f(X_{s_j}))/2 *
    (exp(-lam H_{s_j-1}) - exp(-lam H_{s_j})) / lam``, with ``f = 0`` after
    the lifetime. Each path stops once ``exp(-lam H) < tol``.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    f = as_function(f)
    ds = spec.dt if ds is None else ds
    if abs(ds - spec.dt) > 1e-15 * ds:
        raise ValueError("the potential estimator steps X and H together; ds must equal spec.dt")

    def run(b, lo, hi):
        n = hi - lo
        clock = _streams.generator(seed, _streams.CLOCK, b)
        base = _streams.generator(seed, _streams.BASE, b)
        st = _init_state(spec, x0, n, _streams.generator(seed, _streams.EXTRA, b))
        H = np.zeros(n)
        disc = np.ones(n)
        fx = f(st.x)
        acc = np.zeros(n)
        active = np.arange(n)
        for _ in range(max_steps):
            if len(active) == 0:
                break
            H[active] += increments(sym, ds, len(active), clock)
            _advance(spec, st, active, ds, base)
            d_new = np.exp(-lam * H[active])
            f_new = np.where(st.alive[active], f(st.x[active]), 0.0)
            acc[active] += 0.5 * (fx[active] + f_new) * (disc[active] - d_new) / lam
            disc[active] = d_new
            fx[active] = f_new
            active = active[st.alive[active] & (d_new > tol)]
        return acc, float(np.max(disc[st.alive], initial=0.0))

    out = _streams.map_blocks(run, n_paths, workers)
    worst = max(o[1] for o in out)
    flagged = worst > 1e-6
    return _result([o[0] for o in out], n_paths, seed, flagged=flagged,
                   note="horizon truncation" if flagged else "")


def estimate_lifetime(spec: DiffusionSpec, sym: BernsteinSymbol, x0: float, n_paths: int, seed: int,
                      t_max: float = 200.0, workers: int = 1) -> EstimatorResult:
    """``E_x[zeta^Phi]`` with ``zeta^Phi = H_zeta`` drawn exactly given ``zeta``."""
    slope = mean_of_H1(sym)

    def run(b, lo, hi):
        st = _run_to_death(spec, x0, hi - lo, _streams.generator(seed, _streams.BASE, b),
                           _streams.generator(seed, _streams.EXTRA, b), t_max)
        zeta = np.where(st.alive, t_max, st.zeta)
        if sym.kind == "identity":
            life = zeta
        else:
            life = increments(sym, zeta, len(zeta), _streams.generator(seed, _streams.CLOCK, b))
        return life, st.alive.astype(float)

    out = _streams.map_blocks(run, n_paths, workers)
    cens = float(np.mean(np.concatenate([o[1] for o in out])))
    if not math.isfinite(slope):
        return EstimatorResult(math.inf, math.nan, n_paths, seed, flagged=True,
                               note="diverging: Phi'(0) is infinite", extra={"censored": cens})
    res = _result([o[0] for o in out], n_paths, seed, extra={"censored": cens})
    if cens > 0.01:
        res.flagged = True
        res.note = f"censored fraction {cens:.3g} at horizon {t_max}"
    return res


def local_time_functional(spec_reflecting: DiffusionSpec, sym: BernsteinSymbol, c: float, x0: float,
                          n_paths: int, seed: int, estimator: str = "exact", t_max: float = 400.0,
                          workers: int = 1) -> EstimatorResult:
    """``E_x int_0^inf exp(-c gamma_{L_t}) 1(L_t < tau_l) dt``.

    ``gamma`` is the local time at the reflecting end ``r``; ``c = inf``
    means absorption there. The integral equals ``int exp(-c gamma_s)
    1(s < tau_l) dH_s`` and is summed over the operational grid with
    subordinator increments. ``estimator="occupation"`` replaces the exact
    local time by shell occupation ``(1/2delta) |{s : r - X_s < delta}|``
    with ``delta = 4 sqrt(dt)``, Richardson-combined with ``2 delta``.
    """
    if spec_reflecting.mode != "reflect":
        raise SpecError("local_time_functional needs a reflecting spec")
    if not c >= 0:
        raise ValueError("c must be >= 0")
    spec = DiffusionSpec.reflecting(spec_reflecting.l, spec_reflecting.r, 0.0, spec_reflecting.dt)
    dt = spec.dt
    shells = None
    if estimator == "occupation":
        d1 = 4.0 * math.sqrt(dt)
        if not d1 > 3.0 * math.sqrt(dt):
            raise SpecError("shell width must exceed 3 sqrt(dt)")
        shells = (d1, 2.0 * d1)
    elif estimator != "exact":
        raise ValueError(f"unknown estimator {estimator!r}")

    def gamma_of(st, idx):
        if shells is None:
            return st.lt[idx]
        g1 = st.occ[idx, 0] / (2.0 * shells[0])
        g2 = st.occ[idx, 1] / (2.0 * shells[1])
        return np.maximum(2.0 * g1 - g2, 0.0)

    def weight(st, idx):
        g = gamma_of(st, idx)
        if c == math.inf:
            w = (g == 0.0).astype(float) if shells is None else np.exp(-1e12 * g)
        else:
            w = np.exp(-c * g)
        return np.where(st.alive[idx], w, 0.0)

    def run(b, lo, hi):
        n = hi - lo
        clock = _streams.generator(seed, _streams.CLOCK, b)
        base = _streams.generator(seed, _streams.BASE, b)
        st = _init_state(spec, x0, n, _streams.generator(seed, _streams.EXTRA, b))
        acc = np.zeros(n)
        idx_all = np.arange(n)
        w_prev = weight(st, idx_all)
        active = idx_all
        for _ in range(int(math.ceil(t_max / dt))):
            if len(active) == 0:
                break
            dH = increments(sym, dt, len(active), clock)
            _advance(spec, st, active, dt, base, shells)
            w_new = weight(st, active)
            acc[active] += 0.5 * (w_prev[active] + w_new) * dH
            w_prev[active] = w_new
            active = active[st.alive[active] & (w_new > 1e-14)]
        return acc, float(len(active))

    out = _streams.map_blocks(run, n_paths, workers)
    cens = sum(o[1] for o in out) / n_paths
    res = _result([o[0] for o in out], n_paths, seed, extra={"censored": cens})
    if cens > 0.01:
        res.flagged = True
        res.note = f"censored fraction {cens:.3g}"
    return res


def local_time_oracle(sym: BernsteinSymbol, c: float, x0: float, l: float, ell: float) -> float:
    """``Phi'(0) u(x0)`` with ``-u''/2 = 1``, ``u(l) = 0``, ``u'(ell) + c u(ell) = 0``."""
    L = ell - l
    y = x0 - l
    if c == math.inf:
        A = L
    else:
        A = L * (2.0 + c * L) / (1.0 + c * L)
    return mean_of_H1(sym) * (A * y - y * y)


# subordinator-only functionals -------------------------------------------------------

def clock_functionals(sym: BernsteinSymbol, c: float, lam: float, n_paths: int, seed: int, ds: float = 1e-2,
                      tol: float = 1e-13, workers: int = 1) -> dict:
    """Two routes to ``int e^{-lam t} e^{-c L_t} dt`` in expectation.

    ``via_L``: Stieltjes sum of ``e^{-c s}`` (midpoint in ``s``) against
    ``-d e^{-lam H_s} / lam`` on the ``CLOCK`` ensemble.
    ``via_H``: ``Phi(lam)/lam`` times the trapezoid integral of
    ``e^{-lam H_s} e^{-c s}`` on an independent ``CLOCK_ALT`` ensemble.
    """
    def run_L(b, lo, hi):
        rng = _streams.generator(seed, _streams.CLOCK, b)
        n = hi - lo
        H = np.zeros(n)
        acc = np.zeros(n)
        active = np.arange(n)
        s = 0.0
        while len(active):
            d0 = np.exp(-lam * H[active])
            H[active] += increments(sym, ds, len(active), rng)
            d1 = np.exp(-lam * H[active])
            acc[active] += math.exp(-c * (s + 0.5 * ds)) * (d0 - d1) / lam
            s += ds
            active = active[d1 * math.exp(-c * s) > tol]
        return acc

    def run_H(b, lo, hi):
        rng = _streams.generator(seed, _streams.CLOCK_ALT, b)
        n = hi - lo
        H = np.zeros(n)
        acc = np.zeros(n)
        g_prev = np.ones(n)
        active = np.arange(n)
        s = 0.0
        while len(active):
            H[active] += increments(sym, ds, len(active), rng)
            s += ds
            g = np.exp(-lam * H[active] - c * s)
            acc[active] += 0.5 * ds * (g_prev[active] + g)
            g_prev[active] = g
            active = active[g > tol]
        return acc

    via_L = _result(_streams.map_blocks(run_L, n_paths, workers), n_paths, seed)
    raw = _result(_streams.map_blocks(run_H, n_paths, workers), n_paths, seed)
    k = float(sym(lam)) / lam
    via_H = EstimatorResult(k * raw.value, k * raw.std_error, n_paths, seed)
    closed = float(sym(lam)) / (lam * (c + float(sym(lam))))
    return {"via_L": via_L, "via_H": via_H, "closed_form": closed}
