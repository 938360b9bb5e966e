"""Time-fractional evolution ``D^Phi_t u = A u`` by spectral calculus.

With eigenpairs ``(mu_n, phi_n)`` of ``-A`` the solution is

    u(t) = sum_n h(t; mu_n) <f, phi_n>_m phi_n,   h(t; mu) = E exp(-mu L_t),

and its Laplace transform in time is ``(Phi(lam)/lam) (Phi(lam) - A)^{-1} f``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import gamma as gamma_fn

from . import generators as gen
from .bernstein import BernsteinSymbol, SymbolDomainError, _quad, mean_of_H1
from .generators import DiscreteGenerator
from .invlap import DEFAULT_NODES, DEFAULT_TERMS, l_laplace_weights

TRUNCATION_ENERGY = 1e-8


def _require_pure(sym: BernsteinSymbol) -> None:
    # the identity is the drift-only degenerate case and is allowed
    if sym.kind == "triplet" and (sym.killing_rate != 0.0 or sym.drift != 0.0):
        raise SymbolDomainError("time-fractional operators need a symbol with k = 0 and d = 0")


@dataclass(eq=False)
class TimeFracSolution:
    """Spectral representation of ``u(t, .)`` on a time grid.

    ``weights[i, n]`` is ``h(t_grid[i]; mu_n)`` and ``flags[i, n]`` marks
    an unstable inversion.
    """

    generator: DiscreteGenerator
    symbol: BernsteinSymbol
    f: np.ndarray
    coeffs: np.ndarray
    t_grid: np.ndarray
    weights: np.ndarray
    flags: np.ndarray
    truncation_energy: float
    n_modes: int
    meta: dict = field(default_factory=dict)

    @property
    def flagged(self) -> bool:
        return bool(np.any(self.flags))

    @property
    def values(self) -> np.ndarray:
        """``u`` on ``t_grid x grid``; the row for ``t = 0`` is ``f`` itself."""
        phi = self.generator.eigenpairs.phi[:, :self.n_modes]
        out = (self.weights * self.coeffs) @ phi.T
        out[self.t_grid == 0.0] = self.f
        return out

    def at(self, t: float) -> np.ndarray:
        if t == 0.0:
            return self.f.copy()
        ep = self.generator.eigenpairs
        h, _ = l_laplace_weights(self.symbol, ep.mu[:self.n_modes], t)
        return ep.phi[:, :self.n_modes] @ (h * self.coeffs)

    def to_csv(self, path) -> None:
        x = self.generator.grid
        vals = self.values
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "u"])
            for t, row in zip(self.t_grid, vals):
                for xi, ui in zip(x, row):
                    w.writerow([repr(float(t)), repr(float(xi)), repr(float(ui))])

    def metadata(self) -> dict:
        return {"symbol": self.symbol.to_dict(), "generator": self.generator.boundary_spec,
                "n_cells": self.generator.size, "n_modes": self.n_modes,
                "truncation_energy": self.truncation_energy,
                "inversion_flags": int(np.sum(self.flags)), **self.meta}

    def write_metadata(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.metadata(), fh, indent=1, sort_keys=True)


def choose_modes(G: DiscreteGenerator, f: np.ndarray, tol: float = TRUNCATION_ENERGY) -> int:
    """Fewest leading modes whose dropped coefficient energy is below ``tol * |f|^2``."""
    c = gen.coefficients(G, f)
    total = float(np.sum(c * c))
    if total == 0.0:
        return 1
    dropped = total - np.cumsum(c * c)
    ok = np.flatnonzero(dropped <= tol * total)
    return int(ok[0] + 1)


def solve(G: DiscreteGenerator, sym: BernsteinSymbol, f, t_grid, n_modes: int | None = None,
          n_terms: int = DEFAULT_TERMS, n_nodes: int = DEFAULT_NODES) -> TimeFracSolution:
    _require_pure(sym)
    f = np.asarray(f, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid < 0):
        raise ValueError("times must be >= 0")
    if n_modes is None:
        n_modes = choose_modes(G, f)
    if not 1 <= n_modes <= G.size:
        raise ValueError(f"n_modes must lie in [1, {G.size}], got {n_modes}")
    c_all = gen.coefficients(G, f)
    c = c_all[:n_modes]
    dropped = float(np.sum(c_all[n_modes:] ** 2))
    mu = G.eigenpairs.mu[:n_modes]
    W = np.ones((len(t_grid), n_modes))
    F = np.zeros((len(t_grid), n_modes), dtype=bool)
    for i, t in enumerate(t_grid):
        if t > 0:
            W[i], F[i] = l_laplace_weights(sym, mu, float(t), n_terms, n_nodes)
    return TimeFracSolution(G, sym, f, c, t_grid, W, F, dropped, n_modes)


def potential(G: DiscreteGenerator, sym: BernsteinSymbol, f, lam: float) -> np.ndarray:
    """``R^Phi_lam f = (Phi(lam)/lam) R_{Phi(lam)} f``."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    p = float(sym(lam))
    if not p > 0:
        raise ValueError("Phi(lambda) must be positive")
    return (p / lam) * gen.resolvent_apply(G, p, np.asarray(f, dtype=float))


def residual_check(G: DiscreteGenerator, sym: BernsteinSymbol, f, lam_grid) -> float:
    """Max over ``lam`` of ``|A p - Phi p + (Phi/lam) f|_m`` with ``p`` the potential."""
    f = np.asarray(f, dtype=float)
    worst = 0.0
    for lam in lam_grid:
        p = potential(G, sym, f, lam)
        ph = float(sym(lam))
        worst = max(worst, G.norm(G.apply(p) - ph * p + (ph / lam) * f))
    return worst


# fractional derivative ----------------------------------------------------------

def _stable_hat_weights(beta: float, dt: float, n: int) -> np.ndarray:
    z = np.arange(n + 1) * dt
    c = 1.0 / gamma_fn(3.0 - beta)

    def i2(x):
        return c * np.maximum(x, 0.0) ** (2.0 - beta)

    return (i2(z + dt) - 2.0 * i2(z) + i2(z - dt)) / dt


@lru_cache(maxsize=32)
def _levy_hat_weights(sym: BernsteinSymbol, dt: float, n: int) -> np.ndarray:
    """``w_k = int tail(k dt - s) hat_k(s) ds`` written as Levy integrals.

    ``w_k`` is the second difference of ``I2(z) = int_0^z int_0^w tail``;
    it is evaluated from a compactly supported kernel so no cancellation
    occurs for large ``k``.
    """
    pi = sym.levy_density()

    def on(a: float, b: float, g) -> float:
        if b <= a:
            return 0.0
        return _quad(lambda y: g(y) * pi(y), a, b, "hat weight", epsabs=1e-14, epsrel=1e-10)

    out = np.empty(n + 1)
    # k = 0: I2(dt)/dt, with an integrable y pi(y) singularity at 0
    lower = _quad(lambda u: (dt * math.exp(-u)) * (dt - 0.5 * dt * math.exp(-u)) * pi(dt * math.exp(-u))
                  * dt * math.exp(-u), 0.0, np.inf, "hat weight", epsabs=1e-16, epsrel=1e-10)
    out[0] = (0.5 * dt * dt * sym.tail(dt) + lower) / dt
    for k in range(1, n + 1):
        z = k * dt
        left = on(z - dt, z, lambda y: 0.5 * (y - z + dt) ** 2)
        right = on(z, z + dt, lambda y: dt * dt - 0.5 * (z + dt - y) ** 2)
        out[k] = (dt * dt * sym.tail(z + dt) + left + right) / dt
    return out


def frac_derivative(u, dt: float, sym: BernsteinSymbol) -> np.ndarray:
    """``D^Phi_t u`` on a uniform grid ``t_k = k dt``.

    The convolution ``W(t) = int_0^t tail(t - s) (u(s) - u(0)) ds`` is
    computed exactly for the piecewise linear interpolant of ``u``
    (product trapezoid rule) and differentiated with second-order
    differences.
    """
    u = np.asarray(u, dtype=float)
    if not np.isfinite(u[0]):
        raise ValueError("u(0) must be finite")
    if sym.kind == "identity":
        return np.gradient(u, dt, edge_order=2)
    _require_pure(sym)
    n = len(u) - 1
    if sym.kind == "stable":
        w = _stable_hat_weights(sym.params[0], dt, n)
    else:
        w = _levy_hat_weights(sym, float(dt), n)
    v = u - u[0]
    W = np.convolve(w, v)[:n + 1]
    return np.gradient(W, dt, edge_order=2)


def young_bound_check(u, T: float, sym: BernsteinSymbol, p: float = 2.0, n_steps: int = 2000,
                      du=None) -> dict:
    """Compare ``int_0^T |D^Phi u|^p`` with ``(int_0^T |u'|^p) Phi'(0)^p``.

    ``u`` (and optionally its derivative ``du``) are callables on ``[0, T]``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if sym.kind not in ("gamma", "inverse_gaussian", "generalized_stable"):
        raise SymbolDomainError("the bound is only checked for gamma, inverse Gaussian and generalized stable")
    slope = mean_of_H1(sym)
    if not math.isfinite(slope):
        raise SymbolDomainError("Phi'(0) is infinite; the bound is vacuous")
    t = np.linspace(0.0, T, n_steps + 1)
    dt = T / n_steps
    ut = np.asarray(u(t), dtype=float) * np.ones_like(t)
    d = frac_derivative(ut, dt, sym)
    dut = np.asarray(du(t), dtype=float) * np.ones_like(t) if du is not None else np.gradient(ut, dt, edge_order=2)
    lhs = float(trapezoid(np.abs(d) ** p, t))
    rhs = float(trapezoid(np.abs(dut) ** p, t)) * slope ** p
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs * (1.0 + 1e-3) + 1e-14)}


# lifetimes -----------------------------------------------------------------------

def lifetime_mean(G: DiscreteGenerator, sym: BernsteinSymbol, x: float) -> float:
    """``E_x[zeta^Phi] = Phi'(0) E_x[zeta]`` at the cell nearest ``x``."""
    slope = mean_of_H1(sym)
    if not G.is_killing:
        return math.inf
    base = gen.potential_zero(G, np.ones(G.size))
    i = int(np.argmin(np.abs(G.grid - x)))
    return math.inf if math.isinf(slope) else slope * float(base[i])


def exp_lifetime_potential(sym: BernsteinSymbol, c: float, lam: float, strict: bool = True) -> float:
    """``(1/lam) Phi(lam) / (c + Phi(lam))`` for an exponential(c) base lifetime.

    The identity holds for every ``lam > 0``; ``strict`` additionally
    enforces ``Phi(lam) > c``.
    """
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    p = float(sym(lam))
    if strict and not p > c:
        raise SymbolDomainError(f"need Phi(lam) > c: Phi({lam}) = {p:.6g} <= {c}")
    return p / (lam * (c + p))


# spatial subordination -----------------------------------------------------------

def spatial_subordination_compare(G: DiscreteGenerator, phi_sym: BernsteinSymbol, psi_sym: BernsteinSymbol,
                                  f, lam: float) -> dict:
    """Two evaluations of the potential of ``D^Phi_t u = -Psi(-A) u``.

    ``via_potential_identity`` applies the potential identity to the generator with
    spectrum ``Psi(mu_n)``; ``via_squared_ratio`` uses the squared-ratio
    expression ``(Phi/lam) (Psi(Phi)/Phi)^2 R_{Psi(Phi)} f``.
    """
    _require_pure(psi_sym)
    f = np.asarray(f, dtype=float)
    ep = G.eigenpairs
    c = gen.coefficients(G, f)
    ph = float(phi_sym(lam))
    ps = float(psi_sym(ph))
    psi_mu = np.asarray(psi_sym(ep.mu), dtype=float)
    a = ep.phi @ ((ph / lam) * c / (ph + psi_mu))
    b = ep.phi @ ((ph / lam) * (ps / ph) ** 2 * c / (ps + ep.mu))
    return {"via_potential_identity": a, "via_squared_ratio": b, "discrepancy": G.norm(a - b)}
