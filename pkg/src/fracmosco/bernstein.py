"""Bernstein functions: Laplace exponents of subordinators.

A symbol is either one of the closed-form families (identity, stable,
generalized stable, gamma, inverse Gaussian) or is built from a Levy
triplet ``(k, d, Pi)``::

    Phi(lam) = k + d*lam + int_0^inf (1 - exp(-lam*z)) Pi(dz)

Integrals against ``Pi`` are split at ``z = 1`` and computed with
adaptive Gauss-Kronrod quadrature (QUADPACK) after the substitutions
``z = exp(-u)`` on ``(0, 1]`` and ``z = exp(u)`` on ``[1, inf)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-12
QUAD_LIMIT = 400

KINDS = ("identity", "stable", "generalized_stable", "gamma", "inverse_gaussian", "triplet")


class SymbolDomainError(ValueError):
    """Argument outside the domain of a symbol operation."""


class IntegrabilityError(ArithmeticError):
    """A Levy-measure integral failed to converge."""


def _safe(fn: Callable[[float], float]) -> Callable[[float], float]:
    # quadrature nodes far out in u produce z that under/overflows; the
    # integrand is negligible there for every admissible density
    def wrapped(u: float) -> float:
        try:
            with np.errstate(all="ignore"):
                v = fn(u)
        except (ZeroDivisionError, OverflowError):
            return 0.0
        return float(v) if np.isfinite(v) else 0.0

    return wrapped


def _quad(fn: Callable[[float], float], a: float, b: float, what: str,
          epsabs: float = QUAD_EPSABS, epsrel: float = QUAD_EPSREL,
          limit: int = QUAD_LIMIT, points=None) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if points is None:
                val, err = integrate.quad(_safe(fn), a, b, epsabs=epsabs, epsrel=epsrel, limit=limit)
            else:
                val, err = integrate.quad(_safe(fn), a, b, epsabs=epsabs, epsrel=epsrel,
                                          limit=limit, points=points)
        except integrate.IntegrationWarning as exc:
            # retry with a looser relative tolerance; a genuinely divergent
            # integral still fails the error-estimate test below
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            kw = dict(epsabs=epsabs, epsrel=1e-8, limit=4 * limit)
            if points is not None:
                kw["points"] = points
            val, err = integrate.quad(_safe(fn), a, b, **kw)
            if not np.isfinite(val) or err > max(1e-6, 1e-6 * abs(val)):
                raise IntegrabilityError(f"{what}: quadrature did not converge ({exc})") from exc
    if not np.isfinite(val):
        raise IntegrabilityError(f"{what}: non-finite quadrature result")
    return val


def integrate_levy(g: Callable[[float], float], density: Callable[[float], float], what: str = "levy integral",
                   epsabs: float = QUAD_EPSABS) -> float:
    """Return ``int_0^inf g(z) density(z) dz`` split at ``z = 1``."""
    lower = _quad(lambda u: g(math.exp(-u)) * density(math.exp(-u)) * math.exp(-u),
                  0.0, np.inf, what, epsabs=epsabs)
    upper = _quad(lambda u: g(math.exp(u)) * density(math.exp(u)) * math.exp(u),
                  0.0, np.inf, what, epsabs=epsabs)
    return lower + upper


@dataclass(frozen=True)
class LevyTriplet:
    """Killing rate, drift and Levy density of a subordinator.

    ``levy_density`` maps ``z > 0`` to the density of ``Pi`` and must
    satisfy ``int (1 ^ z) Pi(dz) < inf``; :meth:`check_integrability`
    tests this numerically.
    """

    levy_density: Callable[[float], float]
    killing_rate: float = 0.0
    drift: float = 0.0
    label: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (self.killing_rate >= 0.0 and math.isfinite(self.killing_rate)):
            raise SymbolDomainError(f"killing_rate must be finite and >= 0, got {self.killing_rate}")
        if not (self.drift >= 0.0 and math.isfinite(self.drift)):
            raise SymbolDomainError(f"drift must be finite and >= 0, got {self.drift}")

    def check_integrability(self, z_max: float = 50.0, tol: float = 1e-6) -> float:
        """Quadrature of ``int_0^z_max (1 ^ z) Pi(dz)`` under refinement.

        Three successively tighter quadratures must agree to ``tol``
        relative; returns the finest value.
        """
        pi = self.levy_density
        prev = None
        for epsabs, limit in ((1e-8, 100), (1e-10, 200), (1e-12, 400)):
            small = _quad(lambda u: math.exp(-u) * pi(math.exp(-u)) * math.exp(-u), 0.0, np.inf,
                          "integrability witness", epsabs=epsabs, limit=limit)
            big = 0.0
            if z_max > 1.0:
                big = _quad(pi, 1.0, z_max, "integrability witness", epsabs=epsabs, limit=limit)
            cur = small + big
            if prev is not None and abs(cur - prev) > tol * max(abs(cur), 1e-300):
                raise IntegrabilityError(
                    f"int (1^z) Pi(dz) unstable under refinement: {prev!r} -> {cur!r}")
            prev = cur
        # overflow guards can turn a divergent integral into a large finite
        # number, so also require the mass of z Pi(dz) near 0 to settle
        def near(delta):
            return _quad(lambda u: math.exp(u) * pi(math.exp(u)) * math.exp(u), math.log(delta), 0.0,
                         "integrability witness", epsabs=1e-14, epsrel=1e-10)

        m = [near(d) for d in (1e-4, 1e-8, 1e-12)]
        if m[2] - m[1] > max(0.99 * (m[1] - m[0]), tol * max(prev, 1e-300)) or prev > 1e12:
            raise IntegrabilityError("int_0^1 z Pi(dz) does not converge at 0")
        return prev

    def has_infinite_activity(self) -> bool:
        """Heuristic test of ``Pi((0, inf)) = inf``.

        The mass of ``Pi`` on ``(delta, 1)`` keeps growing as ``delta`` goes
        from 1e-8 to 1e-12 only when the measure has infinite activity.
        """
        pi = self.levy_density

        def mass(delta: float) -> float:
            return _quad(lambda u: pi(math.exp(u)) * math.exp(u), math.log(delta), 0.0,
                         "activity check", epsabs=1e-14, epsrel=1e-10)

        m8, m12 = mass(1e-8), mass(1e-12)
        return (m12 - m8) > 1e-6 * max(1.0, m8)

    def phi(self, lam: float) -> float:
        if lam == 0.0:
            return self.killing_rate
        jumps = integrate_levy(lambda z: -math.expm1(-lam * z), self.levy_density,
                               f"Phi({lam}) jump integral")
        return self.killing_rate + self.drift * lam + jumps

    def tail(self, z: float) -> float:
        """``k + Pi((z, inf))``."""
        if not z > 0:
            raise SymbolDomainError(f"tail needs z > 0, got {z}")
        pi = self.levy_density
        mass = _quad(lambda u: pi(z * math.exp(u)) * z * math.exp(u), 0.0, np.inf, f"tail({z})")
        return self.killing_rate + mass

    def tail_laplace(self, lam: float) -> float:
        """``int_0^inf exp(-lam z) tail(z) dz`` by nested quadrature."""
        if not lam > 0:
            raise SymbolDomainError(f"tail_laplace needs lam > 0, got {lam}")

        def g(z: float) -> float:
            if z <= 0.0 or math.isinf(z):
                return 0.0
            return math.exp(-lam * z) * self.tail(z)

        lower = _quad(lambda u: g(math.exp(-u)) * math.exp(-u), 0.0, np.inf, "tail transform",
                      epsabs=1e-11, epsrel=1e-9)
        upper = _quad(lambda u: g(math.exp(u)) * math.exp(u), 0.0, np.inf, "tail transform",
                      epsabs=1e-11, epsrel=1e-9)
        return lower + upper


# closed-form Levy densities -------------------------------------------------

def _stable_density(beta: float):
    c = beta / gamma_fn(1.0 - beta)
    return lambda z: c * z ** (-1.0 - beta)


def _tempered_stable_density(alpha: float, gam: float):
    c = alpha / gamma_fn(1.0 - alpha)
    return lambda z: c * z ** (-1.0 - alpha) * math.exp(-gam * z)


def _gamma_density(a: float, b: float):
    return lambda z: a * math.exp(-b * z) / z


def _inverse_gaussian_density(sigma: float, mu: float):
    c = 1.0 / (abs(sigma) * math.sqrt(2.0 * math.pi))
    rate = mu * mu / (2.0 * sigma * sigma)
    return lambda z: c * z ** -1.5 * math.exp(-rate * z)


@dataclass(frozen=True)
class BernsteinSymbol:
    """A Laplace exponent ``Phi`` of a subordinator.

    Build instances with the class methods (``BernsteinSymbol.stable(0.5)``
    and so on). Calling the symbol evaluates ``Phi`` element-wise.
    """

    kind: str
    params: tuple = ()
    triplet: LevyTriplet | None = None

    # constructors ------------------------------------------------------

    @classmethod
    def identity(cls) -> "BernsteinSymbol":
        return cls("identity")

    @classmethod
    def stable(cls, beta: float) -> "BernsteinSymbol":
        if not 0.0 < beta < 1.0:
            raise SymbolDomainError(f"stable index beta must lie in (0, 1), got {beta}")
        return cls("stable", (float(beta),))

    @classmethod
    def generalized_stable(cls, alpha: float, gam: float) -> "BernsteinSymbol":
        if not 0.0 < alpha < 1.0:
            raise SymbolDomainError(f"alpha must lie in (0, 1), got {alpha}")
        if not gam > 0.0:
            raise SymbolDomainError(f"gamma must be > 0, got {gam}")
        return cls("generalized_stable", (float(alpha), float(gam)))

    @classmethod
    def gamma(cls, a: float, b: float) -> "BernsteinSymbol":
        if not (a > 0.0 and b > 0.0):
            raise SymbolDomainError(f"gamma symbol needs a > 0 and b > 0, got a={a}, b={b}")
        return cls("gamma", (float(a), float(b)))

    @classmethod
    def inverse_gaussian(cls, sigma: float, mu: float) -> "BernsteinSymbol":
        if sigma == 0.0 or not math.isfinite(sigma):
            raise SymbolDomainError("inverse Gaussian symbol needs sigma != 0")
        if not mu > 0.0:
            raise SymbolDomainError(f"inverse Gaussian symbol needs mu > 0, got {mu}")
        return cls("inverse_gaussian", (float(sigma), float(mu)))

    @classmethod
    def from_triplet(cls, triplet: LevyTriplet) -> "BernsteinSymbol":
        """Symbol defined by quadrature of its Levy triplet.

        Finite-activity pure-jump triplets are rejected: the inverse of a
        compound Poisson subordinator is a step process.
        """
        if triplet.drift == 0.0 and not triplet.has_infinite_activity():
            raise SymbolDomainError(
                "triplet has no drift and finite Levy mass; step-process subordinators are not supported")
        return cls("triplet", (), triplet)

    # evaluation --------------------------------------------------------

    def __call__(self, lam):
        lam_arr = np.asarray(lam, dtype=float)
        if not np.all(np.isfinite(lam_arr)):
            raise SymbolDomainError(f"Phi needs finite arguments, got {lam}")
        if np.any(lam_arr < 0):
            raise SymbolDomainError(f"Phi needs lam >= 0, got {lam}")
        out = self._eval(lam_arr)
        return float(out) if np.ndim(out) == 0 else out

    def _eval(self, lam: np.ndarray):
        k = self.kind
        if k == "identity":
            return lam.copy()
        if k == "stable":
            (beta,) = self.params
            return lam ** beta
        if k == "generalized_stable":
            alpha, gam = self.params
            return gam ** alpha * np.expm1(alpha * np.log1p(lam / gam))
        if k == "gamma":
            a, b = self.params
            return a * np.log1p(lam / b)
        if k == "inverse_gaussian":
            sigma, mu = self.params
            s2 = sigma * sigma
            # (sqrt(2 lam s2 + mu^2) - mu)/s2 without cancellation
            return 2.0 * lam / (np.sqrt(2.0 * lam * s2 + mu * mu) + mu)
        return np.vectorize(self.triplet.phi, otypes=[float])(lam)

    def complex_eval(self, s):
        """``Phi`` continued analytically off the real axis (principal branches).

        Only closed-form kinds are analytic in a form usable by contour
        inversion; triplet symbols raise ``SymbolDomainError``.
        """
        s = np.asarray(s, dtype=complex)
        k = self.kind
        if k == "identity":
            return s
        if k == "stable":
            return s ** self.params[0]
        if k == "generalized_stable":
            alpha, gam = self.params
            return (s + gam) ** alpha - gam ** alpha
        if k == "gamma":
            a, b = self.params
            return a * np.log1p(s / b)
        if k == "inverse_gaussian":
            sigma, mu = self.params
            s2 = sigma * sigma
            return 2.0 * s / (np.sqrt(2.0 * s * s2 + mu * mu) + mu)
        raise SymbolDomainError("triplet symbols have no closed-form analytic continuation")

    @property
    def is_analytic(self) -> bool:
        return self.kind != "triplet"

    @property
    def killing_rate(self) -> float:
        return self.triplet.killing_rate if self.kind == "triplet" else 0.0

    @property
    def drift(self) -> float:
        if self.kind == "identity":
            return 1.0
        return self.triplet.drift if self.kind == "triplet" else 0.0

    def derivative_at_zero(self) -> float:
        return mean_of_H1(self)

    def levy_density(self) -> Callable[[float], float] | None:
        """Closed-form Levy density, or ``None`` for the pure-drift identity."""
        k = self.kind
        if k == "identity":
            return None
        if k == "stable":
            return _stable_density(self.params[0])
        if k == "generalized_stable":
            return _tempered_stable_density(*self.params)
        if k == "gamma":
            return _gamma_density(*self.params)
        if k == "inverse_gaussian":
            return _inverse_gaussian_density(*self.params)
        return self.triplet.levy_density

    def to_triplet(self) -> LevyTriplet:
        if self.kind == "triplet":
            return self.triplet
        if self.kind == "identity":
            return LevyTriplet(lambda z: 0.0, 0.0, 1.0, label="identity")
        return LevyTriplet(self.levy_density(), 0.0, 0.0, label=self.kind,
                           params=dict(zip(_PARAM_NAMES[self.kind], self.params)))

    def tail(self, z: float) -> float:
        """Tail ``Pi((z, inf))`` (closed form for stable)."""
        if self.kind == "stable":
            beta = self.params[0]
            return z ** (-beta) / gamma_fn(1.0 - beta)
        return tail_function(self.to_triplet(), z)

    # serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        if self.kind == "triplet":
            t = self.triplet
            if t.label not in _PARAM_NAMES:
                raise ValueError("only triplets built from a named density family are serializable")
            return {"kind": "triplet", "density": t.label, **t.params,
                    "drift": t.drift, "killing_rate": t.killing_rate}
        return {"kind": self.kind, **dict(zip(_PARAM_NAMES[self.kind], self.params))}

    @classmethod
    def from_dict(cls, spec: dict) -> "BernsteinSymbol":
        spec = dict(spec)
        kind = spec.pop("kind")
        if kind == "identity":
            return cls.identity()
        if kind == "triplet":
            family = spec.pop("density")
            drift = float(spec.pop("drift", 0.0))
            k = float(spec.pop("killing_rate", 0.0))
            base = cls.from_dict({"kind": family, **spec})
            tr = LevyTriplet(base.levy_density(), k, drift, label=family,
                             params=dict(zip(_PARAM_NAMES[family], base.params)))
            return cls.from_triplet(tr)
        if kind not in _PARAM_NAMES:
            raise SymbolDomainError(f"unknown symbol kind {kind!r}")
        return getattr(cls, kind)(**{name: float(spec[name]) for name in _PARAM_NAMES[kind]})

    def __str__(self) -> str:
        if self.kind == "triplet":
            return f"triplet[{self.triplet.label}]"
        args = ", ".join(f"{n}={v:g}" for n, v in zip(_PARAM_NAMES[self.kind], self.params))
        return f"{self.kind}({args})"


_PARAM_NAMES = {
    "identity": (),
    "stable": ("beta",),
    "generalized_stable": ("alpha", "gam"),
    "gamma": ("a", "b"),
    "inverse_gaussian": ("sigma", "mu"),
}


# module-level operations ----------------------------------------------------

def eval_symbol(sym: BernsteinSymbol, lam: float) -> float:
    return sym(lam)


def eval_triplet_vs_closed(sym_closed: BernsteinSymbol, lam_grid) -> float:
    """Max relative discrepancy between closed form and triplet quadrature."""
    if sym_closed.kind == "triplet":
        raise SymbolDomainError("expected a closed-form symbol")
    triplet = sym_closed.to_triplet()
    worst = 0.0
    for lam in lam_grid:
        closed = float(sym_closed(lam))
        try:
            quad = triplet.phi(float(lam))
        except IntegrabilityError as exc:
            raise IntegrabilityError(f"quadrature failed at lam={lam}: {exc}") from exc
        if closed == 0.0:
            worst = max(worst, abs(quad))
        else:
            worst = max(worst, abs(quad - closed) / abs(closed))
    return worst


def mean_of_H1(sym: BernsteinSymbol) -> float:
    """``Phi'(0) = E[H_1]``, possibly ``inf``.

    Closed forms are differentiated analytically. For triplets the
    difference quotient ``(Phi(h) - Phi(0))/h`` at ``h = 1e-2, 1e-3, 1e-4``
    is Richardson-extrapolated; it is declared infinite when the quotients
    grow more than tenfold, or when their increments fail to shrink (a
    finite derivative makes each increment about a tenth of the last).
    """
    k = sym.kind
    if k == "identity":
        return 1.0
    if k == "stable":
        return math.inf
    if k == "generalized_stable":
        alpha, gam = sym.params
        return alpha * gam ** (alpha - 1.0)
    if k == "gamma":
        a, b = sym.params
        return a / b
    if k == "inverse_gaussian":
        return 1.0 / sym.params[1]
    phi0 = float(sym(0.0))
    hs = (1e-2, 1e-3, 1e-4)
    q = [(float(sym(h)) - phi0) / h for h in hs]
    if q[2] > 10.0 * q[0]:
        return math.inf
    d1, d2 = q[1] - q[0], q[2] - q[1]
    if d2 > 0 and d1 > 0 and d2 > 0.5 * d1 and d2 > 1e-6 * abs(q[2]):
        return math.inf
    r1 = (10.0 * q[1] - q[0]) / 9.0
    r2 = (10.0 * q[2] - q[1]) / 9.0
    return (100.0 * r2 - r1) / 99.0


def tail_function(triplet: LevyTriplet, z: float) -> float:
    return triplet.tail(z)
