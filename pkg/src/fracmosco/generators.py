"""Finite-volume symmetric Markov generators in one dimension.

The operator is the divergence-form generator

    A u = (sigma2 / (2 a)) (a u')'

on an interval, with reversible measure ``m(dx) = (a / sigma2) dx`` and
Dirichlet form ``E(u, u) = 1/2 int a |u'|^2 dx``. Cells carry piecewise
constant ``a`` and ``sigma2``; faces use harmonic-mean conductances, so a
jump of ``a`` across a face gives exact flux continuity there.

The skew-interface geometry has an inner region ``(l, ell)`` with
``a = 1 - alpha``, ``sigma2 = 1`` and a thin outer layer ``(ell, ell + eps)``
with ``a = alpha``, ``sigma2 = eta``, killed at both ends. The limit
generators live on ``(l, ell)`` with ``a = sigma2 = 1`` and a Dirichlet,
Neumann or Robin condition at ``ell``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg as sla
from scipy import sparse
from scipy.io import mmwrite

MIN_LAYER_CELLS = 8


class GeneratorError(ValueError):
    pass


class SymmetryError(GeneratorError):
    pass


@dataclass(frozen=True)
class Eigenpairs:
    """Eigenvalues ``mu`` of ``-A`` (ascending) and m-orthonormal columns ``phi``."""

    mu: np.ndarray
    phi: np.ndarray


@dataclass(eq=False)
class DiscreteGenerator:
    """Cell-centred generator ``A = -M^{-1} K`` with ``K`` symmetric tridiagonal.

    Attributes
    ----------
    edges : cell boundaries, strictly increasing.
    weights : cell masses ``m_i = h_i a_i / sigma2_i``.
    k_diag, k_off : diagonal and off-diagonal of the stiffness ``K``, scaled
        so that ``u @ K @ u = E(u, u)``.
    boundary_spec : description of the boundary and interface conditions.
    """

    edges: np.ndarray
    weights: np.ndarray
    k_diag: np.ndarray
    k_off: np.ndarray
    boundary_spec: dict = field(default_factory=dict)
    conductance: np.ndarray | None = None

    @property
    def grid(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def size(self) -> int:
        return len(self.weights)

    @cached_property
    def stiffness(self) -> np.ndarray:
        return np.diag(self.k_diag) + np.diag(self.k_off, 1) + np.diag(self.k_off, -1)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense ``A``; symmetric in the ``m``-weighted inner product."""
        return -self.stiffness / self.weights[:, None]

    def apply(self, u: np.ndarray) -> np.ndarray:
        ku = self.k_diag * u
        ku[:-1] += self.k_off * u[1:]
        ku[1:] += self.k_off * u[:-1]
        return -ku / self.weights

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(self.weights * u * v))

    def norm(self, u: np.ndarray) -> float:
        return math.sqrt(max(self.inner(u, u), 0.0))

    def energy(self, u: np.ndarray) -> float:
        """``E(u, u) = -<A u, u>_m``."""
        return float(u @ (self.k_diag * u) + 2.0 * np.sum(self.k_off * u[:-1] * u[1:]))

    @property
    def is_killing(self) -> bool:
        # K positive definite iff some boundary face leaks mass
        return bool(np.sum(self.k_diag) + 2.0 * np.sum(self.k_off) > 1e-14 * np.sum(self.k_diag))

    def _banded(self, lam: float) -> np.ndarray:
        ab = np.zeros((2, self.size))
        ab[0, 1:] = self.k_off
        ab[1] = self.k_diag + lam * self.weights
        return ab

    @cached_property
    def eigenpairs(self) -> Eigenpairs:
        return spectral_decompose(self)

    def to_json(self) -> dict:
        return {"grid": self.grid.tolist(), "edges": self.edges.tolist(),
                "weights": self.weights.tolist(), "boundary_spec": self.boundary_spec}

    def dump(self, stem) -> None:
        """Write ``<stem>.mtx`` (matrix-market ``A``) and ``<stem>.json``."""
        mmwrite(f"{stem}.mtx", sparse.coo_matrix(self.matrix),
                comment=json.dumps(self.boundary_spec), precision=17)
        with open(f"{stem}.json", "w") as fh:
            json.dump(self.to_json(), fh, indent=1)


# assembly -------------------------------------------------------------------------

def _robin_conductance(a: float, half: float, c: float) -> float:
    if c == math.inf:
        return a / half
    if c == 0.0:
        return 0.0
    return 1.0 / (half / a + 1.0 / c)


def assemble(edges, a, sigma2, left_c: float = math.inf, right_c: float = math.inf,
             boundary_spec: dict | None = None) -> DiscreteGenerator:
    """Finite-volume generator from cellwise ``a`` and ``sigma2``.

    ``left_c``/``right_c`` are Robin coefficients relative to ``a`` at the
    end cell: ``inf`` gives Dirichlet (killing), ``0`` gives Neumann.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or len(edges) < 3 or np.any(np.diff(edges) <= 0):
        raise GeneratorError("edges must be strictly increasing with at least two cells")
    h = np.diff(edges)
    a = np.broadcast_to(np.asarray(a, dtype=float), h.shape).copy()
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), h.shape).copy()
    if np.any(a <= 0) or np.any(sigma2 <= 0):
        raise GeneratorError("a and sigma2 must be positive")
    if left_c < 0 or right_c < 0:
        raise GeneratorError("Robin coefficients must be >= 0")
    g = 1.0 / (0.5 * h[:-1] / a[:-1] + 0.5 * h[1:] / a[1:])
    gl = _robin_conductance(a[0], 0.5 * h[0], left_c * a[0] if math.isfinite(left_c) else math.inf)
    gr = _robin_conductance(a[-1], 0.5 * h[-1], right_c * a[-1] if math.isfinite(right_c) else math.inf)
    diag = np.zeros_like(h)
    diag[:-1] += g
    diag[1:] += g
    diag[0] += gl
    diag[-1] += gr
    # E(u, u) = 1/2 sum of conductance * squared differences
    return DiscreteGenerator(edges, h * a / sigma2, 0.5 * diag, -0.5 * g,
                             boundary_spec or {}, np.concatenate([[gl], g, [gr]]))


def _inner_edges(l: float, ell: float, n_cells: int) -> np.ndarray:
    if not l < ell:
        raise GeneratorError(f"need l < ell, got l={l}, ell={ell}")
    if n_cells < 2:
        raise GeneratorError("n_cells must be >= 2")
    return np.linspace(l, ell, n_cells + 1)


def build_skew_generator(l: float, ell: float, r: float, alpha: float, eta: float, n_cells: int,
                         layer_cells: int = MIN_LAYER_CELLS) -> DiscreteGenerator:
    """Skew-interface generator on ``(l, r)``, layer ``(ell, r)`` of width ``eps = r - ell``.

    ``n_cells`` uniform cells cover ``(l, ell)`` and ``layer_cells`` uniform
    cells cover the layer, so every member of a sequence shares the inner
    grid. Both ends are killing.
    """
    if not 0.0 < alpha < 1.0:
        raise GeneratorError(f"alpha must lie in (0, 1), got {alpha}")
    if not eta > 0.0:
        raise GeneratorError(f"eta must be positive, got {eta}")
    if not ell < r:
        raise GeneratorError(f"need ell < r, got ell={ell}, r={r}")
    if layer_cells < MIN_LAYER_CELLS:
        raise GeneratorError(f"layer under-resolved: {layer_cells} < {MIN_LAYER_CELLS} cells")
    inner = _inner_edges(l, ell, n_cells)
    layer = np.linspace(ell, r, layer_cells + 1)[1:]
    edges = np.concatenate([inner, layer])
    a = np.r_[np.full(n_cells, 1.0 - alpha), np.full(layer_cells, alpha)]
    s2 = np.r_[np.ones(n_cells), np.full(layer_cells, eta)]
    spec = {"left": "dirichlet", "right": "dirichlet",
            "interface": {"kind": "skew_interface", "alpha": alpha, "eta": eta, "eps": r - ell, "ell": ell}}
    return assemble(edges, a, s2, math.inf, math.inf, spec)


def build_limit_generator(l: float, ell: float, regime, n_cells: int) -> DiscreteGenerator:
    """Half Laplacian on ``(l, ell)``, Dirichlet at ``l``.

    ``regime`` is ``"dirichlet"``, ``"neumann"``, or ``("robin", c)``;
    Robin means ``u'(ell) + c u(ell) = 0``.
    """
    kind, c = _parse_regime(regime)
    edges = _inner_edges(l, ell, n_cells)
    right = {"dirichlet": math.inf, "neumann": 0.0, "robin": c}[kind]
    spec = {"left": "dirichlet", "right": kind if kind != "robin" else {"robin": c}}
    return assemble(edges, 1.0, 1.0, math.inf, right, spec)


def _parse_regime(regime) -> tuple[str, float]:
    if isinstance(regime, str):
        kind, c = regime, math.nan
    elif isinstance(regime, dict):
        ((kind, c),) = regime.items()
    else:
        kind, c = regime
    kind = kind.lower()
    if kind not in ("dirichlet", "neumann", "robin"):
        raise GeneratorError(f"unknown regime {regime!r}")
    if kind == "robin":
        c = float(c)
        if not c >= 0:
            raise GeneratorError(f"Robin coefficient must be >= 0, got {c}")
    return kind, c


# sequences -----------------------------------------------------------------------

@dataclass(eq=False)
class FormSequence:
    """Skew generators indexed by ``n`` with their limit generator."""

    ns: list
    alphas: np.ndarray
    etas: np.ndarray
    epss: np.ndarray
    generators: list
    limit: DiscreteGenerator
    regime: tuple

    @property
    def robin_coefficients(self) -> np.ndarray:
        return self.alphas / ((1.0 - self.alphas) * self.epss)


def regime_schedule(regime, n) -> tuple[float, float, float]:
    """``(alpha_n, eta_n, eps_n)`` for the three regimes of ``alpha/eps``.

    dirichlet: alpha = n^-1/2, eps = 1/n, eta = n^-1.4 (alpha/eps -> inf);
    neumann: alpha = n^-2, eps = eta = 1/n (alpha/eps -> 0);
    robin(c): eps = eta = 1/n and alpha = c eps / (1 + c eps), so that
    alpha / ((1 - alpha) eps) = c for every n.
    All three satisfy alpha * eps / eta -> 0.
    """
    kind, c = _parse_regime(regime)
    n = float(n)
    eps = 1.0 / n
    if kind == "dirichlet":
        return n ** -0.5, n ** -1.4, eps
    if kind == "neumann":
        return n ** -2.0, eps, eps
    return c * eps / (1.0 + c * eps), eps, eps


def check_schedule(ns, alphas, etas, epss, regime) -> None:
    """Raise unless the tail of the schedule moves in the declared direction."""
    kind, c = _parse_regime(regime)
    alphas, etas, epss = (np.asarray(v, dtype=float) for v in (alphas, etas, epss))
    if len(ns) < 2:
        raise GeneratorError("a sequence needs at least two members")
    for name, v in (("alpha", alphas), ("eta", etas), ("eps", epss)):
        if np.any(np.diff(v) >= 0):
            raise GeneratorError(f"{name}_n must decrease to 0")
    mass = alphas * epss / etas
    if np.any(np.diff(mass) >= 0):
        raise GeneratorError("alpha_n eps_n / eta_n must decrease to 0")
    ratio = alphas / epss
    if kind == "dirichlet" and np.any(np.diff(ratio) <= 0):
        raise GeneratorError("dirichlet regime needs alpha_n / eps_n increasing")
    if kind == "neumann" and np.any(np.diff(ratio) >= 0):
        raise GeneratorError("neumann regime needs alpha_n / eps_n decreasing")
    if kind == "robin":
        cn = alphas / ((1.0 - alphas) * epss)
        if abs(cn[-1] - c) > abs(cn[0] - c) + 1e-12 * c:
            raise GeneratorError("robin regime needs alpha_n / ((1 - alpha_n) eps_n) -> c")


def build_sequence(l: float, ell: float, regime, ns, n_cells: int,
                   layer_cells: int = MIN_LAYER_CELLS) -> FormSequence:
    ns = list(ns)
    sched = np.array([regime_schedule(regime, n) for n in ns])
    alphas, etas, epss = sched.T
    check_schedule(ns, alphas, etas, epss, regime)
    gens = [build_skew_generator(l, ell, ell + e, a, h, n_cells, layer_cells)
            for a, h, e in zip(alphas, etas, epss)]
    kind, c = _parse_regime(regime)
    return FormSequence(ns, alphas, etas, epss, gens, build_limit_generator(l, ell, regime, n_cells), (kind, c))


# spectral calculus ---------------------------------------------------------------

def spectral_decompose(G: DiscreteGenerator) -> Eigenpairs:
    """Eigenpairs of ``-A`` with ``<phi_i, phi_j>_m = delta_ij``."""
    K = G.stiffness
    if not np.allclose(K, K.T, rtol=0, atol=1e-13 * np.max(np.abs(K))):
        raise SymmetryError("stiffness matrix is not symmetric")
    d = 1.0 / np.sqrt(G.weights)
    mu, v = sla.eigh_tridiagonal(G.k_diag * d * d, G.k_off * d[:-1] * d[1:])
    phi = v * d[:, None]
    # fix the sign so that each mode has a positive m-weighted mean
    sgn = np.sign(G.weights @ phi)
    sgn[sgn == 0] = 1.0
    return Eigenpairs(np.maximum(mu, 0.0) if np.all(mu > -1e-10) else mu, phi * sgn)


def coefficients(G: DiscreteGenerator, f: np.ndarray, n_modes: int | None = None) -> np.ndarray:
    ep = G.eigenpairs
    phi = ep.phi if n_modes is None else ep.phi[:, :n_modes]
    return phi.T @ (G.weights * f)


def resolvent_apply(G: DiscreteGenerator, lam: float, f: np.ndarray) -> np.ndarray:
    """Solve ``(lam - A) u = f``."""
    if not lam > 0:
        raise GeneratorError(f"lambda must be positive, got {lam}")
    return _solve(G, lam, f)


def potential_zero(G: DiscreteGenerator, f: np.ndarray) -> np.ndarray:
    """``R_0 f``, the solution of ``-A u = f``; ``inf`` for a conservative generator."""
    if not G.is_killing:
        return np.full(G.size, math.inf)
    return _solve(G, 0.0, f)


def _solve(G: DiscreteGenerator, lam: float, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    try:
        return sla.solveh_banded(G._banded(lam), G.weights * f)
    except np.linalg.LinAlgError as exc:
        raise GeneratorError(f"singular system for lambda={lam}") from exc


def semigroup_apply(G: DiscreteGenerator, t: float, f: np.ndarray) -> np.ndarray:
    ep = G.eigenpairs
    return ep.phi @ (np.exp(-ep.mu * t) * coefficients(G, f))


def energy(G: DiscreteGenerator, u: np.ndarray) -> float:
    return G.energy(u)


def embed(G: DiscreteGenerator, u_inner: np.ndarray) -> np.ndarray:
    """Extend a function on the leading cells of ``G`` by zero."""
    out = np.zeros(G.size)
    out[:len(u_inner)] = u_inner
    return out
