import math

import numpy as np
import pytest

from fracmosco import generators as gen, montecarlo as mc, timefrac
from fracmosco.bernstein import BernsteinSymbol

from conftest import phi1

PI = math.pi
X0 = PI / 2
IDENT = BernsteinSymbol.identity()
STABLE = BernsteinSymbol.stable(0.5)
GAMMA = BernsteinSymbol.gamma(1.0, 1.0)


def test_spec_validation():
    with pytest.raises(mc.SpecError):
        mc.DiffusionSpec(alpha=1.5)
    with pytest.raises(mc.SpecError):
        mc.DiffusionSpec.skew(0, PI, 0.01, 0.3, 1.0, 1e-3)
    with pytest.raises(mc.SpecError):
        mc.DiffusionSpec(l=1.0, r=0.0)
    spec = mc.DiffusionSpec.skew(0, PI, 0.1, 0.3, 0.5, 1e-4)
    assert spec.mode == "skew" and spec.eps == pytest.approx(0.1)
    assert 0 < spec.skewness < 1


def test_std_error_definition():
    r = mc.estimate_base(mc.DiffusionSpec.plain(dt=1e-2), lambda x: x, 0.5, X0, 5000, seed=1)
    xs = mc.sample_timechanged(mc.DiffusionSpec.plain(dt=1e-2), IDENT, 0.5, X0, 5000, seed=1)
    v = np.where(np.isfinite(xs), xs, 0.0)
    assert r.value == pytest.approx(v.mean(), rel=1e-12)
    assert r.std_error == pytest.approx(v.std(ddof=1) / math.sqrt(5000), rel=1e-9)


def test_identity_bit_identical():
    spec = mc.DiffusionSpec.plain(dt=5e-3)
    f = np.sin
    a = mc.estimate_base(spec, f, 0.7, X0, 6000, seed=4)
    b = mc.estimate_timechanged(spec, IDENT, f, 0.7, X0, 6000, seed=4)
    assert (a.value, a.std_error) == (b.value, b.std_error)


def test_seed_determinism_across_workers():
    spec = mc.DiffusionSpec.plain(dt=1e-2)
    a = mc.estimate_potential(spec, GAMMA, np.sin, 1.0, X0, 9000, seed=3, workers=1)
    b = mc.estimate_potential(spec, GAMMA, np.sin, 1.0, X0, 9000, seed=3, workers=3)
    assert (a.value, a.std_error) == (b.value, b.std_error)
    c = mc.estimate_timechanged(spec, STABLE, np.sin, 0.5, X0, 9000, seed=3, workers=2)
    d = mc.estimate_timechanged(spec, STABLE, np.sin, 0.5, X0, 9000, seed=3, workers=1)
    assert c.value == d.value


def test_single_path():
    p = mc.simulate_base_path(mc.DiffusionSpec.plain(dt=1e-3), X0, 50.0, seed=2)
    assert p.x[0] == X0 and math.isfinite(p.zeta)
    assert np.all((p.x[:-1] > 0) & (p.x[:-1] < PI))
    q = mc.simulate_base_path(mc.DiffusionSpec.reflecting(0, PI, 0.0, 1e-3), X0, 5.0, seed=2)
    assert np.all(q.x <= PI) and np.all(np.diff(q.local_time) >= 0)


def test_identity_timechange_heat():
    G = gen.build_limit_generator(0, PI, "dirichlet", 400)
    f = mc.as_function(phi1(G), G.grid)
    r = mc.estimate_base(mc.DiffusionSpec.plain(dt=2e-3), f, 1.0, X0, 40_000, seed=6)
    target = math.exp(-G.eigenpairs.mu[0]) * float(np.interp(X0, G.grid, phi1(G)))
    assert abs(r.z_score(target)) < 3


def test_survival_mixture():
    # f = 1, small t: P(L_t < zeta) equals the spectral solution for f = 1
    G = gen.build_limit_generator(0, PI, "dirichlet", 400)
    x0 = 0.3
    sol = timefrac.solve(G, STABLE, np.ones(G.size), [0.1], n_modes=G.size)
    target = float(np.interp(x0, G.grid, sol.values[0]))
    r = mc.estimate_timechanged(mc.DiffusionSpec.plain(dt=1e-3), STABLE, 1.0, 0.1, x0, 40_000, seed=8)
    assert abs(r.z_score(target)) < 3


def test_potential_identity_symbol():
    G = gen.build_limit_generator(0, PI, "dirichlet", 400)
    p = phi1(G)
    r = mc.estimate_potential(mc.DiffusionSpec.plain(dt=4e-3), IDENT, mc.as_function(p, G.grid), 1.0, X0,
                              20_000, seed=1)
    target = float(np.interp(X0, G.grid, p)) / (1.0 + G.eigenpairs.mu[0])
    assert abs(r.z_score(target)) < 3 and not r.flagged


def test_potential_exponential_lifetime():
    spec = mc.DiffusionSpec.plain(-math.inf, math.inf, dt=1e-2, kill_rate=1.0)
    for sym, lam in ((STABLE, 4.0), (GAMMA, 2.0)):
        r = mc.estimate_potential(spec, sym, 1.0, lam, 0.0, 20_000, seed=2)
        assert abs(r.z_score(timefrac.exp_lifetime_potential(sym, 1.0, lam, strict=False))) < 3


def test_potential_requires_matching_grid():
    with pytest.raises(ValueError):
        mc.estimate_potential(mc.DiffusionSpec.plain(dt=1e-2), GAMMA, 1.0, 1.0, X0, 10, seed=0, ds=1e-3)


def test_lifetime_identity_and_infinite():
    spec = mc.DiffusionSpec.plain(dt=4e-3)
    r = mc.estimate_lifetime(spec, IDENT, X0, 20_000, seed=1)
    assert abs(r.z_score(X0 * (PI - X0))) < 3
    r = mc.estimate_lifetime(spec, STABLE, X0, 100, seed=1)
    assert r.value == math.inf and r.flagged


@pytest.mark.slow
def test_exit_statistics():
    st = mc.exit_statistics(mc.DiffusionSpec.plain(dt=2e-3), X0, 100_000, seed=3)
    assert abs(st["exit_right"].z_score(0.5)) < 3
    assert abs(st["lifetime"].z_score(X0 * (PI - X0))) < 3
    assert st["censored"] == 0.0


@pytest.mark.slow
def test_layer_without_interface_is_plain():
    # alpha = 1/2 and eta = 1 remove the interface: plain motion on (0, pi)
    spec = mc.DiffusionSpec.skew(0, PI - 0.5, 0.5, 0.5, 1.0, 2e-3)
    st = mc.exit_statistics(spec, 1.0, 40_000, seed=4)
    assert abs(st["lifetime"].z_score(1.0 * (PI - 1.0))) < 3


@pytest.mark.slow
def test_stable_semigroup_vs_spectral():
    G = gen.build_limit_generator(0, PI, "dirichlet", 400)
    p = phi1(G)
    r = mc.estimate_timechanged(mc.DiffusionSpec.plain(dt=1e-3), STABLE, mc.as_function(p, G.grid), 1.0, X0,
                                100_000, seed=5)
    target = float(np.interp(X0, G.grid, timefrac.solve(G, STABLE, p, [1.0]).values[0]))
    assert abs(r.z_score(target)) < 3


def test_local_time_oracle():
    g = GAMMA
    assert mc.local_time_oracle(g, math.inf, X0, 0, PI) == pytest.approx(PI ** 2 / 4)
    assert mc.local_time_oracle(g, 0.0, X0, 0, PI) == pytest.approx(X0 * (2 * PI - X0))
    vals = [mc.local_time_oracle(g, c, X0, 0, PI) for c in (0.0, 0.5, 1.0, 2.0, math.inf)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_local_time_monotone_in_c():
    spec = mc.DiffusionSpec.reflecting(0, PI, 0.0, 4e-3)
    vals = [mc.local_time_functional(spec, GAMMA, c, X0, 1000, seed=1).value for c in (0.0, 0.5, 1.0, 2.0, math.inf)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    with pytest.raises(mc.SpecError):
        mc.local_time_functional(mc.DiffusionSpec.plain(), GAMMA, 1.0, X0, 10, seed=0)


@pytest.mark.slow
@pytest.mark.parametrize("c", [0.0, 1.0, math.inf])
def test_local_time_functional(c):
    spec = mc.DiffusionSpec.reflecting(0, PI, 0.0, 2e-3)
    r = mc.local_time_functional(spec, GAMMA, c, X0, 20_000, seed=7)
    assert abs(r.z_score(mc.local_time_oracle(GAMMA, c, X0, 0, PI))) < 3 and not r.flagged


@pytest.mark.slow
def test_local_time_occupation_estimator():
    spec = mc.DiffusionSpec.reflecting(0, PI, 0.0, 1e-3)
    r = mc.local_time_functional(spec, GAMMA, 1.0, X0, 10_000, seed=7, estimator="occupation")
    assert abs(r.z_score(mc.local_time_oracle(GAMMA, 1.0, X0, 0, PI))) < 3


def test_clock_functionals_small():
    r = mc.clock_functionals(GAMMA, 1.0, 2.0, 20_000, seed=1)
    closed = r["closed_form"]
    for k in ("via_L", "via_H"):
        assert abs(r[k].value - closed) < 3 * r[k].std_error + 0.01 * closed
