import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from fracmosco.bernstein import (BernsteinSymbol, IntegrabilityError, LevyTriplet, SymbolDomainError,
                                 eval_symbol, eval_triplet_vs_closed, mean_of_H1, tail_function)

CLOSED = [
    BernsteinSymbol.identity(),
    BernsteinSymbol.stable(0.3),
    BernsteinSymbol.stable(0.5),
    BernsteinSymbol.generalized_stable(0.5, 1.0),
    BernsteinSymbol.gamma(1.0, 1.0),
    BernsteinSymbol.gamma(2.0, 4.0),
    BernsteinSymbol.inverse_gaussian(1.0, 1.0),
    BernsteinSymbol.inverse_gaussian(-2.0, 0.5),
]


def test_closed_form_values():
    assert eval_symbol(BernsteinSymbol.stable(0.5), 4.0) == pytest.approx(2.0, abs=1e-15)
    assert eval_symbol(BernsteinSymbol.gamma(1, 1), math.e - 1) == pytest.approx(1.0, abs=1e-15)
    assert eval_symbol(BernsteinSymbol.inverse_gaussian(1, 1), 4.0) == pytest.approx(2.0, abs=1e-14)
    assert eval_symbol(BernsteinSymbol.generalized_stable(0.5, 1), 3.0) == pytest.approx(1.0, abs=1e-15)


def test_domain_errors():
    with pytest.raises(SymbolDomainError):
        BernsteinSymbol.stable(0.5)(math.inf)
    with pytest.raises(SymbolDomainError):
        BernsteinSymbol.stable(0.5)(-1.0)
    with pytest.raises(SymbolDomainError):
        BernsteinSymbol.stable(1.0)
    with pytest.raises(SymbolDomainError):
        BernsteinSymbol.gamma(0.0, 1.0)
    with pytest.raises(SymbolDomainError):
        BernsteinSymbol.inverse_gaussian(0.0, 1.0)
    with pytest.raises(SymbolDomainError):
        LevyTriplet(lambda z: 0.0, killing_rate=-1.0)


def test_triplet_matches_closed_forms():
    assert eval_triplet_vs_closed(BernsteinSymbol.stable(0.5), [0.5, 1, 2, 4]) < 1e-6
    assert eval_triplet_vs_closed(BernsteinSymbol.gamma(1, 1), [1, 3]) < 1e-6
    assert eval_triplet_vs_closed(BernsteinSymbol.inverse_gaussian(1, 1), [0.5, 1, 2]) < 1e-6
    assert eval_triplet_vs_closed(BernsteinSymbol.generalized_stable(0.5, 1), [0.5, 1, 2]) < 1e-6


def test_identity_triplet_exact():
    ident = BernsteinSymbol.identity()
    assert [ident(x) for x in (1.0, 2.0)] == [1.0, 2.0]
    assert eval_triplet_vs_closed(ident, [1.0, 2.0]) == 0.0


def test_stable_triplet_on_wide_grid():
    lam = np.geomspace(0.1, 10.0, 15)
    assert eval_triplet_vs_closed(BernsteinSymbol.stable(0.5), lam) < 1e-6


def test_mean_of_H1():
    assert mean_of_H1(BernsteinSymbol.gamma(2, 4)) == 0.5
    assert mean_of_H1(BernsteinSymbol.stable(0.5)) == math.inf
    assert mean_of_H1(BernsteinSymbol.inverse_gaussian(1, 2)) == 0.5
    assert mean_of_H1(BernsteinSymbol.identity()) == 1.0


def test_mean_of_H1_for_triplets():
    gam = BernsteinSymbol.from_triplet(BernsteinSymbol.gamma(2, 4).to_triplet())
    assert mean_of_H1(gam) == pytest.approx(0.5, rel=1e-3)
    st_ = BernsteinSymbol.from_triplet(BernsteinSymbol.stable(0.5).to_triplet())
    assert mean_of_H1(st_) == math.inf


def test_tail_function_values():
    stab = BernsteinSymbol.stable(0.5).to_triplet()
    assert tail_function(stab, 1.0) == pytest.approx(1.0 / special.gamma(0.5), rel=1e-8)
    gam = BernsteinSymbol.gamma(1, 1).to_triplet()
    assert tail_function(gam, 1.0) == pytest.approx(special.exp1(1.0), rel=1e-8)
    assert tail_function(gam, 60.0) < 1e-25


@pytest.mark.parametrize("sym", [BernsteinSymbol.stable(0.5), BernsteinSymbol.gamma(1, 1)])
@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_tail_laplace_identity(sym, lam):
    # Phi(lam) / lam equals the Laplace transform of the tail when k = d = 0
    tr = sym.to_triplet()
    assert tr.tail_laplace(lam) == pytest.approx(float(sym(lam)) / lam, rel=1e-5)


def test_triplet_rejects_finite_activity():
    with pytest.raises(SymbolDomainError):
        BernsteinSymbol.from_triplet(LevyTriplet(lambda z: math.exp(-z)))
    # a drift makes the path strictly increasing again
    sym = BernsteinSymbol.from_triplet(LevyTriplet(lambda z: math.exp(-z), drift=1.0))
    assert sym(1.0) == pytest.approx(1.0 + 0.5, rel=1e-8)


def test_non_integrable_density():
    with pytest.raises((IntegrabilityError, SymbolDomainError)):
        LevyTriplet(lambda z: z ** -2.5).check_integrability()


def test_phi0_is_killing_rate():
    sym = BernsteinSymbol.from_triplet(LevyTriplet(BernsteinSymbol.stable(0.5).levy_density(), killing_rate=0.3))
    assert sym(0.0) == 0.3
    assert sym.killing_rate == 0.3


@pytest.mark.parametrize("sym", CLOSED, ids=str)
def test_dict_round_trip(sym):
    back = BernsteinSymbol.from_dict(sym.to_dict())
    assert back.kind == sym.kind
    assert back(1.7) == sym(1.7)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(CLOSED), st.floats(0.0, 50.0, allow_subnormal=False),
       st.floats(0.0, 50.0, allow_subnormal=False))
def test_monotone_and_ratio_nonincreasing(sym, a, b):
    lo, hi = min(a, b), max(a, b)
    assert 0.0 <= sym(lo) <= sym(hi)
    if lo > 0.0:
        assert sym(hi) / hi <= sym(lo) / lo * (1 + 1e-12)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(CLOSED[1:]), st.floats(0.05, 20.0))
def test_complex_eval_agrees_on_real_axis(sym, lam):
    assert complex(sym.complex_eval(lam)).real == pytest.approx(float(sym(lam)), rel=1e-12)
