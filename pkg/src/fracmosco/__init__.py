"""Time-fractional evolution equations driven by inverse subordinators.

Modules
-------
bernstein   Bernstein symbols and Levy triplets
subpaths    subordinator and inverse-subordinator sampling
invlap      Laplace inversion of the marginal weights of L_t
generators  finite-volume generators, skew sequences and limits
timefrac    spectral solver, potentials and fractional derivatives
montecarlo  Monte Carlo estimators for time-changed diffusions
mosco       convergence diagnostics along skew sequences
cli         experiment runner
"""
__version__ = "0.1.0"

from .bernstein import BernsteinSymbol, LevyTriplet  # noqa: E402,F401
