"""Leading trace-formula asymptotics at a critical level of a polynomial Hamiltonian.

Submodules
----------
symbol
    Polynomial symbols, critical-point data and ``.ham`` fixtures.
flow
    Hamilton flow, closed-form monodromy and flow jets.
periods
    Periods of the linearized flow, restricted forms and resonances.
rk_cone
    Leading phase term ``R_k`` and integrals over the cone of ``Q_T``.
normal_forms
    Blow-up charts reducing the trace phase to model forms.
oscillatory
    Asymptotic expansions, distribution pairings and oscillatory quadrature.
trace
    Assembly of the leading trace coefficients.
spectral_oracle
    Exact spectrum of the model operator and empirical trace sums.
cli
    Command-line entry point.
"""

from .flow import flow_jet, hamilton_flow, linearized_flow
from .periods import find_periods
from .rk_cone import HomogForm, cone_integral, cone_samples, rk_from_integral, rk_from_jet
from .symbol import CriticalData, PolySymbol, load_hamiltonian
from .trace import TestFunction, TraceReport, theorem1, theorem2

__version__ = "0.1.0"

__all__ = [
    "CriticalData",
    "HomogForm",
    "PolySymbol",
    "TestFunction",
    "TraceReport",
    "cone_integral",
    "cone_samples",
    "find_periods",
    "flow_jet",
    "hamilton_flow",
    "linearized_flow",
    "load_hamiltonian",
    "rk_from_integral",
    "rk_from_jet",
    "theorem1",
    "theorem2",
]
