"""Classical mechanics in Hilbert space via van Hove (prequantum) operators.

Subpackages:

- :mod:`vanhove.phasespace` - grids, fields, finite-difference calculus,
  Poisson brackets, Hamiltonian flow maps, quadrature.
- :mod:`vanhove.operators` - operator construction, application and the
  algebra audits.
- :mod:`vanhove.states` - constrained classical wavefunctions (Madelung
  variables, action-phase construction, eigenstates, superposition
  diagnostic).
- :mod:`vanhove.dynamics` - Liouville transport, the classical propagator
  and expectation values.
- :mod:`vanhove.timeop` - the classical time operator of the harmonic
  oscillator and its incomplete generating flow.
- :mod:`vanhove.hybrid` - hybrid classical-quantum dynamics and the qubit
  measurement model.
- :mod:`vanhove.fieldio` - CSV / JSON+binary artifact formats.
- :mod:`vanhove.cli` - scenario-driven command line front end.
"""

__version__ = "0.1.0"
