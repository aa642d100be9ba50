"""Reduced-row dynamics of a dissipative (1+1)D quantum cellular automaton.

Submodules:

``gates``        local unitaries, Kraus operators and their doubled forms
``dense``        exact row density matrices (two independent update rules)
``mps``          truncated matrix-product evolution in the doubled space
``lindblad``     continuous-time contact process and the small-step limit
``meanfield``    product-state closure, phase diagram, transition order
``criticality``  critical slice selection, exponents, error budget
``persist``      file formats and manifests
``cli``          ``python -m qca_critic``
"""

from .errors import (
    CapacityError,
    DataIOError,
    DegenerateStateError,
    EstimationError,
    NumericalError,
    ParameterError,
    QcaError,
)
from .gates import GateParams, local_operators, make_gate_params
from .series import TimeSeries

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "DataIOError",
    "DegenerateStateError",
    "EstimationError",
    "GateParams",
    "NumericalError",
    "ParameterError",
    "QcaError",
    "TimeSeries",
    "local_operators",
    "make_gate_params",
    "__version__",
]
