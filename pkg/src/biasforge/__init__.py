"""biasforge: biased-noise magic-state gadget simulation and overhead analysis.

Layers, bottom up:

* ``statevec``  exact dense state-vector simulation primitives.
* ``gadget``    the repetition-code magic-state preparation circuit, its
                exact execution (sampled / forced / full branch
                enumeration) and classical decoding.
* ``noise``     biased Pauli fault model: Monte Carlo sampling and
                exhaustive low-order fault enumeration over the gadget.
* ``bounds``    closed-form logical error bounds and parameter sweeps.
* ``distill``   exact 15-qubit Reed-Muller error-detection distillation,
                concatenation, and overhead planning.
* ``cli``       reproducible command-line experiments over all of the above.
"""

__version__ = "0.1.0"

from .statevec import (  # noqa: F401
    MeasurementOutcome,
    PauliString,
    StateVector,
    apply_cphase,
    apply_cz_theta,
    apply_pauli,
    fidelity,
    measure_x,
    new_plus_state,
)
from .gadget import (  # noqa: F401
    Circuit,
    GadgetConfig,
    GadgetOutcome,
    LogicalClass,
    Target,
    accept_probability_exact,
    build_circuit,
    classify_logical,
    decode,
    enumerate_branches,
    run,
)
