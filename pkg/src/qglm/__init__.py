"""Truncated-Fock simulation of continuous-variable circuits for link-free regression.

Modules by stage:

- :mod:`qglm.fock`, :mod:`qglm.gates`, :mod:`qglm.engine` -- states, gates, batched adjoint simulator
- :mod:`qglm.circuit` -- the QGLM circuit, its gradient and training loop
- :mod:`qglm.tweedie`, :mod:`qglm.preprocess`, :mod:`qglm.dataset` -- data generation and preparation
- :mod:`qglm.baselines` -- mean model, Poisson GLM, componentwise boosting
- :mod:`qglm.bench`, :mod:`qglm.cli` -- configuration, benchmark reports, command line
"""

from .circuit import CircuitParams, TrainConfig, evaluate_repeated, forward, gradient, train
from .dataset import Dataset, read_dataset, write_dataset
from .fock import FockState, GateMatrix, apply_gate, expectation_x, norm_squared, vacuum_state
from .tweedie import TweedieSpec, family_lookup, sample_tweedie, simulate_dataset

__version__ = "0.1.0"

__all__ = [
    "CircuitParams",
    "Dataset",
    "FockState",
    "GateMatrix",
    "TrainConfig",
    "TweedieSpec",
    "apply_gate",
    "evaluate_repeated",
    "expectation_x",
    "family_lookup",
    "forward",
    "gradient",
    "norm_squared",
    "read_dataset",
    "sample_tweedie",
    "simulate_dataset",
    "train",
    "vacuum_state",
    "write_dataset",
]
