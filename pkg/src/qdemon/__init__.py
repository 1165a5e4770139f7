"""Density-matrix simulation of quantum Maxwell's demon experiments on NV-center spins."""

__version__ = "0.1.0"

from .qmath import (  # noqa: E402
    DensityMatrix,
    PureState,
    bloch_length,
    entanglement_fidelity,
    entropy_from_bloch,
    fidelity,
    partial_trace,
    tensor,
    von_neumann_entropy,
)
from .noise import NoiseParams, exp3_noise_budget, unsubtracted_entropies  # noqa: E402
from .experiments import (  # noqa: E402
    information_acquired,
    run_experiment1,
    run_experiment2,
    run_experiment3,
)
