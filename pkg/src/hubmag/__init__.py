"""Exact time propagation of driven Hubbard models.

Bit-encoded many-body basis, one shared-sparsity Hamiltonian split
``H(t) = diag + c(t) S + i s(t) A``, Krylov exponential actions, and a
family of commutator-free exponential integrators with defect-based
adaptive step-size control.
"""
from .basis import Basis, enumerate_basis
from .cfm import CFMScheme, StepEstimate, scheme, scheme_names
from .krylov import ConvergenceError, HermitianOperator, KrylovResult, lanczos_expm
from .model import (Geometry, HubbardModel, PulseParams, build_model,
                    extremal_eigenvalues, load_model, observable_double_occupation,
                    observable_energy, pulse_eval, save_model)
from .sparse import GLOBAL_COUNTER, MatvecCounter, SparseRealMatrix
from .stepping import (StepController, Trajectory, TrajectorySample,
                       propagate_adaptive, propagate_fixed, propose)

__version__ = "0.1.0"

__all__ = [
    "Basis", "enumerate_basis",
    "CFMScheme", "StepEstimate", "scheme", "scheme_names",
    "ConvergenceError", "HermitianOperator", "KrylovResult", "lanczos_expm",
    "Geometry", "HubbardModel", "PulseParams", "build_model",
    "extremal_eigenvalues", "load_model", "observable_double_occupation",
    "observable_energy", "pulse_eval", "save_model",
    "GLOBAL_COUNTER", "MatvecCounter", "SparseRealMatrix",
    "StepController", "Trajectory", "TrajectorySample",
    "propagate_adaptive", "propagate_fixed", "propose",
    "__version__",
]
