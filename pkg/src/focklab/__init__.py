"""Numerical laboratory for rotating-wave spin-boson models on truncated Fock spaces."""

from .blocks import BlockOperator
from .fock import BasisSizeError, FockBasis, FockState, build_basis, fock_scale_norm, vacuum
from .grid import (DecayFit, FormFactor, ModeGrid, build_grid, decay_exponent,
                   grid_inner, power_form_factor, scale_norm)
from .kernels import BACKEND as KERNEL_BACKEND
from .linalg import (EigenError, SolveError, SolveReport, SpectralPointError,
                     dense_inverse_oracle, lowest_eigenpairs, solve)
from .operators import FieldOperator, annihilator, creator, dgamma, operator_scale_norm

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BasisSizeError",
    "BlockOperator",
    "DecayFit",
    "EigenError",
    "FieldOperator",
    "FockBasis",
    "FockState",
    "FormFactor",
    "KERNEL_BACKEND",
    "ModeGrid",
    "SolveError",
    "SolveReport",
    "SpectralPointError",
    "annihilator",
    "build_basis",
    "build_grid",
    "creator",
    "decay_exponent",
    "dense_inverse_oracle",
    "dgamma",
    "fock_scale_norm",
    "grid_inner",
    "lowest_eigenpairs",
    "operator_scale_norm",
    "power_form_factor",
    "scale_norm",
    "solve",
    "vacuum",
]
