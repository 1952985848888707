"""Minimization of the pseudospectral abscissa of parameter-dependent
matrices by subspace projection, with criss-cross solvers for square
matrices and rectangular pencils."""

from .abscissa import (PsaConfig, PsaResult, ReducedPencil, SafeguardConfig,
                       boundary_polyline, compress_reduced, psa_auto,
                       psa_large, psa_rect, psa_square,
                       vertical_search_square)
from .families import (AffineMatrixFamily, ContractViolation, ParameterBox,
                       RankOne, SofProblem, constant_fn, coordinate_fn,
                       load_descriptor, polynomial_fn, read_matrix,
                       sof_to_family)
from .operators import SparsePlusLowRank
from .optimizers import (ObjectiveOracle, OptimizerConfig, OptResult,
                         minimize_1d, minimize_nd)
from .subspace import (DegenerateGradientError, FrameworkConfig,
                       MinimizationTrace, ProjectionBasis, grad_alpha,
                       grad_alpha_reduced, hessian_fd, minimize,
                       minimize_extended, stagnation_certificate)
from .synth import SyntheticProblem, direct_minimize_grid, generate
from .triplets import (SingularTriplet, TripletConvergenceError,
                       smallest_triplet_dense, smallest_triplet_sparse)

__version__ = "0.1.0"
