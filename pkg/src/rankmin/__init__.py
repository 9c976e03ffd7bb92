"""Low-rank matrix completion with nonconvex spectral regularizers."""

from .data_io import RatingsScale, SyntheticInstance, kfold_split, load_ratings, sample_mask, synth_lowrank
from .metrics import approx_rank, nmae, rfne
from .regularizers import RegularizerSpec, g_of, kappa, q_of, rho, rho_prime, surrogate_objective
from .smalldense import WeightMatrix, box_project, factored_singular_values, spd_solve, sym_eig, weight_update
from .solvers import FactorPair, SolverConfig, SolveTrace, gen_altmin, gen_asd, initialize
from .sparse_ops import KERNEL_BACKEND, ObservationSet, SparseResidual, adjoint_apply, frobenius_norm_observed, observed_product, residual

__version__ = "0.1.0"
