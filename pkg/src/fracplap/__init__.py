"""Variational laboratory for the weighted fractional p-Laplacian on an interval."""

from .eigen import (EigenResult, RayleighConfig, dense_pencil, first_eigenpair,
                    minimax_upper_bounds, residual, simplicity_check)
from .errors import (ConfigurationError, FracplapError, NumericalDomainError,
                     PreconditionError, Refusal, UsageError)
from .grid import (DiscreteFunction, Grid, build_grid, boundary_distance, lp_norm,
                   weight_mass, weighted_integral)
from .nonlinear import (MultiSolveResult, PowerTerm, ProblemSpec, SolveResult, SolverConfig,
                        minimize, mountain_pass, multi_solution_search, phi, phi_gradient)
from .operator import EnergyAssembly, assemble, energy, gagliardo_norm, gradient, weak_action
from .verifiers import (HardyReport, MoserCertificate, MoserConfig, ScalingReport,
                        hardy_constant, moser_certify, scaling_check, solve_forcing,
                        summability_exponent)
from .weights import (AdmissibilityCertificate, ClassQuery, WeightSpec, check_class,
                      critical_exponent, holder_estimate, lattice_supremal_beta,
                      supremal_beta, tau_estimate, to_bq, young_split)

__version__ = "0.1.0"
