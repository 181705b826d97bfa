"""Simulation and diagnostics for multivariate Hawkes processes with common events."""
from ._backend import COMPILED, NAME as BACKEND
from .cluster import (BranchingSummary, SimOptions, TruncationError, branching_summary, simulate,
                      simulate_immigrants, simulate_many, simulate_offspring)
from .diagnostics import (NumericalError, ResidualSeries, compensator, ks_exp1, mean_count_report,
                          time_rescale)
from .kernel import (KernelSpec, TabulatedKernel, coordinate_intensity, eta_bound, f_bound,
                     kappa_total, validate_bounds)
from .marks import (DELTA, CountTable, Event, Mark, Path, coordinate_path, count_decomposition,
                    is_common_event, project_coordinate)
from .markov import (REFERENCE_EXP, ExpParams, IntensityState, apply_jump, decay, dynkin_residual,
                     generator_apply, simulate_batch, simulate_exact, stationary_intensity)
from .presets import (build_bivariate_exp, build_bivariate_gauss, build_classical, build_etas,
                      build_finance_cojump)

__version__ = "0.1.0"
