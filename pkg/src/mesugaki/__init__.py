"""mesugaki: simulation and numerical verification of path-dependent marked
jump processes driven by conditional jump-rate measures.

The public surface re-exports the main types and entry points; the modules
stay importable on their own for the finer-grained tools.
"""

from .core import (DrivingPath, EMPTY_HISTORY, JumpEvent, PathHistory,
                   RngStream, TimeGrid, derive_stream, history_before)
from .errors import (ConfigError, ContractViolationError, DomainError,
                     IntegrabilityError, MesugakiError, RunawayProcessError,
                     UnsupportedModelError)
from .point_process import (CoxRate, CustomRate, DeterministicRate, ExpKernel,
                            GenericKernel, HawkesRate, HomogeneousRate,
                            IntensityModel, SumRate, compensator,
                            compensator_at_times, dominating_rate,
                            intensity_at, simulate_counting)
from .wakarase import (CustomDensityMarks, DensityFormMeasure,
                       DiscreteAtomsMeasure, MarkGrid, MarkInterval, MarkLaw,
                       OrderConditionReport, PointMass, PowerLawMarks,
                       UniformMarks, WakaraseMeasure, cell,
                       check_order_condition, closed_interval,
                       density_on_interval, discretize, dropped_low_mass,
                       mark_drawer, mark_grid, measure_of_set,
                       open_interval, refine_grid)
from .construction import (ConvergenceReport, CoupledFamily,
                           DiscreteMesugakiPath, MesugakiPath, SplitRecord,
                           diagnose_convergence, pair_gap_bound,
                           simulate_coupled,
                           simulate_discrete, simulate_mesugaki,
                           split_probability)
from .integral import (Integrand, MARK_IDENTITY, MARK_SQUARE, SweepReport,
                       Window, as_integrand, compensator_integral,
                       integrate_compensated, integrate_jump,
                       isometry_variance, large_jump_window,
                       small_jump_window, truncation_sweep, truncation_window)
from .sde import (JumpRecord, MesugakiSDESpec, SampledPath, compound_cox,
                  compound_hawkes, compound_poisson, discrete_state_process,
                  euler_simulate)
from .ito_check import (ItoReport, TestFunction, ito_residual,
                        linear_test_function, quadratic_test_function,
                        residual_sweep)
from .diagnostics import (EnsembleSummary, KSReport, MartingaleReport,
                          exponential_cdf, ks_one_sample, ks_two_sample,
                          martingale_mean_test, paired_difference_test,
                          step_path_sup_distance, time_change_residuals)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
