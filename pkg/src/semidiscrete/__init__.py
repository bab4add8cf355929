"""Semi-discrete schemes for dx = -10 x^3 dt + x^2 dW and their Monte Carlo checks."""

from .analysis import (ConvergenceReport, MomentReport, PositivityReport, StabilityReport,
                       TrajectoryReport, check_positivity, estimate_strong_order,
                       estimate_sup_moment, positivity_report, run_stability_experiment,
                       run_trajectories, simulate_paths)
from .kernels import BACKEND
from .noise import BrownianPath, RngSeed, refine, sample_increments
from .schemes import (DivergenceError, IntegralMode, Scheme, SchemeKind, SchemeState, SdeProblem,
                      TimeGrid, cubic_example, exact_linear_step, simulate_path, step_em, step_lsd,
                      step_sd_exp, step_sd_langevin, step_tem)
from .stability import (BoundCheckReport, DecompositionReport, check_drift_inequality,
                        integral_bound_check, phi1_exp_tsd, phi1_tsd, phi2_exp_tsd_sample,
                        phi2_tsd_sample)
from .truncation import EmTruncationPolicy, TruncationPolicy, clamp_em, clamp_pi, h_of_delta, mu, mu_inverse

__version__ = "0.1.0"
