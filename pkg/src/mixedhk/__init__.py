"""Simulation and verification engine for the mixed Hegselmann-Krause model.

Agents blend their own opinion with the average of their epsilon-neighbors,
weighted by a per-step degree of stubbornness ``alpha``.  The package steps
the update rule under deterministic and stochastic stubbornness schedules,
analyzes the confidence graph, and checks the energy descent and stopping-time
results empirically.
"""

from .errors import ConfigurationError, HypothesisViolation, UsageError
from .dynamics import (
    Neighborhood,
    OpinionState,
    StubbornnessAssignment,
    compute_neighborhoods,
    detect_merge,
    step,
    step_matrix,
)
from .schedules import (
    RngStream,
    ScheduleSpec,
    gamma_bound,
    min_partition_probability,
    next_assignment,
)
from .profile import (
    ProfileGraph,
    build_profile,
    check_delta_equilibrium,
    hull_distance,
    is_delta_trivial,
)
from .diagnostics import (
    ConvergenceTracker,
    beta,
    beta_strict,
    energy,
    nl8_decrement_bound,
    track_convergence,
)
from .trajectory import Trajectory, simulate
from .stopping import (
    StoppingReport,
    check_interaction_equivalences,
    detect_freeze,
    detect_tau_delta,
    detect_termination,
    stopping_report,
)
from .montecarlo import EnsembleResult, a_set_bound, co1_bound, run_ensemble

__version__ = "0.1.0"
