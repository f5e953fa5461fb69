"""Joint slicing of base-station bandwidth and fog compute by distributed ADMM."""

from .admm import AdmmConfig, AdmmResult, IterationTrace, run_admm, run_round
from .baselines import BaselineResult, bandwidth_only, centralized_solve, compute_only, projected_gradient
from .errors import (
    DomainError,
    FogSliceError,
    Infeasible,
    NotConverged,
    ScenarioError,
    UnstableQueue,
    ZeroRate,
)
from .latency import (
    DelayBreakdown,
    check_feasible,
    comm_delay,
    poisson_quantile,
    queue_delay,
    response_time,
    total_objective,
)
from .local_solver import ProxInput, SolverSettings, phase1_point, solve_subproblem
from .model import (
    Allocation,
    BaseStationSpec,
    FogNodeSpec,
    LinkParams,
    Scenario,
    ServiceClass,
    ServiceLoad,
    load_scenario,
    save_scenario,
    validate_scenario,
)
from .orchestrator import check_stop, dual_update, project_halfspace, z_update
from .scenarios import demo_scenario, starved_scenario
from .simcore import gen_poisson_counts, simulate_cell, simulate_mm1

__version__ = "0.1.0"
