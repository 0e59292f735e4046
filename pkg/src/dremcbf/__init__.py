"""Finite-time element-wise parameter identification with
barrier-certified safe adaptation, plus an adaptive-cruise-control study.
"""

from .acc import (
    AccParams,
    acc_barrier,
    acc_model,
    initial_state,
    model_disturbance_bound,
    reference_input,
)
from .drem import (
    EstimatorState,
    ExtendedRegression,
    IeStatus,
    adjugate,
    bound_rate,
    build_lre,
    drem_step,
    extend_and_mix,
    ie_check,
    min_learning_rate,
    signed_pow,
    worst_case_bound,
)
from .errors import (
    ConfigurationError,
    DegenerateConstraintError,
    DimensionError,
    SignalError,
    SimulationFault,
)
from .filters import (
    FilterBank,
    FilterChannel,
    bank_apply,
    default_poles,
    filter_step,
    make_filter_bank,
)
from .qp import INFEASIBLE, OPTIMAL, QpProblem, QpSolution, box_fallback, solve
from .safety import (
    COR1,
    COR2,
    MODES,
    ROBUST,
    TH1,
    AffineInequality,
    BarrierSpec,
    build_constraint,
    check_barrier_consistency,
    decay_floor_nominal,
    decay_floor_tightened,
    linear_gain,
    signed_square,
    tightening,
    uncertainty_margin,
)
from .simulation import (
    PlantModel,
    SimSchedule,
    TrajectoryLog,
    rk4_step,
    run_closed_loop,
    sample_disturbance,
)

__version__ = "0.1.0"
