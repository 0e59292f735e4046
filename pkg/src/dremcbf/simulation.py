"""Ground-truth plant integration and the dual-rate closed loop.

The plant is control-affine with a structured unknown term:
``xdot = f(x) + g(x) u + theta_true @ regressor(x, u) + d``.  The loop
integrates it with fixed-step RK4, samples the regression at a fast rate
for the estimator, and re-solves the safety-filter QP at a slower control
rate with the input held constant in between.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import qp
from .drem import (
    EstimatorState,
    IeStatus,
    bound_rate,
    build_lre,
    drem_step,
    extend_and_mix,
    ie_check,
)
from .errors import ConfigurationError, DegenerateConstraintError, SimulationFault
from .filters import default_poles, make_filter_bank
from .safety import BarrierSpec, build_constraint, tightening, uncertainty_margin

log = logging.getLogger(__name__)

QP_OK = 0
QP_FALLBACK = 1
QP_DEGENERATE = 2


@dataclass
class PlantModel:
    """Evaluators for the simulated plant plus the true parameter matrix.

    ``f`` maps state to an n-vector, ``g`` to an n x m matrix and
    ``regressor`` (state, input) to a p-vector.  ``xdot`` may provide a
    fused derivative for speed; when omitted it is composed from the
    parts.
    """

    n: int
    m: int
    p: int
    f: Callable
    g: Callable
    regressor: Callable
    theta_true: np.ndarray
    d_bar: float = 0.0
    xdot: Optional[Callable] = None

    def __post_init__(self):
        self.theta_true = np.asarray(self.theta_true, dtype=float)
        if self.theta_true.shape != (self.n, self.p):
            raise ConfigurationError(
                f"theta_true shape {self.theta_true.shape} != ({self.n}, {self.p})"
            )
        if self.d_bar < 0.0:
            raise ConfigurationError(f"disturbance bound must be >= 0, got {self.d_bar}")
        if self.xdot is None:
            self.xdot = self._composed_xdot

    def _composed_xdot(self, x, u, d):
        return (
            self.f(x)
            + np.atleast_2d(self.g(x)) @ np.atleast_1d(u)
            + self.theta_true @ self.regressor(x, u)
            + d
        )


def rk4_step(model: PlantModel, x, u, d, dt: float) -> np.ndarray:
    """Classical fourth-order step with input and disturbance held fixed."""
    xd = model.xdot
    k1 = xd(x, u, d)
    k2 = xd(x + (0.5 * dt) * k1, u, d)
    k3 = xd(x + (0.5 * dt) * k2, u, d)
    k4 = xd(x + dt * k3, u, d)
    x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not math.isfinite(float(x_next.sum())):
        raise SimulationFault(
            f"non-finite state after step: x={np.asarray(x)}, u={np.asarray(u)}, "
            f"d={np.asarray(d)}, dt={dt}"
        )
    return x_next


def sample_disturbance(d_bar: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Vector with uniformly random direction and magnitude uniform on
    [0, d_bar].  Draws are consumed even when d_bar is zero so that runs
    differing only in d_bar see proportional disturbance sequences.
    """
    direction = rng.standard_normal(n)
    magnitude = d_bar * rng.uniform()
    norm = math.sqrt(float(direction @ direction))
    if magnitude == 0.0 or norm == 0.0:
        return np.zeros(n)
    return (magnitude / norm) * direction


@dataclass
class SimSchedule:
    """Integrator step, estimation and control rates, horizon and seed.

    The control rate must divide the estimation rate and the integrator
    step must divide the estimation interval, so every hand-off happens on
    a shared grid.  ``log_stride`` thins the estimation-rate log rows and
    must divide the control interval so control rows are always logged.
    """

    dt_sim: float
    est_hz: float
    qp_hz: float
    horizon: float
    seed: int = 0
    log_stride: int = 1

    def __post_init__(self):
        if min(self.dt_sim, self.est_hz, self.qp_hz, self.horizon) <= 0.0:
            raise ConfigurationError("schedule entries must be positive")
        if self.dt_sim > 1.0 / self.est_hz + 1e-12:
            raise ConfigurationError("dt_sim must not exceed the estimation interval")
        if self.est_hz < self.qp_hz:
            raise ConfigurationError("estimation rate must be at least the control rate")
        if abs(self.est_hz / self.qp_hz - round(self.est_hz / self.qp_hz)) > 1e-9:
            raise ConfigurationError("control rate must divide the estimation rate")
        sub = (1.0 / self.est_hz) / self.dt_sim
        if abs(sub - round(sub)) > 1e-6:
            raise ConfigurationError("dt_sim must divide the estimation interval")
        if self.log_stride < 1 or int(self.log_stride) != self.log_stride:
            raise ConfigurationError("log_stride must be a positive integer")
        if self.ctrl_every % self.log_stride != 0:
            raise ConfigurationError("log_stride must divide the control interval")

    @property
    def n_est_steps(self) -> int:
        return int(round(self.horizon * self.est_hz))

    @property
    def substeps(self) -> int:
        return int(round((1.0 / self.est_hz) / self.dt_sim))

    @property
    def ctrl_every(self) -> int:
        return int(round(self.est_hz / self.qp_hz))


class TrajectoryLog:
    """Time-indexed record of the closed loop, exportable as CSV.

    Column order: t, state, reference input, applied input, barrier,
    tightening, margin, excitation, excitation energy, every parameter
    estimate, every error envelope, QP status.
    """

    def __init__(self, columns: List[str], data: np.ndarray):
        if data.ndim != 2 or data.shape[1] != len(columns):
            raise ConfigurationError("log data does not match its column list")
        self.columns = list(columns)
        self.data = data

    @staticmethod
    def column_names(n: int, m: int, p: int) -> List[str]:
        cols = ["t"]
        cols += [f"x_{i + 1}" for i in range(n)]
        cols += [f"u_ref_{k + 1}" for k in range(m)]
        cols += [f"u_{k + 1}" for k in range(m)]
        cols += ["barrier", "tightening", "margin", "excitation", "excitation_energy"]
        cols += [f"theta_hat_{i + 1}_{j + 1}" for i in range(n) for j in range(p)]
        cols += [f"bound_{i + 1}_{j + 1}" for i in range(n) for j in range(p)]
        cols += ["qp_status"]
        return cols

    def col(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def theta_hat(self, n: int, p: int) -> np.ndarray:
        """Estimates as an (n_rows, n, p) array."""
        start = self.columns.index("theta_hat_1_1")
        return self.data[:, start : start + n * p].reshape(-1, n, p)

    def bounds(self, n: int, p: int) -> np.ndarray:
        start = self.columns.index("bound_1_1")
        return self.data[:, start : start + n * p].reshape(-1, n, p)

    def to_csv(self, path) -> None:
        """Header row plus one line per logged step.  Time is written with
        six decimals; every other column round-trips exactly."""
        fmt = "%.6f" + ",%.17g" * (len(self.columns) - 1)
        with open(path, "w") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.data:
                fh.write(fmt % tuple(row) + "\n")

    @staticmethod
    def read_csv(path) -> "TrajectoryLog":
        with open(path) as fh:
            columns = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return TrajectoryLog(columns, data)


def run_closed_loop(
    model: PlantModel,
    schedule: SimSchedule,
    estimator: EstimatorState,
    ie_status: IeStatus,
    barrier: BarrierSpec,
    u_ref_fn: Callable[[float], np.ndarray],
    x0,
    u_min,
    u_max,
    filter_poles=None,
    filter_gains=None,
) -> TrajectoryLog:
    """Run the safe-adaptation loop to the horizon and return the log.

    Every estimation tick builds one regression sample from a forward
    difference of the state, pushes it through the filter banks, mixes,
    and advances the estimator; every control tick rebuilds the safety
    constraint from the current envelopes and projects the reference input
    through the QP.  An infeasible QP falls back to the box input that
    minimizes constraint violation and flags the step.
    """
    x = np.array(x0, dtype=float)
    if x.size != model.n:
        raise ConfigurationError(f"x0 has {x.size} entries, expected {model.n}")
    if estimator.shape != (model.n, model.p):
        raise ConfigurationError(
            f"estimator shape {estimator.shape} != ({model.n}, {model.p})"
        )
    if not barrier.value(x) > 0.0:
        raise ConfigurationError(
            f"initial state is outside the safe set: barrier={barrier.value(x):.6g}"
        )
    u_lo = np.broadcast_to(np.asarray(u_min, dtype=float), (model.m,)).copy()
    u_hi = np.broadcast_to(np.asarray(u_max, dtype=float), (model.m,)).copy()

    probe_r0 = np.asarray(model.regressor(x, u_lo), dtype=float)
    probe_r1 = np.asarray(model.regressor(x, u_hi), dtype=float)
    if probe_r0.size != model.p:
        raise ConfigurationError(
            f"regressor returns {probe_r0.size} entries, expected {model.p}"
        )
    if not np.allclose(probe_r0, probe_r1, rtol=0.0, atol=0.0):
        raise ConfigurationError(
            "regressor depends on the input; the safety condition would "
            "not be affine in u"
        )

    q = model.p
    if filter_poles is None:
        filter_poles = default_poles(q)
    if filter_gains is None:
        filter_gains = np.ones(q)
    dt_est = 1.0 / schedule.est_hz
    z_banks = [make_filter_bank(q, filter_poles, filter_gains, dt_est) for _ in range(q)]
    x_banks = [make_filter_bank(q, filter_poles, filter_gains, dt_est) for _ in range(model.n)]

    rng = np.random.default_rng(schedule.seed)
    n_steps = schedule.n_est_steps
    stride = schedule.log_stride
    n_rows = n_steps // stride + 1
    columns = TrajectoryLog.column_names(model.n, model.m, model.p)
    data = np.empty((n_rows, len(columns)))
    one_plus_r = 1.0 + estimator.r

    u = np.zeros(model.m)
    u_ref = np.zeros(model.m)
    qp_status = QP_OK
    excitation = 0.0
    excitation_power = 0.0
    row = 0

    def control_update(t: float):
        nonlocal u, u_ref, qp_status
        u_ref = np.atleast_1d(np.asarray(u_ref_fn(t), dtype=float))
        rates = bound_rate(
            estimator.diam, estimator.gamma, estimator.r,
            excitation_power, estimator.excitation_energy,
        )
        ineqs = []
        qp_status = QP_OK
        try:
            ineqs = [
                build_constraint(
                    barrier, x, model.f(x), model.g(x), model.regressor(x, u),
                    estimator.theta_hat, estimator.bound, rates,
                )
            ]
        except DegenerateConstraintError as exc:
            log.warning("degenerate safety constraint at t=%.4f: %s", t, exc)
            qp_status = QP_DEGENERATE
        solution = qp.solve(qp.QpProblem(u_ref, ineqs, u_lo, u_hi))
        if solution.status == qp.OPTIMAL:
            u = solution.u
        else:
            u = qp.box_fallback(ineqs, u_ref, u_lo, u_hi)
            qp_status = QP_FALLBACK
            log.warning("safety QP infeasible at t=%.4f; clamped input", t)

    def log_row(t: float):
        nonlocal row
        grad_b = barrier.grad(x)
        reg_x = model.regressor(x, u)
        vals = [t]
        vals.extend(x)
        vals.extend(u_ref)
        vals.extend(u)
        vals.append(barrier.value(x))
        vals.append(tightening(estimator.bound))
        vals.append(uncertainty_margin(grad_b, reg_x, estimator.bound))
        vals.append(excitation)
        vals.append(estimator.excitation_energy)
        vals.extend(estimator.theta_hat.ravel())
        vals.extend(estimator.bound.ravel())
        vals.append(qp_status)
        data[row] = vals
        row += 1

    sub = schedule.substeps
    ctrl_every = schedule.ctrl_every
    for k in range(n_steps):
        if k % ctrl_every == 0:
            control_update(k * dt_est)
        if k == 0:
            log_row(0.0)
        d = sample_disturbance(model.d_bar, model.n, rng)
        x_prev = x
        for _ in range(sub):
            x = rk4_step(model, x, u, d, schedule.dt_sim)
        lhs, z = build_lre(
            x_prev, x, dt_est, u,
            model.f(x_prev), model.g(x_prev), model.regressor(x_prev, u),
        )
        reg = extend_and_mix(x_banks, z_banks, lhs, z)
        drem_step(estimator, reg, dt_est)
        excitation = reg.excitation
        excitation_power = abs(excitation) ** one_plus_r
        ie_status.excitation_energy = estimator.excitation_energy
        ie_check(ie_status, (k + 1) * dt_est)
        if (k + 1) % stride == 0:
            log_row((k + 1) / schedule.est_hz)

    return TrajectoryLog(columns, data[:row])
