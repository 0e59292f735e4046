"""Experiment orchestration: single runs, metric extraction and sweeps."""

from __future__ import annotations

import concurrent.futures
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .acc import acc_barrier, acc_model, initial_state, reference_input
from .config import PARAM_ELEMENTS, RunConfig, load_config
from .drem import EstimatorState, IeStatus
from .errors import ConfigurationError
from .safety import linear_gain, signed_square
from .simulation import QP_FALLBACK, TrajectoryLog, run_closed_loop

log = logging.getLogger(__name__)

_N, _M, _P = 3, 1, 3


@dataclass
class RunMetrics:
    """Summary numbers of one run; recomputable from the trajectory CSV
    (except the wall clock, which is bookkeeping)."""

    min_barrier: float
    t_margin_zero: Optional[float]
    final_theta_hat: np.ndarray
    final_abs_error: np.ndarray
    qp_infeasible_count: int
    wall_clock_s: float

    def header(self) -> List[str]:
        n, p = self.final_theta_hat.shape
        cols = ["min_barrier", "t_margin_zero"]
        cols += [f"final_theta_hat_{i + 1}_{j + 1}" for i in range(n) for j in range(p)]
        cols += [f"final_abs_error_{i + 1}_{j + 1}" for i in range(n) for j in range(p)]
        cols += ["qp_infeasible_count", "wall_clock_s"]
        return cols

    def row(self) -> List[float]:
        vals = [self.min_barrier,
                np.nan if self.t_margin_zero is None else self.t_margin_zero]
        vals += list(self.final_theta_hat.ravel())
        vals += list(self.final_abs_error.ravel())
        vals += [float(self.qp_infeasible_count), self.wall_clock_s]
        return vals

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(self.header()) + "\n")
            fh.write(",".join("%.17g" % v for v in self.row()) + "\n")


def compute_metrics(
    logt: TrajectoryLog, theta_true: np.ndarray, wall_clock_s: float = float("nan")
) -> RunMetrics:
    """Pure function of the trajectory log (plus the true parameters)."""
    n, p = theta_true.shape
    margin = logt.col("margin")
    zero = logt.col("t")[margin == 0.0]
    final = logt.theta_hat(n, p)[-1]
    return RunMetrics(
        min_barrier=float(logt.col("barrier").min()),
        t_margin_zero=float(zero[0]) if zero.size else None,
        final_theta_hat=final,
        final_abs_error=np.abs(final - theta_true),
        qp_infeasible_count=int(np.sum(logt.col("qp_status") == QP_FALLBACK)),
        wall_clock_s=wall_clock_s,
    )


def build_run(config: RunConfig) -> dict:
    """Construct every simulation piece from a validated config.

    Returns a dict with the model, schedule, estimator, IE tracker,
    barrier, reference input and initial state, raising early when any
    module precondition fails.
    """
    if config.scenario != "acc":
        raise ConfigurationError(f"unknown scenario {config.scenario!r}")
    params = config.acc
    model = acc_model(params, d_bar=config.disturbance_d_bar)

    prior_lo = np.zeros((_N, _P))
    prior_hi = np.zeros((_N, _P))
    for name in config.estimate:
        i, j = PARAM_ELEMENTS[name]
        lo, hi = config.prior_ranges[name]
        # magnitude range [lo, hi] maps onto the negated matrix entry
        prior_lo[i, j] = -hi
        prior_hi[i, j] = -lo
    theta0 = np.clip(np.zeros((_N, _P)), prior_lo, prior_hi) + 0.0
    estimator = EstimatorState(
        theta_hat=theta0, prior_lo=prior_lo, prior_hi=prior_hi,
        gamma=config.gamma, r=config.r,
    )
    ie_status = IeStatus(beta_target=config.beta)

    alpha = (linear_gain(config.alpha_scale) if config.alpha_type == "linear"
             else signed_square())
    barrier = acc_barrier(params, alpha=alpha, mode=config.mode,
                          d_bar=config.barrier_d_bar)
    x0 = initial_state(params)
    if not barrier.value(x0) > 0.0:
        raise ConfigurationError("initial state lies outside the safe set")

    return {
        "model": model,
        "schedule": config.schedule,
        "estimator": estimator,
        "ie_status": ie_status,
        "barrier": barrier,
        "u_ref_fn": lambda t: np.array([reference_input(t, params)]),
        "x0": x0,
        "u_min": params.u_min,
        "u_max": params.u_max,
        "filter_poles": config.filter_poles,
        "filter_gains": config.filter_gains,
    }


def run(config: RunConfig, out_dir=None) -> Tuple[TrajectoryLog, RunMetrics]:
    """Execute one closed-loop run; optionally write trajectory.csv and
    metrics.csv into ``out_dir`` (partial files are removed on fault)."""
    pieces = build_run(config)
    model = pieces.pop("model")
    start = time.perf_counter()
    logt = run_closed_loop(model=model, **pieces)
    wall = time.perf_counter() - start
    metrics = compute_metrics(logt, model.theta_true, wall_clock_s=wall)

    target = out_dir if out_dir is not None else config.output_dir
    if target is not None:
        target = Path(target)
        target.mkdir(parents=True, exist_ok=True)
        traj_path = target / "trajectory.csv"
        try:
            logt.to_csv(traj_path)
        except BaseException:
            traj_path.unlink(missing_ok=True)
            raise
        metrics.to_csv(target / "metrics.csv")
    return logt, metrics


def _sweep_one(path: str, out_dir: str):
    config = load_config(path)
    _, metrics = run(config, out_dir=out_dir)
    return config.flat, metrics


def sweep(config_paths, out_root, jobs: int = 1):
    """Run every config independently; failures are recorded, not fatal.

    Writes per-run directories plus a comparison.csv keyed by the config
    fields that actually vary across the runs.  Returns a list of
    (name, metrics-or-None, error-or-None).
    """
    config_paths = [Path(p) for p in config_paths]
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    names = [p.stem for p in config_paths]
    if len(set(names)) != len(names):
        raise ConfigurationError("sweep config files must have distinct names")

    results = {}
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                name: pool.submit(_sweep_one, str(path), str(out_root / name))
                for name, path in zip(names, config_paths)
            }
            for name, future in futures.items():
                try:
                    results[name] = (future.result(), None)
                except Exception as exc:
                    results[name] = (None, exc)
    else:
        for name, path in zip(names, config_paths):
            try:
                results[name] = (_sweep_one(str(path), str(out_root / name)), None)
            except Exception as exc:
                results[name] = (None, exc)
                log.error("run %s failed: %s", name, exc)

    flats = [res[0][0] for res in results.values() if res[0] is not None]
    varied = []
    if len(flats) > 1:
        keys = sorted(set().union(*(f.keys() for f in flats)))
        for key in keys:
            vals = {repr(f.get(key)) for f in flats}
            if len(vals) > 1:
                varied.append(key)

    rows = []
    out = []
    for name in names:
        payload, error = results[name]
        if payload is None:
            out.append((name, None, error))
            continue
        flat, metrics = payload
        rows.append((name, flat, metrics))
        out.append((name, metrics, None))

    if rows:
        header = ["run"] + varied + rows[0][2].header()
        with open(out_root / "comparison.csv", "w") as fh:
            fh.write(",".join(header) + "\n")
            for name, flat, metrics in rows:
                cells = [name]
                cells += [str(flat.get(k)) for k in varied]
                cells += ["%.17g" % v for v in metrics.row()]
                fh.write(",".join(cells) + "\n")
    return out
