"""Shared test helpers: independent oracles and config builders."""

import copy

import numpy as np
import pytest

from dremcbf.config import DEFAULTS, config_from_dict


def laplace_det(mat):
    """Recursive cofactor-expansion determinant, independent of the
    library's adjugate/determinant code paths."""
    mat = np.asarray(mat, dtype=float)
    q = mat.shape[0]
    if q == 1:
        return mat[0, 0]
    total = 0.0
    rows = np.arange(1, q)
    for j in range(q):
        cols = [c for c in range(q) if c != j]
        total += (-1.0) ** j * mat[0, j] * laplace_det(mat[np.ix_(rows, cols)])
    return total


def laplace_adjugate(mat):
    """Adjugate built entry by entry from Laplace-expansion minors."""
    mat = np.asarray(mat, dtype=float)
    q = mat.shape[0]
    if q == 1:
        return np.ones((1, 1))
    adj = np.empty((q, q))
    idx = np.arange(q)
    for i in range(q):
        for j in range(q):
            minor = mat[np.ix_(idx != i, idx != j)]
            adj[j, i] = (-1.0) ** (i + j) * laplace_det(minor)
    return adj


def grid_minimize(u_ref, ineqs, lo, hi, levels=4, points=81):
    """Multi-level exhaustive grid search for the projection QP oracle.

    Scans the box on a uniform grid, keeps the best feasible point, then
    refines a shrinking window around it.  Purely feasibility + objective
    evaluation; no knowledge of the active-set path.  Returns
    (best_point, best_objective) or (None, inf) when no feasible grid
    point exists.
    """
    u_ref = np.atleast_1d(np.asarray(u_ref, dtype=float))
    lo = np.atleast_1d(np.asarray(lo, dtype=float)).copy()
    hi = np.atleast_1d(np.asarray(hi, dtype=float)).copy()
    m = u_ref.size
    best = None
    best_obj = np.inf
    win_lo, win_hi = lo.copy(), hi.copy()
    for _ in range(levels):
        axes = [np.linspace(win_lo[k], win_hi[k], points) for k in range(m)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
        feasible = np.ones(len(mesh), dtype=bool)
        for ineq in ineqs:
            feasible &= mesh @ ineq.a >= ineq.b - 1e-12
        feasible &= np.all(mesh >= lo - 1e-12, axis=1)
        feasible &= np.all(mesh <= hi + 1e-12, axis=1)
        if not np.any(feasible):
            break
        cand = mesh[feasible]
        obj = np.sum((cand - u_ref) ** 2, axis=1)
        k = int(np.argmin(obj))
        if obj[k] < best_obj:
            best_obj = float(obj[k])
            best = cand[k]
        cell = (win_hi - win_lo) / (points - 1)
        win_lo = np.maximum(lo, best - 2.0 * cell)
        win_hi = np.minimum(hi, best + 2.0 * cell)
    return best, best_obj


def make_config(**overrides):
    """Validated RunConfig from the stock defaults plus nested overrides.

    Overrides use the config tree structure, e.g.
    ``make_config(schedule={"horizon": 2.0}, barrier={"mode": "th1"})``.
    """
    raw = copy.deepcopy(DEFAULTS)
    for key, val in overrides.items():
        if isinstance(val, dict):
            raw[key].update(val)
        else:
            raw[key] = val
    return config_from_dict(raw)


QUICK_SCHEDULE = {
    "dt_sim": 5.0e-4,
    "est_hz": 2000.0,
    "qp_hz": 100.0,
    "horizon": 2.0,
    "seed": 0,
    "log_stride": 1,
}


@pytest.fixture(scope="session")
def acc_quick_log():
    """Short stock run shared by tests that only need a plausible log."""
    from dremcbf.runner import run

    config = make_config(schedule=dict(QUICK_SCHEDULE))
    logt, metrics = run(config)
    return config, logt, metrics
