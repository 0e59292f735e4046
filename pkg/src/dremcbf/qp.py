"""Small dense projection QP: minimize ||u - u_ref||^2 subject to affine
inequalities and box bounds.

A dual active-set method (the identity-Hessian special case of the
Goldfarb-Idnani algorithm) solves the program exactly: it starts from the
unconstrained optimum and adds violated constraints one at a time, taking
dual steps that keep every multiplier non-negative.  Constraint selection
is by lowest index, which makes the solver deterministic and cycle-free at
the desk-scale sizes it is meant for.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import ConfigurationError, DimensionError
from .safety import AffineInequality

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"

_MAX_DIM = 8
_MAX_INEQS = 16
_ZERO_TOL = 1e-12
_VIOLATION_TOL = 1e-10


@dataclass
class QpProblem:
    """Projection target, inequality list (a @ u >= b) and box bounds."""

    u_ref: np.ndarray
    ineqs: List[AffineInequality]
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.u_ref = np.atleast_1d(np.asarray(self.u_ref, dtype=float))
        self.lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        m = self.u_ref.size
        if not 1 <= m <= _MAX_DIM:
            raise DimensionError(f"input dimension must lie in [1, {_MAX_DIM}], got {m}")
        if len(self.ineqs) > _MAX_INEQS:
            raise DimensionError(
                f"at most {_MAX_INEQS} inequalities supported, got {len(self.ineqs)}"
            )
        if self.lo.size != m or self.hi.size != m:
            raise DimensionError("box bounds must match the input dimension")
        if not np.all(np.isfinite(self.u_ref)):
            raise ConfigurationError("u_ref must be finite")
        if not (np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi))):
            raise ConfigurationError("box bounds must be finite")
        if np.any(self.lo > self.hi):
            raise ConfigurationError("box has lo > hi")
        for ineq in self.ineqs:
            if ineq.a.size != m:
                raise DimensionError("inequality dimension mismatch")


@dataclass
class QpSolution:
    """Solver verdict; ``u`` is None when the constraints are inconsistent.

    ``multipliers`` are the KKT multipliers of the stacked rows
    (inequalities, then lower bounds, then upper bounds) for the gradient
    2(u - u_ref).
    """

    u: Optional[np.ndarray]
    active_set: List[int]
    status: str
    multipliers: np.ndarray = field(default=None)


def _stack_constraints(problem: QpProblem):
    m = problem.u_ref.size
    rows = [ineq.a for ineq in problem.ineqs]
    rhs = [ineq.b for ineq in problem.ineqs]
    eye = np.eye(m)
    for i in range(m):
        rows.append(eye[i])
        rhs.append(problem.lo[i])
    for i in range(m):
        rows.append(-eye[i])
        rhs.append(-problem.hi[i])
    return np.array(rows), np.array(rhs)


def solve(problem: QpProblem) -> QpSolution:
    """Exact active-set solution of the projection QP.

    Deterministic: identical inputs produce bit-identical outputs.  Status
    is ``infeasible`` when the constraint system has no common point.
    """
    C, d = _stack_constraints(problem)
    n_rows = C.shape[0]
    u = problem.u_ref.copy()
    active: List[int] = []
    lam: List[float] = []

    max_outer = 4 * (n_rows + 1)
    for _ in range(max_outer):
        slack = C @ u - d
        violated = np.flatnonzero(slack < -_VIOLATION_TOL)
        if violated.size == 0:
            mult = np.zeros(n_rows)
            for idx, val in zip(active, lam):
                mult[idx] = 2.0 * val
            return QpSolution(
                u=u, active_set=sorted(active), status=OPTIMAL, multipliers=mult
            )
        p = int(violated[0])
        cp = C[p]
        lam_p = 0.0
        for _ in range(2 * n_rows + 2):
            if active:
                N = C[active]
                gram = N @ N.T
                try:
                    r_vec = np.linalg.solve(gram, N @ cp)
                except np.linalg.LinAlgError:
                    r_vec = np.linalg.lstsq(gram, N @ cp, rcond=None)[0]
                z = cp - N.T @ r_vec
            else:
                r_vec = np.empty(0)
                z = cp
            z_sq = float(z @ z)
            s_p = float(cp @ u - d[p])
            t_full = (-s_p) / z_sq if z_sq > _ZERO_TOL else np.inf
            t_block = np.inf
            drop = -1
            for k in range(len(active)):
                if r_vec[k] > _ZERO_TOL:
                    cand = lam[k] / r_vec[k]
                    if cand < t_block:
                        t_block = cand
                        drop = k
            step = min(t_full, t_block)
            if not np.isfinite(step):
                return QpSolution(
                    u=None, active_set=sorted(active), status=INFEASIBLE,
                    multipliers=np.zeros(n_rows),
                )
            if z_sq > _ZERO_TOL:
                u = u + step * z
            for k in range(len(active)):
                lam[k] -= step * r_vec[k]
            lam_p += step
            if t_full <= t_block:
                active.append(p)
                lam.append(lam_p)
                break
            del active[drop]
            del lam[drop]
        else:  # pragma: no cover
            raise RuntimeError("active-set inner loop failed to terminate")
    raise RuntimeError("active-set solver exceeded its iteration budget")  # pragma: no cover


def box_fallback(ineqs: List[AffineInequality], u_ref, lo, hi) -> np.ndarray:
    """Input used when the QP is infeasible: the box point minimizing the
    total constraint violation (ties broken toward the clipped reference)."""
    u_ref = np.atleast_1d(np.asarray(u_ref, dtype=float))
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    total = np.zeros_like(u_ref)
    for ineq in ineqs:
        total += ineq.a
    u = np.clip(u_ref, lo, hi)
    u = np.where(total > 0.0, hi, np.where(total < 0.0, lo, u))
    return u
