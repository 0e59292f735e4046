"""Barrier constraint assembly for safe adaptation.

The safety condition is an affine inequality in the input: the barrier
derivative along the estimated dynamics, discounted by a worst-case
uncertainty margin, must dominate a decay floor.  Four floors are
provided: the plain one (mode ``th1``), a tightened one that shrinks the
safe set by the squared error envelopes (``cor1``), their pointwise
minimum (``cor2``), and the minimum with an extra disturbance margin
(``robust``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateConstraintError, DimensionError, ConfigurationError

TH1 = "th1"
COR1 = "cor1"
COR2 = "cor2"
ROBUST = "robust"
MODES = (TH1, COR1, COR2, ROBUST)

_DEGENERATE_TOL = 1e-12


def linear_gain(scale: float = 1.0) -> Callable[[float], float]:
    """Linear extended class-K-infinity gain s -> scale * s."""
    if not scale > 0.0:
        raise ConfigurationError(f"gain scale must be positive, got {scale}")
    return lambda s: scale * s


def signed_square() -> Callable[[float], float]:
    """Sign-preserving quadratic gain s -> sign(s) * s**2."""
    return lambda s: s * abs(s)


@dataclass
class AffineInequality:
    """Encodes ``a @ u >= b``."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float))
        self.b = float(self.b)
        if not (np.all(np.isfinite(self.a)) and np.isfinite(self.b)):
            raise ConfigurationError("inequality coefficients must be finite")

    def residual(self, u) -> float:
        """Slack a @ u - b; non-negative when satisfied."""
        return float(self.a @ np.atleast_1d(u) - self.b)


@dataclass
class BarrierSpec:
    """Barrier evaluators plus the constraint mode.

    ``value`` maps a state to the barrier scalar, ``grad`` to its state
    gradient.  ``d_bar`` is the disturbance margin used by the robust mode
    only.
    """

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    alpha: Callable[[float], float] = field(default_factory=linear_gain)
    mode: str = COR2
    d_bar: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.d_bar < 0.0:
            raise ConfigurationError(f"disturbance margin must be >= 0, got {self.d_bar}")


def uncertainty_margin(grad_b: np.ndarray, regressor: np.ndarray, bounds: np.ndarray) -> float:
    """Worst-case magnitude of the unknown-parameter term in the barrier
    derivative: sum of bound[i, j] * |grad_b[i] * regressor[j]|.

    Non-negative by construction; zero exactly when every envelope is zero.
    """
    grad_b = np.asarray(grad_b, dtype=float)
    regressor = np.asarray(regressor, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape != (grad_b.size, regressor.size):
        raise DimensionError(
            f"bounds shape {bounds.shape} does not match "
            f"({grad_b.size}, {regressor.size})"
        )
    return float(np.sum(bounds * np.abs(np.outer(grad_b, regressor))))


def tightening(bounds: np.ndarray) -> float:
    """Sum of squared error envelopes; shrinks the safe set in the
    tightened modes."""
    bounds = np.asarray(bounds, dtype=float)
    return float(np.sum(bounds * bounds))


def decay_floor_nominal(barrier_value: float, alpha) -> float:
    """Plain decay floor -alpha(B)."""
    return -alpha(barrier_value)


def decay_floor_tightened(barrier_value: float, bounds, rates, alpha) -> float:
    """Tightened floor -alpha(B - tightening) + sum(bound * bound_rate).

    ``rates`` are the envelope time derivatives (element-wise <= 0).
    """
    bounds = np.asarray(bounds, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if bounds.shape != rates.shape:
        raise DimensionError(
            f"bounds shape {bounds.shape} != rates shape {rates.shape}"
        )
    return -alpha(barrier_value - tightening(bounds)) + float(np.sum(bounds * rates))


def build_constraint(
    spec: BarrierSpec,
    x,
    f_x,
    g_x,
    regressor_x,
    theta_hat,
    bounds,
    rates,
) -> AffineInequality:
    """Assemble the safety condition as ``a @ u >= b`` at the current state.

    ``a = grad_b @ g(x)`` and ``b`` collects the mode's decay floor minus
    the known drift and estimated-parameter terms plus the uncertainty
    margin.  The regressor must not depend on the input, otherwise the
    condition would not be affine in u.
    """
    grad_b = np.asarray(spec.grad(x), dtype=float)
    f_x = np.asarray(f_x, dtype=float)
    g_x = np.atleast_2d(np.asarray(g_x, dtype=float))
    regressor_x = np.asarray(regressor_x, dtype=float)
    theta_hat = np.asarray(theta_hat, dtype=float)
    n = grad_b.size
    if f_x.size != n or g_x.shape[0] != n:
        raise DimensionError("drift/input dynamics do not match the state dimension")
    if theta_hat.shape != (n, regressor_x.size):
        raise DimensionError(
            f"theta_hat shape {theta_hat.shape} does not match "
            f"({n}, {regressor_x.size})"
        )

    b_val = float(spec.value(x))
    margin = uncertainty_margin(grad_b, regressor_x, bounds)
    floor = decay_floor_nominal(b_val, spec.alpha)
    if spec.mode != TH1:
        tight = decay_floor_tightened(b_val, bounds, rates, spec.alpha)
        if spec.mode == COR1:
            floor = tight
        else:
            floor = min(floor, tight)
            if spec.mode == ROBUST:
                floor -= float(np.linalg.norm(grad_b)) * spec.d_bar

    a = grad_b @ g_x
    b = floor - float(grad_b @ f_x) - float(grad_b @ theta_hat @ regressor_x) + margin
    if np.all(np.abs(a) <= _DEGENERATE_TOL) and b > _DEGENERATE_TOL:
        raise DegenerateConstraintError(
            f"safety constraint has no input direction at x={np.asarray(x)} "
            f"(required slack {b:.3g})"
        )
    return AffineInequality(a=a, b=b)


def check_barrier_consistency(spec: BarrierSpec, states, rel_tol: float = 1e-5,
                              fd_step: float = 1e-6):
    """Cross-check the gradient against central finite differences of the
    value, and the gain for alpha(0)=0 / strict increase on a sample grid.

    Raises ConfigurationError on mismatch; used by config validation and
    tests.
    """
    if abs(spec.alpha(0.0)) > 1e-12:
        raise ConfigurationError("barrier gain must vanish at zero")
    grid = np.linspace(-5.0, 5.0, 21)
    vals = [spec.alpha(s) for s in grid]
    if not all(b > a for a, b in zip(vals, vals[1:])):
        raise ConfigurationError("barrier gain must be strictly increasing")
    for x in states:
        x = np.asarray(x, dtype=float)
        grad = np.asarray(spec.grad(x), dtype=float)
        fd = np.empty_like(grad)
        for i in range(x.size):
            step = np.zeros_like(x)
            step[i] = fd_step
            fd[i] = (spec.value(x + step) - spec.value(x - step)) / (2.0 * fd_step)
        scale = max(1.0, float(np.max(np.abs(grad))))
        if np.max(np.abs(fd - grad)) > rel_tol * scale:
            raise ConfigurationError(
                f"barrier gradient mismatch at x={x}: analytic {grad}, fd {fd}"
            )
