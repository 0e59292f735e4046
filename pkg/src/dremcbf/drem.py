"""Element-wise finite-time parameter identification.

The pipeline: a sampled regression ``X = theta @ z`` is expanded through
filter banks into a square system, mixed with the adjugate of the filtered
regressor matrix so every matrix entry obeys its own scalar regression
``mixed[j, i] = excitation * theta[i, j]``, and each entry is then driven
by a high-gain fractional-power law that converges in finite time once
enough excitation energy has accumulated.  A deterministic worst-case
error envelope shrinks with the same energy and reaches exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DimensionError, SignalError
from .filters import FilterBank, _bank_advance

_MAX_ADJUGATE_DIM = 6


def adjugate(mat: np.ndarray) -> np.ndarray:
    """Classical adjugate (transpose of the cofactor matrix).

    Satisfies ``adjugate(M) @ M = det(M) * I`` even for singular M.  Only
    small dense matrices are supported (1 <= q <= 6).
    """
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionError(f"adjugate needs a square matrix, got shape {mat.shape}")
    q = mat.shape[0]
    if q < 1 or q > _MAX_ADJUGATE_DIM:
        raise DimensionError(f"adjugate supports 1 <= q <= {_MAX_ADJUGATE_DIM}, got {q}")
    if q == 1:
        # the empty cofactor product is 1
        return np.ones((1, 1))
    if q == 2:
        return np.array(
            [[mat[1, 1], -mat[0, 1]], [-mat[1, 0], mat[0, 0]]]
        )
    if q == 3:
        return _adjugate3(mat)
    adj = np.empty((q, q))
    rows = np.arange(q)
    for i in range(q):
        for j in range(q):
            minor = mat[np.ix_(rows != i, rows != j)]
            adj[j, i] = (-1.0) ** (i + j) * np.linalg.det(minor)
    return adj


def _adjugate3(m) -> np.ndarray:
    a, b, c, d, e, f, g, h, i = m.ravel()
    return np.array(
        [
            [e * i - f * h, -(b * i - c * h), b * f - c * e],
            [-(d * i - f * g), a * i - c * g, -(a * f - c * d)],
            [d * h - e * g, -(a * h - b * g), a * e - b * d],
        ]
    )


def _det_small(mat: np.ndarray) -> float:
    q = mat.shape[0]
    if q == 1:
        return float(mat[0, 0])
    if q == 2:
        return float(mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0])
    if q == 3:
        a, b, c, d, e, f, g, h, i = mat.ravel()
        return float(a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g))
    return float(np.linalg.det(mat))


def _det_from_adjugate(mat: np.ndarray, adj: np.ndarray) -> float:
    # det = first row of mat dotted with the first column of the adjugate
    return float(mat[0] @ adj[:, 0])


@dataclass
class ExtendedRegression:
    """Snapshot of the filtered and mixed regression at one sample.

    ``z_filtered`` is q x q (column j holds the bank response to regressor
    entry j), ``x_filtered`` is q x n (column i holds the bank response to
    left-side entry i), ``excitation`` is det(z_filtered), and
    ``mixed = adj @ x_filtered`` obeys ``mixed[j, i] = excitation *
    theta[i, j]`` plus any mixed disturbance.
    """

    z_filtered: np.ndarray
    x_filtered: np.ndarray
    adj: np.ndarray
    excitation: float
    mixed: np.ndarray


def build_lre(x, x_next, dt: float, u, f_x, g_x, regressor_x):
    """Form one sample of the regression from consecutive states.

    The state derivative is approximated by a forward difference over the
    sampling interval; the approximation error acts as an extra bounded
    disturbance on the regression.  Returns ``(X, z)`` with
    ``X = (x_next - x)/dt - f(x) - g(x) u`` and ``z`` the regressor value.
    """
    if not dt > 0.0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    lhs = (np.asarray(x_next, dtype=float) - np.asarray(x, dtype=float)) / dt
    lhs = lhs - f_x - np.asarray(g_x) @ np.atleast_1d(u)
    if not math.isfinite(float(lhs.sum())):
        raise SignalError(f"non-finite regression left side: {lhs}")
    return lhs, np.asarray(regressor_x, dtype=float)


def extend_and_mix(x_banks, z_banks, X, z) -> ExtendedRegression:
    """Step the filter banks one tick and mix with the adjugate.

    ``z_banks`` holds one bank per regressor entry (q of them, each with q
    channels) and ``x_banks`` one bank per state row.  All banks must share
    the same channel parameters for the mixed identity to hold.
    """
    q = len(z_banks)
    n = len(x_banks)
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float)
    if z.size != q:
        raise DimensionError(f"regressor has {z.size} entries but {q} banks")
    if X.size != n:
        raise DimensionError(f"left side has {X.size} entries but {n} banks")
    z_filt = np.empty((q, q))
    x_filt = np.empty((q, n))
    for j in range(q):
        z_filt[:, j] = _bank_advance(z_banks[j], z[j])
    for i in range(n):
        x_filt[:, i] = _bank_advance(x_banks[i], X[i])
    adj = adjugate(z_filt)
    excitation = _det_from_adjugate(z_filt, adj)
    mixed = adj @ x_filt
    return ExtendedRegression(
        z_filtered=z_filt,
        x_filtered=x_filt,
        adj=adj,
        excitation=excitation,
        mixed=mixed,
    )


def signed_pow(s, r: float):
    """Odd extension of the fractional power: sign(s) * |s|**r.

    Continuous, odd and monotone; accepts scalars or arrays.
    """
    return np.sign(s) * np.abs(s) ** r


def min_learning_rate(diam: float, r: float, beta: float) -> float:
    """Smallest learning rate that exhausts a worst-case interval of width
    ``diam`` once the excitation energy reaches ``beta``."""
    if not diam > 0.0:
        raise ConfigurationError(f"interval width must be positive, got {diam}")
    if not 0.0 < r < 1.0:
        raise ConfigurationError(f"exponent r must lie in (0, 1), got {r}")
    if not beta > 0.0:
        raise ConfigurationError(f"excitation target must be positive, got {beta}")
    return 2.0 * diam**2 / ((1.0 - r) * beta)


def worst_case_bound(diam, gamma, r, excitation_energy):
    """Deterministic envelope on the element-wise estimation error.

    ``max(0, diam**2 - (1-r)*gamma/2 * energy) ** (1/(1-r))``, clamped at
    zero because a negative bracket has no worst-case meaning.  Vectorized
    over ``diam``.
    """
    bracket = np.asarray(diam, dtype=float) ** 2
    bracket = bracket - 0.5 * (1.0 - r) * gamma * excitation_energy
    return np.maximum(bracket, 0.0) ** (1.0 / (1.0 - r))


def bound_rate(diam, gamma, r, excitation_power, excitation_energy):
    """Time derivative of :func:`worst_case_bound` (always <= 0).

    ``excitation_power`` is the current |excitation|**(1+r); the rate is
    zero once the envelope is exhausted.
    """
    bracket = np.asarray(diam, dtype=float) ** 2
    bracket = bracket - 0.5 * (1.0 - r) * gamma * excitation_energy
    bracket = np.maximum(bracket, 0.0)
    return -0.5 * gamma * excitation_power * bracket ** (r / (1.0 - r))


@dataclass
class EstimatorState:
    """Per-element estimates, prior intervals and error envelopes.

    Elements whose prior interval has zero width are treated as known:
    they are never updated and contribute nothing to the envelopes.
    ``excitation_energy`` accumulates the squared excitation signal
    integral shared by every element.
    """

    theta_hat: np.ndarray
    prior_lo: np.ndarray
    prior_hi: np.ndarray
    gamma: float
    r: float
    excitation_energy: float = 0.0
    diam: np.ndarray = field(init=False)
    mask: np.ndarray = field(init=False)
    bound: np.ndarray = field(init=False)

    def __post_init__(self):
        self.theta_hat = np.array(self.theta_hat, dtype=float)
        self.prior_lo = np.array(self.prior_lo, dtype=float)
        self.prior_hi = np.array(self.prior_hi, dtype=float)
        if not (self.theta_hat.shape == self.prior_lo.shape == self.prior_hi.shape):
            raise DimensionError(
                "theta_hat and prior interval arrays must share one shape"
            )
        if not self.gamma > 0.0:
            raise ConfigurationError(f"learning rate must be positive, got {self.gamma}")
        if not 0.0 < self.r < 1.0:
            raise ConfigurationError(f"exponent r must lie in (0, 1), got {self.r}")
        if np.any(self.prior_lo > self.prior_hi):
            raise ConfigurationError("prior interval has lo > hi")
        if np.any(self.theta_hat < self.prior_lo) or np.any(self.theta_hat > self.prior_hi):
            raise ConfigurationError("initial estimate lies outside its prior interval")
        self.diam = self.prior_hi - self.prior_lo
        self.mask = (self.diam > 0.0).astype(float)
        self.bound = worst_case_bound(self.diam, self.gamma, self.r, self.excitation_energy)
        self._diam_sq = self.diam**2
        self._half_coef = 0.5 * (1.0 - self.r) * self.gamma
        self._inv_pow = 1.0 / (1.0 - self.r)

    @property
    def shape(self):
        return self.theta_hat.shape


def drem_step(est: EstimatorState, reg: ExtendedRegression, dt: float) -> EstimatorState:
    """Advance every estimated element by one explicit Euler step.

    With zero excitation nothing changes.  Mutates ``est`` in place and
    returns it.
    """
    delta = reg.excitation
    mixed = reg.mixed
    if not math.isfinite(delta + float(mixed.sum())):
        raise SignalError("non-finite mixed regression")
    if delta == 0.0:
        return est
    resid = mixed.T - delta * est.theta_hat
    est.theta_hat += (dt * est.gamma * delta) * signed_pow(resid, est.r) * est.mask
    est.excitation_energy += dt * abs(delta) ** (1.0 + est.r)
    bracket = est._diam_sq - est._half_coef * est.excitation_energy
    est.bound = np.maximum(bracket, 0.0) ** est._inv_pow
    return est


@dataclass
class IeStatus:
    """Tracks whether the accumulated excitation crossed its target."""

    beta_target: float
    excitation_energy: float = 0.0
    satisfied: bool = False
    t_satisfied: Optional[float] = None

    def __post_init__(self):
        if not self.beta_target > 0.0:
            raise ConfigurationError(
                f"excitation target must be positive, got {self.beta_target}"
            )


def ie_check(status: IeStatus, t: Optional[float] = None) -> IeStatus:
    """Refresh the satisfied flag; records the first crossing time."""
    if status.excitation_energy >= status.beta_target:
        if not status.satisfied:
            status.satisfied = True
            status.t_satisfied = t
    return status
