"""Adaptive cruise control case study.

A follower vehicle tracks an exciting reference wheel force behind a
constant-speed lead vehicle.  The per-mass resistance polynomial
``c0 + c1 v + c2 v**2`` enters the plant as the structured unknown term
(its coefficients appear negated in the parameter matrix because the
resistance opposes motion), and the barrier keeps the gap above the
headway distance with a braking-distance correction so the input limits
can always honor it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .safety import BarrierSpec, COR2, linear_gain
from .simulation import PlantModel


@dataclass
class AccParams:
    """Vehicle, scenario and limit parameters (SI units).

    ``f0_over_m``, ``f1``, ``f2`` are the true resistance coefficients as
    they appear in the velocity dynamics.  ``u_min``/``u_max`` default to
    -/+ 0.4 m g; ``brake_decel`` is the braking deceleration used in the
    barrier's quadratic correction and defaults to 0.4 g.
    """

    mass: float = 1600.0
    gravity: float = 9.81
    lead_speed: float = 10.0
    f0_over_m: float = 0.981
    f1: float = 0.0013
    f2: float = 0.00125
    gap_init: float = 50.0
    speed_init: float = 10.0
    u_min: Optional[float] = None
    u_max: Optional[float] = None
    headway_time: float = 1.8
    brake_decel: Optional[float] = None

    def __post_init__(self):
        if self.u_min is None:
            self.u_min = -0.4 * self.mass * self.gravity
        if self.u_max is None:
            self.u_max = 0.4 * self.mass * self.gravity
        if self.brake_decel is None:
            self.brake_decel = 0.4 * self.gravity
        if self.mass <= 0.0 or self.gravity <= 0.0:
            raise ConfigurationError("mass and gravity must be positive")
        if not (self.u_min < 0.0 < self.u_max):
            raise ConfigurationError(
                f"force limits must straddle zero, got [{self.u_min}, {self.u_max}]"
            )
        if self.headway_time <= 0.0:
            raise ConfigurationError(f"headway time must be positive, got {self.headway_time}")
        if self.brake_decel <= 0.0:
            raise ConfigurationError(f"braking deceleration must be positive")
        if self.gap_init <= self.headway_time * self.speed_init:
            raise ConfigurationError(
                "initial gap must exceed the headway distance "
                f"({self.gap_init} <= {self.headway_time * self.speed_init})"
            )


def acc_model(params: AccParams, d_bar: float = 0.0) -> PlantModel:
    """Plant with state (position, speed, gap) and wheel-force input.

    The resistance coefficients sit in the speed row of the parameter
    matrix with negative sign, so the generic plant form
    ``f + g u + theta @ regressor`` reproduces the vehicle dynamics.
    """
    v0 = params.lead_speed
    inv_m = 1.0 / params.mass
    c0, c1, c2 = params.f0_over_m, params.f1, params.f2

    def f(y):
        return np.array([y[1], 0.0, v0 - y[1]])

    def g(y):
        return np.array([[0.0], [inv_m], [0.0]])

    def regressor(y, u):
        v = y[1]
        return np.array([1.0, v, v * v])

    def xdot(y, u, d):
        v = y[1]
        return np.array(
            [
                v + d[0],
                u[0] * inv_m - (c0 + c1 * v + c2 * v * v) + d[1],
                v0 - v + d[2],
            ]
        )

    theta = np.zeros((3, 3))
    theta[1] = (-c0, -c1, -c2)
    return PlantModel(
        n=3, m=1, p=3, f=f, g=g, regressor=regressor,
        theta_true=theta, d_bar=d_bar, xdot=xdot,
    )


def acc_barrier(
    params: AccParams,
    alpha=None,
    mode: str = COR2,
    d_bar: float = 0.0,
) -> BarrierSpec:
    """Headway barrier with a braking-distance correction.

    ``B(y) = gap - headway_time * v - (v - lead_speed)**2 / (2 brake_decel)``;
    on the locus v = lead_speed it reduces to the plain headway condition
    gap >= headway_time * v.
    """
    th = params.headway_time
    v0 = params.lead_speed
    a_b = params.brake_decel

    def value(y):
        dv = y[1] - v0
        return y[2] - th * y[1] - dv * dv / (2.0 * a_b)

    def grad(y):
        return np.array([0.0, -th - (y[1] - v0) / a_b, 1.0])

    if alpha is None:
        alpha = linear_gain(1.0)
    return BarrierSpec(value=value, grad=grad, alpha=alpha, mode=mode, d_bar=d_bar)


def reference_input(t: float, params: AccParams) -> float:
    """Exciting reference wheel force (0.15 + 0.1 sin t) * m * g, in
    newtons; its amplitude stays strictly inside the force limits."""
    return (0.15 + 0.1 * math.sin(t)) * params.mass * params.gravity


def initial_state(params: AccParams) -> np.ndarray:
    """Start at the origin with the configured speed and gap."""
    return np.array([0.0, params.speed_init, params.gap_init])


def model_disturbance_bound(params: AccParams, v_max: float = 20.0) -> float:
    """Bound on the velocity-dependent resistance terms when they are left
    out of the estimation model: f1 * v_max + f2 * v_max**2."""
    if v_max <= 0.0:
        raise ConfigurationError(f"v_max must be positive, got {v_max}")
    return params.f1 * v_max + params.f2 * v_max**2
