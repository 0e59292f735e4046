"""First-order stable lag filters that extend scalar regression signals.

Each channel realizes gain/(s + pole) with an exact zero-order-hold
discretization, so stepping a channel with a piecewise-constant input
reproduces the continuous-time response to machine precision.  A bank
stacks q channels with pairwise distinct poles; feeding every entry of a
vector signal through its own bank is what turns a q-dimensional
regression into a square one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SignalError


def _zoh_coefficients(pole, gain, dt):
    # state' = exp(-pole*dt)*state + (gain/pole)*(1 - exp(-pole*dt))*input
    decay = math.exp(-pole * dt)
    drive = (gain / pole) * (1.0 - decay)
    return decay, drive


@dataclass
class FilterChannel:
    """One stable lag, d(state)/dt = -pole*state + gain*input."""

    gain: float
    pole: float
    dt: float
    state: float = 0.0

    def __post_init__(self):
        if not self.pole > 0.0:
            raise ConfigurationError(f"filter pole must be positive, got {self.pole}")
        if not self.dt > 0.0:
            raise ConfigurationError(f"filter dt must be positive, got {self.dt}")
        self._decay, self._drive = _zoh_coefficients(self.pole, self.gain, self.dt)


def filter_step(channel: FilterChannel, u: float) -> float:
    """Advance one exact-discretization step with the input held constant.

    Returns the new channel state.
    """
    if not math.isfinite(u):
        raise SignalError(f"non-finite filter input: {u!r}")
    channel.state = channel._decay * channel.state + channel._drive * u
    return channel.state


@dataclass
class FilterBank:
    """q parallel lag channels driven by one scalar signal.

    Built through :func:`make_filter_bank`; the per-channel states are kept
    in a vector so a bank step is a single fused update.
    """

    poles: np.ndarray
    gains: np.ndarray
    dt: float
    state: np.ndarray = field(default=None)

    def __post_init__(self):
        self.poles = np.asarray(self.poles, dtype=float)
        self.gains = np.asarray(self.gains, dtype=float)
        if self.state is None:
            self.state = np.zeros(self.poles.size)
        self._decay = np.exp(-self.poles * self.dt)
        self._drive = (self.gains / self.poles) * (1.0 - self._decay)

    @property
    def q(self) -> int:
        return self.poles.size


def make_filter_bank(q: int, poles, gains, dt: float) -> FilterBank:
    """Build a zero-initialized bank of q stable lags with distinct poles."""
    if q < 1:
        raise ConfigurationError(f"bank needs at least one channel, got q={q}")
    poles = np.asarray(poles, dtype=float)
    gains = np.asarray(gains, dtype=float)
    if poles.size != q or gains.size != q:
        raise ConfigurationError(
            f"expected {q} poles and gains, got {poles.size} and {gains.size}"
        )
    if not np.all(poles > 0.0):
        raise ConfigurationError(f"all poles must be positive, got {poles}")
    if not dt > 0.0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if np.unique(poles).size != q:
        raise ConfigurationError(f"poles must be pairwise distinct, got {poles}")
    return FilterBank(poles=poles, gains=gains, dt=dt)


def default_poles(q: int) -> np.ndarray:
    """Default pole ladder 1, 2, ..., q (distinct by construction)."""
    return np.arange(1.0, q + 1.0)


def bank_apply(bank: FilterBank, u: float) -> np.ndarray:
    """Step every channel of the bank with the same scalar input.

    Returns a copy of the q-vector of new channel states.
    """
    return _bank_advance(bank, u).copy()


def _bank_advance(bank: FilterBank, u: float) -> np.ndarray:
    # Hot-path variant of bank_apply: returns the live state vector, which
    # is only valid until the next step.
    if not math.isfinite(u):
        raise SignalError(f"non-finite filter input: {u!r}")
    state = bank.state
    state *= bank._decay
    state += bank._drive * u
    return state
