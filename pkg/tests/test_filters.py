"""Filter channel and bank behavior against closed forms and an
independent fine-step integration oracle."""

import math

import numpy as np
import pytest

from dremcbf import (
    ConfigurationError,
    FilterChannel,
    SignalError,
    bank_apply,
    filter_step,
    make_filter_bank,
)


def integrate_lag_fine(pole, gain, state, u, dt, substeps=4000):
    """RK4 at dt/substeps for d(state)/dt = -pole*state + gain*u with u
    constant; independent of the exact-discretization code path."""
    h = dt / substeps
    for _ in range(substeps):
        f = lambda s: -pole * s + gain * u
        k1 = f(state)
        k2 = f(state + 0.5 * h * k1)
        k3 = f(state + 0.5 * h * k2)
        k4 = f(state + h * k3)
        state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return state


class TestMakeFilterBank:
    def test_zero_initialized(self):
        bank = make_filter_bank(1, [1.0], [1.0], 1e-3)
        assert np.all(bank.state == 0.0)

    def test_three_channel_constructor(self):
        bank = make_filter_bank(3, [1.0, 2.0, 3.0], [1.0, 1.0, 1.0], 1e-4)
        assert bank.q == 3

    def test_duplicate_poles_rejected(self):
        with pytest.raises(ConfigurationError):
            make_filter_bank(2, [1.0, 1.0], [1.0, 1.0], 1e-3)

    @pytest.mark.parametrize(
        "q,poles,gains,dt",
        [
            (2, [1.0, -2.0], [1.0, 1.0], 1e-3),
            (2, [1.0, 2.0], [1.0, 1.0], 0.0),
            (0, [], [], 1e-3),
            (2, [1.0], [1.0, 1.0], 1e-3),
        ],
    )
    def test_bad_configuration_rejected(self, q, poles, gains, dt):
        with pytest.raises(ConfigurationError):
            make_filter_bank(q, poles, gains, dt)


class TestFilterStep:
    def test_step_response_reaches_dc_gain(self):
        # unit pole, unit gain: response to a unit step is 1 - exp(-t)
        ch = FilterChannel(gain=1.0, pole=1.0, dt=1e-3)
        for k in range(1, 5001):
            out = filter_step(ch, 1.0)
            expected = 1.0 - math.exp(-k * 1e-3)
            assert out == pytest.approx(expected, abs=1e-12)
        assert out == pytest.approx(1.0, abs=7e-3)

    def test_zero_input_stays_zero(self):
        ch = FilterChannel(gain=1.0, pole=1.0, dt=1e-2)
        for _ in range(100):
            assert filter_step(ch, 0.0) == 0.0

    def test_single_decay_step(self):
        ch = FilterChannel(gain=1.0, pole=2.0, dt=0.5, state=1.0)
        assert filter_step(ch, 0.0) == pytest.approx(math.exp(-1.0), abs=1e-15)

    def test_matches_fine_integration_on_random_inputs(self):
        rng = np.random.default_rng(7)
        ch = FilterChannel(gain=1.3, pole=2.7, dt=0.05)
        ref = 0.0
        for _ in range(40):
            u = float(rng.uniform(-2.0, 2.0))
            out = filter_step(ch, u)
            ref = integrate_lag_fine(2.7, 1.3, ref, u, 0.05)
            assert out == pytest.approx(ref, abs=1e-11)

    def test_nonfinite_input_rejected(self):
        ch = FilterChannel(gain=1.0, pole=1.0, dt=1e-3)
        with pytest.raises(SignalError):
            filter_step(ch, float("nan"))

    def test_zero_input_decay_is_monotone(self):
        ch = FilterChannel(gain=1.0, pole=0.5, dt=0.1, state=-3.0)
        prev = abs(ch.state)
        for _ in range(50):
            cur = abs(filter_step(ch, 0.0))
            assert cur < prev
            prev = cur


class TestBankApply:
    def test_zero_states_zero_input(self):
        bank = make_filter_bank(2, [1.0, 2.0], [1.0, 1.0], 1e-3)
        assert np.all(bank_apply(bank, 0.0) == 0.0)

    def test_single_channel_matches_filter_step(self):
        bank = make_filter_bank(1, [1.7], [0.9], 1e-2)
        ch = FilterChannel(gain=0.9, pole=1.7, dt=1e-2)
        rng = np.random.default_rng(3)
        for _ in range(200):
            u = float(rng.normal())
            assert bank_apply(bank, u)[0] == filter_step(ch, u)

    def test_dc_gains(self):
        bank = make_filter_bank(2, [1.0, 2.0], [1.0, 1.0], 1e-3)
        for _ in range(20000):
            out = bank_apply(bank, 1.0)
        assert out == pytest.approx([1.0, 0.5], abs=1e-6)

    def test_linearity_superposition(self):
        rng = np.random.default_rng(11)
        u1 = rng.normal(size=300)
        u2 = rng.normal(size=300)
        a, b = 1.7, -0.4
        banks = [make_filter_bank(3, [1.0, 2.0, 3.0], [2.0, 1.0, 0.5], 1e-2)
                 for _ in range(3)]
        out = {}
        for key, sig in (("u1", u1), ("u2", u2), ("mix", a * u1 + b * u2)):
            bank = banks.pop()
            for u in sig:
                last = bank_apply(bank, u)
            out[key] = last
        np.testing.assert_allclose(
            out["mix"], a * out["u1"] + b * out["u2"], atol=1e-12
        )

    def test_bounded_input_bounded_output(self):
        rng = np.random.default_rng(5)
        bank = make_filter_bank(2, [0.5, 3.0], [2.0, 1.0], 0.05)
        bank.state[:] = [4.0, -4.0]
        sup_u = 1.5
        cap = np.maximum(np.abs(bank.state), bank.gains * sup_u / bank.poles)
        for _ in range(2000):
            out = bank_apply(bank, float(rng.uniform(-sup_u, sup_u)))
            assert np.all(np.abs(out) <= cap + 1e-12)
