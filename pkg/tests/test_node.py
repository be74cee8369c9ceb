"""Single-node physics: closed form vs independent oracles, semigroup
property, pulse mechanics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from fndam.calibrate import DEFAULT_K1, DEFAULT_K2, DEFAULT_V0, default_params
from fndam.errors import ArgumentError, DomainError
from fndam.node import (
    ELECTRON_CHARGE,
    FnParams,
    NodeState,
    Pulse,
    apply_pulse,
    evolve,
    initial_state,
    k0_from_initial,
    pulse_train,
    tunneling_current,
    voltage_at,
)

# Reference voltages computed independently with decimal at 60 digits:
# v(t) = k2 / ln(k1*t + exp(k2/v0)).  The nearest-float values below
# pin the closed form against a non-float evaluation path.
ORACLE_V40_DEFAULT = 7.473107480264144  # shipped calibration, t = 40 s
ORACLE_V1E6_DEFAULT = 7.287558801014483  # shipped calibration, t = 1e6 s
ORACLE_ANCHOR = 7.499999999931177  # k1=1e3, k2=300, v0=7.5, t=86400


def small_params(**overrides):
    base = dict(k1=1e3, k2=300.0)
    base.update(overrides)
    return FnParams(**base)


class TestClosedForm:
    def test_initial_state_round_trips_v0(self):
        p = default_params()
        s = initial_state(p, DEFAULT_V0)
        assert s.v_fg == DEFAULT_V0
        assert s.k0 == math.exp(p.k2 / DEFAULT_V0)

    def test_decimal_oracle_anchor(self):
        p = small_params()
        s = evolve(initial_state(p, 7.5), p, 86400.0)
        assert abs(s.v_fg - ORACLE_ANCHOR) <= 2 * math.ulp(ORACLE_ANCHOR)

    def test_decimal_oracle_shipped_calibration(self):
        p = default_params()
        s40 = evolve(initial_state(p, 7.5), p, 40.0)
        s1e6 = evolve(initial_state(p, 7.5), p, 1e6)
        assert abs(s40.v_fg - ORACLE_V40_DEFAULT) <= 2 * math.ulp(ORACLE_V40_DEFAULT)
        assert abs(s1e6.v_fg - ORACLE_V1E6_DEFAULT) <= 2 * math.ulp(ORACLE_V1E6_DEFAULT)

    def test_sub_ulp_decay_rounds_away(self):
        # k1*t = 86.4 against k0 = e^40 ~ 2.4e17 shifts the log argument
        # by ~4e-16, far below the ulp of 40; the closed form returns the
        # starting voltage bit-for-bit instead of accumulating noise.
        p = small_params(k1=1e-3)
        s = evolve(initial_state(p, 7.5), p, 86400.0)
        assert s.v_fg == 7.5

    def test_voltage_at_matches_evolve(self):
        p = default_params()
        s0 = initial_state(p, DEFAULT_V0)
        for t in (0.0, 1.0, 40.0, 86400.0, 1e6):
            v_direct = voltage_at(p, s0.k0, t)
            v_evolved = evolve(s0, p, t).v_fg
            np.testing.assert_allclose(v_evolved, v_direct, rtol=1e-14)

    def test_zero_dt_is_identity(self):
        p = default_params()
        s = initial_state(p, DEFAULT_V0)
        assert evolve(s, p, 0.0) is s


class TestOdeOracle:
    """The closed form must solve dV/dt = -(k1/k2) V^2 exp(-k2/V).

    The integrator never sees the closed form: it steps the raw ODE with
    the exponent assembled in log space (k1 alone overflows float64).
    """

    @staticmethod
    def _integrate(p, v0, t_end):
        def rhs(t, v):
            return [-(v[0] * v[0] / p.k2) * math.exp(p.log_k1 - p.k2 / v[0])]

        sol = solve_ivp(rhs, (0.0, t_end), [v0], method="RK45",
                        rtol=1e-11, atol=1e-14, dense_output=False)
        assert sol.success
        return sol.y[0, -1]

    def test_forty_seconds(self):
        p = default_params()
        v_ode = self._integrate(p, DEFAULT_V0, 40.0)
        v_closed = evolve(initial_state(p, DEFAULT_V0), p, 40.0).v_fg
        np.testing.assert_allclose(v_closed, v_ode, rtol=1e-8)

    def test_million_seconds(self):
        p = default_params()
        v_ode = self._integrate(p, DEFAULT_V0, 1e6)
        v_closed = evolve(initial_state(p, DEFAULT_V0), p, 1e6).v_fg
        np.testing.assert_allclose(v_closed, v_ode, rtol=1e-6)


class TestSemigroup:
    @settings(max_examples=200, deadline=None)
    @given(
        dt1=st.floats(min_value=1e-6, max_value=1e6),
        dt2=st.floats(min_value=1e-6, max_value=1e6),
        v0=st.floats(min_value=4.5, max_value=7.5),
    )
    def test_split_evolution_composes(self, dt1, dt2, v0):
        p = default_params()
        s0 = initial_state(p, v0)
        one_shot = evolve(s0, p, dt1 + dt2)
        two_step = evolve(evolve(s0, p, dt1), p, dt2)
        np.testing.assert_allclose(two_step.v_fg, one_shot.v_fg, rtol=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(
        dt=st.floats(min_value=1e-3, max_value=1e7),
        v0=st.floats(min_value=4.5, max_value=7.5),
    )
    def test_voltage_never_increases(self, dt, v0):
        p = default_params()
        s0 = initial_state(p, v0)
        assert evolve(s0, p, dt).v_fg <= s0.v_fg

    @settings(max_examples=100, deadline=None)
    @given(
        v0=st.floats(min_value=4.5, max_value=7.5),
        dt=st.floats(min_value=1.0, max_value=1e6),
    )
    def test_older_node_decays_less(self, v0, dt):
        # d|dV|/dage < 0: the same window costs a stale node less voltage.
        # Below ~7.1 V the drop over short windows shrinks to tens of ulps
        # of v_fg, where the ordering can invert by one rounding step, so
        # the comparison gets a few ulps of slack.
        p = default_params()
        fresh = initial_state(p, v0)
        aged = evolve(fresh, p, 1e5)
        drop_fresh = fresh.v_fg - evolve(fresh, p, dt).v_fg
        drop_aged = aged.v_fg - evolve(aged, p, dt).v_fg
        assert drop_aged <= drop_fresh + 4 * math.ulp(v0)


class TestTunnelingCurrent:
    def test_matches_finite_difference(self):
        p = default_params()
        s = initial_state(p, DEFAULT_V0)
        h = 1e-4
        v_minus = evolve(s, p, 1.0 - h).v_fg
        v_plus = evolve(s, p, 1.0 + h).v_fg
        dv_dt = (v_plus - v_minus) / (2 * h)
        i_model = tunneling_current(p, evolve(s, p, 1.0).v_fg)
        np.testing.assert_allclose(i_model, -p.c_total * dv_dt, rtol=1e-6)

    def test_positive_and_increasing_in_voltage(self):
        p = default_params()
        currents = [tunneling_current(p, v) for v in (6.0, 6.5, 7.0, 7.5)]
        assert all(i > 0 for i in currents)
        assert currents == sorted(currents)

    def test_underflows_to_zero_not_error(self):
        p = default_params()
        assert tunneling_current(p, 1.0) == 0.0


class TestPulses:
    def test_positive_pulse_accelerates_discharge(self):
        p = default_params()
        s = initial_state(p, DEFAULT_V0)
        pulsed = apply_pulse(s, p, Pulse(amplitude=1.0, duration=0.5))
        idle = evolve(s, p, 0.5)
        assert pulsed.v_fg < idle.v_fg

    def test_negative_polarity_suppresses_discharge(self):
        p = default_params()
        s = initial_state(p, DEFAULT_V0)
        held = apply_pulse(s, p, Pulse(amplitude=1.0, duration=0.5), polarity=-1)
        idle = evolve(s, p, 0.5)
        assert idle.v_fg <= held.v_fg < s.v_fg

    def test_zero_amplitude_pulse_is_idle_decay(self):
        p = default_params()
        s = initial_state(p, DEFAULT_V0)
        pulsed = apply_pulse(s, p, Pulse(amplitude=0.0, duration=2.0))
        np.testing.assert_allclose(pulsed.v_fg, evolve(s, p, 2.0).v_fg, rtol=1e-15)

    def test_pulse_train_equals_manual_loop(self):
        p = default_params()
        s = initial_state(p, DEFAULT_V0)
        pulse = Pulse(amplitude=0.8, duration=0.0005)
        trained = pulse_train(s, p, pulse, n_pulses=7, frequency=1000.0)
        manual = s
        for _ in range(7):
            manual = apply_pulse(manual, p, pulse)
            manual = evolve(manual, p, 0.001 - 0.0005)
        assert trained.v_fg == manual.v_fg

    def test_pulse_train_rejects_overlap(self):
        p = default_params()
        s = initial_state(p, DEFAULT_V0)
        with pytest.raises(ArgumentError):
            pulse_train(s, p, Pulse(amplitude=0.1, duration=0.002), 3, 1000.0)

    def test_bad_polarity_rejected(self):
        p = default_params()
        s = initial_state(p, DEFAULT_V0)
        with pytest.raises(ArgumentError):
            apply_pulse(s, p, Pulse(amplitude=0.1, duration=0.1), polarity=0)


class TestQuantization:
    def test_quantized_evolution_lands_on_electron_grid(self):
        p = default_params(quantize_charge=True)
        s = initial_state(p, DEFAULT_V0)
        out = evolve(s, p, 10.0)
        lsb = ELECTRON_CHARGE / p.c_total
        steps = (s.v_fg - out.v_fg) / lsb
        np.testing.assert_allclose(steps, round(steps), atol=1e-6)

    def test_quantized_tracks_continuous_within_one_electron(self):
        p_q = default_params(quantize_charge=True)
        p_c = default_params()
        s = initial_state(p_c, DEFAULT_V0)
        v_q = evolve(s, p_q, 10.0).v_fg
        v_c = evolve(s, p_c, 10.0).v_fg
        assert abs(v_q - v_c) <= ELECTRON_CHARGE / p_c.c_total


class TestValidation:
    @pytest.mark.parametrize("kwargs", [
        dict(k1=0.0, k2=300.0),
        dict(k1=-1.0, k2=300.0),
        dict(k1=1e3, k2=0.0),
        dict(k1=1e3, k2=300.0, c_total=0.0),
        dict(k1=1e3, k2=300.0, c_couple=2e-12),  # exceeds c_total
        dict(k1=math.inf, k2=300.0),
    ])
    def test_bad_params_rejected(self, kwargs):
        with pytest.raises(DomainError):
            FnParams(**kwargs)

    def test_v0_must_be_below_k2(self):
        with pytest.raises(DomainError):
            k0_from_initial(small_params(), 300.0)

    def test_unrepresentable_k0_rejected(self):
        # k2/v0 = 3000 would need exp(3000); float64 stops near 709
        with pytest.raises(DomainError):
            k0_from_initial(small_params(k2=3000.0), 1.0)

    def test_negative_dt_rejected(self):
        p = small_params()
        with pytest.raises(DomainError):
            evolve(initial_state(p, 7.5), p, -1.0)

    def test_negative_time_rejected(self):
        p = small_params()
        with pytest.raises(DomainError):
            voltage_at(p, k0_from_initial(p, 7.5), -0.1)

    def test_state_validates_fields(self):
        with pytest.raises(DomainError):
            NodeState(v_fg=-1.0, k0=10.0)
        with pytest.raises(DomainError):
            NodeState(v_fg=7.5, k0=0.5)

    def test_pulse_validates_fields(self):
        with pytest.raises(DomainError):
            Pulse(amplitude=-0.1, duration=0.1)
        with pytest.raises(DomainError):
            Pulse(amplitude=0.1, duration=0.0)
