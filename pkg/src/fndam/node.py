"""Single Fowler-Nordheim tunneling node.

A floating gate coupled to a tunneling junction discharges through the
FN barrier.  Starting from voltage ``v0`` the open-circuit gate voltage
follows

    V(t) = k2 / log(k1 * t + k0),        k0 = exp(k2 / v0)

which solves

    dV/dt = -(k1 / k2) * V^2 * exp(-k2 / V)

The right-hand side magnitude times ``c_total`` is the tunneling
current.  ``k1`` (1/s) and ``k2`` (V) are fitted device constants; see
``fndam.calibrate`` for the defaults shipped with the package.

All state transitions are computed in log space: the closed form above
composes exactly under ``log(exp(a) + k1*dt)`` and evaluating that as a
log-sum-exp keeps full precision even when ``exp(k2/v)`` is far outside
float range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ArgumentError, DomainError

ELECTRON_CHARGE = 1.602e-19  # coulomb

# exp() overflows float64 beyond this; k2/v must stay below it wherever a
# bare exp(k2/v) is materialized (k0_from_initial).
_MAX_EXP_ARG = math.log(np.finfo(float).max)  # ~709.78


def _require_finite_positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class FnParams:
    """Constants of one tunneling node.

    k1 sets the tunneling timescale and k2 the barrier exponent; both
    come from fitting measured V(t) curves rather than first principles.
    c_total is the total floating-gate capacitance and c_couple the
    input coupling capacitance, so ``c_couple / c_total`` is the
    fraction of an input step that appears on the gate.

    When ``quantize_charge`` is set, tunneling-induced voltage changes
    are rounded to multiples of one electron on ``c_total``.  Off by
    default; the continuous model is the reference behavior.
    """

    k1: float  # 1/s
    k2: float  # V
    c_total: float = 1e-12  # F
    c_couple: float = 1e-13  # F
    quantize_charge: bool = False

    def __post_init__(self):
        _require_finite_positive("k1", self.k1)
        _require_finite_positive("k2", self.k2)
        _require_finite_positive("c_total", self.c_total)
        _require_finite_positive("c_couple", self.c_couple)
        if self.c_couple >= self.c_total:
            raise DomainError(
                "c_couple must be smaller than c_total "
                f"(got {self.c_couple!r} >= {self.c_total!r})"
            )

    @property
    def coupling_ratio(self) -> float:
        return self.c_couple / self.c_total

    @property
    def log_k1(self) -> float:
        return math.log(self.k1)


@dataclass(frozen=True)
class NodeState:
    """Instantaneous state of a node.

    v_fg is the floating-gate voltage; k0 is the initial-condition
    constant ``exp(k2 / v_initial)`` kept as bookkeeping, from which the
    effective device age can always be recovered.
    """

    v_fg: float  # V
    k0: float

    def __post_init__(self):
        _require_finite_positive("v_fg", self.v_fg)
        if not (math.isfinite(self.k0) and self.k0 >= 1.0):
            raise DomainError(f"k0 must be finite and >= 1, got {self.k0!r}")


@dataclass(frozen=True)
class Pulse:
    """Rectangular input pulse: unipolar amplitude (V) and duration (s)."""

    amplitude: float
    duration: float

    def __post_init__(self):
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise DomainError(f"pulse amplitude must be >= 0, got {self.amplitude!r}")
        _require_finite_positive("pulse duration", self.duration)


def k0_from_initial(params: FnParams, v0: float) -> float:
    """Initial-condition constant exp(k2 / v0) for a node that starts at v0."""
    if not (math.isfinite(v0) and 0 < v0 < params.k2):
        raise DomainError(f"v0 must satisfy 0 < v0 < k2, got {v0!r}")
    if params.k2 / v0 > _MAX_EXP_ARG:
        raise DomainError(
            f"k2/v0 = {params.k2 / v0:.1f} exceeds float64 range for k0; "
            "this parameterization cannot be represented"
        )
    return math.exp(params.k2 / v0)


def initial_state(params: FnParams, v0: float) -> NodeState:
    """Node freshly programmed to v0 (t = 0)."""
    return NodeState(v_fg=v0, k0=k0_from_initial(params, v0))


def voltage_at(params: FnParams, k0: float, t: float) -> float:
    """Open-circuit gate voltage after t seconds of undisturbed decay."""
    if not (math.isfinite(t) and t >= 0):
        raise DomainError(f"t must be >= 0, got {t!r}")
    if not (math.isfinite(k0) and k0 >= 1.0):
        raise DomainError(f"k0 must be finite and >= 1, got {k0!r}")
    if t == 0.0:
        log_arg = math.log(k0)
    else:
        # log(k1*t + k0), evaluated without forming k1*t + k0
        log_arg = float(np.logaddexp(params.log_k1 + math.log(t), math.log(k0)))
    if log_arg <= 0.0:
        raise DomainError("log(k1*t + k0) must be positive")
    return params.k2 / log_arg


def tunneling_current(params: FnParams, v_fg: float) -> float:
    """Magnitude of the FN tunneling current at gate voltage v_fg.

    The gate discharges: dV/dt = -tunneling_current(v)/c_total.  Returns
    amps; underflows to 0.0 once the true value drops below float range.
    """
    _require_finite_positive("v_fg", v_fg)
    # c_total * (k1/k2) * v^2 * exp(-k2/v), exponent assembled in log space
    # so that huge k1 and tiny exp(-k2/v) never meet as bare floats.
    exponent = params.log_k1 - params.k2 / v_fg
    return params.c_total * v_fg * v_fg / params.k2 * math.exp(exponent)


def _quantize(params: FnParams, v_before: float, v_after: float) -> float:
    """Round a tunneling-induced voltage change to whole electrons."""
    lsb = ELECTRON_CHARGE / params.c_total
    steps = round((v_after - v_before) / lsb)
    return v_before + steps * lsb


def evolve(state: NodeState, params: FnParams, dt: float) -> NodeState:
    """Advance a node by dt seconds of undisturbed tunneling decay.

    Uses the closed form: with a = k2/v_fg the new log-argument is
    log(exp(a) + k1*dt), computed as a log-sum-exp.  Exact semigroup:
    evolve(dt1) then evolve(dt2) equals evolve(dt1+dt2) to rounding.
    dt = 0 returns the state unchanged, bit for bit.
    """
    if not (math.isfinite(dt) and dt >= 0):
        raise DomainError(f"dt must be >= 0, got {dt!r}")
    if dt == 0.0:
        return state
    a = params.k2 / state.v_fg
    new_a = float(np.logaddexp(a, params.log_k1 + math.log(dt)))
    new_v = params.k2 / new_a
    if new_v > state.v_fg:
        # sub-resolution decay: k2/(k2/v) can land one ulp above v, and
        # tunneling must never raise the gate voltage
        new_v = state.v_fg
    if params.quantize_charge:
        new_v = _quantize(params, state.v_fg, new_v)
    return replace(state, v_fg=new_v)


def apply_pulse(
    state: NodeState, params: FnParams, pulse: Pulse, polarity: int = 1
) -> NodeState:
    """One rectangular input pulse coupled onto the gate.

    The gate is displaced by polarity * coupling_ratio * amplitude,
    tunnels at the displaced voltage for the pulse duration, and is
    released.  The net effect is purely the extra (polarity +1) or
    suppressed (polarity -1) tunneling while the pulse was high: for a
    positive pulse the node ends *below* an unpulsed reference.
    """
    if polarity not in (1, -1):
        raise ArgumentError(f"polarity must be +1 or -1, got {polarity!r}")
    step = polarity * params.coupling_ratio * pulse.amplitude
    v_up = state.v_fg + step
    if v_up <= 0:
        raise DomainError(
            f"pulse drives gate to {v_up:.6g} V <= 0 (amplitude {pulse.amplitude!r})"
        )
    elevated = evolve(replace(state, v_fg=v_up), params, pulse.duration)
    v_down = elevated.v_fg - step
    if v_down <= 0:
        raise DomainError(f"pulse release drives gate to {v_down:.6g} V <= 0")
    return replace(state, v_fg=v_down)


def pulse_train(
    state: NodeState,
    params: FnParams,
    pulse: Pulse,
    n_pulses: int,
    frequency: float,
    polarity: int = 1,
) -> NodeState:
    """n_pulses identical pulses with starts spaced 1/frequency apart.

    Each period is one pulse followed by idle decay; the final idle
    segment completes the last period, so total elapsed time is exactly
    n_pulses / frequency.
    """
    if n_pulses < 0 or int(n_pulses) != n_pulses:
        raise ArgumentError(f"n_pulses must be a non-negative integer, got {n_pulses!r}")
    _require_finite_positive("frequency", frequency)
    period = 1.0 / frequency
    if pulse.duration > period:
        raise ArgumentError(
            f"pulses overlap: duration {pulse.duration!r} s exceeds the "
            f"{period!r} s period at {frequency!r} Hz"
        )
    idle = period - pulse.duration
    for _ in range(int(n_pulses)):
        state = apply_pulse(state, params, pulse, polarity)
        if idle > 0:
            state = evolve(state, params, idle)
    return state
