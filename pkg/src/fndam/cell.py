"""Differential dynamic analog memory cell.

A weight is stored as the voltage difference between two tunneling
nodes programmed by complementary inputs: SET pulses discharge the SET
node (raising the weight), RESET pulses discharge the RESET node
(lowering it).  Because both nodes ride the same global decay, the
difference is first-order immune to common-mode disturbance and decays
toward zero on its own timescale — that decay is the memory's built-in
"forgetting" and doubles as a learning-rate schedule.

Weights are reported in millivolts: weight = weight_scale * (W_R - W_S)
with weight_scale = 1000 by default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from .errors import ArgumentError, DomainError, InitializationError, SaturationError, StepSizeError
from .node import FnParams, NodeState, Pulse, apply_pulse, evolve, initial_state


@dataclass(frozen=True)
class DamCell:
    """Two-node differential memory cell.

    ``t`` is seconds elapsed since synchronization; every operation that
    consumes wall-clock time advances it.  Instances are immutable —
    operations return updated copies.
    """

    set_node: NodeState
    reset_node: NodeState
    set_params: FnParams
    reset_params: FnParams
    weight_scale: float = 1000.0  # mV per volt of node difference
    t: float = 0.0  # s since synchronization


@dataclass(frozen=True)
class WeightReading:
    weight: float  # mV
    timestamp: float  # s, cell clock at the moment of the read


def _log_rate(params: FnParams, v: float) -> float:
    """log of the tunneling rate magnitude |dV/dt| at voltage v."""
    return params.log_k1 - math.log(params.k2) + 2.0 * math.log(v) - params.k2 / v


def synchronize(
    set_params: FnParams, reset_params: FnParams, v0: float, weight_scale: float = 1000.0
) -> DamCell:
    """Build a cell whose nodes tunnel at identical rates at t = 0.

    With identical parameters both nodes start at exactly v0.  With
    mismatched parameters the RESET node voltage is solved so that
    |dV/dt| matches the SET node's; the residual rate difference is
    required to be below 1e-10 relative.
    """
    set_node = initial_state(set_params, v0)
    if (reset_params.k1, reset_params.k2) == (set_params.k1, set_params.k2):
        reset_node = initial_state(reset_params, v0)
        return DamCell(set_node, reset_node, set_params, reset_params, weight_scale)

    target = _log_rate(set_params, v0)

    def imbalance(v):
        return _log_rate(reset_params, v) - target

    lo, hi = 0.5 * v0, min(1.5 * v0, 0.999 * reset_params.k2)
    try:
        v_reset = optimize.brentq(imbalance, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200)
    except ValueError as exc:
        raise InitializationError(
            f"could not rate-match reset node near v0={v0!r}: {exc}", indices=(0,)
        ) from None
    if abs(imbalance(v_reset)) > 1e-10:
        raise InitializationError(
            f"rate matching residual {imbalance(v_reset):.3e} exceeds 1e-10", indices=(0,)
        )
    reset_node = initial_state(reset_params, v_reset)
    return DamCell(set_node, reset_node, set_params, reset_params, weight_scale)


def read_weight(cell: DamCell, noise_sigma: float = 0.0, rng=None) -> WeightReading:
    """Differential weight in mV, optionally with Gaussian read noise.

    noise_sigma is in volts of node difference (the same unit as the
    readout chain sees); default 0 keeps reads deterministic.
    """
    diff = cell.reset_node.v_fg - cell.set_node.v_fg
    if noise_sigma:
        if noise_sigma < 0:
            raise DomainError(f"noise_sigma must be >= 0, got {noise_sigma!r}")
        rng = rng if rng is not None else np.random.default_rng()
        diff += noise_sigma * rng.standard_normal()
    return WeightReading(weight=cell.weight_scale * diff, timestamp=cell.t)


def decay(cell: DamCell, dt: float) -> DamCell:
    """Both nodes tunnel undisturbed for dt seconds."""
    return replace(
        cell,
        set_node=evolve(cell.set_node, cell.set_params, dt),
        reset_node=evolve(cell.reset_node, cell.reset_params, dt),
        t=cell.t + dt,
    )


def set_pulse(cell: DamCell, pulse: Pulse) -> DamCell:
    """Pulse the SET node (raises the weight); RESET node idles."""
    return replace(
        cell,
        set_node=apply_pulse(cell.set_node, cell.set_params, pulse, polarity=1),
        reset_node=evolve(cell.reset_node, cell.reset_params, pulse.duration),
        t=cell.t + pulse.duration,
    )


def reset_pulse(cell: DamCell, pulse: Pulse) -> DamCell:
    """Pulse the RESET node (lowers the weight); SET node idles."""
    return replace(
        cell,
        set_node=evolve(cell.set_node, cell.set_params, pulse.duration),
        reset_node=apply_pulse(cell.reset_node, cell.reset_params, pulse, polarity=1),
        t=cell.t + pulse.duration,
    )


def pulse_cell(cell: DamCell, pulse: Pulse, polarity: int) -> DamCell:
    """Dispatch on polarity: +1 -> set_pulse, -1 -> reset_pulse."""
    if polarity == 1:
        return set_pulse(cell, pulse)
    if polarity == -1:
        return reset_pulse(cell, pulse)
    raise ArgumentError(f"polarity must be +1 or -1, got {polarity!r}")


def common_mode_step(cell: DamCell, dv: float) -> DamCell:
    """Identical instantaneous voltage perturbation on both nodes.

    Models a common-mode environmental disturbance (supply bump, charge
    injection).  The cell clock does not advance.
    """
    if not math.isfinite(dv):
        raise DomainError(f"dv must be finite, got {dv!r}")
    v_set = cell.set_node.v_fg + dv
    v_reset = cell.reset_node.v_fg + dv
    if v_set <= 0 or v_reset <= 0:
        raise DomainError(f"common-mode step {dv!r} V drives a node non-positive")
    return replace(
        cell,
        set_node=replace(cell.set_node, v_fg=v_set),
        reset_node=replace(cell.reset_node, v_fg=v_reset),
    )


def discrete_update(
    w_mv: float,
    w_set: float,
    params: FnParams,
    dt: float,
    dv_train: float = 0.0,
    weight_scale: float = 1000.0,
) -> float:
    """One linearized weight step: decay about the SET-node voltage plus input.

        w' = (1 - (k1/k2) * (2*W_S + k2) * exp(-k2/W_S) * dt) * w
             + weight_scale * coupling_ratio * dv_train

    Valid for small weights and steps; the two-node simulation is the
    reference it linearizes (they agree within 1% for |w| <= 5 mV and
    dt <= 1 s).  Raises StepSizeError when the decay term reaches 1.
    """
    if not (math.isfinite(w_set) and w_set > 0):
        raise DomainError(f"w_set must be positive, got {w_set!r}")
    if not (math.isfinite(dt) and dt >= 0):
        raise DomainError(f"dt must be >= 0, got {dt!r}")
    factor = (
        math.exp(params.log_k1 - params.k2 / w_set)
        * (2.0 * w_set + params.k2)
        / params.k2
        * dt
    )
    if factor >= 1.0:
        raise StepSizeError(
            f"decay factor {factor:.3g} >= 1 at dt={dt!r}; reduce the step"
        )
    return (1.0 - factor) * w_mv + weight_scale * params.coupling_ratio * dv_train


def decay_factor(params: FnParams, k0: float, n: int, dt: float) -> float:
    """Per-step weight decay factor at step n of an undisturbed schedule.

        alpha*eta_n = k1 * (2/log(k1*n*dt + k0) + 1) / (k1*n*dt + k0) * dt

    Decreases like 1/n, so the cumulative product behaves like a
    stochastic-approximation learning-rate schedule.
    """
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n!r}")
    if not (math.isfinite(k0) and k0 > 1.0):
        raise DomainError(f"k0 must be finite and > 1, got {k0!r}")
    if not (math.isfinite(dt) and dt >= 0):
        raise DomainError(f"dt must be >= 0, got {dt!r}")
    if n == 0 or dt == 0.0:
        log_eff = math.log(k0)
    else:
        log_eff = float(np.logaddexp(params.log_k1 + math.log(n * dt), math.log(k0)))
    return math.exp(params.log_k1 - log_eff) * (2.0 / log_eff + 1.0) * dt


@dataclass(frozen=True)
class DecaySchedule:
    """Precomputed alpha*eta_n sequence for an undisturbed cell."""

    alpha_eta: np.ndarray  # factor at steps 0..n-1
    dt_step: float  # s per step

    @classmethod
    def from_params(cls, params: FnParams, k0: float, dt_step: float, n_steps: int):
        if n_steps <= 0:
            raise DomainError(f"n_steps must be positive, got {n_steps!r}")
        if not (math.isfinite(dt_step) and dt_step > 0):
            raise DomainError(f"dt_step must be positive, got {dt_step!r}")
        if not (math.isfinite(k0) and k0 > 1.0):
            raise DomainError(f"k0 must be finite and > 1, got {k0!r}")
        n = np.arange(n_steps, dtype=float)
        log_eff = np.full(n_steps, math.log(k0))
        if n_steps > 1:
            log_eff[1:] = np.logaddexp(
                params.log_k1 + np.log(n[1:] * dt_step), math.log(k0)
            )
        seq = np.exp(params.log_k1 - log_eff) * (2.0 / log_eff + 1.0) * dt_step
        return cls(alpha_eta=seq, dt_step=dt_step)

    def __len__(self):
        return len(self.alpha_eta)


def precompensated_amplitude(
    cell: DamCell,
    target_dw: float,
    duration: float,
    polarity: int = 1,
    amp_max: float = 32.0,
    tol_mv: float = 1e-3,
) -> float:
    """Pulse amplitude that produces a net weight change of target_dw mV.

    Solves the full two-node pulse response by bisection, so the answer
    already compensates for the cell's current depth into its decay
    trajectory (an older cell needs a larger amplitude for the same
    step).  target_dw is a magnitude; polarity picks the direction.
    Returns 0.0 for a zero target.  Raises SaturationError when the
    target is unreachable at amp_max.
    """
    if target_dw < 0:
        raise DomainError(f"target_dw is a magnitude, got {target_dw!r}")
    if target_dw == 0.0:
        return 0.0
    if amp_max <= 0:
        raise DomainError(f"amp_max must be positive, got {amp_max!r}")

    w0 = read_weight(cell).weight
    sign = 1.0 if polarity == 1 else -1.0

    def net_change(amp):
        pulsed = pulse_cell(cell, Pulse(amplitude=amp, duration=duration), polarity)
        return sign * (read_weight(pulsed).weight - w0)

    hi_change = net_change(amp_max)
    if hi_change < target_dw - tol_mv:
        raise SaturationError(
            f"target {target_dw!r} mV unreachable: amp_max={amp_max!r} V "
            f"yields {hi_change:.6g} mV"
        )
    lo, hi = 0.0, amp_max
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        change = net_change(mid)
        if abs(change - target_dw) <= tol_mv:
            return mid
        if change < target_dw:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * amp_max:
            break
    raise SaturationError(
        f"bisection failed to reach {target_dw!r} mV within tolerance {tol_mv!r} mV"
    )
