"""Write energy, retention, and readout-noise analytics.

Programming a cell costs the energy of charging the input coupling
capacitor: E = (1/2) * C_in * V_in^2 per pulse.  As the gate decays,
reaching a fixed target voltage requires a growing input amplitude
V_in = (V_target - V_fg) / coupling_ratio, so the per-update energy of
maintaining a setpoint rises over the device's life.  Retention is
limited by the thermal accumulation floor of the readout, modeled as
sigma_T(t) = sigma0 + sigma_coeff * sqrt(t).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from .cell import DamCell, decay, read_weight
from .errors import DomainError
from .node import FnParams, voltage_at

TEN_YEARS_S = 10 * 365.25 * 86400.0  # default retention search horizon

ELECTRON_CHARGE = 1.602e-19  # coulomb


@dataclass(frozen=True)
class NoiseModel:
    """Thermal accumulation noise floor of a stored weight.

    sigma0 is the instantaneous readout noise at t = 0; the floor grows
    as sigma0 + sigma_coeff * sqrt(t) as integrated thermal charge
    accumulates on the gate.
    """

    sigma0: float = 100e-6  # V
    sigma_coeff: float = 1.4e-6  # V / sqrt(s)

    def __post_init__(self):
        if self.sigma0 < 0 or self.sigma_coeff < 0:
            raise DomainError("noise model coefficients must be >= 0")


@dataclass(frozen=True)
class ReadModel:
    """Readout front-end operating point for noise/power trades."""

    u_t: float = 0.026  # thermal voltage, V
    kappa: float = 0.7  # subthreshold gate efficiency
    v_dd: float = 5.0  # supply, V
    q: float = ELECTRON_CHARGE  # C


@dataclass(frozen=True)
class RetentionResult:
    seconds: float
    saturated: bool  # True when the weight outlives the search horizon


@dataclass(frozen=True)
class LedgerEntry:
    cell_id: str
    t_s: float
    amplitude_v: float
    duration_s: float
    n_pulses: int
    energy_j: float


class EnergyLedger:
    """Append-only record of every programming pulse issued.

    One entry per (cell, pulse train); energy is n_pulses * (1/2) *
    c_in * amplitude^2.  Totals are plain sums over entries in
    insertion order, so they match an external re-summation exactly.
    """

    def __init__(self, c_in: float = 1e-12):
        if not (math.isfinite(c_in) and c_in > 0):
            raise DomainError(f"c_in must be positive, got {c_in!r}")
        self.c_in = c_in
        self._entries: list[LedgerEntry] = []

    def record(
        self, cell_id: str, t_s: float, amplitude_v: float, duration_s: float, n_pulses: int = 1
    ) -> LedgerEntry:
        if n_pulses < 0:
            raise DomainError(f"n_pulses must be >= 0, got {n_pulses!r}")
        entry = LedgerEntry(
            cell_id=str(cell_id),
            t_s=float(t_s),
            amplitude_v=float(amplitude_v),
            duration_s=float(duration_s),
            n_pulses=int(n_pulses),
            energy_j=n_pulses * write_energy(self.c_in, amplitude_v),
        )
        self._entries.append(entry)
        return entry

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        return tuple(self._entries)

    def total_energy(self) -> float:
        return sum(e.energy_j for e in self._entries)

    def per_cell_totals(self) -> dict[str, float]:
        totals: dict[str, float] = {}
        for e in self._entries:
            totals[e.cell_id] = totals.get(e.cell_id, 0.0) + e.energy_j
        return totals

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["cell_id", "t_s", "amplitude_V", "duration_s", "n_pulses", "energy_J"])
        for e in self._entries:
            writer.writerow(
                [e.cell_id, repr(e.t_s), repr(e.amplitude_v), repr(e.duration_s),
                 e.n_pulses, repr(e.energy_j)]
            )
        return buf.getvalue()


def write_energy(c_in: float, v_in: float) -> float:
    """Energy to charge the input capacitor to v_in: (1/2) C V^2."""
    if not (math.isfinite(c_in) and c_in > 0):
        raise DomainError(f"c_in must be positive, got {c_in!r}")
    if not math.isfinite(v_in):
        raise DomainError(f"v_in must be finite, got {v_in!r}")
    return 0.5 * c_in * v_in * v_in


def v_train_required(v_target: float, v_fg: float, coupling_ratio: float) -> float:
    """Input amplitude needed to lift the gate to v_target through the divider."""
    if not (0 < coupling_ratio < 1):
        raise DomainError(f"coupling_ratio must be in (0, 1), got {coupling_ratio!r}")
    if v_target < v_fg:
        raise DomainError(
            f"cannot program upward through tunneling: target {v_target!r} V "
            f"below gate {v_fg!r} V"
        )
    return (v_target - v_fg) / coupling_ratio


def write_energy_trajectory(
    params: FnParams,
    k0: float,
    v_target_offset: float,
    horizon_s: float,
    n_samples: int = 200,
    c_in: float = 1e-12,
) -> list[tuple[float, float]]:
    """Per-update write energy over the device's life for a fixed setpoint.

    The target is pinned at the initial gate voltage plus
    v_target_offset; as the gate decays away from it the required
    amplitude (v_target - v_fg(t)) / coupling_ratio and hence the energy
    grow monotonically.  Samples start at t = 0 (energy
    (1/2) c_in (offset/coupling_ratio)^2) and end exactly at horizon_s.
    """
    if n_samples < 2:
        raise DomainError(f"n_samples must be >= 2, got {n_samples!r}")
    if not (math.isfinite(horizon_s) and horizon_s > 0):
        raise DomainError(f"horizon_s must be positive, got {horizon_s!r}")
    if v_target_offset <= 0:
        raise DomainError(f"v_target_offset must be positive, got {v_target_offset!r}")
    v_start = voltage_at(params, k0, 0.0)
    v_target = v_start + v_target_offset
    # geometric spacing after the t=0 sample: early life is where the
    # trajectory bends fastest
    t_first = min(1.0, horizon_s / n_samples)
    ratio = (horizon_s / t_first) ** (1.0 / (n_samples - 2)) if n_samples > 2 else 1.0
    times = [0.0]
    for i in range(n_samples - 1):
        times.append(min(t_first * ratio**i, horizon_s))
    times[-1] = horizon_s
    out = []
    for t in times:
        v_fg = voltage_at(params, k0, t)
        amp = v_train_required(v_target, v_fg, params.coupling_ratio)
        out.append((t, write_energy(c_in, amp)))
    return out


def noise_floor(model: NoiseModel, t: float) -> float:
    """Thermal accumulation floor (V) after t seconds of storage."""
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t!r}")
    return model.sigma0 + model.sigma_coeff * math.sqrt(t)


def retention_time(
    cell: DamCell, model: NoiseModel, horizon_s: float = TEN_YEARS_S
) -> RetentionResult:
    """Time until the cell's decaying weight sinks into the noise floor.

    Simulates the full two-node decay from the cell's current state and
    finds the first crossing |w(t)| = noise_floor(t) by bracketed
    bisection, to 1 s or 0.1% of the answer, whichever is larger.
    Returns the horizon with saturated=True when the weight outlives it.
    A weight already at or below the floor returns 0 s.
    """
    if not (math.isfinite(horizon_s) and horizon_s > 0):
        raise DomainError(f"horizon_s must be positive, got {horizon_s!r}")

    def margin(t):
        w_v = abs(read_weight(decay(cell, t)).weight) / cell.weight_scale
        return w_v - noise_floor(model, t)

    if margin(0.0) <= 0:
        return RetentionResult(seconds=0.0, saturated=False)
    if margin(horizon_s) > 0:
        return RetentionResult(seconds=horizon_s, saturated=True)
    lo, hi = 0.0, horizon_s
    # expanding bracket from 1 s keeps the bisection tight for short-lived cells
    t = 1.0
    while t < horizon_s:
        if margin(t) <= 0:
            hi = t
            break
        lo = t
        t *= 2.0
    while hi - lo > max(1.0, 1e-3 * lo):
        mid = 0.5 * (lo + hi)
        if margin(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return RetentionResult(seconds=hi, saturated=False)


def read_noise(model: ReadModel, p_read: float, bandwidth: float) -> float:
    """rms readout voltage noise at read power p_read over the given bandwidth.

        V_n = sqrt(4 * U_T^2 * q * V_DD * bandwidth / (kappa * P_read))
    """
    if not (math.isfinite(p_read) and p_read > 0):
        raise DomainError(f"p_read must be positive, got {p_read!r}")
    if not (math.isfinite(bandwidth) and bandwidth > 0):
        raise DomainError(f"bandwidth must be positive, got {bandwidth!r}")
    return math.sqrt(
        4.0 * model.u_t**2 * model.q * model.v_dd * bandwidth / (model.kappa * p_read)
    )


def min_read_power(model: ReadModel, noise_target: float, bandwidth: float) -> float:
    """Smallest read power whose rms noise stays at or below noise_target."""
    if not (math.isfinite(noise_target) and noise_target > 0):
        raise DomainError(f"noise_target must be positive, got {noise_target!r}")
    if not (math.isfinite(bandwidth) and bandwidth > 0):
        raise DomainError(f"bandwidth must be positive, got {bandwidth!r}")
    return 4.0 * model.u_t**2 * model.q * model.v_dd * bandwidth / (
        model.kappa * noise_target**2
    )


def programming_ratio(params: FnParams, v_target: float, v_fg: float) -> float:
    """Tunneling-rate speedup of holding the gate at v_target vs v_fg.

        (v_target / v_fg)^2 * exp(k2/v_fg - k2/v_target)

    Equals the ratio of tunneling currents at the two voltages; a large
    value means programming is fast relative to the idle decay that
    erodes the stored weight.
    """
    if not (math.isfinite(v_target) and v_target > 0):
        raise DomainError(f"v_target must be positive, got {v_target!r}")
    if not (math.isfinite(v_fg) and v_fg > 0):
        raise DomainError(f"v_fg must be positive, got {v_fg!r}")
    ratio = v_target / v_fg
    return ratio * ratio * math.exp(params.k2 / v_fg - params.k2 / v_target)
