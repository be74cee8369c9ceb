"""Arrays of DAM cells: mismatch injection, batch operations, persistence.

An array is a clock-synchronous collection of cells built from one
nominal parameter set.  Fabrication spread is modeled by perturbing k1
and k2 of every node independently (four draws per cell) with a seeded
generator, then rate-matching each cell so it starts at zero weight.
The draw stream is PCG64; the algorithm name and seed are stored in
saved state so an array is reproducible from its document alone.

State documents are JSON trees carrying a format tag, a schema version
and a SHA-256 checksum over the canonical serialization; voltages are
serialized as full-precision floats so load(save(a)) is lossless.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .cell import DamCell, WeightReading, decay, pulse_cell, read_weight, synchronize
from .errors import (
    ArgumentError,
    DomainError,
    FndamError,
    InitializationError,
    StateFormatError,
)
from .node import FnParams, NodeState, Pulse

STATE_FORMAT = "fndam-array-state"
STATE_VERSION = 1
RNG_ALGORITHM = "numpy.random.PCG64"

_DISTRIBUTIONS = ("gaussian", "uniform")


@dataclass(frozen=True)
class MismatchSpec:
    """Per-node relative spread of k1 and k2.

    ``relative_sigma`` is the standard deviation of the multiplicative
    perturbation; ``uniform`` draws span +-sqrt(3)*sigma so both
    distributions have the same variance.
    """

    relative_sigma: float = 0.001
    seed: int = 0
    distribution: str = "gaussian"

    def __post_init__(self):
        if not (math.isfinite(self.relative_sigma) and self.relative_sigma >= 0):
            raise DomainError(
                f"relative_sigma must be >= 0, got {self.relative_sigma!r}"
            )
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned int, got {self.seed!r}")
        if self.distribution not in _DISTRIBUTIONS:
            raise DomainError(
                f"distribution must be one of {_DISTRIBUTIONS}, got {self.distribution!r}"
            )


@dataclass(frozen=True)
class DamArray:
    cells: tuple[DamCell, ...]
    nominal_params: FnParams
    mismatch: MismatchSpec
    v0: float
    global_clock: float = 0.0

    def __len__(self) -> int:
        return len(self.cells)


def _draw_factors(n: int, spec: MismatchSpec) -> np.ndarray:
    """(n, 2 nodes, 2 params) multiplicative factors, reproducible by seed."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    if spec.distribution == "gaussian":
        z = rng.standard_normal((n, 2, 2))
    else:
        z = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=(n, 2, 2))
    return 1.0 + spec.relative_sigma * z


def build_array(
    n: int, nominal: FnParams, v0: float, mismatch: MismatchSpec | None = None
) -> DamArray:
    """n freshly synchronized cells with seeded per-node k1/k2 mismatch."""
    if n < 1:
        raise ArgumentError(f"array size must be >= 1, got {n!r}")
    spec = mismatch if mismatch is not None else MismatchSpec(relative_sigma=0.0)
    factors = _draw_factors(n, spec)
    cells = []
    failed = []
    for i in range(n):
        try:
            set_params = replace(
                nominal,
                k1=float(nominal.k1 * factors[i, 0, 0]),
                k2=float(nominal.k2 * factors[i, 0, 1]),
            )
            reset_params = replace(
                nominal,
                k1=float(nominal.k1 * factors[i, 1, 0]),
                k2=float(nominal.k2 * factors[i, 1, 1]),
            )
            cells.append(synchronize(set_params, reset_params, v0))
        except FndamError:
            failed.append(i)
    if failed:
        raise InitializationError(
            f"{len(failed)} cell(s) failed to initialize", indices=tuple(failed)
        )
    return DamArray(
        cells=tuple(cells), nominal_params=nominal, mismatch=spec, v0=v0
    )


def batch_read(array: DamArray, noise_sigma: float = 0.0, rng=None) -> tuple[WeightReading, ...]:
    return tuple(read_weight(c, noise_sigma, rng) for c in array.cells)


def advance(array: DamArray, dt: float) -> DamArray:
    """Evolve every cell by dt; the global clock moves uniformly."""
    return replace(
        array,
        cells=tuple(decay(c, dt) for c in array.cells),
        global_clock=array.global_clock + dt,
    )


def batch_pulse(
    array: DamArray,
    targets: Sequence[tuple[int, int, Pulse]],
    duration: float | None = None,
) -> DamArray:
    """Pulse targeted cells; everything else idles for the same window.

    All pulses in one batch must share a duration (the wall-clock
    window applied to the whole array).  At most one pulse per cell per
    call.  With an empty target list, ``duration`` must be given and
    the call is plain decay.
    """
    if not targets:
        if duration is None:
            raise ArgumentError("empty batch needs an explicit duration")
        return advance(array, duration)

    seen = set()
    for idx, polarity, pulse in targets:
        if not isinstance(idx, (int, np.integer)) or not 0 <= idx < len(array.cells):
            raise ArgumentError(f"cell index {idx!r} out of range for {len(array.cells)} cells")
        if idx in seen:
            raise ArgumentError(f"duplicate cell index {idx} in batch")
        seen.add(idx)
        if duration is None:
            duration = pulse.duration
        elif pulse.duration != duration:
            raise ArgumentError(
                f"batch pulses must share one duration; got {pulse.duration!r} "
                f"after {duration!r}"
            )

    by_index = {int(idx): (polarity, pulse) for idx, polarity, pulse in targets}
    new_cells = []
    for i, cell in enumerate(array.cells):
        if i in by_index:
            polarity, pulse = by_index[i]
            new_cells.append(pulse_cell(cell, pulse, polarity))
        else:
            new_cells.append(decay(cell, duration))
    return replace(
        array, cells=tuple(new_cells), global_clock=array.global_clock + duration
    )


def weights_csv(array: DamArray) -> str:
    """Per-cell weight dump: index, weight in mV, cell clock."""
    lines = ["index,weight_mV,t_s"]
    for i, reading in enumerate(batch_read(array)):
        lines.append(f"{i},{reading.weight!r},{reading.timestamp!r}")
    return "\n".join(lines) + "\n"


def _params_doc(p: FnParams) -> dict:
    return {
        "k1": p.k1,
        "k2": p.k2,
        "c_total": p.c_total,
        "c_couple": p.c_couple,
        "quantize_charge": p.quantize_charge,
    }


def _node_doc(s: NodeState) -> dict:
    return {"v_fg": s.v_fg, "k0": s.k0}


def _cell_doc(c: DamCell) -> dict:
    return {
        "set_node": _node_doc(c.set_node),
        "reset_node": _node_doc(c.reset_node),
        "set_params": _params_doc(c.set_params),
        "reset_params": _params_doc(c.reset_params),
        "weight_scale": c.weight_scale,
        "t": c.t,
    }


def _checksum(doc: dict) -> str:
    payload = {k: v for k, v in doc.items() if k != "checksum"}
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def save_state(array: DamArray) -> dict:
    """Versioned, checksummed document; round-trips through load_state."""
    doc = {
        "format": STATE_FORMAT,
        "version": STATE_VERSION,
        "rng": {"algorithm": RNG_ALGORITHM, "seed": array.mismatch.seed},
        "mismatch": {
            "relative_sigma": array.mismatch.relative_sigma,
            "seed": array.mismatch.seed,
            "distribution": array.mismatch.distribution,
        },
        "nominal_params": _params_doc(array.nominal_params),
        "v0": array.v0,
        "global_clock": array.global_clock,
        "cells": [_cell_doc(c) for c in array.cells],
    }
    doc["checksum"] = _checksum(doc)
    return doc


def state_to_json(array: DamArray) -> str:
    return json.dumps(save_state(array), indent=2, sort_keys=True) + "\n"


def _need(doc, key, path, kind=None):
    if not isinstance(doc, dict) or key not in doc:
        raise StateFormatError(f"missing field at {path}.{key}" if path else f"missing field {key}")
    value = doc[key]
    where = f"{path}.{key}" if path else key
    if kind is not None and not isinstance(value, kind):
        # bool is an int subclass; keep the two apart for typed fields
        if kind is not bool and isinstance(value, bool):
            raise StateFormatError(f"wrong type at {where}: expected {kind}, got bool")
        raise StateFormatError(
            f"wrong type at {where}: expected {getattr(kind, '__name__', kind)}, "
            f"got {type(value).__name__}"
        )
    return value


def _float_at(doc, key, path):
    value = _need(doc, key, path)
    where = f"{path}.{key}" if path else key
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise StateFormatError(
            f"wrong type at {where}: expected number, got {type(value).__name__}"
        )
    return float(value)


def _params_from(doc, path) -> FnParams:
    try:
        return FnParams(
            k1=_float_at(doc, "k1", path),
            k2=_float_at(doc, "k2", path),
            c_total=_float_at(doc, "c_total", path),
            c_couple=_float_at(doc, "c_couple", path),
            quantize_charge=_need(doc, "quantize_charge", path, bool),
        )
    except DomainError as exc:
        raise StateFormatError(f"invalid parameters at {path}: {exc}") from None


def _node_from(doc, path) -> NodeState:
    try:
        return NodeState(v_fg=_float_at(doc, "v_fg", path), k0=_float_at(doc, "k0", path))
    except DomainError as exc:
        raise StateFormatError(f"invalid node state at {path}: {exc}") from None


def load_state(doc: dict) -> DamArray:
    """Rebuild an array from a save_state document, verifying integrity."""
    if not isinstance(doc, dict):
        raise StateFormatError(f"state document must be a mapping, got {type(doc).__name__}")
    fmt = _need(doc, "format", "", str)
    if fmt != STATE_FORMAT:
        raise StateFormatError(f"unrecognized format tag at format: {fmt!r}")
    version = _need(doc, "version", "", int)
    if version != STATE_VERSION:
        raise StateFormatError(f"unsupported schema version at version: {version!r}")
    stored = _need(doc, "checksum", "", str)
    actual = _checksum(doc)
    if stored != actual:
        raise StateFormatError(
            f"checksum mismatch at checksum: stored {stored[:12]}..., computed {actual[:12]}..."
        )
    rng = _need(doc, "rng", "", dict)
    algorithm = _need(rng, "algorithm", "rng", str)
    if algorithm != RNG_ALGORITHM:
        raise StateFormatError(f"unknown generator at rng.algorithm: {algorithm!r}")

    mm = _need(doc, "mismatch", "", dict)
    try:
        mismatch = MismatchSpec(
            relative_sigma=_float_at(mm, "relative_sigma", "mismatch"),
            seed=_need(mm, "seed", "mismatch", int),
            distribution=_need(mm, "distribution", "mismatch", str),
        )
    except DomainError as exc:
        raise StateFormatError(f"invalid field at mismatch: {exc}") from None

    nominal = _params_from(_need(doc, "nominal_params", "", dict), "nominal_params")
    cells_doc = _need(doc, "cells", "", list)
    cells = []
    for i, cd in enumerate(cells_doc):
        path = f"cells[{i}]"
        if not isinstance(cd, dict):
            raise StateFormatError(f"wrong type at {path}: expected mapping")
        cells.append(
            DamCell(
                set_node=_node_from(_need(cd, "set_node", path, dict), f"{path}.set_node"),
                reset_node=_node_from(_need(cd, "reset_node", path, dict), f"{path}.reset_node"),
                set_params=_params_from(_need(cd, "set_params", path, dict), f"{path}.set_params"),
                reset_params=_params_from(
                    _need(cd, "reset_params", path, dict), f"{path}.reset_params"
                ),
                weight_scale=_float_at(cd, "weight_scale", path),
                t=_float_at(cd, "t", path),
            )
        )
    if not cells:
        raise StateFormatError("empty cell list at cells")
    return DamArray(
        cells=tuple(cells),
        nominal_params=nominal,
        mismatch=mismatch,
        v0=_float_at(doc, "v0", ""),
        global_clock=_float_at(doc, "global_clock", ""),
    )


def state_from_json(text: str) -> DamArray:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StateFormatError(f"not valid JSON: {exc}") from None
    return load_state(doc)
