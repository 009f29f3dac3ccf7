"""Behavioral model of a single 1T1R multi-level cell.

The cell is programmed by a SET pulse (-2 V) that lands it in the low
resistive state S0, followed by RESET pulses (+1.8 V) whose *cumulative*
width since the last SET selects one of the states S1..S6.  Reading at
+0.1 V returns the calibrated current of the state, scaled by optional
device-to-device (fixed) and cycle-to-cycle (per read) multipliers.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import DegenerateTable, NeverFormed, PulseTooShort, WrongAmplitude

V_SET = -2.0
V_FIXED = 1.8
V_READ = 0.1
CANONICAL_AMPLITUDES = (V_SET, V_FIXED, V_READ)

FRAME_NS = 150.0
MIN_SET_WIDTH_NS = 10.0

# float slack when summing pulse widths (e.g. 2.5 + 2.5 vs 5)
_WIDTH_EPS = 1e-9


class StateId(enum.IntEnum):
    S0 = 0
    S1 = 1
    S2 = 2
    S3 = 3
    S4 = 4
    S5 = 5
    S6 = 6

    def __str__(self):
        return self.name

    @classmethod
    def parse(cls, value) -> "StateId":
        """Accept a StateId, an int level or a string like ``"S3"`` / ``"3"``."""
        if isinstance(value, StateId):
            return value
        if isinstance(value, str):
            text = value.strip().upper()
            if text.startswith("S"):
                text = text[1:]
            try:
                value = int(text)
            except ValueError:
                raise ValueError(f"not a state: {value!r}") from None
        if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
            if 0 <= int(value) <= 6:
                return cls(int(value))
        raise ValueError(f"not a state: {value!r}")


FA_STATES = tuple(StateId(j) for j in range(1, 7))
LOW_STATES = (StateId.S0, StateId.S1, StateId.S2, StateId.S3)
HIGH_STATES = (StateId.S4, StateId.S5, StateId.S6)


@dataclass(frozen=True)
class PulseSpec:
    amplitude: float
    width: float
    frame_period: float = FRAME_NS

    def __post_init__(self):
        if not any(math.isclose(self.amplitude, v) for v in CANONICAL_AMPLITUDES):
            raise WrongAmplitude(
                f"amplitude {self.amplitude} V is not one of {CANONICAL_AMPLITUDES}"
            )
        if not (self.width > 0):
            raise ValueError(f"pulse width must be positive, got {self.width}")
        if self.width > self.frame_period + _WIDTH_EPS:
            raise ValueError(
                f"pulse width {self.width} ns exceeds frame period {self.frame_period} ns"
            )

    @classmethod
    def set_pulse(cls, width: float = MIN_SET_WIDTH_NS) -> "PulseSpec":
        return cls(V_SET, width)

    @classmethod
    def reset_pulse(cls, width: float) -> "PulseSpec":
        return cls(V_FIXED, width)


@dataclass(frozen=True)
class StateTable:
    """Per-state programming widths, read currents and resistances.

    ``widths`` holds RESET widths for S1..S6 (ns).  ``currents`` and
    ``resistances`` hold S0..S6 (uA at V_READ, kOhm).  The current column
    is what the sense path uses; resistance is kept as metadata.
    """

    widths: tuple = (5.0, 10.0, 15.0, 30.0, 60.0, 150.0)
    currents: tuple = (12.8, 12.6, 1.6, 0.56, 0.3, 0.2, 0.07)
    resistances: tuple = (7.8, 8.0, 95.2, 196.1, 342.5, 588.2, 1492.5)
    set_width: float = MIN_SET_WIDTH_NS

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(float(w) for w in self.widths))
        object.__setattr__(self, "currents", tuple(float(i) for i in self.currents))
        object.__setattr__(self, "resistances", tuple(float(r) for r in self.resistances))
        if len(self.widths) != 6:
            raise ValueError("need six RESET widths (S1..S6)")
        if len(self.currents) != 7 or len(self.resistances) != 7:
            raise ValueError("need seven currents and resistances (S0..S6)")
        if any(w <= 0 for w in self.widths):
            raise ValueError("RESET widths must be positive")
        if any(b <= a for a, b in zip(self.widths, self.widths[1:])):
            raise ValueError(f"RESET widths must be strictly increasing: {self.widths}")
        if any(i < 0 for i in self.currents):
            raise ValueError("currents must be non-negative")

    def width(self, state: StateId) -> float:
        state = StateId(state)
        if state == StateId.S0:
            return self.set_width
        return self.widths[state - 1]

    def current(self, state: StateId) -> float:
        return self.currents[int(state)]

    def resistance(self, state: StateId) -> float:
        return self.resistances[int(state)]

    def check_monotone(self) -> None:
        """Raise DegenerateTable unless currents fall and resistances rise strictly."""
        for j in range(6):
            if not self.currents[j] > self.currents[j + 1]:
                raise DegenerateTable(
                    f"currents of S{j} and S{j + 1} are not strictly decreasing "
                    f"({self.currents[j]} vs {self.currents[j + 1]} uA)"
                )
            if not self.resistances[j] < self.resistances[j + 1]:
                raise DegenerateTable(
                    f"resistances of S{j} and S{j + 1} are not strictly increasing"
                )

    def with_overrides(self, overrides: Mapping) -> "StateTable":
        """Return a copy with per-state overrides.

        ``overrides`` maps state names to dicts with any of ``width_ns``,
        ``current_uA``, ``resistance_kOhm``.  A width on S0 sets the SET width.
        """
        widths = list(self.widths)
        currents = list(self.currents)
        resistances = list(self.resistances)
        set_width = self.set_width
        for key, row in overrides.items():
            state = StateId.parse(key)
            unknown = set(row) - {"width_ns", "current_uA", "resistance_kOhm"}
            if unknown:
                raise ValueError(f"unknown state-table fields for {state}: {sorted(unknown)}")
            if "width_ns" in row:
                if state == StateId.S0:
                    set_width = float(row["width_ns"])
                else:
                    widths[state - 1] = float(row["width_ns"])
            if "current_uA" in row:
                currents[state] = float(row["current_uA"])
            if "resistance_kOhm" in row:
                resistances[state] = float(row["resistance_kOhm"])
        return StateTable(tuple(widths), tuple(currents), tuple(resistances), set_width)


DEFAULT_TABLE = StateTable()


@dataclass(frozen=True)
class ModelParam:
    value: float
    unit: str


def _default_model_params():
    return {
        "l_cell": ModelParam(3.0, "nm"),
        "l_det": ModelParam(4.0, "nm"),
        "r_det": ModelParam(20.0, "nm"),
        "N_plug": ModelParam(20e26, "m^-3"),
        "a": ModelParam(0.25, "nm"),
        "mu_n": ModelParam(1e-6, "m^2/(V s)"),
        "epsilon": ModelParam(17.0, "epsilon_0"),
        "epsilon_phi_beta": ModelParam(5.5, "epsilon_0"),
        "e_phi_beta_n0": ModelParam(0.3, "eV"),
        "e_phi_beta_n": ModelParam(0.1, "eV"),
        "N_disc_min": ModelParam(0.008e26, "m^-3"),
        "N_disc_max": ModelParam(20e26, "m^-3"),
        "delta_W_A": ModelParam(0.7, "eV"),
        "A": ModelParam(0.00392, "1/Ohm"),
        "R_series": ModelParam(650.0, "Ohm"),
        "R_0": ModelParam(719.244, "Ohm"),
        "R_th_line": ModelParam(90.47e3, "Ohm"),
        "R_th0": ModelParam(1.572e7, "Ohm"),
    }


@dataclass(frozen=True)
class PhysicalModelParams:
    """Compact-model parameters of the simulated stack.

    Carried as a provenance record only; no electro-thermal integration is
    done.  Variation is applied to the read current directly.
    """

    values: Mapping[str, ModelParam] = field(default_factory=_default_model_params)

    def __getitem__(self, name):
        return self.values[name]

    def with_overrides(self, overrides: Mapping[str, float]) -> "PhysicalModelParams":
        values = dict(self.values)
        for name, value in overrides.items():
            if name not in values:
                raise KeyError(f"unknown model parameter {name!r}")
            values[name] = ModelParam(float(value), values[name].unit)
        return PhysicalModelParams(values)


DISTRIBUTIONS = ("truncated_gaussian", "at_bound")


@dataclass(frozen=True)
class VariationProfile:
    """Multiplicative read-current variation.

    Low states (S0..S3) use ``low_state_bound`` and high states (S4..S6)
    ``high_state_bound``.  A draw is ``1 + sigma * z`` with
    ``sigma = bound * sigma_scale`` and z a standard normal truncated so the
    multiplier never leaves ``[1 - bound, 1 + bound]``.  The ``at_bound``
    distribution puts every draw on one of the two edges (adversarial mode).
    """

    low_state_bound: float = 0.50
    high_state_bound: float = 0.20
    sigma_scale: float = 1.0 / 3.0
    d2d_enabled: bool = True
    c2c_enabled: bool = False
    distribution: str = "truncated_gaussian"

    def __post_init__(self):
        for name in ("low_state_bound", "high_state_bound"):
            b = getattr(self, name)
            if not (0.0 <= b < 1.0):
                raise ValueError(f"{name} must lie in [0, 1), got {b}")
        if not (self.sigma_scale > 0):
            raise ValueError("sigma_scale must be positive")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"distribution must be one of {DISTRIBUTIONS}")

    @classmethod
    def disabled(cls) -> "VariationProfile":
        return cls(0.0, 0.0, d2d_enabled=False, c2c_enabled=False)

    def bound(self, state: StateId) -> float:
        return self.low_state_bound if StateId(state) <= StateId.S3 else self.high_state_bound

    def bounds(self) -> np.ndarray:
        return np.array([self.bound(s) for s in StateId])

    def replace(self, **changes) -> "VariationProfile":
        return replace(self, **changes)


def standard_truncated_normal(rng: np.random.Generator, limit: float, size=None):
    """Standard normal draws rejected outside ``[-limit, limit]``."""
    if size is None:
        while True:
            z = rng.standard_normal()
            if abs(z) <= limit:
                return z
    out = rng.standard_normal(size)
    bad = np.abs(out) > limit
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > limit
    return out


def draw_multipliers(rng: np.random.Generator, bounds, profile: VariationProfile, size=None):
    """Variation multipliers for the given per-entry bounds.

    The underlying standard draws do not depend on ``bounds`` so two profiles
    fed the same stream see the same shocks, only scaled differently.
    """
    if size is None and np.ndim(bounds) == 0:
        b = float(bounds)
        if profile.distribution == "at_bound":
            return 1.0 - b if rng.random() < 0.5 else 1.0 + b
        z = standard_truncated_normal(rng, 1.0 / profile.sigma_scale)
        return 1.0 + min(max(z * profile.sigma_scale * b, -b), b)
    bounds = np.asarray(bounds, dtype=float)
    shape = bounds.shape if size is None else size
    if profile.distribution == "at_bound":
        signs = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
        return 1.0 + signs * bounds
    limit = 1.0 / profile.sigma_scale
    z = standard_truncated_normal(rng, limit, shape)
    return 1.0 + np.clip(z * profile.sigma_scale * bounds, -bounds, bounds)


def sample_d2d(params: PhysicalModelParams | None, profile: VariationProfile, seed) -> tuple:
    """Per-state device-to-device read-current multipliers for S0..S6.

    ``params`` is accepted for provenance; the draw only depends on the
    profile and the seed.  Returns all ones when D2D is disabled.
    """
    if not profile.d2d_enabled:
        return (1.0,) * 7
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return tuple(float(m) for m in draw_multipliers(rng, profile.bounds(), profile))


def nominal_state_for_exposure(exposure: float, table: StateTable = DEFAULT_TABLE) -> StateId:
    if exposure < 0:
        raise ValueError(f"exposure must be non-negative, got {exposure}")
    state = StateId.S0
    for j, w in enumerate(table.widths, start=1):
        if w <= exposure + _WIDTH_EPS:
            state = StateId(j)
        else:
            break
    return state


@dataclass
class CellDevice:
    state: StateId = StateId.S0
    reset_exposure: float = 0.0
    d2d_multipliers: tuple = (1.0,) * 7
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    table: StateTable = DEFAULT_TABLE
    formed: bool = False

    @classmethod
    def fresh(cls, seed=0, profile: VariationProfile | None = None,
              table: StateTable = DEFAULT_TABLE, params: PhysicalModelParams | None = None,
              formed: bool = True) -> "CellDevice":
        """A cell with its own random streams, optionally already SET to S0."""
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        d2d_seq, c2c_seq = ss.spawn(2)
        mult = (1.0,) * 7
        if profile is not None:
            mult = sample_d2d(params, profile, np.random.default_rng(d2d_seq))
        cell = cls(d2d_multipliers=mult, rng=np.random.default_rng(c2c_seq), table=table)
        if formed:
            apply_set(cell, PulseSpec.set_pulse(table.set_width))
        return cell


def apply_set(cell: CellDevice, pulse: PulseSpec) -> CellDevice:
    if not math.isclose(pulse.amplitude, V_SET):
        raise WrongAmplitude(f"SET needs {V_SET} V, got {pulse.amplitude} V")
    if pulse.width < cell.table.set_width - _WIDTH_EPS:
        raise PulseTooShort(
            f"SET needs at least {cell.table.set_width} ns, got {pulse.width} ns"
        )
    # longer SET pulses are clamped to S0
    cell.state = StateId.S0
    cell.reset_exposure = 0.0
    cell.formed = True
    return cell


def apply_reset(cell: CellDevice, pulse: PulseSpec) -> CellDevice:
    if not math.isclose(pulse.amplitude, V_FIXED):
        raise WrongAmplitude(f"RESET needs {V_FIXED} V, got {pulse.amplitude} V")
    if not cell.formed:
        raise NeverFormed("RESET applied before any SET")
    cell.reset_exposure += pulse.width
    cell.state = max(cell.state, nominal_state_for_exposure(cell.reset_exposure, cell.table))
    return cell


def read_current(cell: CellDevice, v_read: float = V_READ,
                 profile: VariationProfile | None = None) -> float:
    """Read current in uA.  Never changes the cell's state."""
    if not math.isclose(v_read, V_READ):
        raise WrongAmplitude(f"read needs {V_READ} V, got {v_read} V")
    current = cell.table.current(cell.state)
    if profile is None:
        return current
    if profile.d2d_enabled:
        current *= cell.d2d_multipliers[cell.state]
    if profile.c2c_enabled:
        current *= draw_multipliers(cell.rng, profile.bound(cell.state), profile)
    return current


def program(cell: CellDevice, target: StateId) -> CellDevice:
    """SET then a single RESET of the target's width (direct for S0)."""
    target = StateId(target)
    apply_set(cell, PulseSpec.set_pulse(cell.table.set_width))
    if target != StateId.S0:
        apply_reset(cell, PulseSpec.reset_pulse(cell.table.width(target)))
    return cell
