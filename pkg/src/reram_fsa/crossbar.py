"""m x n array of 1T1R cells with row/column selection and one shared sense path."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import device
from .device import (
    FA_STATES,
    V_FIXED,
    V_READ,
    V_SET,
    CellDevice,
    PhysicalModelParams,
    PulseSpec,
    StateId,
    StateTable,
    VariationProfile,
)
from .errors import AlreadySelected, InsufficientCells, NotSelected, OutOfRange, WrongAmplitude

# S0..S6; S0 shares the S1 code at the ADC
CONFIGURED_STATES = 7


@dataclass(frozen=True)
class CrossbarConfig:
    rows: int = 4
    cols: int = 4

    def __post_init__(self):
        if int(self.rows) < 1 or int(self.cols) < 1:
            raise ValueError(f"crossbar needs at least 1x1 cells, got {self.rows}x{self.cols}")


@dataclass
class Selection:
    row: int
    col: int
    gate_enabled: bool = True


def adc_bits(s: int) -> int:
    if s < 2:
        raise ValueError(f"need at least two states, got {s}")
    # exact integer ceil(log2(s))
    return (s - 1).bit_length()


def default_thresholds(table: StateTable) -> list:
    """Geometric midpoints between adjacent observable (S1..S6) currents."""
    table.check_monotone()
    cur = [table.current(s) for s in FA_STATES]
    return [math.sqrt(a * b) for a, b in zip(cur, cur[1:])]


def balanced_thresholds(table: StateTable, profile: VariationProfile) -> list:
    """Thresholds placed the same number of standard deviations from both neighbours.

    With relative spread sigma_j on state j, the boundary between I_hi and
    I_lo solves (I_hi - t) / (sigma_hi I_hi) == (t - I_lo) / (sigma_lo I_lo).
    Falls back to the geometric midpoint where both spreads are zero.
    """
    table.check_monotone()
    out = []
    for hi, lo in zip(FA_STATES, FA_STATES[1:]):
        i_hi, i_lo = table.current(hi), table.current(lo)
        s_hi = profile.bound(hi) * profile.sigma_scale * i_hi
        s_lo = profile.bound(lo) * profile.sigma_scale * i_lo
        if s_hi + s_lo == 0:
            out.append(math.sqrt(i_hi * i_lo))
        else:
            out.append((i_hi * s_lo + i_lo * s_hi) / (s_hi + s_lo))
    return out


@dataclass(frozen=True)
class AdcConfig:
    bits: int
    thresholds: tuple

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if self.bits != adc_bits(CONFIGURED_STATES):
            raise ValueError(
                f"{CONFIGURED_STATES} states need {adc_bits(CONFIGURED_STATES)} ADC bits, "
                f"got {self.bits}"
            )
        if len(self.thresholds) != len(FA_STATES) - 1:
            raise ValueError(f"need {len(FA_STATES) - 1} thresholds, got {len(self.thresholds)}")
        if any(b >= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError(f"thresholds must be strictly decreasing: {self.thresholds}")

    @classmethod
    def from_table(cls, table: StateTable = device.DEFAULT_TABLE) -> "AdcConfig":
        return cls(adc_bits(CONFIGURED_STATES), tuple(default_thresholds(table)))

    @classmethod
    def balanced(cls, table: StateTable, profile: VariationProfile) -> "AdcConfig":
        return cls(adc_bits(CONFIGURED_STATES), tuple(balanced_thresholds(table, profile)))

    @classmethod
    def for_rule(cls, rule: str, table: StateTable, profile: VariationProfile) -> "AdcConfig":
        if rule == "geometric":
            return cls.from_table(table)
        if rule == "balanced":
            return cls.balanced(table, profile)
        raise ValueError(f"unknown threshold rule {rule!r}")


THRESHOLD_RULES = ("geometric", "balanced")


def adc_quantize(current: float, adc: AdcConfig) -> StateId:
    """Map a sensed current to S1..S6.  A current on a threshold goes to the higher-current state."""
    if current < 0:
        raise ValueError(f"current must be non-negative, got {current}")
    for state, t in zip(FA_STATES, adc.thresholds):
        if current >= t:
            return state
    return FA_STATES[-1]


def quantize_many(currents, adc: AdcConfig) -> np.ndarray:
    """Vectorised adc_quantize returning integer levels 1..6."""
    neg = -np.asarray(adc.thresholds)
    return np.searchsorted(neg, -np.asarray(currents, dtype=float), side="left") + 1


@dataclass
class ReadoutRecord:
    cycle: int
    row: int
    col: int
    current_uA: float
    state: StateId


def write_readout_csv(path, records: Iterable[ReadoutRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cycle", "row", "col", "current_uA", "state"])
        for r in records:
            w.writerow([r.cycle, r.row, r.col, f"{r.current_uA:.6g}", str(r.state)])


@dataclass
class Crossbar:
    """Array of cells plus the DeMUX / bit-line encoder / MUX selection logic.

    Only one cell can be selected at a time because all columns share a
    single CSA and ADC.  Unselected cells are gated off, so there are no
    sneak paths to model.
    """

    config: CrossbarConfig = field(default_factory=CrossbarConfig)
    table: StateTable = device.DEFAULT_TABLE
    profile: VariationProfile = field(default_factory=VariationProfile.disabled)
    seed: int = 0
    params: PhysicalModelParams | None = None

    def __post_init__(self):
        m, n = self.config.rows, self.config.cols
        seeds = np.random.SeedSequence(self.seed).spawn(m * n)
        self.cells = [
            [CellDevice.fresh(seeds[r * n + c], self.profile, self.table, self.params)
             for c in range(n)]
            for r in range(m)
        ]
        self.active: Selection | None = None
        self._allocated: set = set()

    @property
    def shape(self):
        return self.config.rows, self.config.cols

    def cell(self, row: int, col: int) -> CellDevice:
        self._check_range(row, col)
        return self.cells[row][col]

    def _check_range(self, row, col):
        m, n = self.shape
        if not (0 <= row < m and 0 <= col < n):
            raise OutOfRange(f"cell ({row}, {col}) outside {m}x{n} crossbar")

    def select(self, row: int, col: int) -> Selection:
        self._check_range(row, col)
        if self.active is not None:
            raise AlreadySelected(
                f"sense path busy with ({self.active.row}, {self.active.col})"
            )
        self.active = Selection(row, col, True)
        return self.active

    def release(self, sel: Selection | None = None) -> None:
        if sel is not None and sel is not self.active:
            raise NotSelected("releasing a selection that is not active")
        if self.active is not None:
            self.active.gate_enabled = False
        self.active = None

    def _require(self, sel: Selection) -> CellDevice:
        if sel is None or sel is not self.active or not sel.gate_enabled:
            raise NotSelected("no active, gate-enabled selection")
        return self.cells[sel.row][sel.col]

    def apply_pulse(self, sel: Selection, pulse: PulseSpec) -> CellDevice:
        """Drive the selected row with a SET or RESET pulse."""
        cell = self._require(sel)
        if math.isclose(pulse.amplitude, V_SET):
            return device.apply_set(cell, pulse)
        if math.isclose(pulse.amplitude, V_FIXED):
            return device.apply_reset(cell, pulse)
        raise WrongAmplitude(f"{pulse.amplitude} V is a read level, not a write pulse")

    def sense(self, sel: Selection, profile: VariationProfile | None = None) -> float:
        # ideal CSA: identity on the current
        cell = self._require(sel)
        return device.read_current(cell, V_READ, self.profile if profile is None else profile)

    def allocate(self, count: int) -> list:
        """Reserve ``count`` free cells in row-major order."""
        free = [(r, c) for r in range(self.config.rows) for c in range(self.config.cols)
                if (r, c) not in self._allocated]
        if count > len(free):
            raise InsufficientCells(f"need {count} free cells, crossbar has {len(free)}")
        picked = free[:count]
        self._allocated.update(picked)
        return picked

    def free_cells(self, cells: Sequence) -> None:
        self._allocated.difference_update(cells)
