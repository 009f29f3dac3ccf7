"""Variation Monte Carlo, detection margins and workload energy/latency aggregation."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import device
from .controller import TransitionRecord
from .crossbar import THRESHOLD_RULES, AdcConfig, default_thresholds, quantize_many
from .device import FA_STATES, CellDevice, PulseSpec, StateId, StateTable, VariationProfile
from .errors import DegenerateTable, EmptyWorkload


@dataclass(frozen=True)
class MonteCarloConfig:
    trials: int = 10_000
    seed: int = 0
    profile: VariationProfile = field(default_factory=VariationProfile)
    states: tuple = FA_STATES
    threshold_rule: str = "balanced"
    table: StateTable = device.DEFAULT_TABLE

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        states = tuple(StateId.parse(s) for s in self.states)
        if not states or any(s not in FA_STATES for s in states):
            raise ValueError("states under test must be a non-empty subset of S1..S6")
        object.__setattr__(self, "states", states)
        if self.threshold_rule not in THRESHOLD_RULES:
            raise ValueError(f"threshold_rule must be one of {THRESHOLD_RULES}")

    def adc(self) -> AdcConfig:
        return AdcConfig.for_rule(self.threshold_rule, self.table, self.profile)


@dataclass
class MarginRow:
    upper: StateId
    lower: StateId
    ratio: float
    threshold: float | None
    upper_low_edge: float  # worst-case lowest current of the upper state
    lower_high_edge: float  # worst-case highest current of the lower state
    bands_overlap: bool
    worst_case_misdetect: bool

    @property
    def pair(self):
        return (self.upper, self.lower)

    @property
    def degenerate(self) -> bool:
        return self.ratio <= 1.0


def margin_report(table: StateTable = device.DEFAULT_TABLE,
                  profile: VariationProfile | None = None,
                  thresholds: Sequence[float] | None = None) -> list:
    """Adjacent-state current ratios and worst-case bands under the profile's bounds."""
    profile = VariationProfile() if profile is None else profile
    if thresholds is None:
        try:
            thresholds = default_thresholds(table)
        except DegenerateTable:
            thresholds = [None] * 5
    rows = []
    for (hi, lo), t in zip(zip(FA_STATES, FA_STATES[1:]), thresholds):
        i_hi, i_lo = table.current(hi), table.current(lo)
        ratio = i_hi / i_lo if i_lo > 0 else float("inf")
        low_edge = i_hi * (1 - profile.bound(hi))
        high_edge = i_lo * (1 + profile.bound(lo))
        overlap = low_edge <= high_edge
        if t is None:
            misdetect = True
        else:
            misdetect = low_edge < t or high_edge >= t
        rows.append(MarginRow(hi, lo, ratio, t, low_edge, high_edge, overlap, misdetect))
    return rows


def margin_csv(rows: Sequence[MarginRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["pair", "ratio", "threshold_uA", "upper_low_edge_uA", "lower_high_edge_uA",
                "bands_overlap", "worst_case_misdetect", "degenerate"])
    for r in rows:
        w.writerow([f"{r.upper}/{r.lower}", f"{r.ratio:.6g}",
                    "" if r.threshold is None else f"{r.threshold:.6g}",
                    f"{r.upper_low_edge:.6g}", f"{r.lower_high_edge:.6g}",
                    int(r.bands_overlap), int(r.worst_case_misdetect), int(r.degenerate)])
    return buf.getvalue()


@dataclass
class DetectionReport:
    states: tuple
    trials: int
    thresholds: tuple
    misdetections: dict
    currents: np.ndarray  # trials x states, uA
    margins: list
    table: StateTable = device.DEFAULT_TABLE

    @property
    def total_misdetections(self) -> int:
        return sum(self.misdetections.values())

    @property
    def error_rate(self) -> float:
        return self.total_misdetections / (self.trials * len(self.states))

    def state_error_rate(self, state) -> float:
        return self.misdetections[StateId.parse(state)] / self.trials

    def relative_deviation(self) -> dict:
        """Mean |I - I_nominal| / I_nominal per state."""
        out = {}
        for k, s in enumerate(self.states):
            nominal = self.nominal[k]
            out[s] = float(np.mean(np.abs(self.currents[:, k] - nominal)) / nominal)
        return out

    @property
    def nominal(self) -> np.ndarray:
        return np.array([self.table.current(s) for s in self.states])

    def excursions(self) -> dict:
        return {s: (float(self.currents[:, k].min()), float(self.currents[:, k].max()))
                for k, s in enumerate(self.states)}

    @property
    def flagged_pairs(self) -> list:
        return [r.pair for r in self.margins if r.worst_case_misdetect]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["state", "trials", "misdetections", "error_rate", "nominal_uA",
                    "min_uA", "max_uA", "mean_rel_dev"])
        rel = self.relative_deviation()
        exc = self.excursions()
        for k, s in enumerate(self.states):
            w.writerow([str(s), self.trials, self.misdetections[s],
                        f"{self.misdetections[s] / self.trials:.6g}", f"{self.nominal[k]:.6g}",
                        f"{exc[s][0]:.6g}", f"{exc[s][1]:.6g}", f"{rel[s]:.6g}"])
        w.writerow(["ALL", self.trials * len(self.states), self.total_misdetections,
                    f"{self.error_rate:.6g}", "", "", "", ""])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [
            f"trials per state: {self.trials}",
            f"thresholds (uA): {', '.join(f'{t:.4g}' for t in self.thresholds)}",
            f"overall error rate: {self.error_rate:.4%} "
            f"({self.total_misdetections}/{self.trials * len(self.states)})",
        ]
        rel = self.relative_deviation()
        for s in self.states:
            lines.append(f"  {s}: errors {self.misdetections[s]:>6d}  mean |dI|/I {rel[s]:.3f}")
        for r in self.margins:
            flag = "  WORST-CASE MISDETECT" if r.worst_case_misdetect else ""
            lines.append(f"  {r.upper}/{r.lower}: ratio {r.ratio:.3f}{flag}")
        return "\n".join(lines)


def run_detection_mc(config: MonteCarloConfig) -> DetectionReport:
    """Write each state via S0 on a fresh device per trial, read once, quantize and compare."""
    adc = config.adc()
    table = config.table
    seeds = np.random.SeedSequence(config.seed).spawn(config.trials)
    currents = np.empty((config.trials, len(config.states)))
    set_pulse = PulseSpec.set_pulse(table.set_width)
    resets = [PulseSpec.reset_pulse(table.width(s)) for s in config.states]
    for t, ss in enumerate(seeds):
        cell = CellDevice.fresh(ss, config.profile, table)
        for k, reset in enumerate(resets):
            device.apply_set(cell, set_pulse)
            device.apply_reset(cell, reset)
            currents[t, k] = device.read_current(cell, device.V_READ, config.profile)
    levels = quantize_many(currents, adc)
    expected = np.array([int(s) for s in config.states])
    wrong = (levels != expected).sum(axis=0)
    return DetectionReport(
        config.states, config.trials, adc.thresholds,
        {s: int(n) for s, n in zip(config.states, wrong)}, currents,
        margin_report(table, config.profile, adc.thresholds), table,
    )


@dataclass
class WorkloadReport:
    records: list
    read_cycles: int = 0
    frame_ns: float = device.FRAME_NS

    @property
    def transitions(self) -> int:
        return len(self.records)

    @property
    def total_energy_pJ(self) -> float:
        return float(sum(r.energy_pJ for r in self.records))

    @property
    def mean_energy_pJ(self) -> float:
        return self.total_energy_pJ / self.transitions

    @property
    def write_latency_ns(self) -> float:
        return float(sum(r.latency_ns for r in self.records))

    @property
    def via_s0_count(self) -> int:
        return sum(1 for r in self.records if r.via_s0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["transition", "energy_pJ", "latency_ns"])
        for r in self.records:
            w.writerow([r.label, f"{r.energy_pJ:.6g}", f"{r.latency_ns:g}"])
        w.writerow(["TOTAL", f"{self.total_energy_pJ:.6g}", f"{self.write_latency_ns:g}"])
        w.writerow(["MEAN", f"{self.mean_energy_pJ:.6g}",
                    f"{self.write_latency_ns / self.transitions:g}"])
        return buf.getvalue()

    def summary(self) -> str:
        return "\n".join([
            f"transitions: {self.transitions} ({self.via_s0_count} via S0)",
            f"read cycles: {self.read_cycles}",
            f"total energy: {self.total_energy_pJ:.4g} pJ",
            f"mean energy per transition: {self.mean_energy_pJ:.4g} pJ",
            f"write latency: {self.write_latency_ns:g} ns",
        ])


def workload_report(records: Sequence[TransitionRecord], traces: Sequence = (),
                    frame_ns: float = device.FRAME_NS) -> WorkloadReport:
    records = list(records)
    if not records:
        raise EmptyWorkload("empty workload: no transitions executed")
    reads = sum(1 for t in traces if t.kind == "read")
    return WorkloadReport(records, reads, frame_ns)
