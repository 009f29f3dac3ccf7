"""Transition planning, handshake cycles and energy/latency accounting.

Every write goes through S0: a SET phase followed by one RESET phase of
the target's width.  Only a cell already known to sit in S0 is written
with the RESET phase alone.  Read and write cycles are emitted as ordered
signal events (untimed) over the alphabet DR/DW (requests from the digital
interface), MEN/MACK (peripheral enable and its acknowledge), DN (data
strobe for the selected cell) and ACK (acknowledge to the interface).
"""
from __future__ import annotations

import csv
import numbers
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from . import device
from .crossbar import AdcConfig, Crossbar, ReadoutRecord, Selection, adc_quantize
from .device import FA_STATES, FRAME_NS, PulseSpec, StateId, StateTable
from .errors import DeltaRangeError, InvalidTarget, MissingLedgerEntry

SIGNALS = ("DR", "DW", "MEN", "MACK", "DN", "ACK")
PHASE = (("MEN", "+"), ("MACK", "+"), ("DN", "+"), ("DN", "-"), ("MEN", "-"), ("MACK", "-"))


@dataclass(frozen=True)
class PulseOp:
    kind: str  # "set" or "reset"
    width: float

    def pulse(self) -> PulseSpec:
        if self.kind == "set":
            return PulseSpec.set_pulse(self.width)
        return PulseSpec.reset_pulse(self.width)

    def __str__(self):
        return f"SET->S0 {self.width:g}ns" if self.kind == "set" else f"RESET {self.width:g}ns"


@dataclass(frozen=True)
class TransitionPlan:
    source: StateId
    target: StateId
    steps: tuple

    @property
    def via_s0(self) -> bool:
        return len(self.steps) == 2

    @property
    def label(self) -> str:
        mid = "->S0" if self.via_s0 else ""
        return f"{self.source}{mid}->{self.target}"


def plan_transition(current, target, table: StateTable = device.DEFAULT_TABLE) -> TransitionPlan:
    current, target = StateId.parse(current), StateId.parse(target)
    if target == StateId.S0:
        raise InvalidTarget("S0 is not a resting state")
    reset = PulseOp("reset", table.width(target))
    if current == StateId.S0:
        return TransitionPlan(current, target, (reset,))
    # self-loops are rewritten too, which keeps the state from drifting
    return TransitionPlan(current, target, (PulseOp("set", table.set_width), reset))


@dataclass(frozen=True)
class SignalEvent:
    name: str
    polarity: str
    index: int

    def __str__(self):
        return f"{self.name}{self.polarity}"


@dataclass
class CycleTrace:
    kind: str  # "read" or "write"
    events: list = field(default_factory=list)
    result: StateId | None = None
    cycle_id: int = 0
    source: StateId | None = None
    target: StateId | None = None

    def signature(self) -> list:
        return [(e.name, e.polarity) for e in self.events]


def canonical_read() -> list:
    return [("DR", "+"), *PHASE, ("ACK", "+"), ("DR", "-"), ("ACK", "-")]


def canonical_write(phases: int = 2) -> list:
    return [("DW", "+"), *(PHASE * phases), ("ACK", "+"), ("DW", "-"), ("ACK", "-")]


def validate_trace(trace: CycleTrace) -> str | None:
    """Return None for a well-formed trace, otherwise a description of the first violation."""
    if trace.kind not in ("read", "write"):
        return f"unknown cycle kind {trace.kind!r}"
    request = "DR" if trace.kind == "read" else "DW"
    level = {s: False for s in SIGNALS}
    for pos, ev in enumerate(trace.events):
        name, pol = ev.name, ev.polarity
        if name not in SIGNALS or pol not in "+-" or len(pol) != 1:
            return f"unknown event {name}{pol} at position {pos}"
        if name in ("DR", "DW") and name != request:
            return f"{name}{pol} in a {trace.kind} cycle"
        rising = pol == "+"
        if level[name] == rising:
            return f"{name}{pol} at position {pos} does not alternate"
        if name == request:
            if rising and pos != 0:
                return f"{name}+ must open the cycle"
            if not rising and not level["ACK"]:
                return f"request withdrawn before ACK+ at position {pos}"
        elif name == "MEN":
            if rising and not level[request]:
                return f"MEN+ outside a request at position {pos}"
            if rising and level["MACK"]:
                return f"MEN+ before previous MACK- at position {pos}"
            if not rising and level["DN"]:
                return f"MEN- while DN is high at position {pos}"
        elif name == "MACK":
            if rising and not level["MEN"]:
                return f"acknowledge before request: MACK+ at position {pos} without MEN+"
            if not rising and level["MEN"]:
                return f"acknowledge before request: MACK- at position {pos} before MEN-"
        elif name == "DN":
            if rising and not (level["MEN"] and level["MACK"]):
                return f"DN+ at position {pos} before MEN+/MACK+"
        elif name == "ACK":
            if rising:
                if not level[request]:
                    return f"ACK+ without a request at position {pos}"
                busy = [s for s in ("DN", "MEN", "MACK") if level[s]]
                if busy:
                    return f"ACK+ at position {pos} before {'/'.join(s + '-' for s in busy)}"
            elif level[request]:
                return f"ACK- at position {pos} before {request}-"
        level[name] = rising
    high = [s for s in SIGNALS if level[s]]
    if high:
        return f"cycle ends with {', '.join(high)} still high"

    phases = sum(1 for e in trace.events if (e.name, e.polarity) == ("MEN", "+"))
    if trace.kind == "read":
        expected = canonical_read()
    else:
        if trace.source is not None and trace.source != StateId.S0 and phases < 2:
            return "missing intermediate phase"
        if phases not in (1, 2):
            return f"write cycle has {phases} phases"
        if trace.source == StateId.S0 and phases != 1:
            return "write from S0 must be a single phase"
        expected = canonical_write(phases)
    got = trace.signature()
    for pos, (a, b) in enumerate(zip(expected, got)):
        if a != b:
            return f"non-canonical order at position {pos}: expected {''.join(a)}, got {''.join(b)}"
    if len(got) != len(expected):
        return f"expected {len(expected)} events, got {len(got)}"
    return None


def _default_energy():
    # Table values keyed by target; S1 carries the S0->S1 entry
    return {
        StateId.S1: 1.74,
        StateId.S2: 8.2,
        StateId.S3: 8.3,
        StateId.S4: 8.5,
        StateId.S5: 8.8,
        StateId.S6: 9.25,
    }


# the six reference transitions of the energy table
REFERENCE_TRANSITIONS = (
    (StateId.S0, StateId.S1),
    (StateId.S1, StateId.S2),
    (StateId.S2, StateId.S3),
    (StateId.S3, StateId.S4),
    (StateId.S4, StateId.S5),
    (StateId.S5, StateId.S6),
)


@dataclass
class EnergyLedger:
    """Per-transition energy in pJ, keyed by the target state.

    ``direct_from_s0`` overrides the target entry for single-phase writes
    out of S0.
    """

    energy_by_target: dict = field(default_factory=_default_energy)
    direct_from_s0: dict = field(default_factory=lambda: {StateId.S1: 1.74})
    total_pJ: float = 0.0
    transitions: int = 0

    def with_overrides(self, via_s0: Mapping | None = None, direct: Mapping | None = None):
        by_target = dict(self.energy_by_target)
        by_target.update({StateId.parse(k): float(v) for k, v in (via_s0 or {}).items()})
        direct_map = dict(self.direct_from_s0)
        direct_map.update({StateId.parse(k): float(v) for k, v in (direct or {}).items()})
        return EnergyLedger(by_target, direct_map)

    def charge(self, plan: TransitionPlan) -> float:
        e = energy_of(plan, self)
        self.total_pJ += e
        self.transitions += 1
        return e


def energy_of(plan: TransitionPlan, ledger: EnergyLedger) -> float:
    if not plan.via_s0 and plan.target in ledger.direct_from_s0:
        return ledger.direct_from_s0[plan.target]
    try:
        return ledger.energy_by_target[plan.target]
    except KeyError:
        raise MissingLedgerEntry(f"no energy configured for target {plan.target}") from None


@dataclass
class LatencyLedger:
    frame_ns: float = FRAME_NS
    frames_per_pulse: int = 1
    read_frames: int = 1
    write_frames: int = 0
    read_frames_total: int = 0

    def charge_write(self, plan: TransitionPlan) -> float:
        frames = len(plan.steps) * self.frames_per_pulse
        self.write_frames += frames
        return frames * self.frame_ns

    def charge_read(self) -> float:
        self.read_frames_total += self.read_frames
        return self.read_frames * self.frame_ns

    @property
    def write_ns(self) -> float:
        return self.write_frames * self.frame_ns

    @property
    def total_ns(self) -> float:
        return (self.write_frames + self.read_frames_total) * self.frame_ns


@dataclass
class TransitionRecord:
    cycle: int
    row: int
    col: int
    source: StateId
    target: StateId
    via_s0: bool
    energy_pJ: float
    latency_ns: float

    @property
    def label(self) -> str:
        return f"{self.source}->{self.target}"


def write_ledger_csv(path, records: Iterable[TransitionRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cycle", "row", "col", "transition", "via_s0", "energy_pJ", "latency_ns"])
        for r in records:
            w.writerow([r.cycle, r.row, r.col, r.label, int(r.via_s0),
                        f"{r.energy_pJ:.6g}", f"{r.latency_ns:g}"])


def write_trace_csv(path, traces: Iterable[CycleTrace]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cycle", "kind", "event", "polarity", "event_index"])
        for t in traces:
            for e in t.events:
                w.writerow([t.cycle_id, t.kind, e.name, e.polarity, e.index])


class Controller:
    """Sequential read/write cycle driver for one crossbar."""

    def __init__(self, crossbar: Crossbar, energy: EnergyLedger | None = None,
                 latency: LatencyLedger | None = None, adc: AdcConfig | None = None,
                 keep_traces: bool = True):
        self.crossbar = crossbar
        self.energy = energy if energy is not None else EnergyLedger()
        self.latency = latency if latency is not None else LatencyLedger()
        self.adc = adc if adc is not None else AdcConfig.from_table(crossbar.table)
        self.keep_traces = keep_traces
        self.traces: list = []
        self.records: list = []
        self.readouts: list = []
        self._cycle = 0
        self._event = 0
        # what the controller last wrote to each cell; cells start formed in S0
        self.known = {(r, c): crossbar.cells[r][c].state
                      for r in range(crossbar.config.rows) for c in range(crossbar.config.cols)}

    def _begin(self, kind, **kw) -> CycleTrace:
        trace = CycleTrace(kind, cycle_id=self._cycle, **kw)
        self._cycle += 1
        if self.keep_traces:
            self.traces.append(trace)
        return trace

    def _emit(self, trace: CycleTrace, name: str, pol: str) -> None:
        trace.events.append(SignalEvent(name, pol, self._event))
        self._event += 1

    def execute_write_cycle(self, sel: Selection, plan: TransitionPlan) -> CycleTrace:
        trace = self._begin("write", source=plan.source, target=plan.target)
        try:
            self._emit(trace, "DW", "+")
            for op in plan.steps:
                self._emit(trace, "MEN", "+")
                self._emit(trace, "MACK", "+")
                self._emit(trace, "DN", "+")
                self.crossbar.apply_pulse(sel, op.pulse())
                self._emit(trace, "DN", "-")
                self._emit(trace, "MEN", "-")
                self._emit(trace, "MACK", "-")
            self._emit(trace, "ACK", "+")
            self._emit(trace, "DW", "-")
            self._emit(trace, "ACK", "-")
        except Exception as exc:
            exc.trace = trace
            raise
        cell = self.crossbar.cells[sel.row][sel.col]
        trace.result = cell.state
        self.known[(sel.row, sel.col)] = plan.target
        self.records.append(TransitionRecord(
            trace.cycle_id, sel.row, sel.col, plan.source, plan.target, plan.via_s0,
            self.energy.charge(plan), self.latency.charge_write(plan),
        ))
        return trace

    def execute_read_cycle(self, sel: Selection, adc: AdcConfig | None = None):
        adc = self.adc if adc is None else adc
        trace = self._begin("read")
        try:
            self._emit(trace, "DR", "+")
            self._emit(trace, "MEN", "+")
            self._emit(trace, "MACK", "+")
            self._emit(trace, "DN", "+")
            current = self.crossbar.sense(sel)
            state = adc_quantize(current, adc)
            self._emit(trace, "DN", "-")
            self._emit(trace, "MEN", "-")
            self._emit(trace, "MACK", "-")
            self._emit(trace, "ACK", "+")
            self._emit(trace, "DR", "-")
            self._emit(trace, "ACK", "-")
        except Exception as exc:
            exc.trace = trace
            raise
        trace.result = state
        self.latency.charge_read()
        self.readouts.append(ReadoutRecord(trace.cycle_id, sel.row, sel.col, current, state))
        return state, trace

    def read(self, row: int, col: int) -> StateId:
        sel = self.crossbar.select(row, col)
        try:
            state, _ = self.execute_read_cycle(sel)
        finally:
            self.crossbar.release(sel)
        return state

    def write(self, row: int, col: int, target, source=None) -> CycleTrace:
        """Write ``target`` into a cell.  ``source`` defaults to what the controller last wrote."""
        if source is None:
            source = self.known.get((row, col), StateId.S6)
        plan = plan_transition(source, target, self.crossbar.table)
        sel = self.crossbar.select(row, col)
        try:
            return self.execute_write_cycle(sel, plan)
        finally:
            self.crossbar.release(sel)

    def step_fsa(self, sel: Selection, delta: Callable, x) -> StateId:
        if isinstance(x, numbers.Number) and not 0 <= abs(x) <= 1:
            raise ValueError(f"input must satisfy 0 <= |x| <= 1, got {x}")
        q, _ = self.execute_read_cycle(sel)
        nxt = delta(q, x)
        try:
            nxt = StateId.parse(nxt)
        except ValueError:
            raise DeltaRangeError(f"delta returned {nxt!r}, not a state") from None
        if nxt not in FA_STATES:
            raise DeltaRangeError(f"delta returned {nxt}; next state must be in S1..S6")
        self.execute_write_cycle(sel, plan_transition(q, nxt, self.crossbar.table))
        return nxt
