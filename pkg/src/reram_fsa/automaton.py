"""Automata running on crossbar cells.

Covers the two-action Krinsky learning automaton on a single cell and
generic finite state automata spread over several cells with a positional
digit encoding (base 6 by default, one digit per cell).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Mapping, Sequence

import numpy as np

from .controller import Controller, plan_transition
from .device import FA_STATES, StateId
from .errors import InvalidState, OutOfRange

ACTION_A = "A"
ACTION_B = "B"


def _default_reward():
    return {s: (StateId.S1 if s <= StateId.S3 else StateId.S4) for s in FA_STATES}


def _default_penalty():
    # cyclic ladder; the action flips on S3->S4 and S6->S1
    return {s: StateId(s % 6 + 1) for s in FA_STATES}


@dataclass(frozen=True)
class KrinskyConfig:
    action_a: tuple = (StateId.S1, StateId.S2, StateId.S3)
    action_b: tuple = (StateId.S4, StateId.S5, StateId.S6)
    reward_next: Mapping = field(default_factory=_default_reward)
    penalty_next: Mapping = field(default_factory=_default_penalty)

    def __post_init__(self):
        a, b = set(self.action_a), set(self.action_b)
        if a & b or (a | b) != set(FA_STATES):
            raise ValueError("action state sets must partition S1..S6")
        for table in (self.reward_next, self.penalty_next):
            if set(table) != set(FA_STATES) or not set(table.values()) <= set(FA_STATES):
                raise ValueError("Krinsky rule tables must map S1..S6 onto S1..S6")


DEFAULT_KRINSKY = KrinskyConfig()


def _check_fa_state(state) -> StateId:
    state = StateId.parse(state)
    if state not in FA_STATES:
        raise InvalidState(f"{state} is not an automaton state (S1..S6)")
    return state


def action_of(state, config: KrinskyConfig = DEFAULT_KRINSKY) -> str:
    state = _check_fa_state(state)
    return ACTION_A if state in config.action_a else ACTION_B


def krinsky_next(state, beta: int, config: KrinskyConfig = DEFAULT_KRINSKY) -> StateId:
    """Reward (beta=0) jumps to the action's innermost state; penalty (beta=1) steps toward the boundary."""
    state = _check_fa_state(state)
    if beta == 0:
        return config.reward_next[state]
    if beta == 1:
        return config.penalty_next[state]
    raise ValueError(f"beta must be 0 or 1, got {beta!r}")


def _check_env(reward_probs: Mapping) -> dict:
    missing = {ACTION_A, ACTION_B} - set(reward_probs)
    if missing:
        raise ValueError(f"missing reward probability for action(s) {sorted(missing)}")
    probs = {k: float(reward_probs[k]) for k in (ACTION_A, ACTION_B)}
    for k, p in probs.items():
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"reward probability for {k} must lie in [0, 1], got {p}")
    return probs


@dataclass
class KrinskyTrajectory:
    states: list  # steps + 1 entries, including the start
    actions: list
    betas: list

    def fraction(self, action: str) -> float:
        return self.actions.count(action) / len(self.actions)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "state", "action", "beta", "next_state"])
            for k, (a, b) in enumerate(zip(self.actions, self.betas)):
                w.writerow([k, str(self.states[k]), a, b, str(self.states[k + 1])])


def krinsky_software(start, reward_probs: Mapping, steps: int, seed,
                     config: KrinskyConfig = DEFAULT_KRINSKY) -> KrinskyTrajectory:
    """Pure update-rule evaluation, no hardware model."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    probs = _check_env(reward_probs)
    rng = np.random.default_rng(seed)
    state = _check_fa_state(start)
    traj = KrinskyTrajectory([state], [], [])
    for _ in range(steps):
        action = action_of(state, config)
        beta = 0 if rng.random() < probs[action] else 1
        state = krinsky_next(state, beta, config)
        traj.actions.append(action)
        traj.betas.append(beta)
        traj.states.append(state)
    return traj


def run_krinsky(controller: Controller, row: int, col: int, reward_probs: Mapping,
                steps: int, seed, start=None,
                config: KrinskyConfig = DEFAULT_KRINSKY) -> KrinskyTrajectory:
    """Run the automaton on one cell: read, act, draw beta, update, write back."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    probs = _check_env(reward_probs)
    rng = np.random.default_rng(seed)
    if start is not None:
        controller.write(row, col, _check_fa_state(start))
    xb = controller.crossbar
    traj = KrinskyTrajectory([], [], [])
    sel = xb.select(row, col)
    try:
        for _ in range(steps):
            state, _ = controller.execute_read_cycle(sel)
            if not traj.states:
                traj.states.append(state)
            action = action_of(state, config)
            beta = 0 if rng.random() < probs[action] else 1
            nxt = krinsky_next(state, beta, config)
            controller.execute_write_cycle(sel, plan_transition(state, nxt, xb.table))
            traj.actions.append(action)
            traj.betas.append(beta)
            traj.states.append(nxt)
    finally:
        xb.release(sel)
    return traj


# --- generic FSA --------------------------------------------------------------

@dataclass(frozen=True)
class FsaSpec:
    n_states: int
    alphabet: tuple
    delta: Mapping  # (state index, symbol) -> state index
    initial: int = 0

    def __post_init__(self):
        if self.n_states < 1:
            raise ValueError("FSA needs at least one state")
        if not 0 <= self.initial < self.n_states:
            raise ValueError(f"initial state {self.initial} outside 0..{self.n_states - 1}")
        for k in range(self.n_states):
            for sym in self.alphabet:
                if (k, sym) not in self.delta:
                    raise ValueError(f"transition table has no entry for ({k}, {sym!r})")
                nxt = self.delta[(k, sym)]
                if not 0 <= nxt < self.n_states:
                    raise ValueError(f"delta({k}, {sym!r}) = {nxt} outside 0..{self.n_states - 1}")

    def next(self, k: int, symbol: Hashable) -> int:
        return self.delta[(k, symbol)]

    def run(self, inputs: Sequence) -> list:
        """State sequence (initial state included) for an input string."""
        k = self.initial
        out = [k]
        for sym in inputs:
            k = self.delta[(k, sym)]
            out.append(k)
        return out

    @classmethod
    def parse(cls, text: str) -> "FsaSpec":
        """Read ``state symbol next`` lines.

        Blank lines and ``#`` comments are skipped.  Optional directives:
        ``states N`` and ``initial K``.
        """
        delta, symbols, n_states, initial = {}, [], None, 0
        seen = set()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "states" and len(parts) == 2:
                n_states = int(parts[1])
                continue
            if parts[0] == "initial" and len(parts) == 2:
                initial = int(parts[1])
                continue
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 'state symbol next', got {raw!r}")
            src, sym, dst = int(parts[0]), parts[1], int(parts[2])
            if (src, sym) in delta:
                raise ValueError(f"line {lineno}: duplicate entry for ({src}, {sym})")
            delta[(src, sym)] = dst
            if sym not in symbols:
                symbols.append(sym)
            seen.update((src, dst))
        if n_states is None:
            n_states = max(seen) + 1 if seen else 1
        return cls(n_states, tuple(symbols), delta, initial)

    @classmethod
    def load(cls, path) -> "FsaSpec":
        return cls.parse(Path(path).read_text())

    def to_text(self) -> str:
        lines = [f"states {self.n_states}", f"initial {self.initial}"]
        for k in range(self.n_states):
            for sym in self.alphabet:
                lines.append(f"{k} {sym} {self.delta[(k, sym)]}")
        return "\n".join(lines) + "\n"


def digit_count(n_states: int, base: int = 6) -> int:
    """Smallest d >= 1 with base**d >= n_states (integer arithmetic)."""
    if n_states < 1:
        raise ValueError("need at least one state")
    d, cap = 1, base
    while cap < n_states:
        d += 1
        cap *= base
    return d


def encode_state(k: int, n_states: int, base: int = 6) -> list:
    """Most-significant-first digits of ``k`` over ``digit_count(n_states)`` cells."""
    if not 0 <= k < n_states:
        raise OutOfRange(f"state index {k} outside 0..{n_states - 1}")
    digits = []
    for _ in range(digit_count(n_states, base)):
        k, v = divmod(k, base)
        digits.append(v)
    return digits[::-1]


def decode_state(digits: Sequence[int], base: int = 6) -> int:
    k = 0
    for v in digits:
        if not 0 <= v < base:
            raise OutOfRange(f"digit {v} outside 0..{base - 1}")
        k = k * base + v
    return k


ENCODINGS = {"base6": 6, "binary": 2}


@dataclass(frozen=True)
class MultiCellEncoding:
    n_states: int
    mode: str = "base6"

    def __post_init__(self):
        if self.mode not in ENCODINGS:
            raise ValueError(f"encoding must be one of {sorted(ENCODINGS)}")

    @property
    def base(self) -> int:
        return ENCODINGS[self.mode]

    @property
    def digit_count(self) -> int:
        return digit_count(self.n_states, self.base)

    def digit_to_state(self, v: int) -> StateId:
        if self.mode == "binary":
            return StateId.S6 if v else StateId.S1
        return StateId(v + 1)

    def state_to_digit(self, state: StateId) -> int:
        state = StateId(state)
        if self.mode == "binary":
            # S1 stores 0, S6 stores 1; split the ladder in the middle on reads
            return int(state >= StateId.S4)
        return max(int(state), 1) - 1

    def encode(self, k: int) -> list:
        return [self.digit_to_state(v) for v in encode_state(k, self.n_states, self.base)]

    def decode(self, states: Sequence) -> int:
        return decode_state([self.state_to_digit(s) for s in states], self.base)


class CompiledFsa:
    """An FsaSpec bound to crossbar cells through a controller."""

    def __init__(self, spec: FsaSpec, controller: Controller, cells: list,
                 encoding: MultiCellEncoding, partial_rewrite: bool = True):
        self.spec = spec
        self.controller = controller
        self.cells = cells
        self.encoding = encoding
        self.partial_rewrite = partial_rewrite

    def read_states(self) -> list:
        return [self.controller.read(r, c) for r, c in self.cells]

    def read_index(self) -> int:
        return self.encoding.decode(self.read_states())

    def load(self, k: int) -> None:
        """Write state index ``k`` into every digit cell."""
        for (r, c), target in zip(self.cells, self.encoding.encode(k)):
            self.controller.write(r, c, target)

    def reset(self) -> None:
        self.load(self.spec.initial)

    def step(self, symbol) -> int:
        read = self.read_states()
        k = self.encoding.decode(read)
        if k >= self.spec.n_states:
            raise InvalidState(f"cells decode to {k}, outside 0..{self.spec.n_states - 1}")
        nxt = self.spec.next(k, symbol)
        for (r, c), now, target in zip(self.cells, read, self.encoding.encode(nxt)):
            if self.partial_rewrite and now == target:
                continue
            self.controller.write(r, c, target, source=now)
        return nxt

    def run(self, inputs: Sequence, reset: bool = True) -> list:
        if reset:
            self.reset()
        out = [self.read_index()]
        for sym in inputs:
            out.append(self.step(sym))
        return out

    def release(self) -> None:
        self.controller.crossbar.free_cells(self.cells)


def map_fsa_to_cells(spec: FsaSpec, controller: Controller, mode: str = "base6",
                     partial_rewrite: bool = True, initialise: bool = True) -> CompiledFsa:
    encoding = MultiCellEncoding(spec.n_states, mode)
    cells = controller.crossbar.allocate(encoding.digit_count)
    fsa = CompiledFsa(spec, controller, cells, encoding, partial_rewrite)
    if initialise:
        fsa.reset()
    return fsa
