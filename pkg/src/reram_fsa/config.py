"""Scenario configuration (JSON).

An empty object reproduces the default setup: 4x4 crossbar, the built-in
state table, variation bounds 0.5/0.2 with sigma = bound/3, and the
built-in energy ledger.  ``to_dict`` always writes the full effective
configuration so a dumped file reloads to an identical run.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .automaton import ENCODINGS, FsaSpec
from .controller import EnergyLedger, LatencyLedger
from .crossbar import THRESHOLD_RULES, AdcConfig, CrossbarConfig
from .device import DEFAULT_TABLE, FA_STATES, StateId, VariationProfile
from .errors import ConfigError

OUT_ENV = "RERAM_FSA_OUT"

_SECTIONS = {"seed", "crossbar", "state_table", "variation", "adc", "energy", "latency",
             "workload", "montecarlo", "krinsky", "output_dir"}


def _check_keys(section: str, data: dict, allowed) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected an object, got {type(data).__name__}")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"{section}: unknown keys {sorted(unknown)}")


def parse_transition(item):
    """``"S1->S2"`` -> (S1, S2); a bare ``"S2"`` -> (None, S2)."""
    if isinstance(item, (list, tuple)) and len(item) == 2:
        src, dst = item
    elif isinstance(item, str) and "->" in item:
        src, dst = item.split("->", 1)
    else:
        src, dst = None, item
    try:
        src = None if src is None else StateId.parse(src)
        dst = StateId.parse(dst)
    except ValueError as exc:
        raise ConfigError(f"workload: {exc}") from None
    if dst == StateId.S0:
        raise ConfigError("workload: S0 is not a resting state")
    return src, dst


@dataclass
class WorkloadConfig:
    cell: tuple = (0, 0)
    transitions: list = field(default_factory=list)
    fsa_file: str | None = None
    fsa_inputs: list = field(default_factory=list)
    encoding: str = "base6"
    partial_rewrite: bool = True


@dataclass
class MonteCarloSection:
    trials: int = 10_000
    states: list = field(default_factory=lambda: [str(s) for s in FA_STATES])


@dataclass
class KrinskySection:
    reward_probs: dict | None = None
    forced_beta: int | None = None
    steps: int = 10_000
    start: str = "S1"
    cell: tuple = (0, 0)

    def environment(self) -> dict:
        if self.forced_beta is not None:
            p = 1.0 - float(self.forced_beta)
            return {"A": p, "B": p}
        if self.reward_probs is None:
            raise ConfigError("krinsky: missing environment reward probabilities")
        return dict(self.reward_probs)


@dataclass
class ScenarioConfig:
    seed: int = 0
    crossbar: dict = field(default_factory=lambda: {"rows": 4, "cols": 4})
    state_table: dict = field(default_factory=dict)
    variation: dict = field(default_factory=lambda: asdict(VariationProfile()))
    adc: dict = field(default_factory=lambda: {"threshold_rule": "balanced", "thresholds": None})
    energy: dict = field(default_factory=lambda: {"via_s0": {}, "direct_from_s0": {}})
    latency: dict = field(default_factory=lambda: {"frame_ns": 150.0, "frames_per_pulse": 1,
                                                   "read_frames": 1})
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    montecarlo: MonteCarloSection = field(default_factory=MonteCarloSection)
    krinsky: KrinskySection = field(default_factory=KrinskySection)
    output_dir: str | None = None
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    # ---- loading -----------------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict, base_dir=".") -> "ScenarioConfig":
        _check_keys("config", data, _SECTIONS)
        cfg = cls(base_dir=Path(base_dir))
        if "seed" in data:
            if not isinstance(data["seed"], int) or isinstance(data["seed"], bool):
                raise ConfigError("seed must be an integer")
            cfg.seed = data["seed"]
        if "crossbar" in data:
            _check_keys("crossbar", data["crossbar"], {"rows", "cols"})
            cfg.crossbar = {**cfg.crossbar, **data["crossbar"]}
        if "state_table" in data:
            _check_keys("state_table", data["state_table"], [str(s) for s in StateId])
            cfg.state_table = data["state_table"]
        if "variation" in data:
            _check_keys("variation", data["variation"], cfg.variation)
            cfg.variation = {**cfg.variation, **data["variation"]}
        if "adc" in data:
            _check_keys("adc", data["adc"], {"threshold_rule", "thresholds"})
            cfg.adc = {**cfg.adc, **data["adc"]}
        if "energy" in data:
            _check_keys("energy", data["energy"], {"via_s0", "direct_from_s0"})
            cfg.energy = {**cfg.energy, **data["energy"]}
        if "latency" in data:
            _check_keys("latency", data["latency"], cfg.latency)
            cfg.latency = {**cfg.latency, **data["latency"]}
        if "workload" in data:
            w = data["workload"]
            _check_keys("workload", w, WorkloadConfig.__dataclass_fields__)
            cfg.workload = WorkloadConfig(**{**asdict(WorkloadConfig()), **w})
            cfg.workload.cell = tuple(cfg.workload.cell)
        if "montecarlo" in data:
            _check_keys("montecarlo", data["montecarlo"], MonteCarloSection.__dataclass_fields__)
            cfg.montecarlo = MonteCarloSection(**{**asdict(MonteCarloSection()),
                                                  **data["montecarlo"]})
        if "krinsky" in data:
            _check_keys("krinsky", data["krinsky"], KrinskySection.__dataclass_fields__)
            cfg.krinsky = KrinskySection(**{**asdict(KrinskySection()), **data["krinsky"]})
            cfg.krinsky.cell = tuple(cfg.krinsky.cell)
        if "output_dir" in data:
            cfg.output_dir = data["output_dir"]
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data, base_dir=path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        d["workload"]["cell"] = list(self.workload.cell)
        d["krinsky"]["cell"] = list(self.krinsky.cell)
        if self.workload.fsa_file is not None:
            d["workload"]["fsa_file"] = str(self.resolve(self.workload.fsa_file))
        return d

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    # ---- typed views ---------------------------------------------------------
    def resolve(self, path) -> Path:
        p = Path(path)
        return p if p.is_absolute() else (self.base_dir / p)

    def crossbar_config(self) -> CrossbarConfig:
        return CrossbarConfig(int(self.crossbar["rows"]), int(self.crossbar["cols"]))

    def table(self):
        return DEFAULT_TABLE.with_overrides(self.state_table)

    def profile(self) -> VariationProfile:
        return VariationProfile(**self.variation)

    def adc_config(self) -> AdcConfig:
        if self.adc.get("thresholds"):
            return AdcConfig(3, tuple(self.adc["thresholds"]))
        return AdcConfig.for_rule(self.adc["threshold_rule"], self.table(), self.profile())

    def energy_ledger(self) -> EnergyLedger:
        return EnergyLedger().with_overrides(self.energy.get("via_s0"),
                                             self.energy.get("direct_from_s0"))

    def latency_ledger(self) -> LatencyLedger:
        return LatencyLedger(float(self.latency["frame_ns"]), int(self.latency["frames_per_pulse"]),
                             int(self.latency["read_frames"]))

    def fsa_spec(self) -> FsaSpec | None:
        if self.workload.fsa_file is None:
            return None
        return FsaSpec.load(self.resolve(self.workload.fsa_file))

    def output_path(self, override=None) -> Path:
        return Path(override or self.output_dir or os.environ.get(OUT_ENV) or "out")

    def validate(self) -> None:
        try:
            self.crossbar_config()
            self.table()
            self.profile()
            if self.adc["threshold_rule"] not in THRESHOLD_RULES:
                raise ConfigError(f"adc: threshold_rule must be one of {THRESHOLD_RULES}")
            self.adc_config()
            self.energy_ledger()
            self.latency_ledger()
            for item in self.workload.transitions:
                parse_transition(item)
            if self.workload.encoding not in ENCODINGS:
                raise ConfigError(f"workload: encoding must be one of {sorted(ENCODINGS)}")
            if self.workload.fsa_file is not None:
                if not self.resolve(self.workload.fsa_file).is_file():
                    raise ConfigError(f"workload: fsa_file not found: {self.workload.fsa_file}")
                self.fsa_spec()
            [StateId.parse(s) for s in self.montecarlo.states]
            if self.krinsky.forced_beta not in (None, 0, 1):
                raise ConfigError("krinsky: forced_beta must be 0 or 1")
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(str(exc)) from None
