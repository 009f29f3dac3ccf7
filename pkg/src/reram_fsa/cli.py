"""Command-line entry point: ``reram-fsa {simulate,montecarlo,krinsky,report}``.

Exit codes: 0 success, 1 configuration error, 2 execution error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import analysis
from .automaton import krinsky_software, map_fsa_to_cells, run_krinsky
from .config import ScenarioConfig, parse_transition
from .controller import (
    REFERENCE_TRANSITIONS,
    Controller,
    plan_transition,
    write_ledger_csv,
    write_trace_csv,
)
from .crossbar import Crossbar, write_readout_csv
from .device import StateId
from .errors import ConfigError, SimulatorError

log = logging.getLogger("reram_fsa")

EXIT_OK, EXIT_CONFIG, EXIT_EXEC = 0, 1, 2


def _build(cfg: ScenarioConfig, seed: int):
    xb = Crossbar(cfg.crossbar_config(), cfg.table(), cfg.profile(), seed)
    ctl = Controller(xb, cfg.energy_ledger(), cfg.latency_ledger(), cfg.adc_config())
    return xb, ctl


def _prepare_out(cfg: ScenarioConfig, args) -> Path:
    out = cfg.output_path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.dump(out / "effective_config.json")
    return out


def cmd_simulate(cfg: ScenarioConfig, args) -> int:
    w = cfg.workload
    transitions = [parse_transition(t) for t in w.transitions]
    fsa = cfg.fsa_spec()
    if not transitions and fsa is None:
        raise ConfigError("empty workload")
    xb, ctl = _build(cfg, cfg.seed)
    out = _prepare_out(cfg, args)
    row, col = w.cell
    xb.cell(row, col)  # range check up front

    state_rows = []
    for step, (src, dst) in enumerate(transitions):
        actual = xb.cells[row][col].state
        if src is not None and src != actual:
            raise SimulatorError(f"transition {step}: workload says {src} but cell is in {actual}")
        trace = ctl.write(row, col, dst, source=actual)
        state_rows.append((step, row, col, str(actual), str(dst), str(trace.result)))

    if fsa is not None:
        compiled = map_fsa_to_cells(fsa, ctl, w.encoding, w.partial_rewrite)
        inputs = list(w.fsa_inputs)
        hw = compiled.run(inputs, reset=False)
        sw = fsa.run(inputs)
        with open(out / "fsa_states.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["step", "symbol", "expected_state", "crossbar_state"])
            for step, (k_hw, k_sw) in enumerate(zip(hw, sw)):
                wr.writerow([step, inputs[step - 1] if step else "", k_sw, k_hw])
        if hw != sw:
            raise SimulatorError("on-crossbar FSA run diverged from the transition table")

    with open(out / "states.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["step", "row", "col", "source", "target", "final_state"])
        wr.writerows(state_rows)
    write_trace_csv(out / "cycles.csv", ctl.traces)
    write_ledger_csv(out / "ledger.csv", ctl.records)
    write_readout_csv(out / "readout.csv", ctl.readouts)
    report = analysis.workload_report(ctl.records, ctl.traces, ctl.latency.frame_ns)
    (out / "workload.csv").write_text(report.to_csv())
    final = xb.cells[row][col].state
    summary = f"final state of cell ({row}, {col}): {final}\n{report.summary()}\n"
    (out / "summary.txt").write_text(summary)
    print(summary, end="")
    return EXIT_OK


def cmd_montecarlo(cfg: ScenarioConfig, args) -> int:
    trials = args.trials if args.trials is not None else cfg.montecarlo.trials
    mc = analysis.MonteCarloConfig(
        trials=trials, seed=cfg.seed, profile=cfg.profile(),
        states=tuple(StateId.parse(s) for s in cfg.montecarlo.states),
        threshold_rule=cfg.adc["threshold_rule"], table=cfg.table(),
    )
    out = _prepare_out(cfg, args)
    report = analysis.run_detection_mc(mc)
    (out / "detection.csv").write_text(report.to_csv())
    (out / "margins.csv").write_text(analysis.margin_csv(report.margins))
    (out / "summary.txt").write_text(report.summary() + "\n")
    print(report.summary())
    return EXIT_OK


def cmd_krinsky(cfg: ScenarioConfig, args) -> int:
    k = cfg.krinsky
    env = k.environment()
    steps = args.steps if args.steps is not None else k.steps
    if steps < 1:
        raise ConfigError("krinsky: steps must be >= 1")
    xb, ctl = _build(cfg, cfg.seed)
    out = _prepare_out(cfg, args)
    row, col = k.cell
    ctl.keep_traces = False
    traj = run_krinsky(ctl, row, col, env, steps, cfg.seed, start=k.start)
    traj.write_csv(out / "trajectory.csv")
    soft = krinsky_software(k.start, env, steps, cfg.seed)
    lines = [
        f"steps: {steps}",
        f"fraction choosing A: {traj.fraction('A'):.4f}",
        f"fraction choosing B: {traj.fraction('B'):.4f}",
        f"final state: {traj.states[-1]}",
        f"matches software update rule: {soft.states == traj.states}",
        f"energy: {ctl.energy.total_pJ:.6g} pJ over {ctl.energy.transitions} transitions",
        f"latency: {ctl.latency.total_ns:g} ns",
    ]
    text = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_report(cfg: ScenarioConfig, args) -> int:
    out = _prepare_out(cfg, args)
    table, profile = cfg.table(), cfg.profile()
    rows = analysis.margin_report(table, profile, cfg.adc_config().thresholds)
    (out / "margins.csv").write_text(analysis.margin_csv(rows))
    # energy of the reference transitions on a variation-free cell
    xb = Crossbar(cfg.crossbar_config(), table)
    ctl = Controller(xb, cfg.energy_ledger(), cfg.latency_ledger())
    for src, dst in REFERENCE_TRANSITIONS:
        ctl.write(0, 0, dst, source=src)
    report = analysis.workload_report(ctl.records, frame_ns=ctl.latency.frame_ns)
    (out / "energy.csv").write_text(report.to_csv())
    lines = ["adjacent-state margins:"]
    for r in rows:
        flag = "  worst-case misdetect" if r.worst_case_misdetect else ""
        lines.append(f"  {r.upper}/{r.lower}: ratio {r.ratio:.3f}{flag}")
    lines.append("reference transitions:")
    for rec in ctl.records:
        plan = plan_transition(rec.source, rec.target, table)
        lines.append(f"  {plan.label}: {rec.energy_pJ:g} pJ, {rec.latency_ns:g} ns")
    lines.append(f"mean energy: {report.mean_energy_pJ:.4g} pJ")
    text = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "montecarlo": cmd_montecarlo,
    "krinsky": cmd_krinsky,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reram-fsa", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="scenario JSON file")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", type=Path, help="output directory")
        if name == "montecarlo":
            sp.add_argument("--trials", type=int)
        if name == "krinsky":
            sp.add_argument("--steps", type=int)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    for opt in ("trials", "steps"):
        if not hasattr(args, opt):
            setattr(args, opt, None)
    try:
        cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig.from_dict({})
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        log.debug("%s: seed %d, output %s", args.command, cfg.seed, cfg.output_path(args.out))
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulatorError, ValueError, OSError) as exc:
        print(f"execution error: {exc}", file=sys.stderr)
        return EXIT_EXEC


if __name__ == "__main__":
    sys.exit(main())
