"""Simulate, verify and measure generated cells."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .cells import CellConfig, CellKind, StimulusPlan, default_stimulus, output_node, testbench
from .engine import SolverConfig, run_transient
from .engine.waveform import Waveform
from .measure import (
    CellReport,
    ThresholdConfig,
    Verdict,
    average_power,
    delay_inputs,
    propagation_delay,
    verify_circuit,
)
from .netlist import Netlist, count_components


@dataclass(frozen=True)
class CellRun:
    kind: CellKind
    config: CellConfig
    plan: StimulusPlan
    netlist: Netlist
    waveform: Waveform

    @property
    def window(self) -> tuple:
        """Measurement window: end of the first cycle to the end of the stimulus."""
        P = self.plan.clock_period
        return (P, self.plan.cycles * P)


def simulate_cell(kind: CellKind, config: CellConfig = CellConfig(), cycles: int = 16, seed: int = 0,
                  plan: Optional[StimulusPlan] = None, solver: Optional[SolverConfig] = None,
                  backend=None) -> CellRun:
    kind = CellKind(kind)
    plan = plan or default_stimulus(kind, cycles, seed, config)
    nl = testbench(kind, plan, config)
    wf = run_transient(nl, solver, backend)
    return CellRun(kind, config, plan, nl, wf)


def verify_run(run: CellRun, thresholds: Optional[ThresholdConfig] = None) -> Verdict:
    thresholds = thresholds or ThresholdConfig.for_vdd(run.config.vdd)
    return verify_circuit(run.kind, run.waveform, run.plan, thresholds)


def report_run(run: CellRun, thresholds: Optional[ThresholdConfig] = None) -> CellReport:
    verdict = verify_run(run, thresholds)
    power = average_power(run.waveform, run.window)
    delay = propagation_delay(run.waveform, delay_inputs(run.kind), output_node(run.kind),
                              run.config.vdd, run.window)
    return CellReport(run.kind, count_components(run.netlist), power, delay, verdict)


def cell_report(kind: CellKind, config: CellConfig = CellConfig(), cycles: int = 16, seed: int = 0,
                thresholds: Optional[ThresholdConfig] = None) -> CellReport:
    return report_run(simulate_cell(kind, config, cycles, seed), thresholds)
