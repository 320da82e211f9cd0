"""Command-line front end.

Exit codes: 0 success, 1 bad input (arguments, netlist, file I/O), 2 solver
failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from typing import Optional

from . import __version__
from .bench import report_run, simulate_cell, verify_run
from .cells import GATES, INPUTS, SEQUENTIAL, CellConfig, CellKind, build_cell
from .engine import SolverError, run_transient
from .measure import MeasurementError, ThresholdConfig, build_report
from .netlist import NetlistError, parse, serialize, validate

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3

log = logging.getLogger("memsim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for solver failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _positive(kind):
    def conv(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be > 0: {text!r}")
        return value
    return conv


def _fraction(text):
    value = _positive(float)(text)
    if value >= 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1): {text!r}")
    return value


def _add_overrides(p: argparse.ArgumentParser, cycles: int = 16):
    g = p.add_argument_group("cell overrides")
    g.add_argument("--vdd", type=_positive(float), help="supply voltage in V (default 1.2)")
    g.add_argument("--clock-period", type=_positive(float), metavar="S",
                   help="clock period in s (default 10e-9); edge and time step scale with it")
    g.add_argument("--a-scale", type=_positive(float), metavar="X",
                   help="time_scale multiplier on the memristor state rate (default 1e14)")
    g.add_argument("--seed", type=int, help="stimulus seed (default $MEMSIM_SEED or 0)")
    g.add_argument("--cycles", type=int, default=cycles, help=f"stimulus cycles, >= 4 (default {cycles})")
    g.add_argument("--vhigh-frac", type=_fraction, default=0.7, metavar="F",
                   help="logic-1 threshold as a fraction of vdd (default 0.7)")
    g.add_argument("--vlow-frac", type=_fraction, default=0.3, metavar="F",
                   help="logic-0 threshold as a fraction of vdd (default 0.3)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="memsim", description="Memristor-CMOS circuit simulator.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = ap.add_subparsers(dest="command", required=True, metavar="{run,cell,verify,report}")

    p = sub.add_parser("run", help="transient analysis of a netlist file, CSV out")
    p.add_argument("netlist", help="netlist path")
    p.add_argument("--out", help="CSV path (default: standard output)")

    p = sub.add_parser("cell", help="emit, simulate or verify one generated cell")
    p.add_argument("name", help="cell name: " + ", ".join(k.value for k in CellKind))
    p.add_argument("action", choices=("emit", "run", "verify"))
    p.add_argument("--out", help="output path (default: standard output)")
    _add_overrides(p)

    p = sub.add_parser("verify", help="verify all eleven cells against their golden models")
    _add_overrides(p)

    p = sub.add_parser("report", help="measure the sequential cells and write a report")
    p.add_argument("--format", choices=("json", "markdown"), default="json")
    p.add_argument("--out", help="report path (default: standard output)")
    _add_overrides(p)
    return ap


def config_from_args(args) -> CellConfig:
    base = CellConfig()
    kw = {}
    if args.vdd is not None:
        kw["vdd"] = args.vdd
    if args.clock_period is not None:
        # keep the default edge/period and step/period ratios
        ratio = args.clock_period / base.clock_period
        kw.update(clock_period=args.clock_period, edge_time=base.edge_time * ratio, dt=base.dt * ratio)
    if args.a_scale is not None:
        kw["time_scale"] = args.a_scale
    try:
        return replace(base, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def thresholds_from_args(args, vdd: float) -> ThresholdConfig:
    if not args.vlow_frac < args.vhigh_frac:
        raise UsageError("--vlow-frac must be below --vhigh-frac")
    return ThresholdConfig.for_vdd(vdd, args.vhigh_frac, args.vlow_frac)


def seed_from_args(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("MEMSIM_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"MEMSIM_SEED is not an integer: {env!r}") from None


def _cycles(args) -> int:
    if args.cycles < 4:
        raise UsageError("--cycles must be >= 4")
    return args.cycles


def _check_writable(path: Optional[str]):
    if path is None:
        return
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent) or os.path.isdir(path):
        raise UsageError(f"cannot write {path}: no such directory or path is a directory")


def _write(text: str, path: Optional[str]):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    _check_writable(args.out)
    try:
        with open(args.netlist) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {args.netlist}: {exc.strerror}") from None
    nl = validate(parse(text), require_analysis=True)
    wf = run_transient(nl)
    _write(wf.to_csv(), args.out)
    return EXIT_OK


def _truth_table(kind: CellKind, run, verdict) -> list:
    names = INPUTS[kind]
    lines = []
    if kind in GATES:
        seen = {}
        for n in range(run.plan.cycles):
            row = tuple(run.plan.bits[k][n] for k in names)
            seen.setdefault(row, verdict.observed[n])
        lines.append(" ".join(names) + " | out")
        for row in sorted(seen):
            lines.append(" ".join(str(b) for b in row) + f" | {seen[row]}")
        lines.append("truth: " + ",".join(str(seen.get(r, "?")) for r in sorted(seen)))
        return lines
    lines.append("cycle " + " ".join(names) + " | expected q | observed q")
    first = run.plan.cycles - len(verdict.observed)
    for i, (e, o) in enumerate(zip(verdict.expected, verdict.observed)):
        n = first + i
        bits = " ".join(str(run.plan.bits[k][n]) for k in names)
        lines.append(f"{n:5d} {bits} | {e} | {o}")
    return lines


def cmd_cell(args) -> int:
    try:
        kind = CellKind.parse(args.name)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    config = config_from_args(args)
    _check_writable(args.out)
    if args.action == "emit":
        _write(serialize(build_cell(kind, config)), args.out)
        return EXIT_OK
    thresholds = thresholds_from_args(args, config.vdd)
    run = simulate_cell(kind, config, _cycles(args), seed_from_args(args))
    if args.action == "run":
        _write(run.waveform.to_csv(), args.out)
        return EXIT_OK
    verdict = verify_run(run, thresholds)
    lines = _truth_table(kind, run, verdict)
    lines.append(f"{kind.value}: {'PASS' if verdict.passed else 'FAIL'} ({verdict.detail})")
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK if verdict.passed else EXIT_VERIFY


def cmd_verify(args) -> int:
    config = config_from_args(args)
    thresholds = thresholds_from_args(args, config.vdd)
    cycles, seed = _cycles(args), seed_from_args(args)
    passed = 0
    for kind in CellKind:
        try:
            verdict = verify_run(simulate_cell(kind, config, cycles, seed), thresholds)
            ok, detail = verdict.passed, verdict.detail
        except SolverError as exc:
            ok, detail = False, f"solver failure: {exc}"
        passed += ok
        print(f"{kind.value:8s} {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
    total = len(CellKind)
    print(f"{passed}/{total} cells pass")
    return EXIT_OK if passed == total else EXIT_VERIFY


def cmd_report(args) -> int:
    config = config_from_args(args)
    thresholds = thresholds_from_args(args, config.vdd)
    cycles, seed = _cycles(args), seed_from_args(args)
    _check_writable(args.out)
    reports = []
    for kind in SEQUENTIAL:
        log.info("simulating %s", kind.value)
        reports.append(report_run(simulate_cell(kind, config, cycles, seed), thresholds))
    _write(build_report(reports, args.format), args.out)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "cell": cmd_cell, "verify": cmd_verify, "report": cmd_report}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except NetlistError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return EXIT_INPUT
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except MeasurementError as exc:
        print(f"measurement error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
