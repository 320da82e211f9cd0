"""Time the compiled and pure-Python kernels on the same cell transients.

    python benchmarks/bench_backends.py [--cycles N] [--repeat R] [--cells xor,d_ff]

Prints wall time per backend, the speed-up, and the largest node-voltage
difference between the two results.
"""

import argparse
import statistics
import time

import numpy as np

from memsim.cells import CellConfig, CellKind, default_stimulus, testbench
from memsim.engine import available_backends, run_transient


def time_backend(netlist, backend, repeat):
    runs, wf = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        wf = run_transient(netlist, backend=backend)
        runs.append(time.perf_counter() - t0)
    return statistics.median(runs), wf


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--cycles", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--cells", default="not,xor,d_latch,d_ff,jk_ff")
    args = ap.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernel not built; only the python backend is available")
    config = CellConfig()
    print(f"{'cell':8s} {'steps':>6s} " + " ".join(f"{b + ' (s)':>12s}" for b in backends)
          + f" {'speed-up':>9s} {'max |dv| (V)':>13s}")
    for name in args.cells.split(","):
        kind = CellKind.parse(name)
        nl = testbench(kind, default_stimulus(kind, args.cycles, 0, config), config)
        results = {b: time_backend(nl, mod, args.repeat) for b, mod in backends.items()}
        steps = len(next(iter(results.values()))[1].times) - 1
        cols = " ".join(f"{results[b][0]:12.4f}" for b in backends)
        if len(results) == 2:
            speed = results["python"][0] / results["cython"][0]
            dv = np.max(np.abs(results["python"][1].voltages - results["cython"][1].voltages))
            cols += f" {speed:9.1f} {dv:13.2e}"
        print(f"{kind.value:8s} {steps:6d} {cols}", flush=True)


if __name__ == "__main__":
    main()
