"""Benchmark: compiled tableau kernel vs the pure-Python fallback.

Run both lanes:

    python3 benchmarks/bench_tableau.py
    QOTP_LAB_PURE=1 python3 benchmarks/bench_tableau.py

or let the script fork itself with ``--both``.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def bench_kernel(n: int, gate_ops: int, measurements: int, seed: int):
    from qotp_lab.backends import KERNEL, TableauState

    rng = np.random.default_rng(seed)
    state = TableauState(n)
    gates = []
    for _ in range(gate_ops):
        kind = int(rng.integers(0, 4))
        if kind == 3:
            c, t = rng.choice(n, size=2, replace=False)
            gates.append(("CNOT", int(c), int(t)))
        else:
            gates.append((["H", "K", "X"][kind], int(rng.integers(0, n))))
    t0 = time.perf_counter()
    for g in gates:
        state.apply_gate(*g)
    t_gates = time.perf_counter() - t0
    targets = rng.integers(0, n, size=measurements)
    t0 = time.perf_counter()
    for q in targets:
        state.measure(int(q), rng=rng)
    t_measure = time.perf_counter() - t0
    return KERNEL, t_gates, t_measure


def bench_protocol(seed: int):
    """One Steane-scale one-time-program evaluation on the tableau lane."""
    from qotp_lab.css import build_steane
    from qotp_lab.qotp import honest_receiver_run

    t0 = time.perf_counter()
    res, _ = honest_receiver_run([("Y", 0)], 0, 1, build_steane(), seed,
                                 b_labels=("+",), backend="tab",
                                 transport="direct")
    assert res.accepted
    return time.perf_counter() - t0


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--both", action="store_true",
                        help="run compiled and pure lanes as subprocesses")
    args = parser.parse_args()
    if args.both:
        for pure in ("0", "1"):
            env = dict(os.environ, QOTP_LAB_PURE=pure)
            subprocess.run([sys.executable, __file__], env=env, check=True)
        return 0

    from qotp_lab.backends import KERNEL

    print(f"== kernel: {KERNEL} ==")
    print(f"{'qubits':>7} {'gates/s':>12} {'measure/s':>12}")
    for n in (24, 64, 256, 1024):
        ops = 4000 if n <= 256 else 1500
        meas = 400 if n <= 256 else 150
        _, t_gates, t_measure = bench_kernel(n, ops, meas, seed=7)
        print(f"{n:>7} {ops / t_gates:>12.0f} {meas / t_measure:>12.0f}")
    times = [bench_protocol(1000 + i) for i in range(5)]
    print(f"one-time program evaluation (Steane, tableau lane): "
          f"{min(times) * 1000:.0f} ms best of 5")
    return 0


if __name__ == "__main__":
    sys.exit(main())
