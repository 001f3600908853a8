"""Compare the compiled and pure-Python kernels.

Times the Metropolis sampler and the Euler-Maruyama dynamics on a few
system sizes with both backends, checks that the two produce identical
chains, and prints a table of timings and speedups.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3] [--json out.json]
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from brownliq import kernels
from brownliq.configuration import ModelSpec
from brownliq.dynamics import DynamicsParams, simulate
from brownliq.geometry import HalfCylinder
from brownliq.sampler import initial_configuration, make_rng, run_chain

CASES = [
    # (label, N, radius, sampler sweeps, dynamics steps)
    ("N=10", 10, 0.15, 2000, 4000),
    ("N=50", 50, 0.08, 400, 2000),
    ("N=200", 200, 0.04, 100, 500),
]


def _best(fn, repeat: int) -> tuple[float, object]:
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench(repeat: int = 3) -> list[dict]:
    if kernels.compiled is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    rows = []
    for label, n, r, sweeps, steps in CASES:
        spec = ModelSpec(np.full(n, r), np.ones(n), HalfCylinder(1.0))
        init = initial_configuration(spec, make_rng(0))
        res = {"case": label}
        chains = {}
        for backend in ("cython", "python"):
            dt, run = _best(lambda: run_chain(spec, init, sweeps, sweeps, 0, seed=1, adapt=False,
                                              backend=backend), repeat)
            res[f"mh_{backend}_s"] = dt
            chains[backend] = run.state.cfg.centers
        res["mh_speedup"] = res["mh_python_s"] / res["mh_cython_s"]
        res["mh_identical"] = bool(np.array_equal(chains["cython"], chains["python"]))
        params = DynamicsParams()
        t_end = steps * params.resolved_dt(spec)  # one observation at the end, exactly ``steps`` steps
        for backend in ("cython", "python"):
            dt, run = _best(lambda: simulate(spec, init, params, t_end, t_end, seed=1, backend=backend), repeat)
            res[f"em_{backend}_s"] = dt
            chains[backend] = run.final.centers
        res["em_speedup"] = res["em_python_s"] / res["em_cython_s"]
        res["em_max_diff"] = float(np.max(np.abs(chains["cython"] - chains["python"])))
        res["mh_steps"] = sweeps * n
        res["em_steps"] = steps
        rows.append(res)
    return rows


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3, help="timing repetitions (best is kept)")
    ap.add_argument("--json", help="also write the results to this file")
    args = ap.parse_args(argv)
    rows = bench(args.repeat)
    head = f"{'case':<7}{'MH steps':>10}{'cython s':>10}{'python s':>10}{'speedup':>9}{'same':>6}" \
           f"{'EM steps':>10}{'cython s':>10}{'python s':>10}{'speedup':>9}{'max diff':>10}"
    print(head)
    for r in rows:
        print(f"{r['case']:<7}{r['mh_steps']:>10d}{r['mh_cython_s']:>10.3f}{r['mh_python_s']:>10.3f}"
              f"{r['mh_speedup']:>9.1f}{'yes' if r['mh_identical'] else 'no':>6}"
              f"{r['em_steps']:>10d}{r['em_cython_s']:>10.3f}{r['em_python_s']:>10.3f}"
              f"{r['em_speedup']:>9.1f}{r['em_max_diff']:>10.1e}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
