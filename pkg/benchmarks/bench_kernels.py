"""Compare the compiled and pure-Python equilibrium kernels.

Run from the repository root after an editable install::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Three levels are timed: one branch solve, a batched run of solves along the
sliding branch, and a full quasi-static sweep of the reference device with
event detection.
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

import vprobe.contact as contact
from vprobe import _pykernels
from vprobe.contact import PlacementSpec, SolverConfig, contact_path, run_sweep, sweep_grid
from vprobe.presets import DEFAULT_STYLUS, load_preset


def _backends():
    out = {"python": _pykernels}
    try:
        from vprobe import _ckernels
    except ImportError:
        print("compiled kernels not built; timing the pure-Python backend only", file=sys.stderr)
    else:
        out["cython"] = _ckernels
    return out


def _best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench(repeat: int) -> dict:
    device = load_preset("REF-CANTILEVER")
    placement = PlacementSpec.at_cosym(device)
    path = contact_path(device, DEFAULT_STYLUS, placement)
    slide = path.branches[0]
    cfg = SolverConfig()
    grid = sweep_grid(path, 1e-6, 0.2)
    zs = np.linspace(slide.z_lo, slide.z_hi, 1002)[1:-1]
    n = len(zs)
    kinds = np.full(n, slide.kind, dtype=np.int64)
    los = np.full(n, slide.p_lo)
    his = np.full(n, slide.p_hi)

    results = {}
    original = contact.K
    try:
        for name, mod in _backends().items():
            results[name] = _time_backend(mod, device, placement, path, slide, cfg, grid, kinds, los, his, zs, repeat)
    finally:
        contact.K = original
        contact_path.cache_clear()
    return results


def _time_backend(mod, device, placement, path, slide, cfg, grid, kinds, los, his, zs, repeat):
    n = len(zs)
    z_mid = zs[n // 2]
    contact.K = mod
    contact_path.cache_clear()
    single = _best(
        lambda: mod.solve_branch(slide.kind, z_mid, slide.p_lo, slide.p_hi, 0.5 * (slide.p_lo + slide.p_hi),
                                 path.prm, cfg.tolerance, cfg.max_iterations),
        repeat, 200,
    )
    batch = _best(lambda: mod.solve_sequence(kinds, los, his, zs, path.prm, cfg.tolerance, cfg.max_iterations),
                  repeat, 3)

    def sweep():
        contact_path.cache_clear()
        run_sweep(device, DEFAULT_STYLUS, placement, grid, cfg)

    full = _best(sweep, repeat, 1)
    return {"solve_branch_s": single, "solve_sequence_s": batch, "sweep_s": full,
            "sweep_points": len(grid), "batch_points": n}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the timings to this file")
    args = ap.parse_args(argv)
    res = bench(args.repeat)
    rows = [("one branch solve", "solve_branch_s", 1e6, "us"),
            (f"batched solves ({res['python']['batch_points']})", "solve_sequence_s", 1e3, "ms"),
            (f"REF sweep ({res['python']['sweep_points']} steps)", "sweep_s", 1e3, "ms")]
    names = list(res)
    print(f"{'case':<30}" + "".join(f"{n:>14}" for n in names) + ("      speedup" if len(names) > 1 else ""))
    for label, key, scale, unit in rows:
        line = f"{label:<30}" + "".join(f"{res[n][key] * scale:>11.3f} {unit}" for n in names)
        if "cython" in res:
            line += f"{res['python'][key] / res['cython'][key]:>12.1f}x"
        print(line)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(res, fh, indent=2, sort_keys=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
