"""Time the compiled and pure-Python kernel backends.

Run ``python3 benchmarks/bench_kernels.py`` after an editable install.  Each
kernel is timed on flat arrays of several sizes, then a full simulation plus
one adjoint gradient is timed end to end with each backend active.
"""

import argparse
import timeit

import numpy as np

from ch6opt import ModelParams, build_grid, kernels, make_potential
from ch6opt.control import BoxConstraints, ControlProblem, CostConfig
from ch6opt.spectral import GridField
from ch6opt.state import StepperConfig

FC = np.array([0.0, -1.0, 0.0, 1.0])


def _best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_kernels(sizes, repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n in sizes:
        a, b, c, d, e = (np.ascontiguousarray(rng.standard_normal(n)) for _ in range(5))
        calls = {
            "state_terms": lambda k: k.state_terms(FC, 0.3, a, b),
            "frozen_terms": lambda k: k.frozen_terms(FC, a, b),
            "lin_terms": lambda k: k.lin_terms(0.3, a, b, c, d),
            "adj_terms": lambda k: k.adj_terms(0.3, a, b, c, d),
            "imex_update": lambda k: k.imex_update(a, b, c, d, e, 1e-3),
        }
        number = max(1, 200_000 // n)
        for name, call in calls.items():
            t = {be: _best(lambda: call(kernels.get(be)), repeat, number) for be in kernels.available()}
            rows.append((name, n, t))
    return rows


def bench_end_to_end(modes, repeat):
    g = build_grid(2, [1.0, 1.0], [modes, modes])
    x, y = g.mesh
    params = ModelParams(1.0, 0.0, make_potential("quartic"))
    phi0 = GridField(g, 0.3 * np.cos(np.pi * x) * np.cos(np.pi * y)).spectral()
    prob = ControlProblem(phi0, params, StepperConfig(1e-3), 0.05, CostConfig(1.0, 1.0, 1e-2), BoxConstraints())
    u = 0.2 * np.cos(np.pi * x)
    out = {}
    prev = kernels.backend()
    try:
        for be in kernels.available():
            kernels.use(be)
            out[be] = _best(lambda: prob.gradient(u), repeat, 1)
    finally:
        kernels.use(prev)
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[256, 4096, 65536])
    p.add_argument("--modes", type=int, default=64, help="modes per axis for the end-to-end run")
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    have = kernels.available()
    print(f"backends: {', '.join(have)}")
    if "cython" not in have:
        print("compiled extension not built; only the python backend is timed")
    print(f"\n{'kernel':<14}{'n':>8}" + "".join(f"{be + ' [us]':>16}" for be in have) + f"{'speedup':>10}")
    for name, n, t in bench_kernels(args.sizes, args.repeat):
        cells = "".join(f"{1e6 * t[be]:16.2f}" for be in have)
        sp = f"{t['python'] / t['cython']:10.2f}" if "cython" in t else ""
        print(f"{name:<14}{n:>8}{cells}{sp}")

    t = bench_end_to_end(args.modes, max(1, args.repeat // 2))
    print(f"\nstate + adjoint gradient, 2D {args.modes}x{args.modes}, 50 steps")
    for be in have:
        print(f"  {be:<8} {t[be]:.3f} s")
    if "cython" in t:
        print(f"  speedup  {t['python'] / t['cython']:.2f}x")


if __name__ == "__main__":
    main()
