"""Compare the compiled and pure-Python cores on the hot kernels.

    python benchmarks/bench_core.py [--repeat 3] [--paths 200]

Both backends are called directly with identical inputs.  Simulator
outputs must match bit for bit; the compensator sums in a different order
in each backend, so it is compared to 1e-12 relative.
"""
import argparse
import time

import numpy as np

from gmhp import _pycore
from gmhp.markov import REFERENCE_EXP
from gmhp.presets import build
from gmhp.rng import derive_seed

try:
    from gmhp import _core
except ImportError:
    _core = None


def cluster_job(name, n_paths):
    arrays = build(name).table.arrays()

    def run(core):
        return [core.cluster_tabulated(*arrays, 10.0, 25, derive_seed(1, j))
                for j in range(n_paths)]
    return run


def markov_job(n_paths):
    p = REFERENCE_EXP
    seeds = np.array([derive_seed(2, j) for j in range(n_paths)], dtype=np.uint64)

    def run(core):
        return core.markov_batch(p.alpha, p.beta, p.lambda0, p.theta_array, 10.0, seeds)
    return run


def compensator_job(n_times):
    tab = build("bivariate_exp").table
    out = _pycore.cluster_tabulated(*tab.arrays(), 200.0, 25, 5)
    ev_t, ev_m = np.ascontiguousarray(out[0]), np.ascontiguousarray(out[1], dtype=np.int64)
    ts = np.linspace(0.0, 200.0, n_times)

    def run(core):
        return core.tabulated_compensator(tab.base_alpha, tab.base_init, tab.base_decay,
                                          tab.row_weight_for("all"), tab.impact, tab.kind,
                                          tab.par1, tab.par2, ev_t, ev_m, ts)
    return run


def best_of(fn, core, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(core)
        times.append(time.perf_counter() - t0)
    return min(times)


def same(a, b, rtol=0.0):
    if isinstance(a, (list, tuple)):
        return len(a) == len(b) and all(same(x, y, rtol) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    return np.array_equal(a, b) if rtol == 0 else np.allclose(a, b, rtol=rtol, atol=0)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--paths", type=int, default=200)
    args = ap.parse_args()
    if _core is None:
        raise SystemExit("compiled core not built; run `pip install -e . --no-build-isolation`")
    jobs = {
        "cluster classical": cluster_job("classical", args.paths),
        "cluster bivariate_exp": cluster_job("bivariate_exp", args.paths),
        "cluster etas": cluster_job("etas", args.paths),
        "markov batch": markov_job(args.paths * 10),
        "compensator": compensator_job(20_000),
    }
    print(f"{'kernel':<24}{'python s':>10}{'cython s':>10}{'speedup':>9}  match")
    for name, fn in jobs.items():
        ok = same(fn(_pycore), fn(_core), 1e-12 if name == "compensator" else 0.0)
        tp = best_of(fn, _pycore, args.repeat)
        tc = best_of(fn, _core, args.repeat)
        print(f"{name:<24}{tp:>10.3f}{tc:>10.4f}{tp / tc:>8.0f}x  {ok}")


if __name__ == "__main__":
    main()
