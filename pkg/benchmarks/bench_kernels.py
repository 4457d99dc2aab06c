"""Time the numba kernels against their numpy twins.

Each backend runs in its own interpreter (the backend is fixed at import
time by ``MAXGRENT_NO_NUMBA``), then the parent prints a comparison table.

    python benchmarks/bench_kernels.py [--repeat 5] [--json]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit


def _workloads():
    import numpy as np

    from maxgrent import _kernels as K
    from maxgrent.combinatorics import classify, enumerate as enumerate_vectors
    from maxgrent.linprog import sum_range
    from maxgrent.model import scale_spec
    from maxgrent.solver import solve
    from maxgrent.tables import load_fixture

    rng = np.random.default_rng(0)
    nus = rng.integers(0, 60, size=(200_000, 12))
    xs = rng.uniform(0, 60, size=(200_000, 12))
    log_mu = np.log(rng.uniform(0.5, 3, size=12))
    R = np.array([[1.0, 1, 1, 1, 1, 1], [1, -1, 2, 0, 1, 0]])
    lo, hi = np.array([0.0, -5]), np.array([24.0, 18])
    ub = np.full(6, 24)

    spec = scale_spec(load_fixture("example21.json"), 6)
    sol, srng = solve(spec), sum_range(spec)

    def universe():
        pts = enumerate_vectors(spec, 0, srng)
        classify(pts, sol, "distance", 0.3)

    return K.BACKEND, {
        "log_realizations (2e5 x 12)": lambda: K.log_realizations_batch(nus, log_mu),
        "g_rel (2e5 x 12)": lambda: K.g_rel_batch(xs, log_mu),
        "linf (2e5 x 12)": lambda: K.linf_dist_batch(xs, xs[0]),
        "enumerate_lattice (m=6)": lambda: K.enumerate_lattice(R, lo, hi, ub),
        "enumerate+classify (3-colour x6)": universe,
    }


def _child(repeat: int):
    backend, work = _workloads()
    out = {}
    for name, fn in work.items():
        fn()  # warm-up (JIT compile, caches)
        out[name] = min(timeit.repeat(fn, number=1, repeat=repeat))
    print(json.dumps({"backend": backend, "times": out}))


def _run(no_numba: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("MAXGRENT_NO_NUMBA", None)
    if no_numba:
        env["MAXGRENT_NO_NUMBA"] = "1"
    proc = subprocess.run(
        [sys.executable, __file__, "--child", "--repeat", str(repeat)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="emit raw timings as JSON")
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.child:
        _child(args.repeat)
        return 0

    fast, slow = _run(False, args.repeat), _run(True, args.repeat)
    if args.json:
        print(json.dumps({"numba": fast, "numpy": slow}, indent=2))
        return 0
    if fast["backend"] != "numba":
        print("numba is not importable; both runs used the numpy twins")
    width = max(map(len, slow["times"]))
    print(f"{'kernel':<{width}}  {fast['backend']:>10}  {'numpy':>10}  speedup")
    for name, t_np in slow["times"].items():
        t_nb = fast["times"][name]
        print(f"{name:<{width}}  {t_nb * 1e3:>8.2f}ms  {t_np * 1e3:>8.2f}ms  {t_np / t_nb:>6.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
