"""Compare the compiled and pure-Python kernels.

Kernel timings call both implementations directly; the end-to-end timings run
a scheme solve and a long EF integration in subprocesses, one with
``PUCCI_SINGULAR_PURE=1``.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from pucci_singular import _pykernels
from pucci_singular.constants import constants_for

try:
    from pucci_singular import _ckernels
except ImportError:  # extension not built
    _ckernels = None

C = constants_for(1, 2, 5, 0.25, 2.0)

END_TO_END = r"""
import json, time
from pucci_singular import BACKEND
from pucci_singular.constants import constants_for
from pucci_singular.emden_fowler import EFState, integrate
from pucci_singular.monotone_scheme import run_scheme
c = constants_for(1, 2, 5, 0.25, 16.0)
t0 = time.perf_counter()
integrate(EFState(0.0, 0.5, 0.1), 16.0, c, 2000.0, "backward", x_max=1e12, x_min=0.0)
t1 = time.perf_counter()
run_scheme("tau-plus", constants_for(1, 2, 5, 0.25, 2.0), 2.0, n_max=12, nodes=1024)
t2 = time.perf_counter()
print(json.dumps({"backend": BACKEND, "ef_backward_2000": t1 - t0, "scheme_tau_plus": t2 - t1}))
"""


def _ef_args():
    g = 2.0
    l1, l2 = g - C.tau_plus, g - C.tau_minus
    return (0.0, 4.25 * (1 + 1e-3), 0.0, 1.0, l1 + l2, l1 * l2, 1 / C.Lam, 2.0,
            1e-10, 1e-12, 0.0, 1e12, 1e-300, 2_000_000)


def _scheme_args(n):
    r = np.geomspace(1e-3, 1.0, n)
    h = float(np.log(r[1] / r[0]))
    v = r ** -C.tau_plus - 1.0
    return (np.ascontiguousarray(v), h, C.lam, C.Lam, int(C.N), 2.0,
            np.zeros(n), np.ascontiguousarray(r**2))


def _tridiag_args(n):
    rng = np.random.default_rng(0)
    lo, up = rng.uniform(-1, 0, n), rng.uniform(-1, 0, n)
    diag = 2.5 + rng.uniform(0, 1, n)
    return lo, diag, up, rng.uniform(-1, 1, n)


def bench(fn, args, repeat):
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    cases = [
        ("dopri5_ef (span 1, saddle)", "dopri5_ef", _ef_args()),
        ("scheme_system (n=2048)", "scheme_system", _scheme_args(2048)),
        ("tridiag_solve (n=2048)", "tridiag_solve", _tridiag_args(2048)),
    ]
    print(f"{'kernel':32s} {'python [s]':>12s} {'cython [s]':>12s} {'speed-up':>9s}")
    for label, name, fargs in cases:
        tp = bench(getattr(_pykernels, name), fargs, args.repeat)
        if _ckernels is None:
            print(f"{label:32s} {tp:12.3e} {'n/a':>12s} {'':>9s}")
            continue
        tc = bench(getattr(_ckernels, name), fargs, args.repeat)
        print(f"{label:32s} {tp:12.3e} {tc:12.3e} {tp / tc:9.1f}")

    print()
    rows = []
    for pure in ("0", "1"):
        env = dict(os.environ, PUCCI_SINGULAR_PURE=pure)
        out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, check=True,
                             capture_output=True, text=True).stdout
        rows.append(json.loads(out))
    for key in ("ef_backward_2000", "scheme_tau_plus"):
        vals = {r["backend"]: r[key] for r in rows}
        line = "  ".join(f"{b}={t:.3e}s" for b, t in vals.items())
        print(f"{key:32s} {line}")


if __name__ == "__main__":
    main()
