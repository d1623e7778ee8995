"""Time the hot kernels with numba and with the pure-Python fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each path runs in its own subprocess because the switch is read at import
time.  The numba timings exclude compilation (one warm-up call first).
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from syndec import _accel
from syndec.bcjr import bcjr_posteriors
from syndec.channel import ChannelSpec, transmit_multi
from syndec.code import encode, load_code_config
from syndec.lattice import build_drift_window, build_lattice
from syndec.metric import JointModel
from syndec.stack import StackParams, decode_bistack, decode_stack

repeat = int(sys.argv[1])
T = load_code_config("cc2").trellis()
spec = ChannelSpec(0.01, 0.01, 0.0)
rng = np.random.default_rng(0)
x = encode(T, rng.integers(0, 2, T.K)).bits
traces = transmit_multi(x, spec, 2, 1)
y = traces[0].bits
w = build_drift_window(T.N, len(y), spec)
model = JointModel.build(T, traces, spec)
jobs = {
    "lattice": lambda: build_lattice(y, T.N, np.full(T.N, 0.5), w, spec),
    "bcjr": lambda: bcjr_posteriors(T, y, spec, w),
    "stack": lambda: decode_stack(model, StackParams()),
    "bistack": lambda: decode_bistack(model, StackParams()),
}
out = {"numba": _accel.USE_NUMBA}
for name, fn in jobs.items():
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    out[name] = best
print(json.dumps(out))
"""


def run(pure: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("SYNDEC_PURE_PYTHON", None)
    if pure:
        env["SYNDEC_PURE_PYTHON"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    fast = run(False, args.repeat)
    slow = run(True, args.repeat)
    if not fast.pop("numba") or slow.pop("numba"):
        print("warning: could not select both paths", file=sys.stderr)
    print(f"{'kernel':10s} {'numba s':>10s} {'python s':>10s} {'speedup':>8s}")
    for k in fast:
        print(f"{k:10s} {fast[k]:10.4f} {slow[k]:10.4f} {slow[k] / fast[k]:8.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
