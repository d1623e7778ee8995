"""Quick oracle checks behind ``syndec selftest``."""
from __future__ import annotations

import math

import numpy as np

from . import oracles
from .bcjr import bcjr_posteriors
from .channel import ChannelSpec, transmit_multi
from .code import encode, load_code_config
from .lattice import build_drift_window, prefix_lattice
from .metric import JointModel
from .stack import StackParams, decode_bistack, decode_stack

EXAMPLE1_H = np.array([
    [1, 1, 1, 0, 0, 0, 0, 0, 0],
    [1, 0, 1, 1, 1, 1, 0, 0, 0],
    [0, 1, 1, 1, 0, 1, 1, 1, 1],
    [0, 0, 0, 0, 1, 1, 1, 0, 1],
    [0, 0, 0, 0, 0, 0, 0, 1, 1],
], dtype=np.uint8)


def check_example1() -> str | None:
    cfg = load_code_config("example1")
    H = cfg.binary()
    if not np.array_equal(H.H, EXAMPLE1_H):
        return "binary parity-check matrix differs from the reference"
    T = cfg.trellis()
    if T.information_levels() != [0, 1, 3, 4]:
        return f"information levels {T.information_levels()}"
    x = encode(T, [1, 0, 1, 1]).bits
    if x.tolist() != [1, 0, 1, 1, 1, 0, 0, 1, 1]:
        return f"encode(1011) = {x.tolist()}"
    return None


def check_lattice(n: int = 10) -> str | None:
    rng = np.random.default_rng(0)
    for _ in range(n):
        N = int(rng.integers(1, 6))
        spec = ChannelSpec(*rng.uniform(0, 0.2, size=3))
        R = int(rng.integers(max(0, N - 2), N + 3))
        y = rng.integers(0, 2, size=R, dtype=np.uint8)
        w = build_drift_window(N, R, spec, slack=N + 2)
        F = prefix_lattice(y, N, np.full(N, 0.5), w, spec)
        got = math.exp(F[N, R])
        want = oracles.marginal_likelihood(y, N, spec)
        if abs(got - want) > 1e-12 * max(want, 1e-300):
            return f"prefix lattice {got} vs enumeration {want} (N={N}, y={y.tolist()})"
    return None


def check_bcjr(n: int = 5) -> str | None:
    T = load_code_config("example1").trellis()
    for seed in range(n):
        rng = np.random.default_rng(seed)
        spec = ChannelSpec(*rng.uniform(0, 0.1, size=3))
        x = encode(T, rng.integers(0, 2, size=T.K)).bits
        y = transmit_multi(x, spec, 1, seed)[0].bits
        w = build_drift_window(T.N, len(y), spec, slack=T.N)
        got = bcjr_posteriors(T, y, spec, w).p1
        want = oracles.codeword_posteriors(T, y, spec)
        if not np.allclose(got, want, rtol=1e-10, atol=1e-12):
            return f"posteriors differ for seed {seed}"
    return None


def check_noiseless() -> str | None:
    spec = ChannelSpec()
    for name in ("example1", "cc2"):
        T = load_code_config(name).trellis()
        x = encode(T, np.random.default_rng(1).integers(0, 2, size=T.K)).bits
        model = JointModel.build(T, transmit_multi(x, spec, 2, 0), spec)
        for dec in (decode_stack, decode_bistack):
            r = dec(model, StackParams())
            if r.erasure or not np.array_equal(r.codeword, x):
                return f"{dec.__name__} failed on noiseless {name}"
    return None


def check_merge(n: int = 10) -> str | None:
    T = load_code_config("cc2").trellis()
    spec = ChannelSpec(0.01, 0.01, 0.0)
    H = load_code_config("cc2").binary()
    for seed in range(n):
        x = encode(T, np.random.default_rng(seed).integers(0, 2, size=T.K)).bits
        model = JointModel.build(T, transmit_multi(x, spec, 2, seed), spec)
        r = decode_bistack(model, StackParams(max_expansions=20_000))
        if not r.erasure and not H.is_codeword(r.codeword):
            return f"merged word for seed {seed} is not a codeword"
    return None


CHECKS = [
    ("example 1 encode/H/levels", check_example1),
    ("prefix lattice vs enumeration", check_lattice),
    ("BCJR vs codeword enumeration", check_bcjr),
    ("noiseless stack/bistack recovery", check_noiseless),
    ("bidirectional merge validity", check_merge),
]


def run_selftest(verbose: bool = True) -> int:
    failures = 0
    for name, fn in CHECKS:
        err = fn()
        if err is not None:
            failures += 1
        if verbose:
            print(f"{'ok  ' if err is None else 'FAIL'} {name}" + ("" if err is None else f": {err}"))
    return failures
