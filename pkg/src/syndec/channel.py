"""Insertion/deletion/substitution channel simulator.

Per input bit the channel loops: with probability ``pi`` a uniformly random
bit is inserted and the input bit stays queued; otherwise it is deleted
(``pd``) or transmitted (``pt = 1 - pi - pd``), flipped with probability
``ps``.  Insertions are not truncated here; only the decoder model limits
them.

Seeding: every random draw in an experiment comes from
``numpy.random.PCG64`` seeded by ``SeedSequence(master, spawn_key=key)`` with
``key = (trial, attempt, role, index)`` (see :func:`trial_rng`), so a trial's
randomness does not depend on scheduling.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class Role(enum.IntEnum):
    INFO = 0
    OFFSET = 1
    CHANNEL = 2
    ERASURE = 3


def trial_rng(master: int, trial: int, role: Role, index: int = 0, attempt: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master), spawn_key=(int(trial), int(attempt), int(role), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class ChannelSpec:
    pi: float = 0.0
    pd: float = 0.0
    ps: float = 0.0
    max_ins_per_bit: int = 2

    def __post_init__(self):
        for name in ("pi", "pd", "ps"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name}={v} outside [0, 1)")
        if self.pi + self.pd >= 1.0:
            raise ValueError(f"pi + pd = {self.pi + self.pd} must be < 1")

    @property
    def pt(self) -> float:
        return 1.0 - self.pi - self.pd


@dataclass
class Trace:
    bits: np.ndarray
    # per input bit: number of insertions, and terminal event 0=delete, 1=transmit, 2=substitute
    n_ins: np.ndarray | None = None
    terminal: np.ndarray | None = None

    @property
    def R(self) -> int:
        return len(self.bits)


def transmit(x, spec: ChannelSpec, rng: np.random.Generator, log_events: bool = False) -> Trace:
    x = np.asarray(x, dtype=np.uint8)
    N = len(x)
    if spec.pi > 0:
        n_ins = rng.geometric(1.0 - spec.pi, size=N) - 1
    else:
        n_ins = np.zeros(N, dtype=np.int64)
    # given the insertion loop has ended, delete with probability pd / (pd + pt)
    deleted = rng.random(N) < spec.pd / (1.0 - spec.pi)
    flipped = rng.random(N) < spec.ps
    ins_bits = rng.integers(0, 2, size=int(n_ins.sum()), dtype=np.uint8)

    kept = ~deleted
    lengths = n_ins + kept
    starts = np.cumsum(lengths) - lengths
    out = np.empty(int(lengths.sum()), dtype=np.uint8)
    if len(ins_bits):
        ins_starts = np.cumsum(n_ins) - n_ins
        within = np.arange(len(ins_bits)) - np.repeat(ins_starts, n_ins)
        out[np.repeat(starts, n_ins) + within] = ins_bits
    out[(starts + n_ins)[kept]] = (x ^ flipped)[kept]
    if not log_events:
        return Trace(out)
    terminal = np.where(deleted, 0, np.where(flipped, 2, 1)).astype(np.int8)
    return Trace(out, n_ins, terminal)


def transmit_multi(x, spec: ChannelSpec, M: int, seed) -> list[Trace]:
    """``M`` independent traces of ``x``; trace ``j`` uses child ``j`` of ``seed``."""
    if M < 1:
        raise ValueError(f"need M >= 1, got {M}")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [
        transmit(x, spec, np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (j,)))))
        for j in range(M)
    ]


def draw_offset(N: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=N, dtype=np.uint8)


def apply_offset(x, offset) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint8)
    offset = np.asarray(offset, dtype=np.uint8)
    if x.shape != offset.shape:
        raise ValueError(f"offset length {len(offset)} != sequence length {len(x)}")
    return x ^ offset


remove_offset = apply_offset


def write_traces(path, records) -> None:
    """Write ``(trial_id, trace_id, bits)`` records, one trace per line."""
    with open(path, "w") as fh:
        for trial, j, bits in records:
            bits = np.asarray(bits, dtype=np.uint8)
            fh.write(f"{trial}, {j}, {len(bits)}, {np.packbits(bits).tobytes().hex()}\n")


def read_traces(path) -> list[tuple[int, int, np.ndarray]]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 'trial, trace, R, hex'")
        trial, j, R = int(parts[0]), int(parts[1]), int(parts[2])
        raw = np.frombuffer(bytes.fromhex(parts[3]), dtype=np.uint8)
        bits = np.unpackbits(raw)[:R]
        if len(bits) != R:
            raise ValueError(f"{path}:{lineno}: hex payload shorter than R={R}")
        out.append((trial, j, bits.astype(np.uint8)))
    return out
