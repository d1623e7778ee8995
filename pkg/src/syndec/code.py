"""Terminated convolutional codes described by parity-check matrices.

A code is given by its polynomial parity-check matrix ``H(D)``.  For a
codeword length ``N`` the block-Toeplitz binary matrix ``H`` is expanded, and
the Wolf syndrome trellis over ``H`` is built: the state after ``l`` bits is
the partial syndrome ``x_1 h_1 + ... + x_l h_l`` restricted to the rows that
are still open.  Termination falls out of pruning the states that cannot
reach the all-zero syndrome at level ``N``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


class CodeError(ValueError):
    """Base class for invalid code descriptions."""


class MalformedCodeError(CodeError):
    pass


class InvalidRateError(CodeError):
    pass


class InvalidLengthError(CodeError):
    pass


class InconsistentCodeError(CodeError):
    pass


@dataclass(frozen=True)
class PolynomialParityCheckMatrix:
    """``(n-k) x n`` polynomial matrix; ``coeffs[r, j, i]`` is the ``D**i`` coefficient."""

    n: int
    k: int
    m: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n <= self.k or self.k < 0:
            raise InvalidRateError(f"need 0 <= k < n, got n={self.n}, k={self.k}")
        if self.m < 0:
            raise MalformedCodeError(f"memory must be >= 0, got {self.m}")
        c = np.asarray(self.coeffs, dtype=np.uint8)
        if c.shape != (self.n - self.k, self.n, self.m + 1):
            raise MalformedCodeError(
                f"coefficient array has shape {c.shape}, "
                f"expected {(self.n - self.k, self.n, self.m + 1)}"
            )
        if np.any(c > 1):
            raise MalformedCodeError("coefficients must be binary")
        if not np.all(c.any(axis=(0, 2))):
            raise MalformedCodeError("every column needs a nonzero coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def block(self, i: int) -> np.ndarray:
        """Binary coefficient matrix ``H_i`` of ``D**i``, shape ``(n-k, n)``."""
        return self.coeffs[:, :, i]

    def polynomial_str(self) -> str:
        def poly(bits):
            terms = ["1" if i == 0 else ("D" if i == 1 else f"D^{i}") for i, b in enumerate(bits) if b]
            return "+".join(terms) or "0"

        return "\n".join(
            "[" + ", ".join(poly(self.coeffs[r, j]) for j in range(self.n)) + "]"
            for r in range(self.n - self.k)
        )


def parse_code_table(integers: Sequence[int], n: int, k: int, m: int) -> PolynomialParityCheckMatrix:
    """Decode the integer-per-column notation used in convolutional code tables.

    Each integer holds ``(n-k)(m+1)`` bits.  The most significant group of
    ``m+1`` bits belongs to row 1, and inside a group the most significant bit
    is the ``D**0`` coefficient, so ``[6, 5, 7]`` with ``n=3, k=2, m=2`` reads
    as ``[1+D, 1+D^2, 1+D+D^2]``.
    """
    if n <= k:
        raise InvalidRateError(f"need k < n, got n={n}, k={k}")
    if len(integers) != n:
        raise MalformedCodeError(f"expected {n} column integers, got {len(integers)}")
    rows, width = n - k, m + 1
    nbits = rows * width
    coeffs = np.zeros((rows, n, width), dtype=np.uint8)
    for j, value in enumerate(integers):
        value = int(value)
        if value < 0 or value >= 1 << nbits:
            raise MalformedCodeError(f"column {j + 1} value {value} does not fit in {nbits} bits")
        for r in range(rows):
            group = (value >> ((rows - 1 - r) * width)) & ((1 << width) - 1)
            for i in range(width):
                coeffs[r, j, i] = (group >> (width - 1 - i)) & 1
    return PolynomialParityCheckMatrix(n, k, m, coeffs)


@dataclass(frozen=True)
class BinaryParityCheck:
    """Binary parity-check matrix of a terminated code plus each row's column span."""

    H: np.ndarray = field(repr=False)
    first: np.ndarray = field(repr=False)
    last: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.H.shape[1]

    @property
    def n_rows(self) -> int:
        return self.H.shape[0]

    def syndrome(self, x) -> np.ndarray:
        return (self.H.astype(np.int64) @ np.asarray(x, dtype=np.int64)) % 2

    def is_codeword(self, x) -> bool:
        return len(x) == self.N and not self.syndrome(x).any()

    def reversed(self) -> "BinaryParityCheck":
        """Column-reversed matrix, describing the code read back to front."""
        return _with_spans(self.H[::-1, ::-1].copy())


def _with_spans(H: np.ndarray) -> BinaryParityCheck:
    H = H[H.any(axis=1)]
    first = np.argmax(H, axis=1)
    last = H.shape[1] - 1 - np.argmax(H[:, ::-1], axis=1)
    H.setflags(write=False)
    return BinaryParityCheck(H, first, last)


def expand_binary(ppcm: PolynomialParityCheckMatrix, N: int, partial_block: bool = False) -> BinaryParityCheck:
    """Expand ``H(D)`` into the block-Toeplitz binary matrix for length ``N``.

    Row block ``j`` holds ``H_i`` in column block ``j - i``.  Entries that fall
    past column ``N`` are dropped, as are rows left all-zero.  With
    ``partial_block=True`` an ``N`` that is not a multiple of ``n`` is allowed;
    the trailing columns of the last block are removed, which shortens the code
    (those positions are forced to zero and deleted).
    """
    n, k, m = ppcm.n, ppcm.k, ppcm.m
    if N <= 0 or (N % n and not partial_block):
        raise InvalidLengthError(f"N={N} is not a positive multiple of n={n}")
    nblocks = -(-N // n)
    if nblocks < m + 1:
        raise InvalidLengthError(f"N={N} spans {nblocks} blocks, need at least m+1={m + 1}")
    r = n - k
    H = np.zeros(((nblocks + m) * r, nblocks * n), dtype=np.uint8)
    for j in range(nblocks + m):
        for i in range(m + 1):
            c = j - i
            if 0 <= c < nblocks:
                H[j * r:(j + 1) * r, c * n:(c + 1) * n] = ppcm.block(i)
    return _with_spans(H[:, :N].copy())


@dataclass(frozen=True, eq=False)
class SyndromeTrellis:
    """Pruned syndrome trellis with dense per-level state indices.

    ``states[l]`` lists the syndromes (row bitmasks) at level ``l``.
    ``next_state[l, s, b]`` is the index at level ``l+1`` reached from state
    ``s`` by bit ``b`` (``-1`` if absent) and ``prev_state[l, s, b]`` the index
    at level ``l-1`` that reaches state ``s`` of level ``l`` by bit ``b``.
    """

    H: BinaryParityCheck
    states: tuple
    next_state: np.ndarray = field(repr=False)
    prev_state: np.ndarray = field(repr=False)
    info_level: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return len(self.states) - 1

    @property
    def K(self) -> int:
        return int(self.info_level.sum())

    @cached_property
    def n_states(self) -> np.ndarray:
        return np.array([len(s) for s in self.states])

    @cached_property
    def max_states(self) -> int:
        return int(self.n_states.max())

    @cached_property
    def out_degree(self) -> np.ndarray:
        return (self.next_state >= 0).sum(axis=2)

    @cached_property
    def in_degree(self) -> np.ndarray:
        return (self.prev_state >= 0).sum(axis=2)

    @cached_property
    def out_logp(self) -> np.ndarray:
        """``log P(s'|s)`` for edges leaving each state (uniform information bits)."""
        with np.errstate(divide="ignore"):
            return -np.log(self.out_degree.astype(np.float64))

    @cached_property
    def in_logp(self) -> np.ndarray:
        """Same for the code read backwards: ``-log`` of the in-degree."""
        with np.errstate(divide="ignore"):
            return -np.log(self.in_degree.astype(np.float64))

    @cached_property
    def priors(self) -> np.ndarray:
        p = _bit_priors(self)
        p.setflags(write=False)
        return p

    def information_levels(self) -> list[int]:
        return [int(l) for l in np.flatnonzero(self.info_level)]

    def parity_levels(self) -> list[int]:
        return [int(l) for l in np.flatnonzero(~self.info_level)]

    def info_bits(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.uint8)[self.info_level]

    def path_states(self, x) -> np.ndarray | None:
        """State indices visited by bit string ``x``, or None if it leaves the trellis."""
        out = np.zeros(self.N + 1, dtype=np.int64)
        s = 0
        for l, b in enumerate(x):
            s = self.next_state[l, s, int(b)]
            if s < 0:
                return None
            out[l + 1] = s
        return out

    def random_completion(self, level: int, state: int, rng: np.random.Generator) -> np.ndarray:
        """Bits for levels ``level..N-1`` from ``state``, uniform at information levels."""
        bits = np.zeros(self.N - level, dtype=np.uint8)
        s = state
        for l in range(level, self.N):
            if self.info_level[l]:
                b = int(rng.integers(2))
            else:
                b = 0 if self.next_state[l, s, 0] >= 0 else 1
            bits[l - level] = b
            s = self.next_state[l, s, b]
        return bits


def build_trellis(H: BinaryParityCheck) -> SyndromeTrellis:
    N = H.N
    cols = [0] * N
    ending = [0] * N
    for r in range(H.n_rows):
        bit = 1 << r
        for c in np.flatnonzero(H.H[r]):
            cols[c] |= bit
        ending[H.last[r]] |= bit

    # forward expansion; edges[l] maps (state, bit) -> successor syndrome
    level_states = [{0}]
    edges = []
    for l in range(N):
        nxt, e = set(), {}
        for s in level_states[l]:
            for b in (0, 1):
                s2 = s ^ cols[l] if b else s
                if s2 & ending[l]:
                    continue
                e[s, b] = s2
                nxt.add(s2)
        if not nxt:
            raise InconsistentCodeError(f"no surviving states at level {l + 1}")
        edges.append(e)
        level_states.append(nxt)

    # backward pruning toward the all-zero terminal state
    alive = [None] * (N + 1)
    alive[N] = {0} & level_states[N]
    if not alive[N]:
        raise InconsistentCodeError("all-zero state unreachable at level N")
    for l in range(N - 1, -1, -1):
        alive[l] = {s for (s, _), s2 in edges[l].items() if s2 in alive[l + 1]}
        if not alive[l]:
            raise InconsistentCodeError(f"pruning emptied level {l}")
    if alive[0] != {0}:
        raise InconsistentCodeError("root state pruned")

    states = tuple(tuple(sorted(a)) for a in alive)
    index = [{s: i for i, s in enumerate(st)} for st in states]
    smax = max(len(st) for st in states)
    next_state = np.full((N, smax, 2), -1, dtype=np.int64)
    prev_state = np.full((N + 1, smax, 2), -1, dtype=np.int64)
    for l in range(N):
        for (s, b), s2 in edges[l].items():
            if s in index[l] and s2 in index[l + 1]:
                i, i2 = index[l][s], index[l + 1][s2]
                next_state[l, i, b] = i2
                prev_state[l + 1, i2, b] = i
    outdeg = (next_state >= 0).sum(axis=2)
    info_level = np.zeros(N, dtype=bool)
    for l in range(N):
        deg = outdeg[l, : len(states[l])]
        info_level[l] = bool(np.all(deg == 2))
    for a in (next_state, prev_state, info_level):
        a.setflags(write=False)
    return SyndromeTrellis(H, states, next_state, prev_state, info_level)


@dataclass(frozen=True)
class Codeword:
    bits: np.ndarray
    info_bits: np.ndarray


def encode(trellis: SyndromeTrellis, u) -> Codeword:
    u = np.asarray(u, dtype=np.uint8)
    if len(u) != trellis.K:
        raise ValueError(f"expected {trellis.K} information bits, got {len(u)}")
    x = np.zeros(trellis.N, dtype=np.uint8)
    s, i = 0, 0
    for l in range(trellis.N):
        if trellis.info_level[l]:
            b = int(u[i])
            i += 1
        else:
            b = 0 if trellis.next_state[l, s, 0] >= 0 else 1
        x[l] = b
        s = trellis.next_state[l, s, b]
    return Codeword(x, u.copy())


def bit_priors(trellis: SyndromeTrellis) -> np.ndarray:
    """``P(x_l = 1)`` for every level by a forward pass with uniform information bits."""
    return trellis.priors.copy()


def _bit_priors(trellis: SyndromeTrellis) -> np.ndarray:
    N = trellis.N
    p1 = np.zeros(N)
    ps = np.zeros(trellis.max_states)
    ps[0] = 1.0
    outdeg = trellis.out_degree
    for l in range(N):
        nxt = np.zeros_like(ps)
        S = len(trellis.states[l])
        for s in range(S):
            if ps[s] == 0.0:
                continue
            w = ps[s] / outdeg[l, s]
            for b in (0, 1):
                s2 = trellis.next_state[l, s, b]
                if s2 >= 0:
                    nxt[s2] += w
                    if b:
                        p1[l] += w
        ps = nxt
    return p1


@dataclass(frozen=True)
class CodeConfig:
    name: str
    ppcm: PolynomialParityCheckMatrix
    N: int
    partial_block: bool = False
    d_free: int | None = None

    def binary(self) -> BinaryParityCheck:
        return expand_binary(self.ppcm, self.N, self.partial_block)

    def trellis(self) -> SyndromeTrellis:
        return build_trellis(self.binary())


BUNDLED = Path(__file__).parent / "configs"


def load_code_config(path, N: int | None = None) -> CodeConfig:
    """Read a TOML code description.

    Required keys are ``n``, ``k``, ``m`` and ``N`` plus either ``columns``
    (table integers) or ``coefficients`` (per column, per row, ``D**0`` first).
    A bare name such as ``"cc2"`` resolves to a bundled config.
    """
    p = Path(path)
    if not p.exists() and (BUNDLED / f"{path}.toml").exists():
        p = BUNDLED / f"{path}.toml"
    with open(p, "rb") as fh:
        cfg = tomllib.load(fh)
    try:
        n, k, m = int(cfg["n"]), int(cfg["k"]), int(cfg["m"])
        length = int(N if N is not None else cfg["N"])
    except KeyError as e:
        raise MalformedCodeError(f"{p}: missing key {e}") from None
    if "coefficients" in cfg:
        cols = cfg["coefficients"]
        if len(cols) != n:
            raise MalformedCodeError(f"{p}: expected {n} columns of coefficients")
        coeffs = np.zeros((n - k, n, m + 1), dtype=np.uint8)
        for j, col in enumerate(cols):
            if len(col) != n - k:
                raise MalformedCodeError(f"{p}: column {j + 1} needs {n - k} rows")
            for r, poly in enumerate(col):
                if len(poly) > m + 1:
                    raise MalformedCodeError(f"{p}: column {j + 1} row {r + 1} exceeds degree {m}")
                coeffs[r, j, : len(poly)] = poly
        ppcm = PolynomialParityCheckMatrix(n, k, m, coeffs)
    elif "columns" in cfg:
        ppcm = parse_code_table(cfg["columns"], n, k, m)
    else:
        raise MalformedCodeError(f"{p}: need 'columns' or 'coefficients'")
    return CodeConfig(
        name=str(cfg.get("name", p.stem)),
        ppcm=ppcm,
        N=length,
        partial_block=bool(cfg.get("partial_block", False)),
        d_free=cfg.get("d_free"),
    )
