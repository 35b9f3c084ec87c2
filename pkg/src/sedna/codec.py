"""Payload dispersal codecs: rateless random-linear fountain, systematic
Reed-Solomon (MDS) and naive replication, plus decode-failure accounting."""

from __future__ import annotations

import csv
import hashlib
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping

import numpy as np

from . import gf256
from .crypto import SIGMA_LEN, TAG_SYMBOL

MAX_MDS_SHARES = 255


class NeedMoreShares(ValueError):
    pass


def exact_fraction(x) -> Fraction:
    """Exact rational for a user-facing decimal such as 0.05 (not its binary float)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x))) if isinstance(x, float) else Fraction(str(x))


@lru_cache(maxsize=4096)
def decode_threshold(message_len: int, symbol_len: int, epsilon) -> int:
    """K = ceil((1 + eps) * S / l_sym), evaluated in exact arithmetic."""
    q = (1 + exact_fraction(epsilon)) * message_len / symbol_len
    return math.ceil(q)


def split_message(message: bytes) -> tuple[bytes, bytes]:
    """Split M = sigma || payload."""
    return bytes(message[:SIGMA_LEN]), bytes(message[SIGMA_LEN:])


# --------------------------------------------------------------------------
# rateless code


@dataclass(frozen=True)
class RatelessParams:
    message_len: int
    symbol_len: int
    epsilon: float = 0.05
    source_block_count: int = field(init=False)
    decode_threshold: int = field(init=False)

    def __post_init__(self):
        if self.message_len < 1:
            raise ValueError("message_len must be >= 1")
        if self.symbol_len < 1:
            raise ValueError("symbol_len must be >= 1")
        if not exact_fraction(self.epsilon) > 0:
            raise ValueError("epsilon must be > 0")
        object.__setattr__(self, "source_block_count", -(-self.message_len // self.symbol_len))
        object.__setattr__(
            self, "decode_threshold", decode_threshold(self.message_len, self.symbol_len, self.epsilon)
        )

    def serialize(self) -> bytes:
        return struct.pack(">QQQ", self.message_len, self.symbol_len, self.decode_threshold)


@lru_cache(maxsize=4096)
def rateless_params(message_len: int, symbol_len: int, epsilon=0.05) -> RatelessParams:
    """Shared immutable params; building them is not free on hot paths."""
    return RatelessParams(message_len, symbol_len, epsilon)


@dataclass(frozen=True)
class Symbol:
    index: int
    value: bytes

    def serialize(self) -> bytes:
        return struct.pack(">Q", self.index) + self.value


@lru_cache(maxsize=1 << 16)
def coefficient_row(params: RatelessParams, index: int) -> np.ndarray:
    """GF(256) coefficients of symbol ``index``; depends only on public params."""
    seed = hashlib.sha256(TAG_SYMBOL + params.serialize() + struct.pack(">Q", index)).digest()
    row = np.frombuffer(hashlib.shake_256(seed).digest(params.source_block_count), dtype=np.uint8)
    row.setflags(write=False)
    return row


def coefficient_matrix(params: RatelessParams, indices: Iterable[int]) -> np.ndarray:
    rows = [coefficient_row(params, j) for j in indices]
    if not rows:
        return np.zeros((0, params.source_block_count), dtype=np.uint8)
    return np.stack(rows)


def message_blocks(message: bytes, block_len: int, block_count: int) -> np.ndarray:
    buf = np.zeros(block_len * block_count, dtype=np.uint8)
    buf[: len(message)] = np.frombuffer(bytes(message), dtype=np.uint8)
    return buf.reshape(block_count, block_len)


def rateless_symbols(message: bytes, indices: Iterable[int], params: RatelessParams) -> list[Symbol]:
    if len(message) != params.message_len:
        raise ValueError(f"message is {len(message)} bytes, params expect {params.message_len}")
    indices = list(indices)
    blocks = message_blocks(message, params.symbol_len, params.source_block_count)
    values = gf256.matmul(coefficient_matrix(params, indices), blocks)
    return [Symbol(j, values[r].tobytes()) for r, j in enumerate(indices)]


def rateless_symbol(message: bytes, index: int, params: RatelessParams) -> Symbol:
    return rateless_symbols(message, [index], params)[0]


@dataclass(frozen=True)
class DecodeOutcome:
    message: bytes | None
    rank: int
    inconsistent: bool = False

    @property
    def ok(self) -> bool:
        return self.message is not None


def _check_symbols(symbols: Iterable[Symbol], params: RatelessParams) -> list[Symbol]:
    symbols = sorted(symbols, key=lambda s: s.index)
    for a, b in zip(symbols, symbols[1:]):
        if a.index == b.index:
            raise ValueError(f"duplicate symbol index {a.index}")
    for s in symbols:
        if len(s.value) != params.symbol_len:
            raise ValueError(f"symbol {s.index} has length {len(s.value)}, expected {params.symbol_len}")
    return symbols


def rateless_decode(symbols: Iterable[Symbol], params: RatelessParams) -> DecodeOutcome:
    """Solve for the source blocks by Gauss-Jordan elimination.

    The result does not depend on the order of ``symbols``.  Rows beyond the
    rank that carry nonzero data mark the set as inconsistent (not produced by
    any single message), which only happens for dishonest senders.
    """
    symbols = _check_symbols(symbols, params)
    b = params.source_block_count
    if len(symbols) < b:
        return DecodeOutcome(None, symbol_rank(symbols, params))
    coeffs = coefficient_matrix(params, (s.index for s in symbols))
    data = np.frombuffer(b"".join(s.value for s in symbols), dtype=np.uint8).reshape(len(symbols), -1)
    elim = gf256.eliminate(coeffs, data)
    if elim.inconsistent:
        return DecodeOutcome(None, elim.rank, inconsistent=True)
    if elim.rank < b:
        return DecodeOutcome(None, elim.rank)
    message = elim.reduced[:b, b:].tobytes()[: params.message_len]
    return DecodeOutcome(message, elim.rank)


def symbol_rank(symbols: Iterable[Symbol], params: RatelessParams) -> int:
    """Rank of the coefficient matrix; source_block_count - rank blocks stay free."""
    indices = sorted({s.index for s in symbols})
    if not indices:
        return 0
    return gf256.rank(coefficient_matrix(params, indices))


# --------------------------------------------------------------------------
# decode-failure probability


def rank_deficiency_probability(rows: int, cols: int, q: int = 256) -> float:
    """P[a uniform random rows x cols matrix over GF(q) has rank < cols]."""
    if cols == 0:
        return 0.0
    if rows < cols:
        return 1.0
    log_full = sum(math.log1p(-float(q) ** (i - rows)) for i in range(cols))
    return -math.expm1(log_full)


def estimate_delta_code(
    params: RatelessParams, trials: int, seed: int, symbols: int | None = None
) -> float:
    """Fraction of trials in which ``symbols`` (default K) random-index symbols
    fail to decode.  Trial t draws from its own stream (seed, t)."""
    return delta_code_failures(params, trials, seed, symbols) / trials


def delta_code_failures(
    params: RatelessParams, trials: int, seed: int, symbols: int | None = None
) -> int:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    count = params.decode_threshold if symbols is None else symbols
    b = params.source_block_count
    failures = 0
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        idx = rng.choice(1 << 32, size=count, replace=False) if count else []
        if gf256.rank(coefficient_matrix(params, (int(j) for j in idx))) < b:
            failures += 1
    return failures


@dataclass(frozen=True)
class DeltaCodeEntry:
    blocks: int
    symbols: int
    trials: int
    failures: int

    @property
    def rate(self) -> float:
        return self.failures / self.trials


@lru_cache(maxsize=1)
def measured_delta_code() -> Mapping[tuple[int, int], DeltaCodeEntry]:
    """Measured table shipped in ``sedna/data/delta_code.csv`` keyed by (blocks, symbols)."""
    table = {}
    ref = resources.files("sedna").joinpath("data/delta_code.csv")
    if not ref.is_file():
        return table
    with ref.open() as fh:
        for row in csv.DictReader(line for line in fh if not line.startswith("#")):
            e = DeltaCodeEntry(int(row["blocks"]), int(row["K"]), int(row["trials"]), int(row["failures"]))
            table[(e.blocks, e.symbols)] = e
    return table


def delta_code(blocks: int, symbols: int) -> float:
    """Decode-failure probability used by planners for K=symbols over ``blocks``.

    Measured rate when the table observed failures, the exact uniform-matrix
    probability otherwise (the table cannot resolve rates below 1/trials).
    """
    entry = measured_delta_code().get((blocks, symbols))
    if entry is not None and entry.failures > 0:
        return entry.rate
    return rank_deficiency_probability(symbols, blocks)


def delta_code_for(params: RatelessParams) -> float:
    return delta_code(params.source_block_count, params.decode_threshold)


# --------------------------------------------------------------------------
# MDS (systematic Reed-Solomon over GF(256))


@dataclass(frozen=True)
class MdsParams:
    message_len: int
    shares_total: int
    shares_needed: int
    share_len: int = field(init=False)

    def __post_init__(self):
        if not 1 <= self.shares_needed <= self.shares_total:
            raise ValueError("need 1 <= k <= m")
        if self.shares_total > MAX_MDS_SHARES:
            raise ValueError(f"m must be <= {MAX_MDS_SHARES} over GF(256)")
        if self.message_len < 1:
            raise ValueError("message_len must be >= 1")
        object.__setattr__(self, "share_len", -(-self.message_len // self.shares_needed))


@lru_cache(maxsize=256)
def _lagrange_denominators(k: int) -> np.ndarray:
    nodes = np.arange(k)
    d = nodes[:, None] ^ nodes[None, :]
    logs = np.where(d == 0, 0, gf256.LOG[d])
    return logs.sum(axis=1) % 255


@lru_cache(maxsize=1 << 14)
def generator_row(k: int, index: int) -> np.ndarray:
    """Coefficients expressing share ``index`` in terms of the k source blocks.

    Source block t is the value at x = t of the unique polynomial of degree < k
    through the data, and share i is its value at x = i; rows 0..k-1 are the
    identity (systematic).
    """
    if not 0 <= index < MAX_MDS_SHARES:
        raise ValueError(f"share index {index} outside [0, {MAX_MDS_SHARES})")
    if index < k:
        row = np.zeros(k, dtype=np.uint8)
        row[index] = 1
    else:
        num = gf256.LOG[np.arange(k) ^ index]
        log_row = (num.sum() - num - _lagrange_denominators(k)) % 255
        row = gf256.EXP[log_row]
    row.setflags(write=False)
    return row


def mds_shares(message: bytes, indices: Iterable[int], params: MdsParams) -> list[bytes]:
    if len(message) != params.message_len:
        raise ValueError(f"message is {len(message)} bytes, params expect {params.message_len}")
    k = params.shares_needed
    blocks = message_blocks(message, params.share_len, k)
    g = np.stack([generator_row(k, i) for i in indices])
    return [row.tobytes() for row in gf256.matmul(g, blocks)]


def mds_encode(message: bytes, params: MdsParams) -> list[bytes]:
    return mds_shares(message, range(params.shares_total), params)


def mds_decode(shares: Mapping[int, bytes] | Iterable[tuple[int, bytes]], params: MdsParams) -> bytes:
    items = dict(shares.items() if isinstance(shares, Mapping) else shares)
    k = params.shares_needed
    if len(items) < k:
        raise NeedMoreShares(f"have {len(items)} distinct shares, need {k}")
    chosen = sorted(items)[:k]
    for i in chosen:
        if len(items[i]) != params.share_len:
            raise ValueError(f"share {i} has length {len(items[i])}, expected {params.share_len}")
    g = np.stack([generator_row(k, i) for i in chosen])
    data = np.frombuffer(b"".join(items[i] for i in chosen), dtype=np.uint8).reshape(k, -1)
    elim = gf256.eliminate(g, data)
    return elim.reduced[:, k:].tobytes()[: params.message_len]


# --------------------------------------------------------------------------
# naive replication


def naive_package(message: bytes) -> bytes:
    return bytes(message)
