"""Sender-side transaction construction, lane sampling, bundle building and
the validator's bundle checks."""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from . import codec, crypto
from .codec import MdsParams, RatelessParams
from .crypto import KeyPair

DEFAULT_FEE_FLOOR = 1
DEFAULT_FEE_PER_BYTE = 1
DEFAULT_MAX_FEE = 1 << 40
MIN_MESSAGE_LEN = crypto.SIGMA_LEN + 1

VARIANTS = ("naive", "mds", "rateless")


class InvalidConfig(ValueError):
    pass


# --------------------------------------------------------------------------
# headers


@dataclass(frozen=True)
class PreimageHeader:
    sender_pubkey: bytes
    fee_per_byte: int
    max_fee: int
    nonce: int
    declared_message_len: int

    SERIALIZED_LEN = 4 * 5 + crypto.PUBLIC_KEY_LEN + 8 * 4

    def serialize(self) -> bytes:
        """Length-prefixed fields in fixed order; integers are u64 big-endian."""
        return self._encoded

    @cached_property
    def _encoded(self) -> bytes:
        out = bytearray()
        for part in (
            bytes(self.sender_pubkey),
            struct.pack(">Q", self.fee_per_byte),
            struct.pack(">Q", self.max_fee),
            struct.pack(">Q", self.nonce),
            struct.pack(">Q", self.declared_message_len),
        ):
            out += struct.pack(">I", len(part)) + part
        return bytes(out)

    @classmethod
    def deserialize(cls, data: bytes) -> "PreimageHeader":
        parts, pos = [], 0
        for _ in range(5):
            (length,) = struct.unpack_from(">I", data, pos)
            pos += 4
            parts.append(bytes(data[pos:pos + length]))
            pos += length
        if pos != len(data):
            raise ValueError("trailing bytes after preimage header")
        ints = [struct.unpack(">Q", p)[0] for p in parts[1:]]
        return cls(parts[0], *ints)


@dataclass(frozen=True)
class PublicHeader:
    pre: PreimageHeader
    commitment: bytes
    header_sig: bytes

    SERIALIZED_LEN = PreimageHeader.SERIALIZED_LEN + crypto.DIGEST_LEN + crypto.SIGNATURE_LEN

    def serialize(self) -> bytes:
        return self.pre.serialize() + self.commitment + self.header_sig

    @classmethod
    def deserialize(cls, data: bytes) -> "PublicHeader":
        if len(data) != cls.SERIALIZED_LEN:
            raise ValueError(f"header must be {cls.SERIALIZED_LEN} bytes, got {len(data)}")
        cut = PreimageHeader.SERIALIZED_LEN
        return cls(
            PreimageHeader.deserialize(data[:cut]),
            bytes(data[cut:cut + crypto.DIGEST_LEN]),
            bytes(data[cut + crypto.DIGEST_LEN:]),
        )

    @property
    def txid(self) -> bytes:
        return crypto.derive_txid(self.pre.serialize(), self.commitment)


def header_sig_message(txid: bytes) -> bytes:
    return crypto.TAG_HEADER + txid


@dataclass(frozen=True)
class Transaction:
    header: PublicHeader
    message: bytes
    txid: bytes

    @property
    def sigma(self) -> bytes:
        return self.message[: crypto.SIGMA_LEN]

    @property
    def payload(self) -> bytes:
        return self.message[crypto.SIGMA_LEN:]


# --------------------------------------------------------------------------
# bundles

# txid, lane, count, bundle signature
BUNDLE_FIXED_LEN = crypto.DIGEST_LEN + 2 + 4 + crypto.SIGNATURE_LEN
BUNDLE_OVERHEAD = BUNDLE_FIXED_LEN + PublicHeader.SERIALIZED_LEN
INDEX_LEN = 8


@dataclass(frozen=True)
class Bundle:
    txid: bytes
    lane: int
    indices: tuple[int, ...]
    symbols: tuple[bytes, ...]
    bundle_sig: bytes
    header: PublicHeader

    def signed_message(self) -> bytes:
        return bundle_sig_message(self.txid, self.lane, self.indices, self.symbols)

    def serialize(self) -> bytes:
        body = b"".join(struct.pack(">Q", j) + y for j, y in zip(self.indices, self.symbols))
        return (
            self.txid
            + struct.pack(">HI", self.lane, len(self.indices))
            + body
            + self.bundle_sig
            + self.header.serialize()
        )

    @property
    def wire_len(self) -> int:
        return BUNDLE_OVERHEAD + sum(INDEX_LEN + len(y) for y in self.symbols)

    @classmethod
    def deserialize(cls, data: bytes) -> "Bundle":
        data = bytes(data)
        d = crypto.DIGEST_LEN
        txid = data[:d]
        lane, count = struct.unpack_from(">HI", data, d)
        body_start = d + 6
        body_end = len(data) - crypto.SIGNATURE_LEN - PublicHeader.SERIALIZED_LEN
        body_len = body_end - body_start
        if count == 0 or body_len < 0 or body_len % count:
            raise ValueError("malformed bundle body")
        step = body_len // count
        if step < INDEX_LEN:
            raise ValueError("malformed bundle body")
        indices, symbols = [], []
        for r in range(count):
            off = body_start + r * step
            indices.append(struct.unpack_from(">Q", data, off)[0])
            symbols.append(data[off + INDEX_LEN:off + step])
        sig = data[body_end:body_end + crypto.SIGNATURE_LEN]
        header = PublicHeader.deserialize(data[body_end + crypto.SIGNATURE_LEN:])
        return cls(txid, lane, tuple(indices), tuple(symbols), sig, header)


def bundle_sig_message(txid: bytes, lane: int, indices: Sequence[int], symbols: Sequence[bytes]) -> bytes:
    """SEDNA/BND || txid || lane || count || <j, y_j> sorted by j."""
    pairs = sorted(zip(indices, symbols))
    return (
        crypto.TAG_BUNDLE
        + txid
        + struct.pack(">HI", lane, len(pairs))
        + b"".join(struct.pack(">Q", j) + y for j, y in pairs)
    )


def wire_metadata(variant: str) -> tuple[int, int]:
    """(M_h, M_s) of this wire format for ``variant``.

    Naive and MDS bundles carry exactly one index, which is folded into the
    per-bundle overhead; rateless bundles pay it per symbol.
    """
    if variant == "rateless":
        return BUNDLE_OVERHEAD, INDEX_LEN
    return BUNDLE_OVERHEAD + INDEX_LEN, 0


# --------------------------------------------------------------------------
# strategy


@dataclass(frozen=True)
class StrategyConfig:
    variant: str
    lanes: int
    symbols_per_bundle: int = 1
    shares_needed: int | None = None
    symbol_len: int | None = None
    epsilon: float = 0.05

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidConfig(f"unknown variant {self.variant!r}")
        if self.lanes < 1:
            raise InvalidConfig("lanes must be >= 1")
        if self.variant == "mds":
            if self.shares_needed is None or not 1 <= self.shares_needed <= self.lanes:
                raise InvalidConfig("mds needs 1 <= k <= m")
            if self.lanes > codec.MAX_MDS_SHARES:
                raise InvalidConfig(f"mds needs m <= {codec.MAX_MDS_SHARES}")
        elif self.shares_needed is not None:
            raise InvalidConfig("shares_needed only applies to mds")
        if self.variant == "rateless":
            if self.symbol_len is None or self.symbol_len < 1:
                raise InvalidConfig("rateless needs symbol_len >= 1")
            if self.symbols_per_bundle < 1:
                raise InvalidConfig("rateless needs symbols_per_bundle >= 1")
            if not codec.exact_fraction(self.epsilon) > 0:
                raise InvalidConfig("epsilon must be > 0")
        else:
            if self.symbol_len is not None:
                raise InvalidConfig("symbol_len only applies to rateless")
            if self.symbols_per_bundle != 1:
                raise InvalidConfig("symbols_per_bundle only applies to rateless")

    def check_lanes(self, n: int) -> None:
        if not 1 <= self.lanes <= n:
            raise InvalidConfig(f"need 1 <= m <= n, got m={self.lanes}, n={n}")

    def rateless_params(self, message_len: int) -> RatelessParams:
        return codec.rateless_params(message_len, self.symbol_len, self.epsilon)

    def mds_params(self, message_len: int) -> MdsParams:
        return MdsParams(message_len, self.lanes, self.shares_needed)

    def decode_threshold(self, message_len: int) -> int:
        """Distinct indices needed before decoding is attempted."""
        if self.variant == "naive":
            return 1
        if self.variant == "mds":
            return self.shares_needed
        return self.rateless_params(message_len).decode_threshold


@dataclass
class SenderState:
    transaction: Transaction
    keypair: KeyPair
    index_cursor: int = 0


def build_transaction(
    payload: bytes,
    keypair: KeyPair,
    rng: np.random.Generator,
    fee_per_byte: int = DEFAULT_FEE_PER_BYTE,
    max_fee: int = DEFAULT_MAX_FEE,
    nonce: int = 0,
) -> SenderState:
    if not payload:
        raise ValueError("payload must be non-empty")
    sigma = rng.bytes(crypto.SIGMA_LEN)
    commitment = crypto.commit(sigma, payload)
    pre = PreimageHeader(keypair.public_key, fee_per_byte, max_fee, nonce, crypto.SIGMA_LEN + len(payload))
    txid = crypto.derive_txid(pre.serialize(), commitment)
    sig = crypto.sign(keypair.secret_key, header_sig_message(txid))
    header = PublicHeader(pre, commitment, sig)
    return SenderState(Transaction(header, sigma + bytes(payload), txid), keypair)


def sample_lanes(n: int, m: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Uniform m-subset of lanes {1..n}, returned in increasing order."""
    if not 1 <= m <= n:
        raise InvalidConfig(f"need 1 <= m <= n, got m={m}, n={n}")
    return tuple(sorted(int(x) + 1 for x in rng.choice(n, size=m, replace=False)))


def _sign_bundle(state: SenderState, lane: int, indices: Sequence[int], symbols: Sequence[bytes]) -> Bundle:
    tx = state.transaction
    msg = bundle_sig_message(tx.txid, lane, indices, symbols)
    sig = crypto.sign(state.keypair.secret_key, msg)
    return Bundle(tx.txid, lane, tuple(indices), tuple(symbols), sig, tx.header)


def build_bundles(state: SenderState, lanes: Sequence[int], config: StrategyConfig) -> list[Bundle]:
    """One signed bundle per lane; the r-th lane (in the given order) gets the
    r-th block of fresh indices starting at the sender's cursor."""
    message = state.transaction.message
    cursor = state.index_cursor
    bundles = []
    if config.variant == "naive":
        pkg = codec.naive_package(message)
        bundles = [_sign_bundle(state, lane, [0], [pkg]) for lane in lanes]
        state.index_cursor = max(cursor, 1)
    elif config.variant == "mds":
        params = config.mds_params(len(message))
        idx = [cursor + r for r in range(len(lanes))]
        if idx and idx[-1] >= codec.MAX_MDS_SHARES:
            raise InvalidConfig("MDS share index space exhausted")
        shares = codec.mds_shares(message, idx, params)
        bundles = [_sign_bundle(state, lane, [j], [y]) for lane, j, y in zip(lanes, idx, shares)]
        state.index_cursor = cursor + len(lanes)
    else:
        params = config.rateless_params(len(message))
        s = config.symbols_per_bundle
        syms = codec.rateless_symbols(message, range(cursor, cursor + s * len(lanes)), params)
        for r, lane in enumerate(lanes):
            chunk = syms[r * s:(r + 1) * s]
            bundles.append(_sign_bundle(state, lane, [x.index for x in chunk], [x.value for x in chunk]))
        state.index_cursor = cursor + s * len(lanes)
    return bundles


def accounting_ok(pre: PreimageHeader, bundle_bytes: int, fee_floor: int = DEFAULT_FEE_FLOOR) -> bool:
    return pre.fee_per_byte >= fee_floor and pre.max_fee >= pre.fee_per_byte * bundle_bytes


def verify_bundle(bundle: Bundle, fee_floor: int = DEFAULT_FEE_FLOOR) -> bool:
    """Hash consistency, header signature, accounting, bundle signature.

    Total on untrusted input: anything malformed is rejected, never raised.
    """
    try:
        h = bundle.header
        pre = h.pre
        if crypto.derive_txid(pre.serialize(), h.commitment) != bundle.txid:
            return False
        if not crypto.verify_cached(pre.sender_pubkey, header_sig_message(bundle.txid), h.header_sig):
            return False
        if not accounting_ok(pre, bundle.wire_len, fee_floor):
            return False
        if not bundle.indices or len(bundle.indices) != len(bundle.symbols):
            return False
        if any(b <= a for a, b in zip(bundle.indices, bundle.indices[1:])):
            return False
        if len({len(y) for y in bundle.symbols}) != 1:
            return False
        if not 1 <= bundle.lane <= 0xFFFF:
            return False
        return crypto.verify(pre.sender_pubkey, bundle.signed_message(), bundle.bundle_sig)
    except (AttributeError, TypeError, ValueError, struct.error, OverflowError):
        return False


def effective_censors(n: int, f: int, c: int) -> int:
    """Lanes the adversary can effectively censor for a user tolerating c censors."""
    if not 0 <= c <= n - 1:
        raise InvalidConfig(f"need 0 <= c <= n-1, got c={c}")
    if c <= f:
        return c
    if c <= 2 * f:
        return n - (2 * f + 1) + c
    return n


def with_header(bundle: Bundle, **changes) -> Bundle:
    return replace(bundle, header=replace(bundle.header, **changes))
