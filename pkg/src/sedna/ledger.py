"""Deterministic slot-based simulation of a multi-proposer ledger.

Heights are 1-based: ``ledger.slots[0]`` is the slot vector finalized at
height 1.  Each slot vector holds exactly one block per lane, in lane order.
"""

from __future__ import annotations

import struct
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import codec, crypto
from .protocol import (
    Bundle,
    InvalidConfig,
    PublicHeader,
    StrategyConfig,
    build_bundles,
    build_transaction,
    sample_lanes,
    verify_bundle,
)
from .crypto import KeyPair

DEFAULT_MAX_SLOTS = 10_000
LEDGER_MAGIC = b"SEDNA/LEDGER/1"


class InvalidBlock(ValueError):
    """A block contains a bundle that fails verification."""


@dataclass(frozen=True)
class Block:
    lane: int
    slot: int
    bundles: tuple[Bundle, ...] = ()


@dataclass
class FinalizedLedger:
    n: int
    slots: list[tuple[Block, ...]] = field(default_factory=list)

    @property
    def height(self) -> int:
        return len(self.slots)

    def append(self, blocks: Sequence[Block], verified: bool = False) -> None:
        """Append the next slot vector; ``verified`` skips re-checking bundles
        that were admitted through ``LaneQueues``."""
        t = self.height + 1
        if len(blocks) != self.n:
            raise InvalidBlock(f"slot vector must have {self.n} blocks, got {len(blocks)}")
        for i, block in enumerate(blocks, start=1):
            if block.lane != i or block.slot != t:
                raise InvalidBlock(f"block at position {i} is labelled lane {block.lane}, slot {block.slot}")
            for b in () if verified else block.bundles:
                if not verify_bundle(b):
                    raise InvalidBlock(f"lane {i} slot {t} carries a bundle that fails verification")
        self.slots.append(tuple(blocks))

    def serialize(self) -> bytes:
        out = bytearray(LEDGER_MAGIC)
        out += struct.pack(">HI", self.n, self.height)
        for vector in self.slots:
            for block in vector:
                out += struct.pack(">I", len(block.bundles))
                for b in block.bundles:
                    raw = b.serialize()
                    out += struct.pack(">I", len(raw)) + raw
        return bytes(out)

    @classmethod
    def deserialize(cls, data: bytes) -> "FinalizedLedger":
        if not data.startswith(LEDGER_MAGIC):
            raise ValueError("not a serialized ledger")
        pos = len(LEDGER_MAGIC)
        n, height = struct.unpack_from(">HI", data, pos)
        pos += 6
        ledger = cls(n)
        for t in range(1, height + 1):
            blocks = []
            for lane in range(1, n + 1):
                (count,) = struct.unpack_from(">I", data, pos)
                pos += 4
                bundles = []
                for _ in range(count):
                    (length,) = struct.unpack_from(">I", data, pos)
                    pos += 4
                    bundles.append(Bundle.deserialize(data[pos:pos + length]))
                    pos += length
                blocks.append(Block(lane, t, tuple(bundles)))
            ledger.append(blocks)
        if pos != len(data):
            raise ValueError("trailing bytes after ledger")
        return ledger

    def bundles_in_order(self, upto: int | None = None) -> Iterable[tuple[int, int, int, Bundle]]:
        """(height, lane, position, bundle) in dedup scan order."""
        for t, vector in enumerate(self.slots[:upto], start=1):
            for block in vector:
                for pos, b in enumerate(block.bundles):
                    yield t, block.lane, pos, b

    def header_for(self, txid: bytes) -> PublicHeader | None:
        for _, _, _, b in self.bundles_in_order():
            if b.txid == txid:
                return b.header
        return None


@dataclass
class AdversaryModel:
    censored_lanes: frozenset[int]
    collects_symbols: bool = True
    # None: every sender is monitored
    monitored: frozenset[bytes] | None = None

    def censors(self, lane: int, bundle: Bundle) -> bool:
        if lane not in self.censored_lanes:
            return False
        return self.monitored is None or bundle.header.pre.sender_pubkey in self.monitored

    @classmethod
    def static(cls, n: int, c_e: int, rng: np.random.Generator, collects_symbols: bool = True) -> "AdversaryModel":
        if not 0 <= c_e <= n:
            raise InvalidConfig(f"need 0 <= c_e <= n, got c_e={c_e}")
        lanes = rng.choice(n, size=c_e, replace=False) + 1 if c_e else []
        return cls(frozenset(int(x) for x in lanes), collects_symbols)


class LaneQueues:
    """Per-lane mempools.  Only bundles passing ``verify_bundle`` are admitted."""

    def __init__(self, n: int):
        self.n = n
        self.pending: dict[int, list[Bundle]] = defaultdict(list)
        self.rejected = 0

    def enqueue(self, bundle: Bundle) -> bool:
        if not 1 <= bundle.lane <= self.n or not verify_bundle(bundle):
            self.rejected += 1
            return False
        self.pending[bundle.lane].append(bundle)
        return True


def run_slot(ledger: FinalizedLedger, queues: LaneQueues, adversary: AdversaryModel | None = None) -> FinalizedLedger:
    """Finalize one slot: honest lanes publish their whole queue, censored
    lanes drop monitored senders' bundles.  All queues are drained."""
    t = ledger.height + 1
    blocks = []
    for lane in range(1, ledger.n + 1):
        queue = queues.pending.pop(lane, [])
        kept = tuple(b for b in queue if adversary is None or not adversary.censors(lane, b))
        blocks.append(Block(lane, t, kept))
    ledger.append(blocks, verified=True)
    return ledger


# --------------------------------------------------------------------------
# deduplication and inclusion


@dataclass(frozen=True)
class Occurrence:
    value: bytes
    height: int
    lane: int
    position: int


class DedupView:
    """First occurrence of every (txid, j) in scan order (height, lane, position)."""

    def __init__(self):
        self.entries: dict[tuple[bytes, int], Occurrence] = {}
        self.height = 0

    def absorb_slot(self, t: int, vector: Sequence[Block]) -> set[bytes]:
        touched = set()
        for block in vector:
            for pos, b in enumerate(block.bundles):
                for j, y in zip(b.indices, b.symbols):
                    key = (b.txid, j)
                    if key not in self.entries:
                        self.entries[key] = Occurrence(y, t, block.lane, pos)
                        touched.add(b.txid)
        self.height = t
        return touched

    @classmethod
    def from_ledger(cls, ledger: FinalizedLedger, h: int | None = None) -> "DedupView":
        view = cls()
        h = ledger.height if h is None else h
        for t, vector in enumerate(ledger.slots[:h], start=1):
            view.absorb_slot(t, vector)
        return view

    def symbols(self, txid: bytes) -> dict[int, bytes]:
        return {j: occ.value for (tx, j), occ in self.entries.items() if tx == txid}


def scan_dedup(ledger: FinalizedLedger, txid: bytes, h: int) -> dict[int, bytes]:
    """X_txID(h) as a map index -> first-occurrence value."""
    if not 0 <= h <= ledger.height:
        raise ValueError(f"height {h} outside [0, {ledger.height}]")
    x: dict[int, bytes] = {}
    for _, _, _, b in ledger.bundles_in_order(h):
        if b.txid == txid:
            for j, y in zip(b.indices, b.symbols):
                x.setdefault(j, y)
    return x


@dataclass(frozen=True)
class InclusionRecord:
    txid: bytes
    ht_incl: int
    payload: bytes


@dataclass(frozen=True)
class DiscardedInvalid:
    txid: bytes
    height: int
    reason: str


NOT_INCLUDED = None


def try_decode(x: Mapping[int, bytes], header: PublicHeader, config: StrategyConfig):
    """Decode X for one transaction.

    Returns the message, ``None`` when more symbols may still help, or a
    string naming why the symbol set can never yield a valid transaction.
    """
    S = header.pre.declared_message_len
    if config.variant == "naive":
        value = x.get(0)
        if value is None:
            return None
        return value if len(value) == S else "naive copy has wrong length"
    if config.variant == "mds":
        params = config.mds_params(S)
        if any(len(v) != params.share_len for v in x.values()):
            return "share of wrong length"
        if any(j >= codec.MAX_MDS_SHARES for j in x):
            return "share index out of range"
        if len(x) < params.shares_needed:
            return None
        return codec.mds_decode(x, params)
    params = config.rateless_params(S)
    if any(len(v) != params.symbol_len for v in x.values()):
        return "symbol of wrong length"
    out = codec.rateless_decode([codec.Symbol(j, v) for j, v in x.items()], params)
    if out.inconsistent:
        return "inconsistent symbols"
    return out.message


class InclusionTracker:
    """Incremental inclusion-height evaluation for one transaction."""

    def __init__(self, txid: bytes, header: PublicHeader, config: StrategyConfig):
        self.txid = txid
        self.header = header
        self.config = config
        self.threshold = config.decode_threshold(header.pre.declared_message_len)
        self.x: dict[int, bytes] = {}
        self.result: InclusionRecord | DiscardedInvalid | None = None
        self.attempts = 0

    def observe(self, t: int, vector: Sequence[Block]):
        if self.result is not None:
            return self.result
        fresh = False
        for block in vector:
            for b in block.bundles:
                if b.txid != self.txid:
                    continue
                for j, y in zip(b.indices, b.symbols):
                    if j not in self.x:
                        self.x[j] = y
                        fresh = True
        if fresh and len(self.x) >= self.threshold:
            self.attempts += 1
            decoded = try_decode(self.x, self.header, self.config)
            if isinstance(decoded, str):
                self.result = DiscardedInvalid(self.txid, t, decoded)
            elif decoded is not None:
                sigma, payload = codec.split_message(decoded)
                if crypto.verify_opening(self.header.commitment, sigma, payload):
                    self.result = InclusionRecord(self.txid, t, payload)
                else:
                    self.result = DiscardedInvalid(self.txid, t, "commitment opening failed")
        return self.result


def inclusion_height(
    ledger: FinalizedLedger, txid: bytes, header: PublicHeader, config: StrategyConfig
) -> InclusionRecord | DiscardedInvalid | None:
    tracker = InclusionTracker(txid, header, config)
    for t, vector in enumerate(ledger.slots, start=1):
        res = tracker.observe(t, vector)
        if res is not None:
            return res
    return NOT_INCLUDED


def execution_order(ledger: FinalizedLedger, configs: Mapping[bytes, StrategyConfig]) -> list[tuple[int, bytes]]:
    """Included transactions as (ht_incl, txid), sorted lexicographically."""
    order = []
    for txid, config in configs.items():
        header = ledger.header_for(txid)
        if header is None:
            continue
        res = inclusion_height(ledger, txid, header, config)
        if isinstance(res, InclusionRecord):
            order.append((res.ht_incl, res.txid))
    return sorted(order)


# --------------------------------------------------------------------------
# simulation


@dataclass
class SimResult:
    seed: int
    included: bool
    slots_to_inclusion: int | None
    bytes_published: int
    adversary_decode_slot: int | None
    slots_run: int
    outcome: str
    per_slot_bytes: list[int] = field(default_factory=list)
    threshold: int = 0


def adversary_early_decode(trace: Sequence[Iterable[Bundle]], threshold: int) -> int | None:
    """First slot (1-based) at which the bundles delivered to censored lanes
    hold ``threshold`` distinct indices, else None."""
    held: set[int] = set()
    for t, bundles in enumerate(trace, start=1):
        for b in bundles:
            held.update(b.indices)
        if len(held) >= threshold:
            return t
    return None


def simulate_inclusion(
    config: StrategyConfig,
    n: int,
    c_e: int,
    payload: bytes | int,
    seed: int,
    max_slots: int = DEFAULT_MAX_SLOTS,
    adversary: AdversaryModel | None = None,
    keypair: KeyPair | None = None,
) -> SimResult:
    """One sender submitting one transaction until inclusion or ``max_slots``.

    ``payload`` may be the payload bytes or a payload length to draw at random.
    Bytes of every finalized bundle are counted, duplicates included.
    """
    config.check_lanes(n)
    if max_slots < 1:
        raise InvalidConfig("max_slots must be >= 1")
    rng = np.random.default_rng(seed)
    if keypair is None:
        keypair = KeyPair.generate(rng)
    if adversary is None:
        adversary = AdversaryModel.static(n, c_e, rng)
    if isinstance(payload, int):
        payload = rng.bytes(payload)
    state = build_transaction(payload, keypair, rng)
    tx = state.transaction
    tracker = InclusionTracker(tx.txid, tx.header, config)
    ledger = FinalizedLedger(n)
    queues = LaneQueues(n)
    adv_held: set[int] = set()
    adv_slot = None
    per_slot = []
    outcome = "censored"
    result = None
    for t in range(1, max_slots + 1):
        lanes = sample_lanes(n, config.lanes, rng)
        bundles = build_bundles(state, lanes, config)
        for b in bundles:
            queues.enqueue(b)
        if adversary.collects_symbols and adv_slot is None:
            for b in bundles:
                if b.lane in adversary.censored_lanes:
                    adv_held.update(b.indices)
            if len(adv_held) >= tracker.threshold:
                adv_slot = t
        run_slot(ledger, queues, adversary)
        vector = ledger.slots[-1]
        per_slot.append(sum(len(b.serialize()) for blk in vector for b in blk.bundles if b.txid == tx.txid))
        result = tracker.observe(t, vector)
        if result is not None:
            outcome = "included" if isinstance(result, InclusionRecord) else "discarded"
            break
    return SimResult(
        seed=seed,
        included=isinstance(result, InclusionRecord),
        slots_to_inclusion=result.ht_incl if isinstance(result, InclusionRecord) else None,
        bytes_published=sum(per_slot),
        adversary_decode_slot=adv_slot,
        slots_run=len(per_slot),
        outcome=outcome,
        per_slot_bytes=per_slot,
        threshold=tracker.threshold,
    )
