from dataclasses import replace

import numpy as np
import pytest

from sedna import codec, crypto
from sedna.protocol import (
    BUNDLE_OVERHEAD,
    Bundle,
    InvalidConfig,
    PreimageHeader,
    PublicHeader,
    StrategyConfig,
    build_bundles,
    build_transaction,
    bundle_sig_message,
    effective_censors,
    sample_lanes,
    verify_bundle,
    wire_metadata,
    with_header,
)


@pytest.fixture
def state(keypair):
    return build_transaction(b"hello world" * 30, keypair, np.random.default_rng(1))


def test_transaction_fields(state, keypair):
    tx = state.transaction
    assert tx.header.pre.declared_message_len == len(tx.message) == 32 + 330
    assert tx.txid == tx.header.txid
    assert crypto.verify_opening(tx.header.commitment, tx.sigma, tx.payload)
    assert crypto.verify(keypair.public_key, crypto.TAG_HEADER + tx.txid, tx.header.header_sig)


def test_fresh_randomness_per_call(keypair):
    a = build_transaction(b"p", keypair, np.random.default_rng(1)).transaction
    b = build_transaction(b"p", keypair, np.random.default_rng(2)).transaction
    assert a.sigma != b.sigma and a.header.commitment != b.header.commitment and a.txid != b.txid


def test_header_serialization_roundtrip(state):
    h = state.transaction.header
    raw = h.serialize()
    assert len(raw) == PublicHeader.SERIALIZED_LEN
    assert PublicHeader.deserialize(raw) == h
    assert PreimageHeader.deserialize(h.pre.serialize()) == h.pre


def test_sample_lanes(rng):
    assert sample_lanes(5, 5, rng) == (1, 2, 3, 4, 5)
    with pytest.raises(InvalidConfig):
        sample_lanes(4, 5, rng)
    a = sample_lanes(100, 7, np.random.default_rng(9))
    assert a == sample_lanes(100, 7, np.random.default_rng(9))
    assert len(set(a)) == 7 and all(1 <= x <= 100 for x in a)


def test_sample_lanes_uniform():
    rng = np.random.default_rng(0)
    counts = np.zeros(17)
    draws = 100_000
    for _ in range(draws):
        for lane in sample_lanes(16, 4, rng):
            counts[lane] += 1
    freq = counts[1:] / draws
    assert np.all(np.abs(freq - 0.25) < 0.01)


def test_rateless_index_cursor(state):
    cfg = StrategyConfig("rateless", 3, 2, symbol_len=64)
    first = build_bundles(state, [4, 9, 11], cfg)
    assert [b.indices for b in first] == [(0, 1), (2, 3), (4, 5)]
    second = build_bundles(state, [1, 2, 3], cfg)
    assert second[0].indices[0] == 6
    assert state.index_cursor == 12


def test_mds_and_naive_bundles(state):
    mds = build_bundles(state, [2, 5, 7], StrategyConfig("mds", 3, shares_needed=2))
    assert [b.indices for b in mds] == [(0,), (1,), (2,)]
    naive_state = replace(state, index_cursor=0)
    naive = build_bundles(naive_state, [1, 2], StrategyConfig("naive", 2))
    assert all(b.symbols[0] == state.transaction.message and b.indices == (0,) for b in naive)


@pytest.mark.parametrize("variant", ["naive", "mds", "rateless"])
def test_wire_length_matches_metadata(state, variant):
    cfg = {
        "naive": StrategyConfig("naive", 2),
        "mds": StrategyConfig("mds", 2, shares_needed=2),
        "rateless": StrategyConfig("rateless", 2, 3, symbol_len=50),
    }[variant]
    b = build_bundles(state, [1, 2], cfg)[0]
    M_h, M_s = wire_metadata(variant)
    body = sum(len(y) for y in b.symbols)
    assert len(b.serialize()) == b.wire_len == M_h + M_s * len(b.symbols) + body
    assert BUNDLE_OVERHEAD == 282
    assert Bundle.deserialize(b.serialize()) == b


def test_verify_honest_and_mutations(state):
    b = build_bundles(state, [3], StrategyConfig("rateless", 1, 2, symbol_len=64))[0]
    assert verify_bundle(b)
    sym = bytearray(b.symbols[0])
    sym[0] ^= 1
    assert not verify_bundle(replace(b, symbols=(bytes(sym),) + b.symbols[1:]))
    # substituted header contents with the original txid
    pre2 = replace(b.header.pre, nonce=99)
    assert not verify_bundle(with_header(b, pre=pre2, commitment=crypto.hash(b"x")))


def test_verify_accounting(keypair):
    st = build_transaction(b"p" * 100, keypair, np.random.default_rng(3), fee_per_byte=1, max_fee=10)
    b = build_bundles(st, [1], StrategyConfig("naive", 1))[0]
    assert not verify_bundle(b)
    st = build_transaction(b"p" * 100, keypair, np.random.default_rng(3), fee_per_byte=1, max_fee=10_000)
    b = build_bundles(st, [1], StrategyConfig("naive", 1))[0]
    assert verify_bundle(b)
    assert not verify_bundle(b, fee_floor=2)


def test_equivocation_is_representable(state, keypair):
    cfg = StrategyConfig("rateless", 1, 1, symbol_len=64)
    honest = build_bundles(state, [1], cfg)[0]
    other_val = bytes(64)
    sig = crypto.sign(keypair.secret_key, bundle_sig_message(honest.txid, 2, honest.indices, (other_val,)))
    forged = replace(honest, lane=2, symbols=(other_val,), bundle_sig=sig)
    assert verify_bundle(honest) and verify_bundle(forged)


def test_effective_censors():
    assert effective_censors(16, 5, 0) == 0
    assert effective_censors(16, 5, 4) == 4
    assert effective_censors(16, 5, 7) == 12
    assert effective_censors(16, 5, 11) == 16
    with pytest.raises(InvalidConfig):
        effective_censors(16, 5, 16)


def test_strategy_validation():
    with pytest.raises(InvalidConfig):
        StrategyConfig("mds", 3, shares_needed=4)
    with pytest.raises(InvalidConfig):
        StrategyConfig("rateless", 3)
    with pytest.raises(InvalidConfig):
        StrategyConfig("naive", 3, 2)
    with pytest.raises(InvalidConfig):
        StrategyConfig("bogus", 1)
    with pytest.raises(InvalidConfig):
        StrategyConfig("naive", 5).check_lanes(4)
    assert StrategyConfig("rateless", 3, 2, symbol_len=256).decode_threshold(4096) == 17


def test_mds_index_space_exhaustion(state):
    cfg = StrategyConfig("mds", 3, shares_needed=2)
    state.index_cursor = codec.MAX_MDS_SHARES - 2
    with pytest.raises(InvalidConfig):
        build_bundles(state, [1, 2, 3], cfg)
