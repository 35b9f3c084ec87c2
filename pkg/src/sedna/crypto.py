"""Hashing, hash commitments and Ed25519 signatures.

Every digest in the package is SHA-256.  Signatures are Ed25519 (deterministic,
64 bytes) backed by libsodium through PyNaCl.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from functools import lru_cache

import nacl.exceptions
import nacl.signing

DIGEST_LEN = 32
SIGMA_LEN = 32
SIGNATURE_LEN = 64
PUBLIC_KEY_LEN = 32

TAG_COMMIT = b"SEDNA/COM"
TAG_HEADER = b"SEDNA/HDR"
TAG_BUNDLE = b"SEDNA/BND"
TAG_SYMBOL = b"SEDNA/SYM"


class InvalidRandomness(ValueError):
    """Commitment randomness has the wrong length."""


def hash(data: bytes) -> bytes:  # noqa: A001 - mirrors the protocol's H
    return hashlib.sha256(data).digest()


def commit(sigma: bytes, payload: bytes) -> bytes:
    if len(sigma) != SIGMA_LEN:
        raise InvalidRandomness(f"sigma must be {SIGMA_LEN} bytes, got {len(sigma)}")
    return hash(TAG_COMMIT + sigma + payload)


def verify_opening(commitment: bytes, sigma: bytes, payload: bytes) -> bool:
    if len(sigma) != SIGMA_LEN:
        return False
    return hmac.compare_digest(commit(sigma, payload), commitment)


def derive_txid(h_pre: bytes, commitment: bytes) -> bytes:
    return hash(h_pre + commitment)


@dataclass(frozen=True)
class KeyPair:
    secret_key: bytes
    public_key: bytes

    @classmethod
    def from_seed(cls, seed: bytes) -> "KeyPair":
        sk = nacl.signing.SigningKey(seed)
        return cls(bytes(sk), bytes(sk.verify_key))

    @classmethod
    def generate(cls, rng) -> "KeyPair":
        """Derive a key pair from a numpy Generator (reproducible runs)."""
        return cls.from_seed(rng.bytes(32))


@lru_cache(maxsize=256)
def _signing_key(secret_key: bytes) -> nacl.signing.SigningKey:
    return nacl.signing.SigningKey(secret_key)


@lru_cache(maxsize=256)
def _verify_key(public_key: bytes) -> nacl.signing.VerifyKey:
    return nacl.signing.VerifyKey(public_key)


def sign(secret_key: bytes, message: bytes) -> bytes:
    return _signing_key(secret_key).sign(message).signature


def verify(public_key: bytes, message: bytes, sig: bytes) -> bool:
    """Return True iff ``sig`` is a valid signature; malformed input gives False."""
    try:
        if len(public_key) != PUBLIC_KEY_LEN or len(sig) != SIGNATURE_LEN:
            return False
        _verify_key(bytes(public_key)).verify(bytes(message), bytes(sig))
    except (nacl.exceptions.BadSignatureError, nacl.exceptions.CryptoError, TypeError, ValueError):
        return False
    return True


# Header signatures are re-checked for every bundle of a transaction.
@lru_cache(maxsize=4096)
def verify_cached(public_key: bytes, message: bytes, sig: bytes) -> bool:
    return verify(public_key, message, sig)
