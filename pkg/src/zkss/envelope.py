"""RSA delivery-address envelopes.

Each participant generates a 2048-bit RSA keypair; the public key bytes
double as the source of their on-chain randomness (the contract stores
the key and the field-sized hash of it side by side).  The matched gift
receiver encrypts their real-world delivery address to the sender's key
with OAEP, so only that sender can read it.

Both key generation and encryption take explicit seeds so simulations
reproduce bit-exactly: primes come from a hash-counter stream via gmpy2,
and the OAEP seed is caller-supplied (standard RSAES-OAEP with SHA-256
and MGF1; interoperable with library implementations).
"""

from __future__ import annotations

import base64
import hashlib
import hmac
from dataclasses import dataclass

import gmpy2

from .primitives import FieldElement, hash_to_field

MODULUS_BITS = 2048
BLOCK_SIZE = MODULUS_BITS // 8
PUBLIC_EXPONENT = 65537

_HASH_LEN = 32  # SHA-256
# OAEP-SHA256 over a 256-byte block: 256 - 2*32 - 2
MAX_PLAINTEXT = BLOCK_SIZE - 2 * _HASH_LEN - 2

_EMPTY_LABEL_HASH = hashlib.sha256(b"").digest()


class DecryptionError(Exception):
    """Wrong key or corrupted ciphertext."""


@dataclass(frozen=True)
class RsaKeyPair:
    n: int
    e: int
    d: int
    p: int
    q: int

    def public_key_bytes(self) -> bytes:
        """Wire encoding: 256-byte modulus || 4-byte exponent, big-endian."""
        return self.n.to_bytes(BLOCK_SIZE, "big") + self.e.to_bytes(4, "big")

    def randomness_anchor(self) -> FieldElement:
        """The field-sized value the contract binds this key to."""
        return hash_to_field(self.public_key_bytes())


@dataclass(frozen=True, slots=True)
class DeliveryEnvelope:
    ciphertext: bytes
    recipient_key_fingerprint: FieldElement

    def to_dict(self) -> dict:
        return {
            "ciphertext": base64.b64encode(self.ciphertext).decode(),
            "recipient_key_fingerprint": self.recipient_key_fingerprint.to_hex(),
        }


def _prime_stream(seed: bytes, bits: int):
    """Deterministic candidate primes: hash-counter DRBG + next_prime."""
    counter = 0
    words = (bits + 255) // 256
    while True:
        chunks = [
            hashlib.sha256(seed + counter.to_bytes(8, "big") + bytes([i])).digest()
            for i in range(words)
        ]
        counter += 1
        candidate = int.from_bytes(b"".join(chunks)[: bits // 8], "big")
        # force the top two bits so the product of two primes is full width
        candidate |= (1 << (bits - 1)) | (1 << (bits - 2)) | 1
        yield int(gmpy2.next_prime(candidate))


def generate_rsa_keypair(seed: bytes) -> RsaKeyPair:
    """Deterministic 2048-bit keypair with e = 65537."""
    stream = _prime_stream(b"zkss-rsa" + seed, MODULUS_BITS // 2)
    p = next(stream)
    while True:
        q = next(stream)
        if q == p:
            continue
        phi = (p - 1) * (q - 1)
        if phi % PUBLIC_EXPONENT == 0:
            p = q  # rare; rotate and keep searching
            continue
        n = p * q
        if n.bit_length() != MODULUS_BITS:
            continue
        d = pow(PUBLIC_EXPONENT, -1, phi)
        return RsaKeyPair(n=n, e=PUBLIC_EXPONENT, d=d, p=p, q=q)


def _mgf1(seed: bytes, length: int) -> bytes:
    out = b""
    for counter in range((length + _HASH_LEN - 1) // _HASH_LEN):
        out += hashlib.sha256(seed + counter.to_bytes(4, "big")).digest()
    return out[:length]


def _oaep_encode(plaintext: bytes, pad_seed: bytes) -> bytes:
    ps = b"\x00" * (BLOCK_SIZE - len(plaintext) - 2 * _HASH_LEN - 2)
    db = _EMPTY_LABEL_HASH + ps + b"\x01" + plaintext
    masked_db = bytes(a ^ b for a, b in zip(db, _mgf1(pad_seed, len(db))))
    masked_seed = bytes(a ^ b for a, b in zip(pad_seed, _mgf1(masked_db, _HASH_LEN)))
    return b"\x00" + masked_seed + masked_db


def _oaep_decode(block: bytes) -> bytes:
    # constant-time-ish check order is irrelevant at desk scale, but keep
    # a single failure path so error messages leak nothing.
    masked_seed = block[1 : 1 + _HASH_LEN]
    masked_db = block[1 + _HASH_LEN :]
    pad_seed = bytes(a ^ b for a, b in zip(masked_seed, _mgf1(masked_db, _HASH_LEN)))
    db = bytes(a ^ b for a, b in zip(masked_db, _mgf1(pad_seed, len(masked_db))))
    ok = block[0] == 0 and hmac.compare_digest(db[:_HASH_LEN], _EMPTY_LABEL_HASH)
    sep = db.find(b"\x01", _HASH_LEN)
    if not ok or sep < 0 or any(db[_HASH_LEN:sep]):
        raise DecryptionError("OAEP decoding failed")
    return db[sep + 1 :]


def encrypt_delivery_address(
    plaintext: bytes, public_key_bytes: bytes, seed: bytes
) -> DeliveryEnvelope:
    """Encrypt to the sender's published key.  One OAEP block only.

    ``seed`` feeds the OAEP padding; pass fresh entropy in production use
    and a derived value in reproducible simulations.
    """
    if len(plaintext) > MAX_PLAINTEXT:
        raise ValueError(f"plaintext exceeds {MAX_PLAINTEXT} bytes")
    if len(public_key_bytes) != BLOCK_SIZE + 4:
        raise ValueError("bad public key encoding")
    n = int.from_bytes(public_key_bytes[:-4], "big")
    e = int.from_bytes(public_key_bytes[-4:], "big")
    pad_seed = hashlib.sha256(b"zkss-oaep" + seed).digest()
    block = _oaep_encode(plaintext, pad_seed)
    ciphertext = pow(int.from_bytes(block, "big"), e, n).to_bytes(BLOCK_SIZE, "big")
    return DeliveryEnvelope(
        ciphertext=ciphertext,
        recipient_key_fingerprint=hash_to_field(public_key_bytes),
    )


def decrypt_delivery_address(envelope: DeliveryEnvelope, key: RsaKeyPair) -> bytes:
    """Recover the plaintext; raises DecryptionError for any other key."""
    if len(envelope.ciphertext) != BLOCK_SIZE:
        raise DecryptionError("ciphertext length mismatch")
    c = int.from_bytes(envelope.ciphertext, "big")
    if c >= key.n:
        raise DecryptionError("ciphertext out of range")
    block = pow(c, key.d, key.n).to_bytes(BLOCK_SIZE, "big")
    return _oaep_decode(block)
