"""Field arithmetic, hash-to-field, addresses and game/event identifiers.

Every other module speaks in terms of these types.  The field modulus is
the secp256k1 group order so that nullifiers (hashes of signature
scalars), tree roots and randomness anchors all live in one field.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

# secp256k1 group order; deployment parameter, see README.
FIELD_MODULUS = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141

ADDRESS_SIZE = 20
NONCE_SIZE = 32
EVENT_ID_SIZE = ADDRESS_SIZE + NONCE_SIZE


@dataclass(frozen=True, slots=True)
class FieldElement:
    """An integer in [0, FIELD_MODULUS)."""

    value: int

    def __post_init__(self):
        if not isinstance(self.value, int):
            raise TypeError(f"field element value must be int, got {type(self.value)}")
        if not 0 <= self.value < FIELD_MODULUS:
            raise ValueError("field element out of range")

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(32, "big")

    def to_hex(self) -> str:
        return "0x" + self.value.to_bytes(32, "big").hex()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "FieldElement":
        if len(raw) != 32:
            raise ValueError("field element encoding must be 32 bytes")
        return cls(int.from_bytes(raw, "big"))

    @classmethod
    def from_hex(cls, text: str) -> "FieldElement":
        if not text.startswith("0x") or len(text) != 66:
            raise ValueError(f"bad field element hex: {text!r}")
        return cls.from_bytes(bytes.fromhex(text[2:]))

    @classmethod
    def reduce(cls, n: int) -> "FieldElement":
        return cls(n % FIELD_MODULUS)


def hash_to_field(m: bytes) -> FieldElement:
    """SHA-256 of ``m`` interpreted big-endian and reduced into the field."""
    digest = hashlib.sha256(m).digest()
    return FieldElement(int.from_bytes(digest, "big") % FIELD_MODULUS)


@dataclass(frozen=True, slots=True)
class Address:
    """A 20-byte account identifier."""

    raw: bytes

    def __post_init__(self):
        if not isinstance(self.raw, bytes) or len(self.raw) != ADDRESS_SIZE:
            raise ValueError("address must be exactly 20 bytes")

    def to_hex(self) -> str:
        return "0x" + self.raw.hex()

    @classmethod
    def from_hex(cls, text: str) -> "Address":
        if not text.startswith("0x") or len(text) != 2 + 2 * ADDRESS_SIZE:
            raise ValueError(f"bad address hex: {text!r}")
        return cls(bytes.fromhex(text[2:]))


@dataclass(frozen=True, slots=True)
class EventId:
    """One game's scope tag: contract address plus a per-game nonce."""

    contract_address: Address
    nonce: int

    def __post_init__(self):
        if not 0 <= self.nonce < 2**256:
            raise ValueError("event nonce out of range")

    def encode(self) -> bytes:
        return self.contract_address.raw + self.nonce.to_bytes(NONCE_SIZE, "big")

    @classmethod
    def decode(cls, raw: bytes) -> "EventId":
        if len(raw) != EVENT_ID_SIZE:
            raise ValueError("event id encoding must be 52 bytes")
        return cls(Address(raw[:ADDRESS_SIZE]), int.from_bytes(raw[ADDRESS_SIZE:], "big"))


def build_message(address: Address, event_id: EventId) -> bytes:
    """The byte string each participant signs: their address followed by the event id."""
    return address.raw + event_id.encode()
