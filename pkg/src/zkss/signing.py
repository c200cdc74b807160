"""Deterministic ECDSA over secp256k1: keys, RFC 6979 signing, address
recovery, signature commitments and nullifiers.

The curve arithmetic is self-contained (Jacobian coordinates, windowed
fixed-base table for the generator) because the protocol's double-spend
and commitment logic hangs directly off signature internals: nullifiers
are ``hash(sig.s)`` and commitments are ``hash(sig)``, so the signature
representation cannot be left to a library's discretion.

Honest signers normalize to low-s; every verification boundary rejects
high-s outright rather than normalizing, which kills the (r, order - s)
malleability twin.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass

from .primitives import Address, FieldElement, hash_to_field

# secp256k1 parameters
P = 2**256 - 2**32 - 977
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
HALF_N = (N - 1) // 2
GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8


class RecoveryError(Exception):
    """ecrecover hit a degenerate case (bad r, point at infinity, ...)."""


class MalleabilityError(Exception):
    """A high-s signature reached a verification boundary."""


# ---------------------------------------------------------------------------
# Curve arithmetic (Jacobian coordinates; point at infinity is Z == 0)

def _jdouble(X, Y, Z):
    if Y == 0 or Z == 0:
        return (0, 0, 0)
    S = (4 * X * Y * Y) % P
    M = (3 * X * X) % P  # a == 0 for secp256k1
    X2 = (M * M - 2 * S) % P
    Y2 = (M * (S - X2) - 8 * pow(Y, 4, P)) % P
    Z2 = (2 * Y * Z) % P
    return (X2, Y2, Z2)


def _jadd(X1, Y1, Z1, X2, Y2, Z2):
    if Z1 == 0:
        return (X2, Y2, Z2)
    if Z2 == 0:
        return (X1, Y1, Z1)
    Z1Z1 = Z1 * Z1 % P
    Z2Z2 = Z2 * Z2 % P
    U1 = X1 * Z2Z2 % P
    U2 = X2 * Z1Z1 % P
    S1 = Y1 * Z2 * Z2Z2 % P
    S2 = Y2 * Z1 * Z1Z1 % P
    if U1 == U2:
        if S1 != S2:
            return (0, 0, 0)
        return _jdouble(X1, Y1, Z1)
    H = (U2 - U1) % P
    R = (S2 - S1) % P
    HH = H * H % P
    HHH = H * HH % P
    V = U1 * HH % P
    X3 = (R * R - HHH - 2 * V) % P
    Y3 = (R * (V - X3) - S1 * HHH) % P
    Z3 = Z1 * Z2 * H % P
    return (X3, Y3, Z3)


def _to_affine(X, Y, Z):
    if Z == 0:
        return None
    zinv = pow(Z, P - 2, P)
    z2 = zinv * zinv % P
    return (X * z2 % P, Y * z2 * zinv % P)


def _jmul(k, point):
    x, y = point
    R = (0, 0, 0)
    Q = (x, y, 1)
    while k:
        if k & 1:
            R = _jadd(*R, *Q)
        Q = _jdouble(*Q)
        k >>= 1
    return R


# 4-bit windowed table for the generator: table[w][d] = (16^w * d) * G.
def _build_g_table():
    table = []
    base = (GX, GY, 1)
    for _ in range(64):
        row = [(0, 0, 0)]
        for _ in range(15):
            row.append(_jadd(*row[-1], *base))
        table.append(row)
        base = row[1]
        for _ in range(4):
            base = _jdouble(*base)
        # base is now 16^(w+1) * G
        base = _to_affine(*base)
        base = (base[0], base[1], 1)
    return table


_G_TABLE = _build_g_table()


def _jmul_g(k):
    R = (0, 0, 0)
    w = 0
    while k:
        d = k & 15
        if d:
            R = _jadd(*R, *_G_TABLE[w][d])
        k >>= 4
        w += 1
    return R


def scalar_mult_g(k: int):
    """k * G in affine coordinates (None for infinity)."""
    return _to_affine(*_jmul_g(k % N))


def scalar_mult(k: int, point):
    """k * point in affine coordinates (None for infinity)."""
    return _to_affine(*_jmul(k % N, point))


# ---------------------------------------------------------------------------
# Keys and signatures

def derive_address(public_key) -> Address:
    """Last 20 bytes of the hash of the uncompressed public key."""
    x, y = public_key
    digest = hashlib.sha3_256(x.to_bytes(32, "big") + y.to_bytes(32, "big")).digest()
    return Address(digest[-20:])


@dataclass(frozen=True, slots=True)
class KeyPair:
    secret_key: int
    public_key: tuple[int, int]
    address: Address

    @classmethod
    def from_secret(cls, secret: int) -> "KeyPair":
        if not 1 <= secret < N:
            raise ValueError("secret key out of range")
        pub = scalar_mult_g(secret)
        return cls(secret_key=secret, public_key=pub, address=derive_address(pub))

    @classmethod
    def from_seed(cls, seed: bytes) -> "KeyPair":
        secret = 1 + int.from_bytes(hashlib.sha256(b"zkss-key" + seed).digest(), "big") % (N - 1)
        return cls.from_secret(secret)


@dataclass(frozen=True, slots=True)
class Signature:
    """ECDSA triple.  Construction permits high-s so that malleability
    tests can build the mirrored twin; verification boundaries reject it."""

    r: int
    s: int
    recovery_id: int

    def __post_init__(self):
        if not 1 <= self.r < N or not 1 <= self.s < N:
            raise ValueError("signature scalars out of range")
        if self.recovery_id not in (0, 1):
            raise ValueError("recovery id must be 0 or 1")

    @property
    def is_low_s(self) -> bool:
        return self.s <= HALF_N

    def mirrored(self) -> "Signature":
        """The (r, order - s) malleability twin."""
        return Signature(self.r, N - self.s, self.recovery_id ^ 1)

    def to_bytes(self) -> bytes:
        return self.r.to_bytes(32, "big") + self.s.to_bytes(32, "big") + bytes([self.recovery_id])

    def to_hex(self) -> str:
        return "0x" + self.to_bytes().hex()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Signature":
        if len(raw) != 65:
            raise ValueError("signature encoding must be 65 bytes")
        return cls(
            int.from_bytes(raw[:32], "big"),
            int.from_bytes(raw[32:64], "big"),
            raw[64],
        )

    @classmethod
    def from_hex(cls, text: str) -> "Signature":
        if not text.startswith("0x"):
            raise ValueError("signature hex must be 0x-prefixed")
        return cls.from_bytes(bytes.fromhex(text[2:]))


def _message_scalar(message: bytes) -> int:
    return int.from_bytes(hashlib.sha256(message).digest(), "big") % N


def _rfc6979_nonce(secret: int, z: int, extra_retries: int = 0):
    """Deterministic nonce per RFC 6979 (HMAC-SHA256).

    ``extra_retries`` continues the generator past the first candidate,
    which is how the retry loop in signing picks the next nonce.
    """
    key_bytes = secret.to_bytes(32, "big")
    msg_bytes = (z % N).to_bytes(32, "big")
    v = b"\x01" * 32
    k = b"\x00" * 32
    k = hmac.new(k, v + b"\x00" + key_bytes + msg_bytes, hashlib.sha256).digest()
    v = hmac.new(k, v, hashlib.sha256).digest()
    k = hmac.new(k, v + b"\x01" + key_bytes + msg_bytes, hashlib.sha256).digest()
    v = hmac.new(k, v, hashlib.sha256).digest()
    skipped = 0
    while True:
        v = hmac.new(k, v, hashlib.sha256).digest()
        candidate = int.from_bytes(v, "big")
        if 1 <= candidate < N:
            if skipped == extra_retries:
                return candidate
            skipped += 1
        k = hmac.new(k, v + b"\x00", hashlib.sha256).digest()
        v = hmac.new(k, v, hashlib.sha256).digest()


def _sign_with_nonce(secret: int, z: int, k: int) -> Signature | None:
    point = scalar_mult_g(k)
    if point is None:
        return None
    rx, ry = point
    r = rx % N
    if r == 0 or rx >= N:
        # rx >= N would need recovery ids 2/3, which ecrecover here does
        # not model; probability ~ 2^-128, retry the nonce instead.
        return None
    s = pow(k, N - 2, N) * (z + r * secret) % N
    if s == 0:
        return None
    recovery_id = ry & 1
    if s > HALF_N:
        s = N - s
        recovery_id ^= 1
    return Signature(r, s, recovery_id)


def sign_deterministic(key: KeyPair, message: bytes) -> Signature:
    """RFC 6979 signature over sha256(message), normalized to low-s."""
    z = _message_scalar(message)
    retries = 0
    while True:
        k = _rfc6979_nonce(key.secret_key, z, retries)
        sig = _sign_with_nonce(key.secret_key, z, k)
        if sig is not None:
            return sig
        retries += 1


def sign_with_nonce(key: KeyPair, message: bytes, nonce: int) -> Signature:
    """Sign with a caller-chosen nonce.  Exists for the non-deterministic
    signer in attack simulations; honest flows use sign_deterministic."""
    if not 1 <= nonce < N:
        raise ValueError("nonce out of range")
    sig = _sign_with_nonce(key.secret_key, _message_scalar(message), nonce)
    if sig is None:
        raise ValueError("degenerate nonce for this message")
    return sig


def ecrecover(sig: Signature, message: bytes) -> Address:
    """Recover the signer's address; rejects high-s signatures."""
    if not sig.is_low_s:
        raise MalleabilityError("high-s signature rejected")
    z = _message_scalar(message)
    x = sig.r
    if x >= P:
        raise RecoveryError("r does not name a curve x-coordinate")
    alpha = (pow(x, 3, P) + 7) % P
    y = pow(alpha, (P + 1) // 4, P)
    if y * y % P != alpha:
        raise RecoveryError("r is not on the curve")
    if y & 1 != sig.recovery_id:
        y = P - y
    r_inv = pow(sig.r, N - 2, N)
    # Q = (r^-1 * s) * R + (r^-1 * -z) * G, as one interleaved multiplication
    u1 = (-z) * r_inv % N
    u2 = sig.s * r_inv % N
    Q = _to_affine(*_jmul_double(u1, u2, (x, y)))
    if Q is None:
        raise RecoveryError("recovered point at infinity")
    return derive_address(Q)


def _jmul_double(a, b, point):
    """a*G + b*point via a shared double-and-add ladder."""
    x, y = point
    gp = _jadd(GX, GY, 1, x, y, 1)
    R = (0, 0, 0)
    for i in range(max(a.bit_length(), b.bit_length()) - 1, -1, -1):
        R = _jdouble(*R)
        abit = (a >> i) & 1
        bbit = (b >> i) & 1
        if abit and bbit:
            R = _jadd(*R, *gp)
        elif abit:
            R = _jadd(*R, GX, GY, 1)
        elif bbit:
            R = _jadd(*R, x, y, 1)
    return R


def _affine_of(jac):
    pt = _to_affine(*jac)
    if pt is None:
        raise RecoveryError("recovered point at infinity")
    return pt


def commitment_hash(sig: Signature) -> FieldElement:
    """H = hash of the canonical 65-byte signature serialization."""
    return hash_to_field(sig.to_bytes())


def derive_nullifier(sig: Signature) -> FieldElement:
    """null = hash of the 32-byte big-endian s scalar."""
    return hash_to_field(sig.s.to_bytes(32, "big"))
