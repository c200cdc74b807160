"""Relation checks and the pluggable proving backend.

Two relations are proven in the protocol: the sender relation (a signer
is a registered participant, committed to exactly this signature, and
their nullifier matches) and the receiver relation (a signer is who they
claim to be and is not targeting their own sender slot).

The shipped backend is transparent: it runs the relation check at prove
time and emits a MAC over the relation tag, the public inputs and a hash
commitment to the witness transcript.  The MAC key stands in for SNARK
soundness; holders of the verifying key cannot mint proofs for
unsatisfied relations without the prover running the check, and the blob
carries no recoverable witness bytes.
"""

from __future__ import annotations

import hashlib
import hmac
import json
from dataclasses import dataclass

from .primitives import Address, EventId, FieldElement, build_message, hash_to_field
from .signing import (
    MalleabilityError,
    RecoveryError,
    Signature,
    commitment_hash,
    derive_nullifier,
    ecrecover,
)
from .smt import MerkleProof, merkle_verify

SENDER = "SENDER"
RECEIVER = "RECEIVER"

_TAG_BYTES = {SENDER: b"\x01", RECEIVER: b"\x02"}


class StructuralError(Exception):
    """Malformed inputs, as opposed to a well-formed but unsatisfied relation."""


class UnsatisfiedRelationError(Exception):
    """The honest prover refuses to prove an unsatisfied relation."""


@dataclass(frozen=True, slots=True)
class SenderWitness:
    sig: Signature
    address: Address
    participant_proof: MerkleProof
    commitment_proof: MerkleProof | None  # None when the commitment step is disabled


@dataclass(frozen=True, slots=True)
class SenderPublicInputs:
    r: FieldElement
    event_id: EventId
    root_p: FieldElement
    root_c: FieldElement | None  # None when the commitment step is disabled
    null_s: FieldElement

    def serialize(self) -> bytes:
        root_c = self.root_c.to_bytes() if self.root_c is not None else b"\x00"
        return (
            self.r.to_bytes()
            + self.event_id.encode()
            + self.root_p.to_bytes()
            + root_c
            + self.null_s.to_bytes()
        )

    def to_dict(self) -> dict:
        return {
            "r": self.r.to_hex(),
            "event_id": "0x" + self.event_id.encode().hex(),
            "root_p": self.root_p.to_hex(),
            "root_c": self.root_c.to_hex() if self.root_c is not None else None,
            "null_s": self.null_s.to_hex(),
        }


@dataclass(frozen=True, slots=True)
class ReceiverWitness:
    sig: Signature


@dataclass(frozen=True, slots=True)
class ReceiverPublicInputs:
    address: Address
    event_id: EventId
    null_s: FieldElement  # the targeted sender's nullifier

    def serialize(self) -> bytes:
        return self.address.raw + self.event_id.encode() + self.null_s.to_bytes()

    def to_dict(self) -> dict:
        return {
            "address": self.address.to_hex(),
            "event_id": "0x" + self.event_id.encode().hex(),
            "null_s": self.null_s.to_hex(),
        }


@dataclass(frozen=True, slots=True)
class Proof:
    relation: str
    public_inputs: bytes
    blob: bytes

    def to_json(self) -> str:
        return json.dumps(
            {
                "relation": self.relation,
                "public_inputs": "0x" + self.public_inputs.hex(),
                "blob": "0x" + self.blob.hex(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Proof":
        data = json.loads(text)
        return cls(
            relation=data["relation"],
            public_inputs=bytes.fromhex(data["public_inputs"][2:]),
            blob=bytes.fromhex(data["blob"][2:]),
        )


def check_sender_relation(
    w: SenderWitness, x: SenderPublicInputs
) -> tuple[bool, FieldElement]:
    """All-clauses check for the sender relation.

    Returns (satisfied, anchored randomness).  The anchor is r squared in
    the field; it is always computed so the prover folds it into the
    transcript, binding r into the proof.
    """
    if not isinstance(w, SenderWitness) or not isinstance(x, SenderPublicInputs):
        raise StructuralError("sender relation inputs have wrong types")
    if (w.commitment_proof is None) != (x.root_c is None):
        raise StructuralError("commitment proof and commitment root must be paired")
    anchor = FieldElement.reduce(x.r.value * x.r.value)

    if derive_nullifier(w.sig) != x.null_s:
        return False, anchor
    message = build_message(w.address, x.event_id)
    try:
        recovered = ecrecover(w.sig, message)
    except (MalleabilityError, RecoveryError):
        return False, anchor
    if recovered != w.address:
        return False, anchor
    if not merkle_verify(hash_to_field(w.address.raw), w.participant_proof, x.root_p):
        return False, anchor
    if x.root_c is not None:
        if not merkle_verify(commitment_hash(w.sig), w.commitment_proof, x.root_c):
            return False, anchor
    return True, anchor


def check_receiver_relation(w: ReceiverWitness, x: ReceiverPublicInputs) -> bool:
    """All-clauses check for the receiver relation.

    The receiver's own nullifier is derived and compared privately; it
    never appears in any output.
    """
    if not isinstance(w, ReceiverWitness) or not isinstance(x, ReceiverPublicInputs):
        raise StructuralError("receiver relation inputs have wrong types")
    own_nullifier = derive_nullifier(w.sig)
    message = build_message(x.address, x.event_id)
    try:
        recovered = ecrecover(w.sig, message)
    except (MalleabilityError, RecoveryError):
        return False
    if recovered != x.address:
        return False
    return own_nullifier != x.null_s


class TransparentBackend:
    """Witness-checking stand-in for a SNARK proving system.

    The MAC key models the soundness assumption: only the backend itself
    (playing both prover and on-chain verifier) can produce blobs that
    verify, and it only does so after the relation check passes.
    """

    def __init__(self, key: bytes):
        if not key:
            raise ValueError("backend key must be non-empty")
        self._key = key

    def _witness_transcript(self, relation: str, witness, anchor: FieldElement | None) -> bytes:
        if relation == SENDER:
            parts = [witness.sig.to_bytes(), witness.address.raw]
            parts.append(witness.participant_proof.to_json().encode())
            if witness.commitment_proof is not None:
                parts.append(witness.commitment_proof.to_json().encode())
            parts.append(anchor.to_bytes())
        else:
            parts = [witness.sig.to_bytes()]
        return hashlib.sha256(b"\x00".join(parts)).digest()

    def _mac(self, relation: str, public_inputs: bytes, transcript: bytes) -> bytes:
        return hmac.new(
            self._key, _TAG_BYTES[relation] + public_inputs + transcript, hashlib.sha256
        ).digest()

    def prove(self, relation: str, witness, public_inputs) -> Proof:
        if relation == SENDER:
            satisfied, anchor = check_sender_relation(witness, public_inputs)
        elif relation == RECEIVER:
            satisfied, anchor = check_receiver_relation(witness, public_inputs), None
        else:
            raise StructuralError(f"unknown relation tag: {relation}")
        if not satisfied:
            raise UnsatisfiedRelationError(f"{relation} relation is not satisfied")
        serialized = public_inputs.serialize()
        transcript = self._witness_transcript(relation, witness, anchor)
        return Proof(
            relation=relation,
            public_inputs=serialized,
            blob=transcript + self._mac(relation, serialized, transcript),
        )

    def verify(self, proof: Proof, expected_public_inputs) -> bool:
        if proof.relation not in _TAG_BYTES:
            raise StructuralError(f"unknown relation tag: {proof.relation}")
        if proof.public_inputs != expected_public_inputs.serialize():
            return False
        if len(proof.blob) != 64:
            return False
        transcript, mac = proof.blob[:32], proof.blob[32:]
        return hmac.compare_digest(mac, self._mac(proof.relation, proof.public_inputs, transcript))


def prove(relation: str, witness, public_inputs, backend) -> Proof:
    return backend.prove(relation, witness, public_inputs)


def verify(proof: Proof, expected_public_inputs, backend) -> bool:
    return backend.verify(proof, expected_public_inputs)
