"""The on-chain-equivalent state machine.

One instance runs one game: registration of the participant set, the
signature-commitment round, anonymous randomness submission via relayed
transactions, and receiver disclosure.  Transactions are applied strictly
sequentially; every application yields a receipt, and rejected calls
leave the state untouched (revert semantics).
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from enum import Enum

from .primitives import Address, EventId, FieldElement, hash_to_field
from .relations import (
    RECEIVER,
    SENDER,
    Proof,
    ReceiverPublicInputs,
    SenderPublicInputs,
    StructuralError,
)
from .smt import DEFAULT_DEPTH, DuplicateKeyError, SparseMerkleTree


class Phase(Enum):
    SETUP = "SETUP"
    COMMIT = "COMMIT"
    DETERMINE = "DETERMINE"
    DISCLOSE = "DISCLOSE"
    COMPLETE = "COMPLETE"


class Status(Enum):
    ACCEPTED = "ACCEPTED"
    REVERTED = "REVERTED"


@dataclass(frozen=True, slots=True)
class Receipt:
    status: Status
    reason: str | None = None

    @property
    def accepted(self) -> bool:
        return self.status is Status.ACCEPTED

    def to_dict(self) -> dict:
        return {"status": self.status.value, "reason": self.reason}


def accepted() -> Receipt:
    return Receipt(Status.ACCEPTED)


def reverted(reason: str) -> Receipt:
    return Receipt(Status.REVERTED, reason)


@dataclass(slots=True)
class SenderEntry:
    randomness: FieldElement
    nullifier: FieldElement
    rsa_public_key: bytes | None
    assigned_receiver: Address | None = None
    encrypted_delivery_address: bytes | None = None

    def to_dict(self) -> dict:
        return {
            "randomness": self.randomness.to_hex(),
            "nullifier": self.nullifier.to_hex(),
            "rsa_public_key": (
                base64.b64encode(self.rsa_public_key).decode()
                if self.rsa_public_key is not None
                else None
            ),
            "assigned_receiver": (
                self.assigned_receiver.to_hex() if self.assigned_receiver is not None else None
            ),
            "encrypted_delivery_address": (
                base64.b64encode(self.encrypted_delivery_address).decode()
                if self.encrypted_delivery_address is not None
                else None
            ),
        }


@dataclass(frozen=True, slots=True)
class Transaction:
    """One call against the contract.  ``origin`` is None for relayed calls."""

    call: str  # register | commit | submit_randomness | disclose
    origin: Address | None
    args: dict

    def public_summary(self) -> dict:
        """What a mempool observer sees: call, origin if present, public args."""
        summary = {"call": self.call, "origin": self.origin.to_hex() if self.origin else None}
        args = dict(self.args)
        publics = args.get("publics")
        if publics is not None:
            args["publics"] = publics.to_dict()
        proof = args.get("proof")
        if proof is not None:
            args["proof"] = json.loads(proof.to_json())
        if "addresses" in args:
            args["addresses"] = [a.to_hex() for a in args["addresses"]]
        if "commitment" in args:
            args["commitment"] = args["commitment"].to_hex()
        for key in ("rsa_public_key", "encrypted_delivery_address"):
            if args.get(key) is not None:
                args[key] = base64.b64encode(args[key]).decode()
        return {**summary, "args": args}


class ContractState:
    """Deterministic single-writer game state."""

    def __init__(
        self,
        event_id: EventId,
        backend,
        depth: int = DEFAULT_DEPTH,
        commit_step: bool = True,
    ):
        self.event_id = event_id
        self.backend = backend
        self.commit_step = commit_step
        self.participants = SparseMerkleTree(depth)
        self.commitments = SparseMerkleTree(depth)
        self.registered: list[Address] = []
        self.committed: set[Address] = set()
        self.senders: list[SenderEntry] = []
        self.spent_nullifiers: set[FieldElement] = set()
        self.disclosed_receivers: set[Address] = set()
        self.phase = Phase.SETUP
        self.tx_log: list[tuple[Transaction, Receipt]] = []

    # -- dispatch ----------------------------------------------------------

    def apply(self, tx: Transaction) -> Receipt:
        handler = {
            "register": self._register,
            "commit": self._commit,
            "submit_randomness": self._submit_randomness,
            "disclose": self._disclose,
        }.get(tx.call)
        if handler is None:
            raise StructuralError(f"unknown call: {tx.call}")
        receipt = handler(tx)
        self.tx_log.append((tx, receipt))
        return receipt

    # -- calls -------------------------------------------------------------

    def _register(self, tx: Transaction) -> Receipt:
        if self.phase is not Phase.SETUP:
            return reverted("phase")
        addresses = tx.args["addresses"]
        if len(addresses) < 2:
            return reverted("too-few")
        if len({a.raw for a in addresses}) != len(addresses):
            return reverted("duplicate")
        for address in addresses:
            index = hash_to_field(address.raw)
            try:
                self.participants.insert(index, index)
            except DuplicateKeyError:
                return reverted("duplicate")
        self.registered = list(addresses)
        self.phase = Phase.COMMIT if self.commit_step else Phase.DETERMINE
        return accepted()

    def _commit(self, tx: Transaction) -> Receipt:
        if self.phase is not Phase.COMMIT:
            return reverted("phase")
        origin: Address = tx.origin
        if origin is None:
            return reverted("no-origin")
        if origin not in self.registered:
            return reverted("not-participant")
        if origin in self.committed:
            return reverted("already-committed")
        commitment: FieldElement = tx.args["commitment"]
        try:
            self.commitments.insert(commitment, commitment)
        except DuplicateKeyError:
            return reverted("duplicate-commitment")
        self.committed.add(origin)
        if len(self.committed) == len(self.registered):
            self.phase = Phase.DETERMINE
        return accepted()

    def _submit_randomness(self, tx: Transaction) -> Receipt:
        if self.phase is not Phase.DETERMINE:
            return reverted("phase")
        if tx.origin is not None:
            return reverted("not-relayed")
        publics: SenderPublicInputs = tx.args["publics"]
        proof: Proof = tx.args["proof"]
        rsa_public_key: bytes | None = tx.args.get("rsa_public_key")
        if publics.event_id != self.event_id:
            return reverted("wrong-event")
        expected_root_c = self.commitments.root if self.commit_step else None
        if publics.root_p != self.participants.root or publics.root_c != expected_root_c:
            return reverted("stale-root")
        if rsa_public_key is not None and hash_to_field(rsa_public_key) != publics.r:
            return reverted("randomness-key-mismatch")
        if proof.relation != SENDER or not self.backend.verify(proof, publics):
            return reverted("bad-proof")
        if publics.null_s in self.spent_nullifiers:
            return reverted("nullifier-spent")
        self.senders.append(
            SenderEntry(
                randomness=publics.r,
                nullifier=publics.null_s,
                rsa_public_key=rsa_public_key,
            )
        )
        self.spent_nullifiers.add(publics.null_s)
        if len(self.senders) == len(self.registered):
            self.phase = Phase.DISCLOSE
        return accepted()

    def _disclose(self, tx: Transaction) -> Receipt:
        if self.phase is not Phase.DISCLOSE:
            return reverted("phase")
        origin: Address = tx.origin
        if origin is None:
            return reverted("no-origin")
        publics: ReceiverPublicInputs = tx.args["publics"]
        proof: Proof = tx.args["proof"]
        if publics.address != origin:
            return reverted("origin-mismatch")
        if origin not in self.registered:
            return reverted("not-participant")
        if origin in self.disclosed_receivers:
            return reverted("already-disclosed")
        entry = next((e for e in self.senders if e.nullifier == publics.null_s), None)
        if entry is None:
            return reverted("no-such-sender")
        if proof.relation != RECEIVER or not self.backend.verify(proof, publics):
            return reverted("bad-proof")
        if entry.assigned_receiver is not None:
            return reverted("collision")
        entry.assigned_receiver = origin
        entry.encrypted_delivery_address = tx.args.get("encrypted_delivery_address")
        self.disclosed_receivers.add(origin)
        if all(e.assigned_receiver is not None for e in self.senders):
            self.phase = Phase.COMPLETE
        return accepted()

    # -- views -------------------------------------------------------------

    def audit(self) -> bool:
        return self.participants.audit_root() and self.commitments.audit_root()

    def snapshot(self) -> dict:
        """Public view of the state.  Relayed origins never appear here."""
        return {
            "event_id": "0x" + self.event_id.encode().hex(),
            "phase": self.phase.value,
            "root_p": self.participants.root.to_hex(),
            "root_c": self.commitments.root.to_hex(),
            "commit_step": self.commit_step,
            "participants": [a.to_hex() for a in self.registered],
            "senders": [e.to_dict() for e in self.senders],
            "disclosed_receivers": sorted(a.to_hex() for a in self.disclosed_receivers),
        }

    def snapshot_json(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True, separators=(",", ":")) + "\n"

    def tx_log_lines(self) -> list[str]:
        return [
            json.dumps(
                {"tx": tx.public_summary(), "receipt": receipt.to_dict()},
                sort_keys=True,
                separators=(",", ":"),
            )
            for tx, receipt in self.tx_log
        ]
