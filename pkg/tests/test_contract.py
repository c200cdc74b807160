import hashlib

import pytest

from zkss.contract import ContractState, Phase, Status, Transaction
from zkss.primitives import Address, EventId, FieldElement, build_message, hash_to_field
from zkss.relations import (
    RECEIVER,
    SENDER,
    Proof,
    ReceiverPublicInputs,
    ReceiverWitness,
    SenderPublicInputs,
    SenderWitness,
    StructuralError,
    TransparentBackend,
)
from zkss.signing import KeyPair, commitment_hash, derive_nullifier, sign_deterministic

DEPTH = 32


class Harness:
    """Drives a fresh contract through the phases with three signers."""

    def __init__(self, commit_step=True, n=3):
        contract_address = Address(hashlib.sha256(b"harness-contract").digest()[:20])
        self.event_id = EventId(contract_address, 1)
        self.backend = TransparentBackend(b"harness-key")
        self.contract = ContractState(
            self.event_id, self.backend, depth=DEPTH, commit_step=commit_step
        )
        self.keys = [KeyPair.from_seed(b"harness-%d" % i) for i in range(n)]
        self.sigs = [
            sign_deterministic(k, build_message(k.address, self.event_id)) for k in self.keys
        ]
        self.nullifiers = [derive_nullifier(s) for s in self.sigs]

    def register(self, addresses=None):
        addresses = addresses if addresses is not None else [k.address for k in self.keys]
        return self.contract.apply(
            Transaction("register", self.keys[0].address, {"addresses": addresses})
        )

    def commit(self, i):
        return self.contract.apply(
            Transaction(
                "commit", self.keys[i].address, {"commitment": commitment_hash(self.sigs[i])}
            )
        )

    def commit_all(self):
        for i in range(len(self.keys)):
            assert self.commit(i).accepted

    def sender_submission(self, i, randomness=None):
        key, sig = self.keys[i], self.sigs[i]
        commit_step = self.contract.commit_step
        witness = SenderWitness(
            sig=sig,
            address=key.address,
            participant_proof=self.contract.participants.prove(hash_to_field(key.address.raw)),
            commitment_proof=(
                self.contract.commitments.prove(commitment_hash(sig)) if commit_step else None
            ),
        )
        publics = SenderPublicInputs(
            r=randomness if randomness is not None else hash_to_field(b"rand-%d" % i),
            event_id=self.event_id,
            root_p=self.contract.participants.root,
            root_c=self.contract.commitments.root if commit_step else None,
            null_s=self.nullifiers[i],
        )
        proof = self.backend.prove(SENDER, witness, publics)
        return proof, publics

    def submit(self, i, origin=None, rsa_public_key=None, publics_override=None):
        proof, publics = self.sender_submission(i)
        if publics_override is not None:
            publics = publics_override
        return self.contract.apply(
            Transaction(
                "submit_randomness",
                origin,
                {"proof": proof, "publics": publics, "rsa_public_key": rsa_public_key},
            )
        )

    def submit_all(self):
        for i in range(len(self.keys)):
            assert self.submit(i).accepted

    def disclose(self, receiver, target, origin=None):
        publics = ReceiverPublicInputs(
            address=self.keys[receiver].address,
            event_id=self.event_id,
            null_s=self.nullifiers[target],
        )
        proof = self.backend.prove(RECEIVER, ReceiverWitness(self.sigs[receiver]), publics)
        return self.contract.apply(
            Transaction(
                "disclose",
                origin if origin is not None else self.keys[receiver].address,
                {"proof": proof, "publics": publics},
            )
        )


def test_register_happy_path():
    h = Harness()
    assert h.register().accepted
    assert h.contract.phase is Phase.COMMIT
    assert h.contract.participants.contains(hash_to_field(h.keys[0].address.raw))


def test_register_too_few():
    h = Harness()
    receipt = h.register([h.keys[0].address])
    assert receipt.reason == "too-few"
    assert h.contract.phase is Phase.SETUP


def test_register_duplicate_address():
    h = Harness()
    receipt = h.register([h.keys[0].address, h.keys[0].address, h.keys[1].address])
    assert receipt.reason == "duplicate"


def test_register_wrong_phase():
    h = Harness()
    h.register()
    assert h.register().reason == "phase"


def test_register_skips_commit_when_disabled():
    h = Harness(commit_step=False)
    h.register()
    assert h.contract.phase is Phase.DETERMINE


def test_commit_flow():
    h = Harness()
    h.register()
    assert h.commit(0).accepted
    assert h.commit(0).reason == "already-committed"
    assert h.commit(1).accepted
    assert h.contract.phase is Phase.COMMIT
    assert h.commit(2).accepted
    assert h.contract.phase is Phase.DETERMINE


def test_commit_rejects_outsiders_and_relays():
    h = Harness()
    h.register()
    stranger = KeyPair.from_seed(b"stranger")
    receipt = h.contract.apply(
        Transaction("commit", stranger.address, {"commitment": FieldElement(1)})
    )
    assert receipt.reason == "not-participant"
    receipt = h.contract.apply(Transaction("commit", None, {"commitment": FieldElement(1)}))
    assert receipt.reason == "no-origin"


def test_commit_duplicate_commitment():
    h = Harness()
    h.register()
    h.commit(0)
    receipt = h.contract.apply(
        Transaction("commit", h.keys[1].address, {"commitment": commitment_hash(h.sigs[0])})
    )
    assert receipt.reason == "duplicate-commitment"


def test_submit_happy_path_and_phase_turn():
    h = Harness()
    h.register()
    h.commit_all()
    assert h.submit(0).accepted
    assert h.contract.phase is Phase.DETERMINE
    assert h.submit(1).accepted
    assert h.submit(2).accepted
    assert h.contract.phase is Phase.DISCLOSE
    assert len(h.contract.senders) == 3


def test_submit_rejects_origin():
    h = Harness()
    h.register()
    h.commit_all()
    receipt = h.submit(0, origin=h.keys[0].address)
    assert receipt.reason == "not-relayed"


def test_submit_wrong_event():
    h = Harness()
    h.register()
    h.commit_all()
    proof, publics = h.sender_submission(0)
    other = SenderPublicInputs(
        r=publics.r,
        event_id=EventId(h.event_id.contract_address, 999),
        root_p=publics.root_p,
        root_c=publics.root_c,
        null_s=publics.null_s,
    )
    receipt = h.contract.apply(
        Transaction("submit_randomness", None, {"proof": proof, "publics": other})
    )
    assert receipt.reason == "wrong-event"


def test_submit_stale_root():
    h = Harness()
    h.register()
    h.commit(0)
    h.commit(1)
    # capture a submission against the pre-final commitment root
    proof, publics = h.sender_submission(0)
    h.commit(2)
    receipt = h.contract.apply(
        Transaction("submit_randomness", None, {"proof": proof, "publics": publics})
    )
    assert receipt.reason == "stale-root"


def test_submit_randomness_key_mismatch():
    h = Harness()
    h.register()
    h.commit_all()
    receipt = h.submit(0, rsa_public_key=b"\x01" * 260)
    assert receipt.reason == "randomness-key-mismatch"


def test_submit_bound_rsa_key_accepted():
    h = Harness()
    h.register()
    h.commit_all()
    key_bytes = b"\x02" * 260
    proof_publics = None
    key, sig = h.keys[0], h.sigs[0]
    witness = SenderWitness(
        sig=sig,
        address=key.address,
        participant_proof=h.contract.participants.prove(hash_to_field(key.address.raw)),
        commitment_proof=h.contract.commitments.prove(commitment_hash(sig)),
    )
    publics = SenderPublicInputs(
        r=hash_to_field(key_bytes),
        event_id=h.event_id,
        root_p=h.contract.participants.root,
        root_c=h.contract.commitments.root,
        null_s=h.nullifiers[0],
    )
    proof = h.backend.prove(SENDER, witness, publics)
    receipt = h.contract.apply(
        Transaction(
            "submit_randomness",
            None,
            {"proof": proof, "publics": publics, "rsa_public_key": key_bytes},
        )
    )
    assert receipt.accepted
    assert h.contract.senders[0].rsa_public_key == key_bytes


def test_submit_forged_proof():
    h = Harness()
    h.register()
    h.commit_all()
    _, publics = h.sender_submission(0)
    forged = Proof(SENDER, publics.serialize(), b"\x00" * 64)
    receipt = h.contract.apply(
        Transaction("submit_randomness", None, {"proof": forged, "publics": publics})
    )
    assert receipt.reason == "bad-proof"


def test_submit_replay_is_nullifier_spent():
    h = Harness()
    h.register()
    h.commit_all()
    proof, publics = h.sender_submission(0)
    tx = Transaction("submit_randomness", None, {"proof": proof, "publics": publics})
    assert h.contract.apply(tx).accepted
    assert h.contract.apply(tx).reason == "nullifier-spent"


def test_disclose_flow_to_complete():
    h = Harness()
    h.register()
    h.commit_all()
    h.submit_all()
    assert h.disclose(0, 1).accepted
    assert h.disclose(1, 2).accepted
    assert h.contract.phase is Phase.DISCLOSE
    assert h.disclose(2, 0).accepted
    assert h.contract.phase is Phase.COMPLETE
    receivers = [e.assigned_receiver for e in h.contract.senders]
    assert sorted(a.raw for a in receivers) == sorted(k.address.raw for k in h.keys)


def test_disclose_collision_first_tx_wins():
    h = Harness()
    h.register()
    h.commit_all()
    h.submit_all()
    assert h.disclose(0, 1).accepted
    assert h.disclose(2, 1).reason == "collision"
    assert h.contract.senders[1].assigned_receiver == h.keys[0].address


def test_disclose_origin_mismatch():
    h = Harness()
    h.register()
    h.commit_all()
    h.submit_all()
    receipt = h.disclose(0, 1, origin=h.keys[2].address)
    assert receipt.reason == "origin-mismatch"


def test_disclose_unknown_sender_slot():
    h = Harness()
    h.register()
    h.commit_all()
    h.submit_all()
    publics = ReceiverPublicInputs(
        address=h.keys[0].address,
        event_id=h.event_id,
        null_s=FieldElement(424242),
    )
    forged = Proof(RECEIVER, publics.serialize(), b"\x00" * 64)
    receipt = h.contract.apply(
        Transaction("disclose", h.keys[0].address, {"proof": forged, "publics": publics})
    )
    assert receipt.reason == "no-such-sender"


def test_disclose_forged_self_pick_is_bad_proof():
    h = Harness()
    h.register()
    h.commit_all()
    h.submit_all()
    publics = ReceiverPublicInputs(
        address=h.keys[0].address,
        event_id=h.event_id,
        null_s=h.nullifiers[0],
    )
    forged = Proof(RECEIVER, publics.serialize(), b"\xff" * 64)
    receipt = h.contract.apply(
        Transaction("disclose", h.keys[0].address, {"proof": forged, "publics": publics})
    )
    assert receipt.reason == "bad-proof"


def test_disclose_double_disclosure():
    h = Harness()
    h.register()
    h.commit_all()
    h.submit_all()
    h.disclose(0, 1)
    assert h.disclose(0, 2).reason == "already-disclosed"


def test_reverts_leave_state_untouched():
    h = Harness()
    h.register()
    h.commit_all()
    h.submit_all()
    before = h.contract.snapshot_json()
    h.disclose(0, 1, origin=h.keys[2].address)  # origin-mismatch revert
    assert h.contract.snapshot_json() == before


def test_unknown_call_raises():
    h = Harness()
    with pytest.raises(StructuralError):
        h.contract.apply(Transaction("selfdestruct", None, {}))


def test_tx_log_and_snapshot_shapes():
    h = Harness()
    h.register()
    h.commit_all()
    h.submit_all()
    h.disclose(0, 1)
    lines = h.contract.tx_log_lines()
    assert len(lines) == len(h.contract.tx_log) == 1 + 3 + 3 + 1
    snapshot = h.contract.snapshot()
    assert snapshot["phase"] == "DISCLOSE"
    assert len(snapshot["senders"]) == 3
    assert h.contract.audit()


def test_relayed_origin_absent_from_log():
    h = Harness()
    h.register()
    h.commit_all()
    h.submit_all()
    submit_lines = [l for l in h.contract.tx_log_lines() if "submit_randomness" in l]
    assert len(submit_lines) == 3
    for line in submit_lines:
        assert '"origin":null' in line


def test_no_commit_mode_end_to_end():
    h = Harness(commit_step=False)
    h.register()
    h.submit_all()
    assert h.contract.phase is Phase.DISCLOSE
    h.disclose(0, 2)
    h.disclose(2, 1)
    h.disclose(1, 0)
    assert h.contract.phase is Phase.COMPLETE
