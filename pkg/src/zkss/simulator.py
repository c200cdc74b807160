"""End-to-end game orchestration and attack scenarios.

Runs the full three-step flow (register, commit, determine, disclose)
with scripted participants, optionally driving one of the known attack
scripts, then checks the end state: the assignment must be a
fixed-point-free permutation, and the public artifacts must not link any
honest participant to their own sender slot.

Everything is derived from the 64-bit game seed: keys, signatures,
submission order, receiver picks and envelope padding.  Re-running a
config reproduces the transaction log and report byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import random
import struct
import time
from dataclasses import dataclass
from pathlib import Path

from . import envelope as env
from .contract import ContractState, Phase, Receipt, Transaction
from .primitives import Address, EventId, FieldElement, build_message, hash_to_field
from .relations import (
    RECEIVER,
    SENDER,
    Proof,
    ReceiverPublicInputs,
    ReceiverWitness,
    SenderPublicInputs,
    SenderWitness,
    TransparentBackend,
)
from .relayer import Mempool, relay, relay_log_lines
from .signing import N, KeyPair, Signature, sign_deterministic, sign_with_nonce
from .smt import DEFAULT_DEPTH

ATTACKS = ("MALLEABLE_SIG", "DOUBLE_NULLIFIER", "SELF_PICK", "FRONTRUN", "STALE_ROOT")

# Index of the scripted adversary when an attack is configured.
ADVERSARY_INDEX = 0


@dataclass(frozen=True, slots=True)
class GameConfig:
    n: int
    seed: int
    adversary: str | None = None
    commit_step: bool = True
    use_envelopes: bool = True
    depth: int = DEFAULT_DEPTH

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least 2 participants")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.adversary is not None and self.adversary not in ATTACKS:
            raise ValueError(f"unknown adversary script: {self.adversary}")


@dataclass(slots=True)
class ParticipantSecret:
    """Simulator-private ground truth for one participant."""

    index: int
    keypair: KeyPair
    sig: Signature
    nullifier: FieldElement
    randomness: FieldElement
    rsa: env.RsaKeyPair | None
    delivery_address: bytes


@dataclass(slots=True)
class GameReport:
    """Outcome of one game plus the artifacts needed to verify it."""

    data: dict
    timing: dict
    snapshot: dict
    txlog_lines: list[str]
    relay_lines: list[str]
    ground_truth: list[ParticipantSecret]

    def to_json(self) -> str:
        # Timing is wall clock and deliberately not part of the canonical
        # report, so re-runs stay byte-identical.
        return json.dumps(self.data, sort_keys=True, separators=(",", ":")) + "\n"

    def write_artifacts(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "state.json").write_text(
            json.dumps(self.snapshot, sort_keys=True, separators=(",", ":")) + "\n"
        )
        (out / "txlog.jsonl").write_text("".join(line + "\n" for line in self.txlog_lines))
        (out / "relay.jsonl").write_text("".join(line + "\n" for line in self.relay_lines))
        (out / "report.json").write_text(self.to_json())


def _seed_bytes(config: GameConfig) -> bytes:
    return struct.pack(">QI", config.seed, config.n)


def _derive(tag: bytes, *parts: bytes) -> bytes:
    return hashlib.sha256(b"zkss-sim/" + tag + b"/" + b"/".join(parts)).digest()


def _receipt_key(receipt: Receipt) -> str:
    return receipt.status.value if receipt.accepted else f"REVERTED({receipt.reason})"


class _Game:
    def __init__(self, config: GameConfig):
        self.config = config
        self.rng = random.Random(config.seed)
        base = _seed_bytes(config)
        contract_address = Address(_derive(b"contract", base)[-20:])
        self.event_id = EventId(contract_address, config.seed)
        self.backend = TransparentBackend(_derive(b"backend", base))
        self.contract = ContractState(
            self.event_id, self.backend, depth=config.depth, commit_step=config.commit_step
        )
        self.mempool = Mempool()
        self.relay_log: list[dict] = []
        self.timing: dict[str, float] = {}
        self.adversary = ADVERSARY_INDEX if config.adversary else None
        self.participants = [self._make_participant(base, i) for i in range(config.n)]
        self.adversary_stats = {
            "slots_occupied": 0,
            "victim_collisions": 0,
            "rejected_attempts": 0,
            "replay_nullifier_reverts": 0,
        }
        self.stalled = False
        self.stale_roots: tuple[FieldElement, FieldElement] | None = None
        self.stale_witness: SenderWitness | None = None

    def _make_participant(self, base: bytes, i: int) -> ParticipantSecret:
        keypair = KeyPair.from_seed(_derive(b"ecdsa", base, bytes([0]) + struct.pack(">I", i)))
        sig = sign_deterministic(keypair, build_message(keypair.address, self.event_id))
        nullifier = hash_to_field(sig.s.to_bytes(32, "big"))
        if self.config.use_envelopes:
            rsa = env.generate_rsa_keypair(_derive(b"rsa", base, struct.pack(">I", i)))
            randomness = rsa.randomness_anchor()
        else:
            rsa = None
            randomness = hash_to_field(b"zkss-raw-randomness" + sig.to_bytes())
        return ParticipantSecret(
            index=i,
            keypair=keypair,
            sig=sig,
            nullifier=nullifier,
            randomness=randomness,
            rsa=rsa,
            delivery_address=b"delivery address of participant %d (game %d)"
            % (i, self.config.seed),
        )

    # -- phases ------------------------------------------------------------

    def run(self) -> GameReport:
        self._timed("setup", self._setup)
        if self.config.commit_step:
            self._timed("commit", self._commit)
        self._timed("determine", self._determine)
        self._timed("disclose", self._disclose)
        return self._report()

    def _timed(self, name: str, step) -> None:
        start = time.perf_counter()
        step()
        self.timing[name] = time.perf_counter() - start

    def _setup(self) -> None:
        lead = self.participants[0]
        addresses = [p.keypair.address for p in self.participants]
        self.mempool.enqueue(
            Transaction(call="register", origin=lead.keypair.address, args={"addresses": addresses})
        )
        self.mempool.drain(self.contract)

    def _commit(self) -> None:
        order = list(self.participants)
        self.rng.shuffle(order)
        if self.config.adversary == "STALE_ROOT":
            # the adversary commits first so a proof against the stale
            # commitments root exists for them
            order.sort(key=lambda p: p.index != self.adversary)
        for position, participant in enumerate(order):
            commitment = hash_to_field(participant.sig.to_bytes())
            self.mempool.enqueue(
                Transaction(
                    call="commit",
                    origin=participant.keypair.address,
                    args={"commitment": commitment},
                )
            )
            self.mempool.drain(self.contract)
            if self.config.adversary == "STALE_ROOT" and position == len(order) - 2:
                # state as of just before the final commit
                adversary = self.participants[self.adversary]
                self.stale_roots = (
                    self.contract.participants.root,
                    self.contract.commitments.root,
                )
                self.stale_witness = SenderWitness(
                    sig=adversary.sig,
                    address=adversary.keypair.address,
                    participant_proof=self.contract.participants.prove(
                        hash_to_field(adversary.keypair.address.raw)
                    ),
                    commitment_proof=self.contract.commitments.prove(
                        hash_to_field(adversary.sig.to_bytes())
                    ),
                )

    def _sender_submission(self, participant: ParticipantSecret):
        address = participant.keypair.address
        witness = SenderWitness(
            sig=participant.sig,
            address=address,
            participant_proof=self.contract.participants.prove(hash_to_field(address.raw)),
            commitment_proof=(
                self.contract.commitments.prove(hash_to_field(participant.sig.to_bytes()))
                if self.config.commit_step
                else None
            ),
        )
        publics = SenderPublicInputs(
            r=participant.randomness,
            event_id=self.event_id,
            root_p=self.contract.participants.root,
            root_c=self.contract.commitments.root if self.config.commit_step else None,
            null_s=participant.nullifier,
        )
        proof = self.backend.prove(SENDER, witness, publics)
        key = participant.rsa.public_key_bytes() if participant.rsa else None
        return proof, publics, key

    def _determine(self) -> None:
        order = list(self.participants)
        self.rng.shuffle(order)
        defended_malleable = (
            self.config.adversary == "MALLEABLE_SIG" and self.config.commit_step
        )
        if defended_malleable:
            # put the adversary first so their extra attempts land while the
            # determination window is still open
            order.sort(key=lambda p: p.index != self.adversary)

        if self.config.adversary == "MALLEABLE_SIG" and not self.config.commit_step:
            self._malleable_sig_flood()

        for participant in order:
            if (
                self.config.adversary == "STALE_ROOT"
                and participant.index == self.adversary
                and self.stale_roots is not None
            ):
                self._stale_root_attempt(participant)
            submission = self._sender_submission(participant)
            relay(*submission, self.mempool, self.relay_log)
            receipts = self.mempool.drain(self.contract)
            accepted = receipts[-1].accepted
            if accepted and defended_malleable and participant.index == self.adversary:
                self._malleable_sig_defended()
            if (
                accepted
                and self.config.adversary == "DOUBLE_NULLIFIER"
                and self.contract.phase is Phase.DETERMINE
            ):
                # replay the just-accepted submission verbatim
                relay(*submission, self.mempool, self.relay_log)
                for receipt in self.mempool.drain(self.contract):
                    if receipt.reason == "nullifier-spent":
                        self.adversary_stats["replay_nullifier_reverts"] += 1
                    elif not receipt.accepted:
                        self.adversary_stats["rejected_attempts"] += 1

    def _malleable_sig_flood(self) -> None:
        """Undefended variant: distinct non-deterministic signatures yield
        distinct nullifiers, so one participant fills every sender slot."""
        adversary = self.participants[self.adversary]
        message = build_message(adversary.keypair.address, self.event_id)
        sigs = [adversary.sig]
        while len(sigs) < self.config.n:
            sig = sign_with_nonce(adversary.keypair, message, self.rng.randrange(1, N))
            if all(s.s != sig.s for s in sigs):
                sigs.append(sig)
        for sig in sigs:
            address = adversary.keypair.address
            witness = SenderWitness(
                sig=sig,
                address=address,
                participant_proof=self.contract.participants.prove(hash_to_field(address.raw)),
                commitment_proof=None,
            )
            publics = SenderPublicInputs(
                r=hash_to_field(b"zkss-attack-randomness" + sig.to_bytes()),
                event_id=self.event_id,
                root_p=self.contract.participants.root,
                root_c=None,
                null_s=hash_to_field(sig.s.to_bytes(32, "big")),
            )
            proof = self.backend.prove(SENDER, witness, publics)
            relay(proof, publics, None, self.mempool, self.relay_log)
            receipts = self.mempool.drain(self.contract)
            if receipts[-1].accepted:
                self.adversary_stats["slots_occupied"] += 1

    def _malleable_sig_defended(self) -> None:
        """Defended variant: extra signatures fail the commitment clause,
        so the prover refuses and forged blobs bounce off verification."""
        adversary = self.participants[self.adversary]
        message = build_message(adversary.keypair.address, self.event_id)
        for _ in range(2):
            sig = sign_with_nonce(adversary.keypair, message, self.rng.randrange(1, N))
            publics = SenderPublicInputs(
                r=hash_to_field(b"zkss-attack-randomness" + sig.to_bytes()),
                event_id=self.event_id,
                root_p=self.contract.participants.root,
                root_c=self.contract.commitments.root,
                null_s=hash_to_field(sig.s.to_bytes(32, "big")),
            )
            forged = Proof(SENDER, publics.serialize(), self.rng.randbytes(64))
            relay(forged, publics, None, self.mempool, self.relay_log)
            for receipt in self.mempool.drain(self.contract):
                if not receipt.accepted:
                    self.adversary_stats["rejected_attempts"] += 1
        # replaying the committed signature's submission is stopped by the
        # spent-nullifier set
        replay = self._sender_submission(adversary)
        relay(*replay, self.mempool, self.relay_log)
        for receipt in self.mempool.drain(self.contract):
            if not receipt.accepted:
                self.adversary_stats["rejected_attempts"] += 1

    def _stale_root_attempt(self, participant: ParticipantSecret) -> None:
        root_p, root_c = self.stale_roots
        witness = self.stale_witness
        publics = SenderPublicInputs(
            r=participant.randomness,
            event_id=self.event_id,
            root_p=root_p,
            root_c=root_c,
            null_s=participant.nullifier,
        )
        # relation holds against the stale roots, so the prover cooperates;
        # the contract still rejects because the roots moved on
        proof = self.backend.prove(SENDER, witness, publics)
        relay(proof, publics, participant.rsa.public_key_bytes() if participant.rsa else None,
              self.mempool, self.relay_log)
        for receipt in self.mempool.drain(self.contract):
            if not receipt.accepted:
                self.adversary_stats["rejected_attempts"] += 1

    # -- disclosure --------------------------------------------------------

    def _disclose_tx(
        self, participant: ParticipantSecret, target_null: FieldElement
    ) -> Transaction:
        address = participant.keypair.address
        publics = ReceiverPublicInputs(
            address=address, event_id=self.event_id, null_s=target_null
        )
        proof = self.backend.prove(RECEIVER, ReceiverWitness(participant.sig), publics)
        args = {"proof": proof, "publics": publics}
        entry = next(e for e in self.contract.senders if e.nullifier == target_null)
        if entry.rsa_public_key is not None:
            pad_seed = _derive(
                b"oaep",
                _seed_bytes(self.config),
                struct.pack(">I", participant.index),
                target_null.to_bytes(),
            )
            args["encrypted_delivery_address"] = env.encrypt_delivery_address(
                participant.delivery_address, entry.rsa_public_key, pad_seed
            ).ciphertext
        return Transaction(call="disclose", origin=address, args=args)

    def _disclose(self) -> None:
        if self.contract.phase is not Phase.DISCLOSE:
            self.stalled = True
            return

        if self.config.adversary == "SELF_PICK":
            self._self_pick_attempt()

        nullifier_of = {p.index: p.nullifier for p in self.participants}
        remaining = set(range(self.config.n))
        frontrun_armed = self.config.adversary == "FRONTRUN"

        def unassigned() -> set[FieldElement]:
            return {e.nullifier for e in self.contract.senders if e.assigned_receiver is None}

        while remaining and not self.stalled:
            free = unassigned()
            # schedule receivers whose own slot is still free first: this
            # keeps the draw live (nobody ends up facing only their own slot)
            schedulable = set(remaining)
            if frontrun_armed and len(schedulable) > 1:
                # the frontrunner lies in wait for a victim instead of
                # disclosing on their own
                schedulable.discard(self.adversary)
            constrained = [i for i in sorted(schedulable) if nullifier_of[i] in free]
            receiver_index = self.rng.choice(constrained or sorted(schedulable))
            participant = self.participants[receiver_index]
            while True:
                options = sorted(
                    (n for n in unassigned() if n != participant.nullifier),
                    key=lambda n: n.value,
                )
                if not options:
                    self.stalled = True
                    break
                target = self.rng.choice(options)
                self.mempool.enqueue(self._disclose_tx(participant, target))
                if (
                    frontrun_armed
                    and receiver_index != self.adversary
                    and self.adversary in remaining
                    and target != nullifier_of[self.adversary]
                ):
                    # the dishonest sender watches the mempool and steals
                    # the victim's target; works at most once
                    self.mempool.inject_before(
                        self._disclose_tx(self.participants[self.adversary], target)
                    )
                    frontrun_armed = False
                    remaining.discard(self.adversary)
                receipts = self.mempool.drain(self.contract)
                if receipts[-1].accepted:
                    remaining.discard(receiver_index)
                    break
                if receipts[-1].reason == "collision":
                    if self.config.adversary == "FRONTRUN":
                        self.adversary_stats["victim_collisions"] += 1
                    continue
                # any other revert is a scripting bug; surface it loudly
                raise RuntimeError(f"unexpected disclose revert: {receipts[-1]}")

    def _self_pick_attempt(self) -> None:
        adversary = self.participants[self.adversary]
        publics = ReceiverPublicInputs(
            address=adversary.keypair.address,
            event_id=self.event_id,
            null_s=adversary.nullifier,
        )
        # the honest prover refuses a self-target, so the only move is a
        # forged blob, which the verifier rejects
        forged = Proof(RECEIVER, publics.serialize(), self.rng.randbytes(64))
        self.mempool.enqueue(
            Transaction(
                call="disclose",
                origin=adversary.keypair.address,
                args={"proof": forged, "publics": publics},
            )
        )
        for receipt in self.mempool.drain(self.contract):
            if not receipt.accepted:
                self.adversary_stats["rejected_attempts"] += 1

    # -- reporting ---------------------------------------------------------

    def _report(self) -> GameReport:
        snapshot = self.contract.snapshot()
        txlog_lines = self.contract.tx_log_lines()
        relay_lines = relay_log_lines(self.relay_log)
        owner_of = {p.nullifier: p for p in self.participants}
        assignment = []
        for slot, entry in enumerate(self.contract.senders):
            owner = owner_of.get(entry.nullifier)
            assignment.append(
                {
                    "slot": slot,
                    "nullifier": entry.nullifier.to_hex(),
                    "randomness": entry.randomness.to_hex(),
                    "assigned_receiver": (
                        entry.assigned_receiver.to_hex() if entry.assigned_receiver else None
                    ),
                    "ground_truth_owner": owner.keypair.address.to_hex() if owner else None,
                }
            )
        derangement_ok = self.contract.phase is Phase.COMPLETE and _is_derangement(
            assignment, self.config.n
        )
        anonymity_ok = (
            count_address_randomness_links(
                self.participants, snapshot, txlog_lines, relay_lines, exclude=self.adversary
            )
            == 0
        )
        summary: dict[str, dict] = {}
        self_target_accepts = 0
        for tx, receipt in self.contract.tx_log:
            call = summary.setdefault(tx.call, {})
            key = _receipt_key(receipt)
            call[key] = call.get(key, 0) + 1
            if tx.call == "disclose" and receipt.accepted:
                owner = owner_of.get(tx.args["publics"].null_s)
                if owner is not None and owner.keypair.address == tx.origin:
                    self_target_accepts += 1
        data = {
            "config": {
                "n": self.config.n,
                "seed": self.config.seed,
                "adversary": self.config.adversary,
                "commit_step": self.config.commit_step,
                "use_envelopes": self.config.use_envelopes,
            },
            "event_id": "0x" + self.event_id.encode().hex(),
            "final_phase": self.contract.phase.value,
            "stalled": self.stalled,
            "assignment": assignment,
            "derangement_ok": derangement_ok,
            "anonymity_ok": anonymity_ok,
            "self_target_accepts": self_target_accepts,
            "receipts_summary": summary,
            "adversary_stats": dict(self.adversary_stats) if self.config.adversary else None,
        }
        return GameReport(
            data=data,
            timing=dict(self.timing),
            snapshot=snapshot,
            txlog_lines=txlog_lines,
            relay_lines=relay_lines,
            ground_truth=self.participants,
        )


def _is_derangement(assignment: list[dict], n: int) -> bool:
    receivers = [row["assigned_receiver"] for row in assignment]
    owners = [row["ground_truth_owner"] for row in assignment]
    if len(assignment) != n or None in receivers or None in owners:
        return False
    if len(set(receivers)) != n:
        return False
    return all(r != o for r, o in zip(receivers, owners))


def count_address_randomness_links(
    participants: list[ParticipantSecret],
    snapshot: dict,
    txlog_lines: list[str],
    relay_lines: list[str],
    exclude: int | None = None,
) -> int:
    """Mechanical link search over the public artifacts.

    Counts records in which an honest participant's address co-occurs with
    their own randomness or nullifier.  Receiver-to-slot assignments are
    public by design and do not count: they link the *receiver's* address
    to someone else's slot.
    """
    records = [json.dumps(e, sort_keys=True) for e in snapshot.get("senders", [])]
    records += txlog_lines
    records += relay_lines
    links = 0
    for participant in participants:
        if exclude is not None and participant.index == exclude:
            continue
        address = participant.keypair.address.to_hex()[2:]
        own = (participant.randomness.to_hex()[2:], participant.nullifier.to_hex()[2:])
        for record in records:
            if address in record and any(marker in record for marker in own):
                links += 1
    return links


def run_game(config: GameConfig, out_dir: str | Path | None = None) -> GameReport:
    """Execute one full game.  Stalled games are reported, not raised."""
    report = _Game(config).run()
    if out_dir is not None:
        report.write_artifacts(out_dir)
    return report


def run_attack(config: GameConfig, out_dir: str | Path | None = None) -> GameReport:
    """Execute a game with the configured adversary script."""
    if config.adversary is None:
        raise ValueError("run_attack needs an adversary script in the config")
    return run_game(config, out_dir)


def verify_report(
    report: GameReport, session_event_ids: list[str] | None = None
) -> dict[str, bool]:
    """Per-property checklist over a finished game's artifacts."""
    data = report.data
    n = data["config"]["n"]
    assignment = data["assignment"]
    receivers = [row["assigned_receiver"] for row in assignment]
    participants_hex = set(report.snapshot["participants"])
    complete = data["final_phase"] == Phase.COMPLETE.value

    bijective = (
        complete
        and len(assignment) == n
        and None not in receivers
        and len(set(receivers)) == n
        and set(receivers) <= participants_hex
    )
    derangement = complete and _is_derangement(assignment, n)
    anonymity = (
        count_address_randomness_links(
            report.ground_truth,
            report.snapshot,
            report.txlog_lines,
            report.relay_lines,
            exclude=ADVERSARY_INDEX if data["config"]["adversary"] else None,
        )
        == 0
    )
    low_s = all(p.sig.is_low_s for p in report.ground_truth)
    if session_event_ids is not None:
        unique_event = session_event_ids.count(data["event_id"]) == 1
    else:
        unique_event = True
    envelopes = _check_envelopes(report) if data["config"]["use_envelopes"] else complete

    return {
        "assignment_bijective": bijective,
        "derangement": derangement,
        "anonymity": anonymity,
        "signatures_low_s": low_s,
        "event_id_unique": unique_event,
        "envelopes_decrypt": envelopes,
    }


def _check_envelopes(report: GameReport) -> bool:
    """Each sender decrypts exactly their own envelope; every other key fails."""
    by_address = {p.keypair.address.to_hex(): p for p in report.ground_truth}
    by_nullifier = {p.nullifier.to_hex(): p for p in report.ground_truth}
    for row in report.data["assignment"]:
        owner = by_nullifier.get(row["nullifier"])
        receiver = by_address.get(row["assigned_receiver"])
        if owner is None or receiver is None or owner.rsa is None:
            return False
        entry = report.snapshot["senders"][row["slot"]]
        if entry["encrypted_delivery_address"] is None:
            return False
        import base64

        ciphertext = base64.b64decode(entry["encrypted_delivery_address"])
        sealed = env.DeliveryEnvelope(ciphertext, owner.randomness)
        try:
            if env.decrypt_delivery_address(sealed, owner.rsa) != receiver.delivery_address:
                return False
        except env.DecryptionError:
            return False
        # one non-matching key must fail
        other = next(p for p in report.ground_truth if p.index != owner.index)
        try:
            env.decrypt_delivery_address(sealed, other.rsa)
            return False
        except env.DecryptionError:
            pass
    return True
