import hashlib

import pytest

from zkss.primitives import Address, EventId, FieldElement, build_message, hash_to_field
from zkss.relations import TransparentBackend
from zkss.signing import KeyPair, commitment_hash, derive_nullifier, sign_deterministic
from zkss.smt import SparseMerkleTree

# unit tests use a shallower tree than the deployment default to stay fast;
# nothing below depends on the exact depth
TEST_DEPTH = 32


class MiniGame:
    """Three honest participants with populated registries."""

    def __init__(self, depth=TEST_DEPTH):
        contract_address = Address(hashlib.sha256(b"minigame-contract").digest()[:20])
        self.event_id = EventId(contract_address, 7)
        self.backend = TransparentBackend(b"minigame-backend-key")
        self.participants = SparseMerkleTree(depth)
        self.commitments = SparseMerkleTree(depth)
        self.keys = [KeyPair.from_seed(b"minigame-%d" % i) for i in range(3)]
        self.sigs = []
        for key in self.keys:
            sig = sign_deterministic(key, build_message(key.address, self.event_id))
            self.sigs.append(sig)
            index = hash_to_field(key.address.raw)
            self.participants.insert(index, index)
            commitment = commitment_hash(sig)
            self.commitments.insert(commitment, commitment)
        self.nullifiers = [derive_nullifier(sig) for sig in self.sigs]


@pytest.fixture(scope="session")
def mini():
    return MiniGame()
