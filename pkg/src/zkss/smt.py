"""Sparse Merkle tree with inclusion proofs.

Backs both on-chain registries: participants (indexed by the hash of an
address) and signature commitments (indexed by the commitment itself).
Absent subtrees take per-level default hashes, so inserts and proofs cost
``depth`` hashes regardless of occupancy.

Conventions: bit ``i`` of the index (least significant first) selects the
direction at level ``i``, level 0 being the leaf level.  Leaves hash as
``hash(0x00 || index || value)`` and internal nodes as
``hash(0x01 || left || right)``; the domain separator keeps a leaf from
being replayed as an internal node.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .primitives import FieldElement, hash_to_field

DEFAULT_DEPTH = 160

_LEAF_TAG = b"\x00"
_NODE_TAG = b"\x01"

# The hash of an empty leaf slot is the field zero.
_EMPTY = FieldElement(0)


class DuplicateKeyError(Exception):
    """Insertion under an index that already holds a leaf."""


class NotFoundError(Exception):
    """Proof requested for an index with no leaf."""


def leaf_hash(index: FieldElement, value: FieldElement) -> FieldElement:
    return hash_to_field(_LEAF_TAG + index.to_bytes() + value.to_bytes())


def node_hash(left: FieldElement, right: FieldElement) -> FieldElement:
    return hash_to_field(_NODE_TAG + left.to_bytes() + right.to_bytes())


def default_hashes(depth: int) -> list[FieldElement]:
    """Hash of an empty subtree at each level, leaf level first."""
    out = [_EMPTY]
    for _ in range(depth):
        out.append(node_hash(out[-1], out[-1]))
    return out


@dataclass(frozen=True, slots=True)
class MerkleProof:
    """Sibling hashes from leaf level to root, plus the leaf index."""

    index: FieldElement
    siblings: tuple[FieldElement, ...]

    def to_json(self) -> str:
        return json.dumps(
            {
                "index": self.index.to_hex(),
                "siblings": [s.to_hex() for s in self.siblings],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "MerkleProof":
        data = json.loads(text)
        return cls(
            index=FieldElement.from_hex(data["index"]),
            siblings=tuple(FieldElement.from_hex(s) for s in data["siblings"]),
        )


class SparseMerkleTree:
    """Insert-only sparse Merkle tree of fixed depth."""

    def __init__(self, depth: int = DEFAULT_DEPTH):
        if depth < 1:
            raise ValueError("depth must be positive")
        self.depth = depth
        self.defaults = default_hashes(depth)
        self.leaves: dict[int, FieldElement] = {}
        # (level, path) -> hash for levels 0..depth; path is the index
        # shifted right by `level` bits.
        self._nodes: dict[tuple[int, int], FieldElement] = {}
        self._root = self.defaults[depth]

    @property
    def root(self) -> FieldElement:
        return self._root

    def _node(self, level: int, path: int) -> FieldElement:
        return self._nodes.get((level, path), self.defaults[level])

    def _path_bits(self, index: FieldElement) -> int:
        return index.value & ((1 << self.depth) - 1)

    def insert(self, index: FieldElement, value: FieldElement) -> FieldElement:
        """Add a leaf and return the new root.  The index must be free."""
        path = self._path_bits(index)
        if path in self.leaves:
            raise DuplicateKeyError(f"index already occupied: {index.to_hex()}")
        self.leaves[path] = value
        # Only the low `depth` bits address a leaf; the leaf hash must use
        # the same masked index everywhere (insert, verify, audit).
        current = leaf_hash(FieldElement(path), value)
        node = path
        for level in range(self.depth):
            self._nodes[(level, node)] = current
            sibling = self._node(level, node ^ 1)
            if node & 1:
                current = node_hash(sibling, current)
            else:
                current = node_hash(current, sibling)
            node >>= 1
        self._nodes[(self.depth, 0)] = current
        self._root = current
        return current

    def prove(self, index: FieldElement) -> MerkleProof:
        """Inclusion proof for an occupied index."""
        path = self._path_bits(index)
        if path not in self.leaves:
            raise NotFoundError(f"no leaf at index {index.to_hex()}")
        siblings = []
        node = path
        for level in range(self.depth):
            siblings.append(self._node(level, node ^ 1))
            node >>= 1
        return MerkleProof(index=index, siblings=tuple(siblings))

    def value_at(self, index: FieldElement) -> FieldElement:
        path = self._path_bits(index)
        if path not in self.leaves:
            raise NotFoundError(f"no leaf at index {index.to_hex()}")
        return self.leaves[path]

    def contains(self, index: FieldElement) -> bool:
        return self._path_bits(index) in self.leaves

    def audit_root(self) -> bool:
        """Compare the incremental root against a from-scratch recomputation."""
        return self._root == self._recompute(self.depth, list(self.leaves.items()))

    def _recompute(self, height: int, items: list[tuple[int, FieldElement]]) -> FieldElement:
        # Independent of the incremental node cache on purpose: recursion
        # over the raw leaf set only.
        if not items:
            return self.defaults[height]
        if height == 0:
            path, value = items[0]
            return leaf_hash(FieldElement(path), value)
        bit = 1 << (height - 1)
        left = [(p, v) for p, v in items if not p & bit]
        right = [(p, v) for p, v in items if p & bit]
        return node_hash(self._recompute(height - 1, left), self._recompute(height - 1, right))


def merkle_verify(value: FieldElement, proof: MerkleProof, root: FieldElement) -> bool:
    """Fold the leaf hash up the sibling path and compare against the root."""
    depth = len(proof.siblings)
    path = proof.index.value & ((1 << depth) - 1)
    current = leaf_hash(FieldElement(path), value)
    for sibling in proof.siblings:
        if path & 1:
            current = node_hash(sibling, current)
        else:
            current = node_hash(current, sibling)
        path >>= 1
    return current == root
