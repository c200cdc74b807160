"""Anonymizing transport and the transaction mempool.

Relayed calls reach the contract with their origin stripped; the relayer
log never contains a participant address.  The mempool is the single
ordering point: everything (relayed or direct) queues FIFO, and an
adversary hook may inject a transaction ahead of a chosen pending one,
which is exactly the capability a frontrunner has.
"""

from __future__ import annotations

import json
from collections import deque

from .contract import ContractState, Receipt, Transaction
from .relations import Proof, SenderPublicInputs


class Mempool:
    """FIFO transaction queue feeding a single contract."""

    def __init__(self):
        self._queue: deque[Transaction] = deque()

    def __len__(self) -> int:
        return len(self._queue)

    def enqueue(self, tx: Transaction) -> int:
        """Append a transaction; returns its queue position."""
        self._queue.append(tx)
        return len(self._queue) - 1

    def inject_before(self, tx: Transaction, position: int = 0) -> None:
        """Adversary hook: place a transaction ahead of a pending one."""
        self._queue.insert(position, tx)

    def peek(self) -> list[dict]:
        """Pending transaction summaries — public data only."""
        return [tx.public_summary() for tx in self._queue]

    def drain(self, contract: ContractState) -> list[Receipt]:
        """Apply every pending transaction in order."""
        receipts = []
        while self._queue:
            receipts.append(contract.apply(self._queue.popleft()))
        return receipts


def relay(
    proof: Proof,
    publics: SenderPublicInputs,
    rsa_public_key: bytes | None,
    mempool: Mempool,
    log: list[dict] | None = None,
) -> int:
    """Queue a randomness submission with the origin stripped."""
    tx = Transaction(
        call="submit_randomness",
        origin=None,
        args={"proof": proof, "publics": publics, "rsa_public_key": rsa_public_key},
    )
    position = mempool.enqueue(tx)
    if log is not None:
        log.append(tx.public_summary())
    return position


def relay_log_lines(log: list[dict]) -> list[str]:
    return [json.dumps(entry, sort_keys=True, separators=(",", ":")) for entry in log]
