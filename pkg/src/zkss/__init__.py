"""ZK Secret Santa: protocol engine and adversarial simulator."""

from .primitives import Address, EventId, FieldElement, build_message, hash_to_field
from .simulator import GameConfig, GameReport, run_attack, run_game, verify_report

__all__ = [
    "Address",
    "EventId",
    "FieldElement",
    "GameConfig",
    "GameReport",
    "build_message",
    "hash_to_field",
    "run_attack",
    "run_game",
    "verify_report",
]
