"""Command-line interface.

``zkss simulate`` runs one game (optionally with an adversary script) and
writes the artifact files; ``zkss verify`` re-executes a report's config
deterministically and checks both reproducibility and the end-state
properties; ``zkss keys gen`` derives a participant keypair from a seed.
"""

from __future__ import annotations

import base64
import hashlib
import json
import sys
from pathlib import Path

import click

from . import envelope as env
from .signing import KeyPair
from .simulator import GameConfig, GameReport, run_game, verify_report

_ATTACK_FLAGS = {
    "malleable-sig": "MALLEABLE_SIG",
    "double-nullifier": "DOUBLE_NULLIFIER",
    "self-pick": "SELF_PICK",
    "frontrun": "FRONTRUN",
    "stale-root": "STALE_ROOT",
}


@click.group()
def main():
    """ZK Secret Santa protocol engine and adversarial simulator."""


@main.command()
@click.option("--n", type=int, required=True, help="participant count (>= 2)")
@click.option("--seed", type=int, required=True, help="64-bit game seed")
@click.option("--no-commit-step", is_flag=True, help="disable the signature commitment step")
@click.option("--no-envelopes", is_flag=True, help="use raw field randomness instead of RSA keys")
@click.option("--attack", type=click.Choice(sorted(_ATTACK_FLAGS)), default=None)
@click.option("--out", type=click.Path(file_okay=False), default=None, help="artifact directory")
def simulate(n, seed, no_commit_step, no_envelopes, attack, out):
    """Run one game and print the report."""
    config = GameConfig(
        n=n,
        seed=seed,
        adversary=_ATTACK_FLAGS[attack] if attack else None,
        commit_step=not no_commit_step,
        use_envelopes=not no_envelopes,
    )
    report = run_game(config, out_dir=out)
    click.echo(report.to_json(), nl=False)
    timing = "  ".join(f"{k}={v * 1000:.1f}ms" for k, v in report.timing.items())
    click.echo(f"# timing: {timing}", err=True)
    checks = verify_report(report)
    for name, ok in checks.items():
        click.echo(f"# {name}: {'pass' if ok else 'FAIL'}", err=True)
    expected_complete = attack != "malleable-sig" or not no_commit_step
    if expected_complete and not all(checks.values()):
        sys.exit(1)


@main.command()
@click.option("--report", "report_path", type=click.Path(exists=True, dir_okay=False), required=True)
def verify(report_path):
    """Re-run a report's config and check reproducibility plus end-state properties."""
    stored = Path(report_path).read_text()
    data = json.loads(stored)
    cfg = data["config"]
    config = GameConfig(
        n=cfg["n"],
        seed=cfg["seed"],
        adversary=cfg["adversary"],
        commit_step=cfg["commit_step"],
        use_envelopes=cfg["use_envelopes"],
    )
    rerun = run_game(config)
    reproducible = rerun.to_json() == stored
    click.echo(f"reproducible: {'pass' if reproducible else 'FAIL'}")
    checks = verify_report(rerun)
    for name, ok in checks.items():
        click.echo(f"{name}: {'pass' if ok else 'FAIL'}")
    if not reproducible or not all(checks.values()):
        sys.exit(1)


@main.group()
def keys():
    """Key utilities."""


@keys.command("gen")
@click.option("--seed", type=int, required=True, help="derivation seed")
@click.option("--rsa/--no-rsa", default=True, help="also derive the 2048-bit RSA keypair")
def keys_gen(seed, rsa):
    """Derive a participant keypair (and RSA key) from a seed."""
    seed_bytes = seed.to_bytes(8, "big")
    keypair = KeyPair.from_seed(hashlib.sha256(b"zkss-cli-key" + seed_bytes).digest())
    record = {
        "address": keypair.address.to_hex(),
        "secret_key": hex(keypair.secret_key),
        "public_key": {
            "x": hex(keypair.public_key[0]),
            "y": hex(keypair.public_key[1]),
        },
    }
    if rsa:
        rsa_key = env.generate_rsa_keypair(hashlib.sha256(b"zkss-cli-rsa" + seed_bytes).digest())
        record["rsa_public_key"] = base64.b64encode(rsa_key.public_key_bytes()).decode()
        record["rsa_randomness_anchor"] = rsa_key.randomness_anchor().to_hex()
    click.echo(json.dumps(record, indent=2))


if __name__ == "__main__":
    main()
