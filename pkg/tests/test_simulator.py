import json

import pytest

from zkss.simulator import (
    ATTACKS,
    GameConfig,
    count_address_randomness_links,
    run_attack,
    run_game,
    verify_report,
)

DEPTH = 64


def fast(n=4, seed=0, **kwargs):
    kwargs.setdefault("use_envelopes", False)
    kwargs.setdefault("depth", DEPTH)
    return GameConfig(n=n, seed=seed, **kwargs)


def test_config_validation():
    with pytest.raises(ValueError):
        GameConfig(n=1, seed=0)
    with pytest.raises(ValueError):
        GameConfig(n=2, seed=2**64)
    with pytest.raises(ValueError):
        GameConfig(n=2, seed=0, adversary="NOPE")


def test_honest_game_completes():
    report = run_game(fast(n=5, seed=3))
    assert report.data["final_phase"] == "COMPLETE"
    assert report.data["derangement_ok"]
    assert report.data["anonymity_ok"]
    assert report.data["self_target_accepts"] == 0
    assert all(verify_report(report).values())


def test_honest_game_with_envelopes():
    report = run_game(GameConfig(n=3, seed=11, depth=DEPTH))
    assert report.data["final_phase"] == "COMPLETE"
    assert all(verify_report(report).values())


def test_reports_reproduce_byte_identically():
    config = fast(n=4, seed=99)
    a, b = run_game(config), run_game(config)
    assert a.to_json() == b.to_json()
    assert a.txlog_lines == b.txlog_lines
    assert a.relay_lines == b.relay_lines


def test_different_seeds_differ():
    a = run_game(fast(n=4, seed=1))
    b = run_game(fast(n=4, seed=2))
    assert a.data["event_id"] != b.data["event_id"]
    assert a.txlog_lines != b.txlog_lines


def test_artifacts_written(tmp_path):
    run_game(fast(n=3, seed=5), out_dir=tmp_path)
    for name in ("state.json", "txlog.jsonl", "report.json", "relay.jsonl"):
        assert (tmp_path / name).exists()
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["final_phase"] == "COMPLETE"
    assert "timing" not in report


def test_run_attack_requires_adversary():
    with pytest.raises(ValueError):
        run_attack(fast())


def test_malleable_sig_undefended_floods_all_slots():
    report = run_attack(fast(n=4, seed=7, adversary="MALLEABLE_SIG", commit_step=False))
    assert report.data["adversary_stats"]["slots_occupied"] == 4
    # every slot belongs to the adversary, so the outcome is not a derangement
    assert not report.data["derangement_ok"]
    # no honest participant owns any sender slot; the only attributable
    # slot is the adversary's canonical one
    adversary_hex = report.ground_truth[0].keypair.address.to_hex()
    owners = [row["ground_truth_owner"] for row in report.data["assignment"]]
    assert set(owners) <= {adversary_hex, None}
    assert owners.count(adversary_hex) == 1


def test_malleable_sig_defended_single_slot():
    report = run_attack(fast(n=4, seed=7, adversary="MALLEABLE_SIG", commit_step=True))
    stats = report.data["adversary_stats"]
    assert stats["slots_occupied"] == 0  # extras all bounced
    assert stats["rejected_attempts"] >= 3
    assert report.data["final_phase"] == "COMPLETE"
    assert report.data["derangement_ok"]


def test_double_nullifier_replays_rejected():
    report = run_attack(fast(n=4, seed=13, adversary="DOUBLE_NULLIFIER"))
    assert report.data["adversary_stats"]["replay_nullifier_reverts"] == 3
    assert report.data["final_phase"] == "COMPLETE"
    assert report.data["derangement_ok"]


def test_self_pick_rejected():
    report = run_attack(fast(n=4, seed=17, adversary="SELF_PICK"))
    assert report.data["adversary_stats"]["rejected_attempts"] >= 1
    assert report.data["self_target_accepts"] == 0
    assert report.data["receipts_summary"]["disclose"].get("REVERTED(bad-proof)", 0) >= 1
    assert report.data["final_phase"] == "COMPLETE"


def test_frontrun_single_victim_collision():
    report = run_attack(fast(n=5, seed=19, adversary="FRONTRUN"))
    assert report.data["adversary_stats"]["victim_collisions"] == 1
    assert report.data["final_phase"] == "COMPLETE"
    assert report.data["derangement_ok"]


def test_stale_root_rejected():
    report = run_attack(fast(n=4, seed=23, adversary="STALE_ROOT"))
    assert report.data["adversary_stats"]["rejected_attempts"] >= 1
    assert report.data["receipts_summary"]["submit_randomness"].get(
        "REVERTED(stale-root)", 0
    ) >= 1
    assert report.data["final_phase"] == "COMPLETE"


def test_all_attack_names_runnable():
    for attack in ATTACKS:
        commit_step = attack != "MALLEABLE_SIG"
        report = run_attack(fast(n=3, seed=29, adversary=attack, commit_step=commit_step))
        assert report.data["config"]["adversary"] == attack


def test_link_search_detects_planted_link():
    report = run_game(fast(n=3, seed=31))
    participant = report.ground_truth[0]
    planted = json.dumps(
        {
            "address": participant.keypair.address.to_hex(),
            "nullifier": participant.nullifier.to_hex(),
        }
    )
    links = count_address_randomness_links(
        report.ground_truth,
        report.snapshot,
        report.txlog_lines + [planted],
        report.relay_lines,
    )
    assert links == 1


def test_verify_report_event_id_uniqueness():
    report = run_game(fast(n=3, seed=37))
    eid = report.data["event_id"]
    assert verify_report(report, session_event_ids=[eid])["event_id_unique"]
    assert not verify_report(report, session_event_ids=[eid, eid])["event_id_unique"]


def test_n_equals_two():
    report = run_game(fast(n=2, seed=41))
    # with two participants the only derangement is the swap
    assert report.data["final_phase"] == "COMPLETE"
    assert report.data["derangement_ok"]
    rows = report.data["assignment"]
    assert rows[0]["assigned_receiver"] != rows[0]["ground_truth_owner"]
    assert rows[1]["assigned_receiver"] != rows[1]["ground_truth_owner"]
