"""
Unit tests for adversary construction and attack arming.
"""

import sys
from pathlib import Path

import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "src"))

from harness.adversary import (
    AttackPreconditionError,
    CorruptedParty,
    MaliciousCoordinator,
    UnknownAttackError,
    arm,
    corrupted_identities,
)
from harness.attacks import AttackCatalog
from harness.scenario import SimulationConfig, parse_scenario
from harness.simulation import Simulation, UnknownActorError


def script_of(*steps):
    return parse_scenario({"script": list(steps)}).script


def simulation(corrupted=(), malicious=False):
    config = SimulationConfig(seed=0, parties=5, threshold=3)
    return Simulation(config, corrupted=corrupted, malicious_coordinator=malicious)


class TestCorruptedIdentities:
    """Test suite for reading the adversary out of a script."""

    def test_party_attack(self):
        script = script_of({"action": "inject", "attack": "lie-bit-up", "actor": "p4"})
        assert corrupted_identities(script) == ({"p4"}, False)

    def test_coordinator_attack(self):
        script = script_of({"action": "inject", "attack": "skip-deprecation", "actor": "coordinator"})
        assert corrupted_identities(script) == (set(), True)

    def test_accomplice(self):
        script = script_of({"action": "inject", "attack": "skip-ban", "actor": "coordinator", "target": "p4"})
        assert corrupted_identities(script) == ({"p4"}, True)

    def test_pair_swap_corrupts_both(self):
        script = script_of({"action": "inject", "attack": "colluding-pair-swap", "actor": "p1", "target": "p4"})
        assert corrupted_identities(script) == ({"p1", "p4"}, False)

    def test_unknown_attack(self):
        with pytest.raises(UnknownAttackError):
            corrupted_identities(script_of({"action": "inject", "attack": "teleport", "actor": "p1"}))

    def test_honest_script(self, honest_5_3):
        assert corrupted_identities(honest_5_3.script) == (set(), False)


class TestArming:
    """Test suite for attack preconditions."""

    def test_actor_classes(self):
        sim = simulation(corrupted={"p4"}, malicious=True)
        assert isinstance(sim.coordinator, MaliciousCoordinator)
        assert isinstance(sim.parties["p4"], CorruptedParty)
        assert not isinstance(sim.parties["p1"], CorruptedParty)
        assert sim.parties["p4"].corrupted and not sim.parties["p1"].corrupted

    def test_coordinator_attack_needs_malicious_coordinator(self):
        with pytest.raises(AttackPreconditionError):
            arm(simulation(), "skip-deprecation", None)

    def test_party_attack_needs_corrupted_actor(self):
        with pytest.raises(AttackPreconditionError):
            arm(simulation(), "lie-bit-up", "p1")

    def test_party_attack_needs_actor(self):
        with pytest.raises(AttackPreconditionError):
            arm(simulation(corrupted={"p1"}), "lie-bit-up", None)

    def test_unknown_attack(self):
        with pytest.raises(UnknownAttackError):
            arm(simulation(corrupted={"p1"}), "teleport", "p1")

    def test_reuse_needs_earlier_entry(self):
        with pytest.raises(AttackPreconditionError):
            arm(simulation(malicious=True), "reuse-deprecated", None)

    def test_lie_sets_claimed_bit(self):
        sim = simulation(corrupted={"p4"})
        arm(sim, "lie-bit-up", "p4")
        party = sim.parties["p4"]
        assert party.claimed_bit == 1
        assert party.sanity_bit() == 1
        assert "lie-bit-up" in party.armed

    def test_wrong_token_takes_victim_token(self):
        sim = simulation(corrupted={"p5"})
        arm(sim, "wrong-token-registration", "p5", "p1")
        assert sim.parties["p5"].token == sim.parties["p1"].token

    def test_pair_swap_moves_pseudonyms(self):
        sim = simulation(corrupted={"p1", "p4"})
        for identity in sim.identities:
            sim.register(identity)
        arm(sim, "colluding-pair-swap", "p1", "p4")
        assert len(sim.parties["p1"].held) == 2
        assert sim.parties["p4"].held == {}
        assert sim.parties["p4"].claimed_bit == 1

    def test_unknown_corrupted_identity(self):
        with pytest.raises(UnknownActorError):
            simulation(corrupted={"p9"})


class TestCatalog:
    """Test suite for the attack catalog listing."""

    def test_every_attack_listed(self):
        attacks = AttackCatalog.list_attacks()
        assert len(attacks) == 16
        assert attacks == sorted(attacks)

    def test_split_by_actor(self):
        coordinator = AttackCatalog.by_actor(True)
        parties = AttackCatalog.by_actor(False)
        assert "skip-ban" in coordinator
        assert "lie-bit-up" in parties
        assert len(coordinator) + len(parties) == 16

    def test_unknown(self):
        with pytest.raises(UnknownAttackError):
            AttackCatalog.get("teleport")

    def test_labels(self):
        assert AttackCatalog.get("lie-bit-up").expected.label == "BanParty:p4:lied_in_check"
        assert AttackCatalog.get("skip-deprecation").expected.label == "AuditViolation:3"
        assert AttackCatalog.get("replay-pseudonym").expected.label == "Rejected:replay"
        assert AttackCatalog.get("colluding-pair-swap").expected.label == "UndetectedByDesign"
