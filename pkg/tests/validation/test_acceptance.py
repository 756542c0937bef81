"""
Acceptance tests for the protocol guarantees.

Each class pins one guarantee at the sizes the simulator is meant to
handle: signing completeness and blindness, the homomorphic count, bit
proof soundness, the honest life cycle, failure diagnosis, audit
detection, replay and impersonation, identity permutation, the exact
anonymity and unlinkability values and the collusion caveat.
"""

import itertools
import sys
import time
from fractions import Fraction
from pathlib import Path

import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "src"))

from calculators.security_properties import anonymity_probability, unlinkability_probability
from harness.attacks import run_attack
from harness.permutation import transcript_permutation_test
from harness.scenario import SimulationConfig, honest_scenario
from harness.simulation import run_simulation
from harness.trials import impersonation_trials, replay_trials
from main import main
from models.bulletin_board import AuditCheck, EntryKind, RegisteredRecord
from primitives.blind_signatures import (
    SignerTranscript,
    explain_blinding,
    signer_commit,
    signer_keygen,
    signer_respond,
    transcript_is_valid,
    user_blind,
    user_unblind,
    verify_signature,
)
from primitives.substrate import Rng
from primitives.threshold_encryption import (
    BitProof,
    aggregate_public_key,
    combine_decryptions,
    dkg_contribute,
    encrypt_bit,
    partial_decrypt,
    sum_ciphertexts,
    verify_bit_proof,
)

pytestmark = pytest.mark.slow

SEEDS = range(20)
PROOF_FIELDS = ("e0", "z0", "e1", "z1")


def blind_sign(params, key, message, rng):
    session = signer_commit(params, key, rng.fork("signer"))
    user = user_blind(params, key.v, session.a, message, rng.fork("user"))
    R1, R2 = signer_respond(params, key, session, user.e)
    return SignerTranscript(session.a, user.e, R1, R2), user_unblind(params, user, R1, R2)


def joint_setup(params, n, rng):
    shares = [dkg_contribute(params, i, rng.fork("share", str(i))) for i in range(1, n + 1)]
    return shares, aggregate_public_key(params, [s.public for s in shares])


def first_seq(board, kind, after=-1):
    return next(e.seq for e in board.entries if e.kind == kind and e.seq > after)


class TestBlindSignatureCompleteness:
    """1,000 seeded signing runs all verify."""

    def test_thousand_signatures(self, sim_params):
        key = signer_keygen(sim_params, Rng.from_int(1))
        root = Rng.from_int(2)
        started = time.monotonic()
        for i in range(1000):
            message = f"pseudonym-{i}".encode()
            _, signature = blind_sign(sim_params, key, message, root.fork(str(i)))
            assert verify_signature(sim_params, key.v, message, signature)
        assert time.monotonic() - started < 10


class TestBlindnessWitness:
    """Every transcript of a three-session cross-pairing explains every signature."""

    def test_three_by_three(self, sim_params):
        key = signer_keygen(sim_params, Rng.from_int(3))
        messages = [f"m{i}".encode() for i in range(3)]
        runs = [blind_sign(sim_params, key, m, Rng.from_int(40 + i)) for i, m in enumerate(messages)]
        explained = 0
        for transcript, _ in runs:
            assert transcript_is_valid(sim_params, key.v, transcript)
            for message, (_, signature) in zip(messages, runs):
                beta1, beta2, beta3 = explain_blinding(sim_params, key.v, transcript, message, signature)
                assert (transcript.e + beta3) % sim_params.q == signature.e_prime
                assert (transcript.R1 + beta1) % sim_params.q == signature.r1
                assert (transcript.R2 + beta2) % sim_params.q == signature.r2
                explained += 1
        assert explained == 9


class TestHomomorphicCount:
    """Decrypted sums equal the Hamming weight for every bit vector up to length six."""

    def test_all_bit_vectors(self, sim_params):
        root = Rng.from_int(5)
        cases = 0
        started = time.monotonic()
        for n in range(1, 7):
            shares, joint_key = joint_setup(sim_params, n, root.fork("dkg", str(n)))
            for bits in itertools.product((0, 1), repeat=n):
                rng = root.fork("vector", str(n), "".join(map(str, bits)))
                ciphertexts = [encrypt_bit(sim_params, joint_key, b, rng.fork(str(i)))[0] for i, b in enumerate(bits)]
                total = sum_ciphertexts(sim_params, ciphertexts)
                parts = [partial_decrypt(sim_params, s, total, rng.fork("part", str(s.owner))) for s in shares]
                assert combine_decryptions(sim_params, total, parts, joint_key) == sum(bits)
                cases += 1
        assert cases == 126
        assert time.monotonic() - started < 30


class TestBitProofSoundness:
    """Forged proofs are all rejected and honest proofs are all accepted."""

    def test_thousand_forgeries_rejected(self, sim_params):
        root = Rng.from_int(6)
        _, joint_key = joint_setup(sim_params, 3, root.fork("dkg"))
        for i in range(1000):
            rng = root.fork("forgery", str(i))
            ciphertext, proof = encrypt_bit(sim_params, joint_key, i % 2, rng.fork("a"))
            if i % 2 == 0:
                other, _ = encrypt_bit(sim_params, joint_key, i % 2, rng.fork("b"))
                assert not verify_bit_proof(sim_params, joint_key, other, proof)
            else:
                name = PROOF_FIELDS[(i // 2) % len(PROOF_FIELDS)]
                perturbed = BitProof(**{**proof.__dict__, name: (getattr(proof, name) + 1) % sim_params.q})
                assert not verify_bit_proof(sim_params, joint_key, ciphertext, perturbed)

    def test_thousand_honest_proofs_accepted(self, sim_params):
        root = Rng.from_int(7)
        _, joint_key = joint_setup(sim_params, 3, root.fork("dkg"))
        for i in range(1000):
            ciphertext, proof = encrypt_bit(sim_params, joint_key, i % 2, root.fork("honest", str(i)))
            assert verify_bit_proof(sim_params, joint_key, ciphertext, proof)


class TestLifeCycleConformance:
    """An honest run of two rounds ends with everyone auditing and F exact."""

    def test_two_rounds(self):
        config = SimulationConfig(seed=0, parties=5, threshold=3, rounds=2)
        simulation = run_simulation(config, honest_scenario(config).script)
        outcome = simulation.outcome
        assert outcome.final_states == {f"p{i}": "Auditing" for i in range(1, 6)}
        assert outcome.audit_violations == {}
        assert outcome.verdict_labels == ["Success", "Success"]
        assert len(outcome.functionality) == 2
        for round_ in outcome.functionality:
            assert set(round_.outputs.values()) == {round_.expected}
        assert simulation.coordinator.board.verify_chain()


class TestFailureDiagnosisMatrix:
    """The three diagnosable failures give their verdict across 20 seeds."""

    @pytest.mark.parametrize(
        "attack_id,label",
        [
            ("forged-reveal", "BanParty:p4:invalid_signature"),
            ("sign-for-unregistered", "CoordinatorMalicious:orphan_pseudonym"),
            ("lie-bit-up", "BanParty:p4:lied_in_check"),
        ],
    )
    def test_verdict_across_seeds(self, attack_id, label):
        for seed in SEEDS:
            result = run_attack(attack_id, seed=seed)
            assert result.simulation.outcome.verdict_labels == [label], f"seed {seed}"


class TestAuditDetectionMatrix:
    """Coordinator deviations raise their audit check at the first offending entry."""

    def test_reuse_deprecated(self):
        result = run_attack("reuse-deprecated")
        board = result.simulation.coordinator.board
        reused = [e.seq for e in board.entries if e.kind == EntryKind.POOL_ADD][-1]
        assert result.observed.check == AuditCheck.POOL_PSEUDONYM_VALID
        assert result.observed.seq == reused

    def test_skip_deprecation(self):
        result = run_attack("skip-deprecation")
        board = result.simulation.coordinator.board
        assert result.observed.check == AuditCheck.POOL_DEPRECATED
        assert result.observed.seq == first_seq(board, EntryKind.POOL_DRAIN)

    def test_skip_ban(self):
        result = run_attack("skip-ban")
        board = result.simulation.coordinator.board
        drain = first_seq(board, EntryKind.POOL_DRAIN)
        assert result.observed.check == AuditCheck.MALICIOUS_REMOVED
        assert result.observed.seq == drain + 1
        assert EntryKind.BAN not in {e.kind for e in board.entries}

    def test_invalid_token_registration(self):
        result = run_attack("invalid-token-registration")
        board = result.simulation.coordinator.board
        ghost = next(
            e.seq
            for e in board.entries
            if e.kind == EntryKind.REGISTER_PARTY
            and RegisteredRecord.decode(board.params, e.payload).identity == "ghost"
        )
        assert result.observed.check == AuditCheck.TOKEN_VALID
        assert result.observed.seq == ghost == 5


class TestReplayAndImpersonation:
    """Replays and foreign tokens are rejected in every trial."""

    def test_replay(self, sim_params):
        assert replay_trials(sim_params, 100) == (100, 100)

    def test_impersonation(self, sim_params):
        assert impersonation_trials(sim_params, 100) == (100, 100)


class TestAnonymityTranscript:
    """Swapping any two honest identities leaves the adversary view unchanged."""

    def test_every_pair(self, honest_5_3):
        pairs = list(itertools.combinations(honest_5_3.identities(), 2))
        assert len(pairs) == 10
        for a, b in pairs:
            result = transcript_permutation_test(honest_5_3, {a: b, b: a})
            assert result.identical, f"swap {a}<->{b} differs at line {result.first_difference()}"


class TestPropertyValues:
    """The closed-form values are reproduced exactly."""

    def test_spot_checks(self):
        assert anonymity_probability(5, 2) == Fraction(1, 3)
        assert unlinkability_probability(4, 1) == Fraction(1, 3)

    def test_cli_prints_exact_rationals(self, monkeypatch, capsys):
        monkeypatch.setattr("sys.argv", ["main.py", "props", "--parties", "5", "--corrupt", "1", "--threshold", "4"])
        main()
        captured = capsys.readouterr()
        assert "Anonymity:     1/(|P|-|C|) = 1/4" in captured.out
        assert "Unlinkability: 1/(T-|C|)   = 1/3" in captured.out


class TestCollusionCaveat:
    """Two colluders can swap membership without detection."""

    def test_pair_swap_succeeds(self):
        result = run_attack("colluding-pair-swap")
        outcome = result.simulation.outcome
        assert result.detected_as_expected
        assert outcome.verdict_labels == ["Success"]
        assert outcome.corrupted_pool_counts == [2]
        assert outcome.corrupted_pool_counts[0] <= 2
