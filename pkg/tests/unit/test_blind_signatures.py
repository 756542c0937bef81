"""
Unit tests for Okamoto-Schnorr blind signatures.

Tests the five-move signing interaction, single-use signer sessions,
unblinding checks and the blindness witness.
"""

import sys
from pathlib import Path

import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "src"))

from primitives.blind_signatures import (
    BlindingInconsistent,
    BlindSignature,
    SessionReuseError,
    SignerMisbehaved,
    SignerTranscript,
    explain_blinding,
    signer_commit,
    signer_keygen,
    signer_respond,
    signer_sign,
    transcript_is_valid,
    user_blind,
    user_unblind,
    verify_signature,
)
from primitives.substrate import FieldDecodeError, NotInSubgroup, Rng, pack_fields


@pytest.fixture
def signer(sim_params):
    return signer_keygen(sim_params, Rng.from_int(21))


def blind_sign(params, key, message, rng):
    """Run one full interaction; returns (transcript, signature)."""
    session = signer_commit(params, key, rng.fork("signer"))
    user = user_blind(params, key.v, session.a, message, rng.fork("user"))
    R1, R2 = signer_respond(params, key, session, user.e)
    signature = user_unblind(params, user, R1, R2)
    return SignerTranscript(a=session.a, e=user.e, R1=R1, R2=R2), signature


class TestSignerKeys:
    """Test suite for signer key generation and commitments."""

    def test_public_key_relation(self, sim_params, signer):
        g, h, q = sim_params.g, sim_params.h, sim_params.q
        assert signer.v == sim_params.mul(sim_params.exp(g, q - signer.s1), sim_params.exp(h, q - signer.s2))

    def test_commitment_is_a_member(self, sim_params, signer, rng):
        session = signer_commit(sim_params, signer, rng)
        assert sim_params.is_member(session.a)
        assert not session.consumed


class TestBlindSigning:
    """Test suite for the signing interaction."""

    def test_signature_verifies(self, sim_params, signer, rng):
        _, signature = blind_sign(sim_params, signer, b"pseudonym", rng)
        assert verify_signature(sim_params, signer.v, b"pseudonym", signature)

    def test_signature_bound_to_message(self, sim_params, signer, rng):
        _, signature = blind_sign(sim_params, signer, b"pseudonym", rng)
        assert not verify_signature(sim_params, signer.v, b"other", signature)

    def test_signature_bound_to_signer(self, sim_params, signer, rng):
        other = signer_keygen(sim_params, Rng.from_int(22))
        _, signature = blind_sign(sim_params, signer, b"pseudonym", rng)
        assert not verify_signature(sim_params, other.v, b"pseudonym", signature)

    def test_user_session_invariants(self, sim_params, signer, rng):
        session = signer_commit(sim_params, signer, rng.fork("signer"))
        user = user_blind(sim_params, signer.v, session.a, b"m", rng.fork("user"))
        p = sim_params
        expected = p.mul(
            session.a, p.exp(p.g, user.beta1), p.exp(p.h, user.beta2), p.exp(signer.v, user.beta3)
        )
        assert user.a_prime == expected
        assert user.e == (user.e_prime - user.beta3) % p.q

    def test_user_blind_rejects_non_member_commitment(self, toy_params):
        with pytest.raises(NotInSubgroup):
            user_blind(toy_params, 2, 5, b"m", Rng.from_int(0))

    def test_session_is_single_use(self, sim_params, signer, rng):
        session = signer_commit(sim_params, signer, rng)
        signer_respond(sim_params, signer, session, 5)
        assert session.consumed
        with pytest.raises(SessionReuseError):
            signer_respond(sim_params, signer, session, 6)

    def test_wrong_response_detected_on_unblind(self, sim_params, signer, rng):
        session = signer_commit(sim_params, signer, rng.fork("signer"))
        user = user_blind(sim_params, signer.v, session.a, b"m", rng.fork("user"))
        R1, R2 = signer_respond(sim_params, signer, session, user.e)
        with pytest.raises(SignerMisbehaved):
            user_unblind(sim_params, user, (R1 + 1) % sim_params.q, R2)

    def test_signature_differs_from_signer_view(self, sim_params, signer, rng):
        transcript, signature = blind_sign(sim_params, signer, b"m", rng)
        assert transcript.e != signature.e_prime
        assert (transcript.R1, transcript.R2) != (signature.r1, signature.r2)

    def test_clear_signing_verifies(self, sim_params, signer, rng):
        signature = signer_sign(sim_params, signer, b"sybil", rng)
        assert verify_signature(sim_params, signer.v, b"sybil", signature)

    def test_out_of_range_signature_rejected(self, sim_params, signer, rng):
        _, signature = blind_sign(sim_params, signer, b"m", rng)
        shifted = BlindSignature(signature.e_prime, signature.r1 + sim_params.q, signature.r2)
        assert not verify_signature(sim_params, signer.v, b"m", shifted)

    @pytest.mark.slow
    def test_random_triples_never_verify(self, sim_params, signer):
        root = Rng.from_int(404)
        q = sim_params.q
        accepted = 0
        for i in range(10_000):
            draw = root.fork(str(i))
            forged = BlindSignature(draw.random_scalar(q), draw.random_scalar(q), draw.random_scalar(q))
            accepted += verify_signature(sim_params, signer.v, b"pool-entry", forged)
        assert accepted == 0


class TestBlindness:
    """Test suite for transcripts and the blinding witness."""

    def test_transcript_valid(self, sim_params, signer, rng):
        transcript, _ = blind_sign(sim_params, signer, b"m", rng)
        assert transcript_is_valid(sim_params, signer.v, transcript)
        broken = SignerTranscript(transcript.a, transcript.e, (transcript.R1 + 1) % sim_params.q, transcript.R2)
        assert not transcript_is_valid(sim_params, signer.v, broken)

    def test_every_transcript_explains_every_signature(self, sim_params, signer):
        runs = [blind_sign(sim_params, signer, f"m{i}".encode(), Rng.from_int(100 + i)) for i in range(2)]
        for transcript, _ in runs:
            for i, (_, signature) in enumerate(runs):
                beta1, beta2, beta3 = explain_blinding(sim_params, signer.v, transcript, f"m{i}".encode(), signature)
                assert beta3 == (signature.e_prime - transcript.e) % sim_params.q
                assert beta1 == (signature.r1 - transcript.R1) % sim_params.q
                assert beta2 == (signature.r2 - transcript.R2) % sim_params.q

    def test_invalid_transcript_not_explained(self, sim_params, signer, rng):
        transcript, signature = blind_sign(sim_params, signer, b"m", rng)
        broken = SignerTranscript(transcript.a, (transcript.e + 1) % sim_params.q, transcript.R1, transcript.R2)
        with pytest.raises(BlindingInconsistent):
            explain_blinding(sim_params, signer.v, broken, b"m", signature)

    def test_invalid_signature_not_explained(self, sim_params, signer, rng):
        transcript, signature = blind_sign(sim_params, signer, b"m", rng)
        with pytest.raises(BlindingInconsistent):
            explain_blinding(sim_params, signer.v, transcript, b"not-m", signature)


class TestBlindSignatureEncoding:
    """Test suite for the encoded signature form."""

    def test_tag_and_decode(self, sim_params, signer, rng):
        _, signature = blind_sign(sim_params, signer, b"m", rng)
        data = signature.to_bytes(sim_params)
        assert data[0] == 0x01
        assert BlindSignature.from_bytes(sim_params, data) == signature

    def test_wrong_tag(self, sim_params):
        with pytest.raises(FieldDecodeError):
            BlindSignature.from_bytes(sim_params, b"\x07")

    def test_wrong_field_count(self, sim_params):
        data = b"\x01" + pack_fields(sim_params.encode_scalar(1), sim_params.encode_scalar(2))
        with pytest.raises(FieldDecodeError, match="three fields"):
            BlindSignature.from_bytes(sim_params, data)
