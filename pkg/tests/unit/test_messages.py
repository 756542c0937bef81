"""
Unit tests for wire messages.
"""

import sys
from pathlib import Path

import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "src"))

from models.anon_net import new_pseudonym
from primitives.blind_signatures import signer_keygen, signer_sign
from primitives.substrate import Rng, pack_fields
from protocol.messages import (
    AcceptMessage,
    CommitMessage,
    CommitmentMessage,
    MessageDecodeError,
    RegisterMessage,
    RegistrationRejected,
    RejectMessage,
    RejectReason,
    RenewMessage,
    RequestMessage,
    RequestRejected,
    ResponseMessage,
    decode_message,
    encode_message,
)


@pytest.fixture
def request_message(sim_params):
    pseudonym, _ = new_pseudonym(sim_params, Rng.from_int(1))
    key = signer_keygen(sim_params, Rng.from_int(2))
    signature = signer_sign(sim_params, key, pseudonym.encode(sim_params), Rng.from_int(3))
    return RequestMessage(pseudonym, signature, 12345)


class TestWireMessages:
    """Test suite for tagged message encodings."""

    def test_tags(self, sim_params, request_message):
        assert encode_message(sim_params, request_message)[0] == 0x11
        assert encode_message(sim_params, CommitMessage(b"u" * 32))[0] == 0x13
        assert encode_message(sim_params, CommitmentMessage(sim_params.g))[0] == 0x20
        assert encode_message(sim_params, ResponseMessage(1, 2))[0] == 0x21
        assert encode_message(sim_params, AcceptMessage(b"u"))[0] == 0x22
        assert encode_message(sim_params, RejectMessage("replay"))[0] == 0x23

    def test_request_decodes(self, sim_params, request_message):
        decoded = decode_message(sim_params, encode_message(sim_params, request_message))
        assert decoded == request_message

    def test_register_and_renew_decode(self, sim_params, identity_provider):
        token = identity_provider.issue_token("p1")
        register = RegisterMessage("p1", token, sim_params.g, 7)
        renew = RenewMessage("p1", 9, b"sig")
        assert decode_message(sim_params, encode_message(sim_params, register)) == register
        assert decode_message(sim_params, encode_message(sim_params, renew)) == renew
        assert encode_message(sim_params, register)[0] == 0x10
        assert encode_message(sim_params, renew)[0] == 0x12

    def test_renew_signing_bytes_bind_identity(self, sim_params):
        assert RenewMessage.signing_bytes(sim_params, "p1", 5) != RenewMessage.signing_bytes(sim_params, "p2", 5)

    def test_empty_message(self, sim_params):
        with pytest.raises(MessageDecodeError):
            decode_message(sim_params, b"")

    def test_unknown_tag(self, sim_params):
        with pytest.raises(MessageDecodeError, match="0x7f"):
            decode_message(sim_params, b"\x7f")

    def test_wrong_field_count(self, sim_params):
        with pytest.raises(MessageDecodeError):
            decode_message(sim_params, b"\x21" + pack_fields(sim_params.encode_scalar(1)))

    def test_bad_element(self, sim_params):
        with pytest.raises(MessageDecodeError):
            decode_message(sim_params, b"\x20" + pack_fields(b"\x04"))


class TestRejections:
    """Test suite for rejection reasons and exceptions."""

    def test_reason_values(self):
        assert RejectReason("replay") == RejectReason.REPLAY
        assert RejectReason.BAD_SIGNATURE.value == "bad_signature"
        assert RejectReason.INVALID_TOKEN.value == "invalid_token"

    def test_exceptions_carry_reason(self):
        error = RequestRejected(RejectReason.REPLAY, "p1")
        assert error.reason == RejectReason.REPLAY
        assert "replay" in str(error)
        assert RegistrationRejected(RejectReason.BANNED).reason == RejectReason.BANNED
