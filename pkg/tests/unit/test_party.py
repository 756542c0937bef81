"""
Unit tests for the Party actor.

Tests registration, anonymous pool requests, renewals and the
slot-keyed derivation of pseudonyms.
"""

import sys
from pathlib import Path

import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "src"))

from models.anon_net import make_responder
from models.party import LocalMisuseError, Party
from models.party_states import PartyState
from primitives.blind_signatures import verify_signature
from primitives.substrate import Rng
from protocol.messages import RejectReason, RequestRejected


def make_party(params, router, coordinator, identity_provider, identity, slot=0, token="own"):
    if token == "own":
        token = identity_provider.issue_token(identity)
    return Party(
        identity,
        slot,
        params,
        router,
        Rng.from_int(77).fork("parties"),
        coordinator.public_key,
        identity_provider.public_key,
        token=token,
    )


def settle(router, coordinator, parties):
    """Run the network until nothing is in flight; returns rejection reasons."""
    rejected = []
    while router.in_flight:
        router.flush()
        coordinator.process_inbox()
        for party in parties:
            try:
                party.pump()
            except RequestRejected as e:
                rejected.append(e.reason)
    return rejected


@pytest.fixture
def party(sim_params, router, coordinator, identity_provider):
    return make_party(sim_params, router, coordinator, identity_provider, "p1")


class TestRegistration:
    """Test suite for identity-linked registration."""

    def test_register(self, party, coordinator, router):
        assert party.do_register(coordinator)
        assert party.state == PartyState.AUDITING
        assert len(party.held) == 1
        assert router.mailbox(party.current.pseudonym.onion_url) is not None
        assert coordinator.board.active_identities() == ["p1"]

    def test_registration_pseudonym_is_signed(self, sim_params, party, coordinator):
        party.do_register(coordinator)
        held = party.current
        assert held.pseudonym.is_well_formed(sim_params)
        assert verify_signature(sim_params, coordinator.public_key, held.pseudonym.encode(sim_params), held.signature)
        (transcript,) = coordinator.signer_view
        assert transcript.e != held.signature.e_prime

    def test_register_twice(self, party, coordinator):
        party.do_register(coordinator)
        with pytest.raises(LocalMisuseError):
            party.do_register(coordinator)

    def test_register_without_token(self, sim_params, router, coordinator, identity_provider):
        party = make_party(sim_params, router, coordinator, identity_provider, "p1", token=None)
        with pytest.raises(LocalMisuseError):
            party.do_register(coordinator)

    def test_foreign_token_rejected(self, sim_params, router, coordinator, identity_provider):
        victim_token = identity_provider.issue_token("victim")
        party = make_party(sim_params, router, coordinator, identity_provider, "p1", token=victim_token)
        assert not party.do_register(coordinator)
        assert party.rejections == [RejectReason.INVALID_TOKEN]
        assert party.state == PartyState.UNREGISTERED
        assert len(coordinator.board) == 0

    def test_audit_after_registration(self, party, coordinator):
        party.do_register(coordinator)
        assert party.do_audit(coordinator.board).ok

    def test_registration_trace_carries_only_blinded_value(self, sim_params, party, coordinator, router):
        party.do_register(coordinator)
        pseudonym = party.current.pseudonym
        (session,) = coordinator.signer_view
        direct = [r["payload"] for r in coordinator.transcript if r["channel"] == "direct"]
        assert len(direct) == 1
        assert sim_params.encode_scalar(session.e).hex() in direct[0]

        trace = direct + [e["payload"] for e in router.events] + [e.payload.hex() for e in coordinator.board.entries]
        for mark in (pseudonym.onion_url.hex(), pseudonym.encode(sim_params).hex()):
            assert not any(mark in blob for blob in trace)


class TestPoolRequests:
    """Test suite for requests over the anonymous network."""

    def test_request_needs_registration(self, party):
        with pytest.raises(LocalMisuseError):
            party.do_request()

    def test_request_accepted(self, party, coordinator, router):
        party.do_register(coordinator)
        url = party.current.pseudonym.onion_url
        party.do_request()
        assert settle(router, coordinator, [party]) == []
        assert party.state == PartyState.AWAITING_POOL
        assert [r.pseudonym.onion_url for r in coordinator.board.pool()] == [url]
        assert url in coordinator.board.deprecated()
        assert url in party.pending

    def test_no_second_request_while_waiting(self, party, coordinator, router):
        party.do_register(coordinator)
        party.do_request()
        settle(router, coordinator, [party])
        with pytest.raises(LocalMisuseError):
            party.do_request()

    def test_renewal_replaces_pseudonym(self, party, coordinator, router):
        party.do_register(coordinator)
        old_url = party.current.pseudonym.onion_url
        party.do_request()
        settle(router, coordinator, [party])
        assert coordinator.issue_renewals((old_url,)) == 1
        settle(router, coordinator, [party])
        assert old_url not in party.held
        assert router.mailbox(old_url) is None
        assert len(party.held) == 1
        assert not party.current.submitted

    def test_resubmission_rejected_as_replay(self, party, coordinator, router):
        party.do_register(coordinator)
        held = party.current
        party.do_request()
        settle(router, coordinator, [party])
        party.send_commit(held)
        assert settle(router, coordinator, [party]) == [RejectReason.REPLAY]
        assert party.rejections == [RejectReason.REPLAY]
        assert held.submitted

    def test_retry_after_unreachable(self, sim_params, party, coordinator, router):
        party.do_register(coordinator)
        held = party.current
        url = held.pseudonym.onion_url
        router.register_mailbox(url, None)
        party.do_request()
        assert settle(router, coordinator, [party]) == [RejectReason.UNREACHABLE]
        assert not held.submitted
        assert url not in coordinator.board.deprecated()

        router.register_mailbox(url, make_responder(sim_params, held.secret, Rng.from_int(5)))
        party.do_request()
        assert settle(router, coordinator, [party]) == []
        assert party.state == PartyState.AWAITING_POOL
        assert [r.pseudonym.onion_url for r in coordinator.board.pool()] == [url]


class TestPseudonymDerivation:
    """Test suite for slot-keyed randomness."""

    def test_pseudonyms_follow_slot_not_identity(self, sim_params, router, coordinator, identity_provider):
        a = make_party(sim_params, router, coordinator, identity_provider, "alice", slot=0)
        b = make_party(sim_params, router, coordinator, identity_provider, "bob", slot=0)
        a.do_register(coordinator)
        b.do_register(coordinator)
        assert a.current.pseudonym == b.current.pseudonym
        assert a.public_key != b.public_key

    def test_different_slots_differ(self, sim_params, router, coordinator, identity_provider):
        a = make_party(sim_params, router, coordinator, identity_provider, "alice", slot=0)
        b = make_party(sim_params, router, coordinator, identity_provider, "bob", slot=1)
        a.do_register(coordinator)
        b.do_register(coordinator)
        assert a.current.pseudonym != b.current.pseudonym

    def test_sanity_bit_of_auditor(self, party, coordinator):
        party.do_register(coordinator)
        assert party.sanity_bit() == 0
        assert party.reveal_pseudonym()[0] == party.current.pseudonym
