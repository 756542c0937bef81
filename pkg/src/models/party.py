#!/usr/bin/env python3
"""
Party
A registered party as one actor of the simulation: registers under its
identity, then participates only through single-use pseudonyms, audits
every board update and takes part in sanity checks.

Randomness for pseudonyms and blinding is keyed by the party's slot and
pseudonym generation, never by its identity; only the long-term key and
sanity-board material derive from the identity.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from models.anon_net import (
    COORDINATOR_ADDRESS,
    AnonEnvelope,
    Delivery,
    Pseudonym,
    PseudonymSecret,
    Router,
    make_responder,
    new_pseudonym,
)
from models.bulletin_board import (
    AuditVerdict,
    BoardAuditor,
    BulletinBoard,
    Contribution,
    SanityBoardEntry,
    SanityPayload,
)
from models.identity_provider import AuthToken
from models.party_states import PartyEvent, PartyState, PartyStateMachine
from primitives.blind_signatures import BlindSignature, UserSession, user_blind, user_unblind
from primitives.schnorr import SchnorrKeyPair, schnorr_keygen, schnorr_sign
from primitives.substrate import GroupElement, GroupParams, Rng, Scalar
from primitives.threshold_encryption import JointPublicKey, KeyShare, encrypt_bit
from protocol.messages import (
    RENEW_DOMAIN,
    AcceptMessage,
    CommitMessage,
    CommitmentMessage,
    MessageDecodeError,
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

logger = logging.getLogger(__name__)

# The pseudonym is still live after these; the party may request with it again.
RETRYABLE_REJECTS = frozenset({RejectReason.UNREACHABLE, RejectReason.NO_COMMITMENT})


class LocalMisuseError(RuntimeError):
    """Raised when the local party is driven outside its protocol."""


@dataclass
class HeldPseudonym:
    pseudonym: Pseudonym
    secret: PseudonymSecret
    signature: BlindSignature
    submitted: bool = False


@dataclass
class PendingRenewal:
    """Next pseudonym whose blinded challenge is with the coordinator."""

    pseudonym: Pseudonym
    secret: PseudonymSecret
    session: UserSession
    rng: Rng


class Party:
    def __init__(
        self,
        identity: str,
        slot: int,
        params: GroupParams,
        router: Router,
        rng: Rng,
        coordinator_key: GroupElement,
        issuer_key: GroupElement,
        token: Optional[AuthToken] = None,
    ):
        self.identity = identity
        self.slot = slot
        self.params = params
        self.router = router
        self.coordinator_key = coordinator_key
        self.token = token
        self.corrupted = False

        self._root = rng
        self._identity_rng = rng.fork("identity", identity)
        self._signing_rng = self._identity_rng.fork("signing")
        self.long_term_key: SchnorrKeyPair = schnorr_keygen(params, self._identity_rng.fork("long-term-key"))

        self.machine = PartyStateMachine(identity)
        self.auditor = BoardAuditor(params, coordinator_key, issuer_key, router)
        self.held: Dict[bytes, HeldPseudonym] = {}
        self.pending: Dict[bytes, PendingRenewal] = {}
        self.key_share: Optional[KeyShare] = None
        self.rejections: List[RejectReason] = []
        self._generation = 0
        self._post_failure: Optional[PendingRenewal] = None

    def __repr__(self) -> str:
        return f"Party({self.identity!r}, slot={self.slot}, state={self.state.value})"

    @property
    def state(self) -> PartyState:
        return self.machine.state

    @property
    def public_key(self) -> GroupElement:
        return self.long_term_key.public

    @property
    def current(self) -> Optional[HeldPseudonym]:
        """The held signed pseudonym; an honest party has at most one."""
        return next(iter(self.held.values()), None)

    @property
    def is_active(self) -> bool:
        return self.state != PartyState.UNREGISTERED and not self.machine.is_terminal

    # Pseudonym bookkeeping

    def _fresh_pseudonym(self) -> Tuple[Pseudonym, PseudonymSecret, Rng]:
        rng = self._root.fork("slot", str(self.slot), "generation", str(self._generation))
        self._generation += 1
        pseudonym, secret = new_pseudonym(self.params, rng.fork("key"))
        return pseudonym, secret, rng

    def _blind(self, a: GroupElement, pseudonym: Pseudonym, rng: Rng) -> UserSession:
        return user_blind(self.params, self.coordinator_key, a, pseudonym.encode(self.params), rng.fork("blind"))

    def _adopt(self, pseudonym: Pseudonym, secret: PseudonymSecret, signature: BlindSignature, rng: Rng) -> None:
        self.held[pseudonym.onion_url] = HeldPseudonym(pseudonym, secret, signature)
        responder = make_responder(self.params, secret, rng.fork("reachability"))
        self.router.register_mailbox(pseudonym.onion_url, responder)

    def _retire(self, onion_url: bytes) -> None:
        self.held.pop(onion_url, None)
        self.router.unregister_mailbox(onion_url)

    # Registration

    def do_register(self, coordinator) -> bool:
        """Register with the coordinator; False (state unchanged) on rejection."""
        if self.state != PartyState.UNREGISTERED:
            raise LocalMisuseError(f"{self.identity} is already registered")
        if self.token is None:
            raise LocalMisuseError(f"{self.identity} holds no authentication token")

        pseudonym, secret, rng = self._fresh_pseudonym()
        try:
            a = coordinator.begin_registration(self.identity, self.token, self.public_key)
            session = self._blind(a, pseudonym, rng)
            R1, R2 = coordinator.register(self.identity, self.token, self.public_key, session.e)
        except RegistrationRejected as e:
            logger.info("%s: %s", self.identity, e)
            self.rejections.append(e.reason)
            return False

        signature = user_unblind(self.params, session, R1, R2)
        self._adopt(pseudonym, secret, signature, rng)
        self.machine.fire(PartyEvent.REGISTERED_OK)
        return True

    # Pool requests over the anonymous network

    def do_request(self) -> None:
        if self.state != PartyState.AUDITING:
            raise LocalMisuseError(f"{self.identity} cannot request in state {self.state.value}")
        held = self.current
        if held is None or held.submitted:
            raise LocalMisuseError(f"{self.identity} has no unused pseudonym")
        self.send_commit(held)

    def send_commit(self, held: HeldPseudonym) -> None:
        held.submitted = True
        url = held.pseudonym.onion_url
        payload = encode_message(self.params, CommitMessage(url))
        self.router.anon_send(AnonEnvelope(COORDINATOR_ADDRESS, payload, reply_channel=url))

    def build_request(self, held: HeldPseudonym, blinded_e: Scalar) -> RequestMessage:
        return RequestMessage(held.pseudonym, held.signature, blinded_e)

    def pump(self) -> int:
        """Handle everything waiting in the party's mailboxes."""
        deliveries: List[Delivery] = []
        for url in list(self.held):
            mailbox = self.router.mailbox(url)
            if mailbox is not None:
                deliveries.extend(mailbox.pop_all())

        rejected: Optional[RequestRejected] = None
        for delivery in deliveries:
            try:
                self.on_message(delivery)
            except RequestRejected as e:
                rejected = rejected or e
        if rejected is not None:
            raise rejected
        return len(deliveries)

    def on_message(self, delivery: Delivery) -> None:
        try:
            message = decode_message(self.params, delivery.payload)
        except MessageDecodeError as e:
            logger.warning("%s: undecodable delivery: %s", self.identity, e)
            return
        url = delivery.destination

        if isinstance(message, CommitmentMessage):
            self._on_commitment(url, message.a)
        elif isinstance(message, AcceptMessage):
            if self.state == PartyState.AUDITING:
                self.machine.fire(PartyEvent.REQUEST_ACCEPTED)
        elif isinstance(message, RejectMessage):
            reason = RejectReason(message.reason)
            self.rejections.append(reason)
            self.pending.pop(url, None)
            held = self.held.get(url)
            if held is not None and reason in RETRYABLE_REJECTS:
                held.submitted = False
            raise RequestRejected(reason, self.identity)
        elif isinstance(message, ResponseMessage):
            self._on_response(url, message)
        else:
            logger.warning("%s: unexpected %s", self.identity, type(message).__name__)

    def _on_commitment(self, url: bytes, a: GroupElement) -> None:
        held = self.held.get(url)
        if held is None:
            logger.warning("%s: commitment for a pseudonym it does not hold", self.identity)
            return
        pseudonym, secret, rng = self._fresh_pseudonym()
        session = self._blind(a, pseudonym, rng)
        self.pending[url] = PendingRenewal(pseudonym, secret, session, rng)
        request = self.build_request(held, session.e)
        payload = encode_message(self.params, request)
        self.router.anon_send(AnonEnvelope(COORDINATOR_ADDRESS, payload, reply_channel=url))

    def _on_response(self, url: bytes, message: ResponseMessage) -> None:
        pending = self.pending.pop(url, None)
        if pending is None:
            logger.warning("%s: renewal response without a pending request", self.identity)
            return
        signature = user_unblind(self.params, pending.session, message.R1, message.R2)
        self._retire(url)
        self._adopt(pending.pseudonym, pending.secret, signature, pending.rng)

    # Renewal after a failed sanity check

    def prepare_post_failure_renewal(self, coordinator) -> RenewMessage:
        a = coordinator.begin_post_failure_renewal(self.identity)
        pseudonym, secret, rng = self._fresh_pseudonym()
        session = self._blind(a, pseudonym, rng)
        self._post_failure = PendingRenewal(pseudonym, secret, session, rng)
        message = RenewMessage.signing_bytes(self.params, self.identity, session.e)
        signature = schnorr_sign(self.params, self.long_term_key, message, self._signing_rng, domain=RENEW_DOMAIN)
        return RenewMessage(self.identity, session.e, signature.to_bytes(self.params))

    def finish_post_failure_renewal(self, R1: Scalar, R2: Scalar) -> None:
        pending, self._post_failure = self._post_failure, None
        if pending is None:
            raise LocalMisuseError(f"{self.identity} has no renewal in progress")
        signature = user_unblind(self.params, pending.session, R1, R2)
        for url in list(self.held):
            self._retire(url)
        self.pending.clear()
        self._adopt(pending.pseudonym, pending.secret, signature, pending.rng)

    # Auditing

    def do_audit(self, board: BulletinBoard) -> AuditVerdict:
        verdict = self.auditor.audit_update(board.entries_since(self.auditor.last_seq + 1))
        self._withdraw_on(verdict)
        return verdict

    def settle_audit(self) -> AuditVerdict:
        verdict = self.auditor.check_settled()
        self._withdraw_on(verdict)
        return verdict

    def _withdraw_on(self, verdict: AuditVerdict) -> None:
        if not verdict.ok and self.is_active:
            logger.warning("%s withdraws: audit check %s failed", self.identity, verdict.check.value)
            self.machine.fire(PartyEvent.AUDIT_VIOLATION)

    # Sanity check participation

    def sanity_bit(self) -> int:
        return 1 if self.state == PartyState.SANITY_AS_MEMBER else 0

    def sanity_rng(self, run_id: int, label: str) -> Rng:
        return self._identity_rng.fork("sanity", str(run_id), label)

    def contribute(self, joint_key: JointPublicKey, run_id: int) -> Optional[Contribution]:
        rng = self.sanity_rng(run_id, "contribution")
        ciphertext, proof = encrypt_bit(self.params, joint_key, self.sanity_bit(), rng)
        return Contribution(ciphertext, proof)

    def reveal_pseudonym(self) -> Optional[Tuple[Pseudonym, BlindSignature]]:
        """The pseudonym currently held: the pooled one for members."""
        held = self.current
        if held is None:
            return None
        return held.pseudonym, held.signature

    def sign_sanity(self, run_id: int, payload: SanityPayload) -> SanityBoardEntry:
        return SanityBoardEntry.signed(
            self.params, run_id, self.identity, payload, self.long_term_key, self._signing_rng
        )
