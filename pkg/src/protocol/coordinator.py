#!/usr/bin/env python3
"""
Coordinator
The central service: registration, blind-signature issuance, threshold
pool management, pseudonym deprecation, bans and renewals. It is the only
writer of the bulletin board and never takes part in computing F.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from models.anon_net import COORDINATOR_ADDRESS, AnonEnvelope, Delivery, Pseudonym, Router, reachability_check
from models.bulletin_board import (
    BanRecord,
    BoardCredential,
    BulletinBoard,
    DeprecationRecord,
    DrainRecord,
    EntryKind,
    PartyStatus,
    PoolRecord,
    RegisteredRecord,
)
from models.identity_provider import AuthToken, verify_token
from primitives.blind_signatures import (
    SignerKeyPair,
    SignerSession,
    SignerTranscript,
    signer_commit,
    signer_keygen,
    signer_respond,
    verify_signature,
)
from primitives.schnorr import verify_signature_bytes
from primitives.substrate import GroupElement, GroupParams, Rng, Scalar
from protocol.messages import (
    RENEW_DOMAIN,
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
    ResponseMessage,
    decode_message,
    encode_message,
)

logger = logging.getLogger(__name__)


class UnknownIdentityError(KeyError):
    """Raised when an operation names an identity that is not registered."""


@dataclass(frozen=True)
class SanityCheckRun:
    """A drained pool handed to the sanity check."""

    run_id: int
    pool: Tuple[PoolRecord, ...]
    board_count: int
    roster: Tuple[str, ...]

    @property
    def onion_urls(self) -> Tuple[bytes, ...]:
        return tuple(r.pseudonym.onion_url for r in self.pool)


@dataclass(frozen=True)
class RequestOutcome:
    accepted: bool
    reason: Optional[RejectReason] = None


class Coordinator:
    def __init__(
        self,
        params: GroupParams,
        rng: Rng,
        router: Router,
        threshold: int,
        issuer_key: GroupElement,
    ):
        if threshold < 2:
            raise ValueError(f"pool threshold must be at least 2, got {threshold}")
        self.params = params
        self.rng = rng
        self.router = router
        self.threshold = threshold
        self.issuer_key = issuer_key
        self.signer_key: SignerKeyPair = signer_keygen(params, rng.fork("signer-key"))
        self.credential = BoardCredential("coordinator")
        self.board = BulletinBoard(params, self.credential)
        self.router.register_mailbox(COORDINATOR_ADDRESS)

        self._registration_sessions: Dict[str, Tuple[SignerSession, GroupElement]] = {}
        self._commit_sessions: Dict[bytes, SignerSession] = {}
        self._pending_renewals: Dict[bytes, Tuple[SignerSession, Scalar]] = {}
        self._renewal_sessions: Dict[str, SignerSession] = {}
        self._queued: List[Delivery] = []

        self.check_in_flight = False
        self.roster_epoch = 0
        self.run_counter = 0
        self.reported_counts: Dict[str, int] = {}
        self.transcript: List[dict] = []
        self.signer_view: List[SignerTranscript] = []
        self.request_log: List[dict] = []

    @property
    def public_key(self) -> GroupElement:
        return self.signer_key.v

    # Board helpers

    def append(self, kind: EntryKind, record) -> None:
        self.board.append(kind, record.encode(self.params), self.credential)

    def _status(self, identity: str) -> Optional[PartyStatus]:
        record = self.board.registered().get(identity)
        return None if record is None else record.status

    def _respond(self, session: SignerSession, e: Scalar) -> Tuple[Scalar, Scalar]:
        R1, R2 = signer_respond(self.params, self.signer_key, session, e)
        self.signer_view.append(SignerTranscript(a=session.a, e=e % self.params.q, R1=R1, R2=R2))
        return R1, R2

    def _record(self, channel: str, payload: bytes, **extra) -> None:
        self.transcript.append({"channel": channel, "payload": payload.hex(), **extra})

    # Registration (identity-linked channel)

    def begin_registration(self, identity: str, token: AuthToken, public_key: GroupElement) -> GroupElement:
        """Check the token and open a signing session; returns the signer commitment."""
        status = self._status(identity)
        if status == PartyStatus.BANNED:
            raise RegistrationRejected(RejectReason.BANNED, identity)
        if status == PartyStatus.ACTIVE:
            raise RegistrationRejected(RejectReason.DUPLICATE_IDENTITY, identity)
        if not verify_token(self.params, self.issuer_key, token, identity):
            logger.warning("registration of %s rejected: invalid token", identity)
            raise RegistrationRejected(RejectReason.INVALID_TOKEN, identity)
        if not self.params.is_member(public_key):
            raise RegistrationRejected(RejectReason.MALFORMED, "public key not in group")
        session = signer_commit(self.params, self.signer_key, self.rng)
        self._registration_sessions[identity] = (session, public_key)
        return session.a

    def register(
        self, identity: str, token: AuthToken, public_key: GroupElement, blinded_e: Scalar
    ) -> Tuple[Scalar, Scalar]:
        opened = self._registration_sessions.pop(identity, None)
        if opened is None:
            raise RegistrationRejected(RejectReason.NO_SESSION, identity)
        session, opened_key = opened
        if public_key != opened_key:
            logger.warning("registration of %s rejected: public key changed since the commitment", identity)
            raise RegistrationRejected(RejectReason.MALFORMED, "public key differs from the one first presented")
        if not verify_token(self.params, self.issuer_key, token, identity):
            raise RegistrationRejected(RejectReason.INVALID_TOKEN, identity)
        message = RegisterMessage(identity, token, public_key, blinded_e)
        self._record("direct", encode_message(self.params, message), identity=identity)

        self.append(EntryKind.REGISTER_PARTY, RegisteredRecord(identity, token, public_key))
        self.roster_epoch += 1
        logger.info("registered %s (roster epoch %d)", identity, self.roster_epoch)
        return self._respond(session, blinded_e)

    # Anonymous channel

    def process_inbox(self) -> int:
        mailbox = self.router.mailbox(COORDINATOR_ADDRESS)
        deliveries = mailbox.pop_all() if mailbox is not None else []
        for delivery in deliveries:
            self.handle_envelope(delivery)
        return len(deliveries)

    def handle_envelope(self, delivery: Delivery) -> None:
        self._record("anon", delivery.payload, seq=delivery.seq)
        try:
            message = decode_message(self.params, delivery.payload)
        except MessageDecodeError as e:
            logger.warning("dropping malformed envelope: %s", e)
            return
        if isinstance(message, CommitMessage):
            self.handle_commit(delivery, message)
        elif isinstance(message, RequestMessage):
            if self.check_in_flight:
                logger.info("queueing request until the running sanity check completes")
                self._queued.append(delivery)
                return
            self.handle_request(delivery, message)
        else:
            logger.warning("unexpected %s on the anonymous channel", type(message).__name__)

    def _reply(self, delivery: Delivery, message) -> None:
        if delivery.reply_channel is None:
            logger.warning("no reply channel for %s", type(message).__name__)
            return
        self.router.anon_send(AnonEnvelope(delivery.reply_channel, encode_message(self.params, message)))

    def handle_commit(self, delivery: Delivery, message: CommitMessage) -> None:
        """Open one signer session per live onion URL."""
        url = message.onion_url
        if url in self.board.deprecated():
            self._reject(delivery, url, RejectReason.REPLAY)
            return
        if url in self._commit_sessions:
            self._reject(delivery, url, RejectReason.DUPLICATE_COMMIT)
            return
        session = signer_commit(self.params, self.signer_key, self.rng)
        self._commit_sessions[url] = session
        self._reply(delivery, CommitmentMessage(session.a))

    def _reject(self, delivery: Delivery, onion_url: bytes, reason: RejectReason) -> RequestOutcome:
        logger.warning("request from %s rejected: %s", onion_url.hex()[:16], reason.value)
        self.request_log.append({"pseudonym": onion_url.hex(), "accepted": False, "reason": reason.value})
        self._reply(delivery, RejectMessage(reason.value))
        return RequestOutcome(False, reason)

    def handle_request(self, delivery: Delivery, message: RequestMessage) -> RequestOutcome:
        params = self.params
        pseudonym = message.pseudonym
        url = pseudonym.onion_url
        # a session is single-use: any outcome closes it
        session = self._commit_sessions.pop(url, None)
        if not pseudonym.is_well_formed(params) or not verify_signature(
            params, self.public_key, pseudonym.encode(params), message.signature
        ):
            return self._reject(delivery, url, RejectReason.BAD_SIGNATURE)
        if url in self.board.deprecated():
            return self._reject(delivery, url, RejectReason.REPLAY)
        if not reachability_check(params, self.router, pseudonym, self.rng.read(32)):
            return self._reject(delivery, url, RejectReason.UNREACHABLE)
        if session is None:
            return self._reject(delivery, url, RejectReason.NO_COMMITMENT)

        self._pending_renewals[url] = (session, message.blinded_e)
        self.accept_into_pool(PoolRecord(pseudonym, message.signature))
        self.request_log.append({"pseudonym": url.hex(), "accepted": True, "reason": None})
        self._reply(delivery, AcceptMessage(url))
        return RequestOutcome(True)

    def accept_into_pool(self, record: PoolRecord) -> None:
        """PoolAdd and Deprecate for one pseudonym, back to back."""
        self.append(EntryKind.POOL_ADD, record)
        self.append(EntryKind.DEPRECATE, DeprecationRecord(record.pseudonym))
        logger.info("pool %d/%d: added %s", self.board_pool_size(), self.threshold, record.pseudonym.address)

    def board_pool_size(self) -> int:
        return len(self.board.pool())

    # Sanity check

    def maybe_trigger_sanity(self) -> Optional[SanityCheckRun]:
        if self.check_in_flight:
            return None
        pool = self.board.pool()
        if len(pool) < self.threshold:
            return None
        self.append(EntryKind.POOL_DRAIN, DrainRecord(tuple(r.pseudonym.onion_url for r in pool)))
        self.check_in_flight = True
        self.run_counter += 1
        self.reported_counts = {}
        run = SanityCheckRun(
            run_id=self.run_counter,
            pool=tuple(pool),
            board_count=len(pool),
            roster=tuple(self.board.active_identities()),
        )
        logger.info("pool threshold reached: sanity check %d over %d parties", run.run_id, len(run.roster))
        return run

    def receive_count(self, run: SanityCheckRun, identity: str, count: int) -> bool:
        """A party reports the decrypted count; True iff it matches the board."""
        self.reported_counts[identity] = count
        if count != run.board_count:
            logger.warning("%s reports count %d, board holds %d", identity, count, run.board_count)
        return count == run.board_count

    def issue_renewals(self, drained_urls: Tuple[bytes, ...]) -> int:
        """Blind-sign each drained member's next pseudonym, addressed to its old URL."""
        sent = 0
        for url in drained_urls:
            pending = self._pending_renewals.pop(url, None)
            if pending is None:
                logger.warning("no stored blinded pseudonym for %s; member forfeits renewal", url.hex()[:16])
                continue
            session, blinded_e = pending
            R1, R2 = self._respond(session, blinded_e)
            payload = encode_message(self.params, ResponseMessage(R1, R2))
            self.router.anon_send(AnonEnvelope(url, payload))
            sent += 1
        return sent

    def dissolve_pool(self, drained_urls: Tuple[bytes, ...]) -> None:
        """Failed check: stored next pseudonyms of the drained members are discarded."""
        for url in drained_urls:
            self._pending_renewals.pop(url, None)

    def complete_check(self) -> List[RequestOutcome]:
        """Close the running check and process requests queued meanwhile."""
        self.check_in_flight = False
        queued, self._queued = self._queued, []
        outcomes = []
        for delivery in queued:
            message = decode_message(self.params, delivery.payload)
            outcomes.append(self.handle_request(delivery, message))
        return outcomes

    # Failure handling

    def ban(self, identity: str) -> None:
        if self._status(identity) != PartyStatus.ACTIVE:
            raise UnknownIdentityError(identity)
        self.append(EntryKind.BAN, BanRecord(identity))
        self.roster_epoch += 1
        logger.warning("banned %s (roster epoch %d)", identity, self.roster_epoch)

    def deprecate_revealed(self, pseudonyms: List[Pseudonym]) -> int:
        """Deprecate revealed pseudonyms not yet on the deprecated list."""
        deprecated = self.board.deprecated()
        added = 0
        for pseudonym in pseudonyms:
            if pseudonym.onion_url not in deprecated:
                self.append(EntryKind.DEPRECATE, DeprecationRecord(pseudonym))
                deprecated.add(pseudonym.onion_url)
                added += 1
        return added

    def begin_post_failure_renewal(self, identity: str) -> GroupElement:
        if self._status(identity) != PartyStatus.ACTIVE:
            raise RegistrationRejected(RejectReason.UNKNOWN_IDENTITY, identity)
        session = signer_commit(self.params, self.signer_key, self.rng)
        self._renewal_sessions[identity] = session
        return session.a

    def post_failure_renewals(self, requests: List[RenewMessage]) -> Dict[str, Tuple[Scalar, Scalar]]:
        """Answer author-signed renewal requests; bad ones are rejected and skipped."""
        registered = self.board.registered()
        responses: Dict[str, Tuple[Scalar, Scalar]] = {}
        for request in requests:
            self._record("direct", encode_message(self.params, request), identity=request.identity)
            record = registered.get(request.identity)
            if record is None or record.status != PartyStatus.ACTIVE:
                logger.warning("renewal from %s rejected: not an active party", request.identity)
                continue
            message = RenewMessage.signing_bytes(self.params, request.identity, request.blinded_e)
            if not verify_signature_bytes(
                self.params, record.public_key, message, request.author_signature, domain=RENEW_DOMAIN
            ):
                logger.warning("renewal from %s rejected: bad author signature", request.identity)
                continue
            session = self._renewal_sessions.pop(request.identity, None)
            if session is None:
                logger.warning("renewal from %s rejected: no open session", request.identity)
                continue
            responses[request.identity] = self._respond(session, request.blinded_e)
        return responses
