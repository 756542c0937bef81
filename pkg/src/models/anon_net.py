#!/usr/bin/env python3
"""
Anonymous Network Simulation
Stands in for Tor: onion-style pseudonym addresses, sender-anonymous
envelope delivery and signed reachability challenges.
"""

import base64
import hashlib
import json
import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable, Deque, Dict, List, Optional, Tuple

from primitives.schnorr import (
    SchnorrKeyPair,
    SchnorrSignature,
    schnorr_keygen,
    schnorr_sign,
    schnorr_verify,
)
from primitives.substrate import GroupElement, GroupParams, Rng, Scalar, pack_fields, unpack_fields

logger = logging.getLogger(__name__)

ONION_DOMAIN = b"onion"
REACHABILITY_DOMAIN = b"reachability"
COORDINATOR_ADDRESS = b"coordinator"

# A responder gets the challenge nonce and answers with a signature, or None.
Responder = Callable[[bytes], Optional[SchnorrSignature]]


@dataclass(frozen=True)
class Pseudonym:
    onion_url: bytes
    verification_key: GroupElement

    @staticmethod
    def derive_url(params: GroupParams, verification_key: GroupElement) -> bytes:
        return hashlib.sha256(ONION_DOMAIN + params.encode_element(verification_key)).digest()

    def is_well_formed(self, params: GroupParams) -> bool:
        return (
            len(self.onion_url) == 32
            and params.is_member(self.verification_key)
            and self.onion_url == self.derive_url(params, self.verification_key)
        )

    def encode(self, params: GroupParams) -> bytes:
        """Canonical bytes; this is the message the coordinator blind-signs."""
        return pack_fields(self.onion_url, params.encode_element(self.verification_key))

    @classmethod
    def decode(cls, params: GroupParams, data: bytes) -> "Pseudonym":
        url, key = unpack_fields(data)
        return cls(onion_url=url, verification_key=params.decode_element(key))

    @property
    def address(self) -> str:
        """Human readable onion address for logs."""
        return base64.b32encode(self.onion_url).decode("ascii").rstrip("=").lower()[:16] + ".onion"


@dataclass(frozen=True)
class PseudonymSecret:
    signing_key: Scalar

    def keypair(self, params: GroupParams) -> SchnorrKeyPair:
        return SchnorrKeyPair(secret=self.signing_key, public=params.exp(params.g, self.signing_key))


@dataclass(frozen=True)
class AnonEnvelope:
    """A message on the anonymous network. Carries no sender field."""

    destination: bytes
    payload: bytes
    reply_channel: Optional[bytes] = None


@dataclass(frozen=True)
class Delivery:
    """What a recipient observes: destination, payload and reply channel only."""

    seq: int
    destination: bytes
    payload: bytes
    reply_channel: Optional[bytes]

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "destination": self.destination.hex(),
            "payload": self.payload.hex(),
            "reply_channel": self.reply_channel.hex() if self.reply_channel else None,
        }


class Mailbox:
    def __init__(self, address: bytes, responder: Optional[Responder] = None):
        self.address = address
        self.responder = responder
        self.queue: Deque[Delivery] = deque()

    def pop_all(self) -> List[Delivery]:
        items = list(self.queue)
        self.queue.clear()
        return items


def new_pseudonym(params: GroupParams, rng: Rng) -> Tuple[Pseudonym, PseudonymSecret]:
    keypair = schnorr_keygen(params, rng)
    pseudonym = Pseudonym(
        onion_url=Pseudonym.derive_url(params, keypair.public),
        verification_key=keypair.public,
    )
    return pseudonym, PseudonymSecret(signing_key=keypair.secret)


def make_responder(params: GroupParams, secret: PseudonymSecret, rng: Rng) -> Responder:
    """Challenge handler for the holder of a pseudonym secret."""
    keypair = secret.keypair(params)

    def respond(nonce: bytes) -> Optional[SchnorrSignature]:
        return schnorr_sign(params, keypair, nonce, rng, domain=REACHABILITY_DOMAIN)

    return respond


class Router:
    """Single serialization point of the simulated network.

    Envelopes queue in flight until flush(), which delivers them in a
    seeded shuffled order. Every delivery and drop is recorded in the
    router event log.
    """

    def __init__(self, rng: Rng, step_budget: int = 64):
        self.rng = rng
        self.step_budget = step_budget
        self.registry: Dict[bytes, Mailbox] = {}
        self.in_flight: List[AnonEnvelope] = []
        self.events: List[dict] = []
        self.hops_left = step_budget
        self._seq = 0

    def register_mailbox(self, address: bytes, responder: Optional[Responder] = None) -> Mailbox:
        mailbox = Mailbox(address, responder)
        self.registry[address] = mailbox
        return mailbox

    def unregister_mailbox(self, address: bytes) -> None:
        self.registry.pop(address, None)

    def mailbox(self, address: bytes) -> Optional[Mailbox]:
        return self.registry.get(address)

    def anon_send(self, envelope: AnonEnvelope) -> None:
        self.in_flight.append(envelope)

    def flush(self) -> int:
        """Deliver everything in flight; returns the number delivered."""
        batch, self.in_flight = self.in_flight, []
        self.hops_left = self.step_budget
        self.rng.shuffle(batch)
        delivered = 0
        for envelope in batch:
            mailbox = self.registry.get(envelope.destination)
            if mailbox is None:
                logger.warning("dropping envelope for unknown destination %s", envelope.destination.hex()[:16])
                self.events.append({"event": "drop", "destination": envelope.destination.hex()})
                continue
            delivery = Delivery(
                seq=self._seq,
                destination=envelope.destination,
                payload=envelope.payload,
                reply_channel=envelope.reply_channel,
            )
            self._seq += 1
            mailbox.queue.append(delivery)
            self.events.append({"event": "deliver", **delivery.to_dict()})
            delivered += 1
        return delivered

    def challenge(self, address: bytes, nonce: bytes) -> Optional[SchnorrSignature]:
        """Ask the mailbox holder at address to answer a nonce."""
        mailbox = self.registry.get(address)
        if mailbox is None or mailbox.responder is None:
            return None
        # Each challenge hop spends one step of the current flush's budget.
        if self.hops_left <= 0:
            logger.debug("challenge to %s: step budget exhausted", address.hex()[:16])
            return None
        self.hops_left -= 1
        return mailbox.responder(nonce)

    def event_log_lines(self) -> List[str]:
        return [json.dumps(event, sort_keys=True) for event in self.events]


def anon_send(router: Router, envelope: AnonEnvelope) -> None:
    router.anon_send(envelope)


def reachability_check(params: GroupParams, router: Router, pseudonym: Pseudonym, nonce: bytes) -> bool:
    """True iff the holder of the pseudonym secret signs the fresh nonce."""
    signature = router.challenge(pseudonym.onion_url, nonce)
    if signature is None:
        logger.info("reachability challenge to %s timed out", pseudonym.address)
        return False
    return schnorr_verify(
        params, pseudonym.verification_key, nonce, signature, domain=REACHABILITY_DOMAIN
    )
