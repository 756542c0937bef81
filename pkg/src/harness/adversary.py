#!/usr/bin/env python3
"""
Adversary
Corrupted parties and a malicious coordinator. Both behave honestly until
an attack is armed; arming happens at the point of the script where the
scenario injects it.
"""

import logging
from typing import Dict, List, Optional, Set, Tuple

from models.anon_net import (
    COORDINATOR_ADDRESS,
    AnonEnvelope,
    Delivery,
    Pseudonym,
    PseudonymSecret,
    make_responder,
    new_pseudonym,
)
from models.bulletin_board import Contribution, EntryKind, PoolRecord, RegisteredRecord
from models.identity_provider import TOKEN_DOMAIN, AuthToken
from models.party import HeldPseudonym, Party
from primitives.blind_signatures import BlindSignature, signer_commit, signer_sign
from primitives.schnorr import schnorr_keygen, schnorr_sign
from primitives.substrate import Rng
from primitives.threshold_encryption import Ciphertext, JointPublicKey, encrypt_bit
from protocol.coordinator import Coordinator
from protocol.messages import RequestMessage, encode_message

logger = logging.getLogger(__name__)

PARTY_ATTACKS = (
    "lie-bit-up",
    "lie-bit-down",
    "refuse-reveal",
    "forged-reveal",
    "invalid-bit-proof",
    "replay-pseudonym",
    "forged-signature-request",
    "wrong-token-registration",
    "colluding-pair-swap",
)

COORDINATOR_ATTACKS = (
    "sign-for-unregistered",
    "double-sign-one-party",
    "pool-add-without-request",
    "skip-deprecation",
    "reuse-deprecated",
    "skip-ban",
    "invalid-token-registration",
)

# Coordinator attacks that need a corrupted party as accomplice.
ACCOMPLICE_ATTACKS = ("double-sign-one-party", "skip-ban", "colluding-pair-swap")

GHOST_IDENTITY = "ghost"


class UnknownAttackError(ValueError):
    """Raised for an attack id outside the catalog."""


class AttackPreconditionError(RuntimeError):
    """Raised when an attack is injected where it cannot apply."""


class CorruptedParty(Party):
    """A party under adversary control; honest until armed."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.corrupted = True
        self.armed: Set[str] = set()
        self.claimed_bit: Optional[int] = None
        self.withhold_reveal = False
        self.forge_reveal = False
        self.forge_proof = False
        self.replay = False
        self.forge_request = False
        self.views: List[dict] = []
        self._forged: Set[bytes] = set()

    def arm(self, attack: str) -> None:
        if attack not in PARTY_ATTACKS:
            raise UnknownAttackError(attack)
        self.armed.add(attack)
        if attack in ("lie-bit-up", "refuse-reveal", "forged-reveal"):
            self.claimed_bit = 1
        elif attack == "lie-bit-down":
            self.claimed_bit = 0
        if attack == "refuse-reveal":
            self.withhold_reveal = True
        elif attack == "forged-reveal":
            self.forge_reveal = True
        elif attack == "invalid-bit-proof":
            self.forge_proof = True
        elif attack == "replay-pseudonym":
            self.replay = True
        elif attack == "forged-signature-request":
            self.forge_request = True
        logger.info("%s armed %s", self.identity, attack)

    def _forge_signature(self, rng: Rng) -> BlindSignature:
        q = self.params.q
        return BlindSignature(rng.random_scalar(q), rng.random_scalar(q), rng.random_scalar(q))

    def take_pseudonym(
        self, pseudonym: Pseudonym, secret: PseudonymSecret, signature: BlindSignature, rng: Rng
    ) -> None:
        """Hold an extra signed pseudonym handed over by an accomplice."""
        self._adopt(pseudonym, secret, signature, rng)

    # Requests

    def do_request(self) -> None:
        if self.forge_request:
            self.forge_request = False
            pseudonym, secret, rng = self._fresh_pseudonym()
            self._adopt(pseudonym, secret, self._forge_signature(rng.fork("forgery")), rng)
            self._forged.add(pseudonym.onion_url)
            self.send_commit(self.held[pseudonym.onion_url])
            return

        unused = [h for h in self.held.values() if not h.submitted]
        if self.replay and not unused and self.current is not None:
            self.send_commit(self.current)
            return
        if len(unused) > 1:
            for held in unused:
                self.send_commit(held)
            return
        super().do_request()

    def _on_commitment(self, url: bytes, a) -> None:
        pending = self.pending.get(url)
        if pending is None:
            super()._on_commitment(url, a)
            return
        # Resubmission: keep the stored renewal and reuse its blinded challenge.
        request = self.build_request(self.held[url], pending.session.e)
        payload = encode_message(self.params, request)
        self.router.anon_send(AnonEnvelope(COORDINATOR_ADDRESS, payload, reply_channel=url))

    def on_message(self, delivery: Delivery) -> None:
        self.views.append(delivery.to_dict())
        url = delivery.destination
        kept = self.pending.get(url) if self.replay else None
        try:
            super().on_message(delivery)
        finally:
            if kept is not None and url in self.held and url not in self.pending:
                self.pending[url] = kept
            if url in self._forged:
                self._forged.discard(url)
                self._retire(url)

    # Sanity check

    def sanity_bit(self) -> int:
        if self.claimed_bit is not None:
            return self.claimed_bit
        return super().sanity_bit()

    def contribute(self, joint_key: JointPublicKey, run_id: int) -> Optional[Contribution]:
        if not self.forge_proof:
            return super().contribute(joint_key, run_id)
        ciphertext, proof = encrypt_bit(
            self.params, joint_key, self.sanity_bit(), self.sanity_rng(run_id, "contribution")
        )
        tampered = Ciphertext(ciphertext.c1, self.params.mul(ciphertext.c2, self.params.g))
        return Contribution(tampered, proof)

    def reveal_pseudonym(self) -> Optional[Tuple[Pseudonym, BlindSignature]]:
        if self.withhold_reveal:
            return None
        if self.forge_reveal:
            pseudonym, _, rng = self._fresh_pseudonym()
            return pseudonym, self._forge_signature(rng.fork("forgery"))
        return super().reveal_pseudonym()


def hand_over_pseudonyms(giver: Party, taker: Party) -> int:
    """Move every held pseudonym of giver to taker; the mailboxes stay registered."""
    moved = 0
    for url in list(giver.held):
        held: HeldPseudonym = giver.held.pop(url)
        taker.held[url] = held
        moved += 1
    return moved


class MaliciousCoordinator(Coordinator):
    """A coordinator that deviates once an attack is armed."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.skip_deprecation = False
        self.skip_ban = False
        self.sybils: Dict[bytes, Tuple[Pseudonym, PseudonymSecret]] = {}
        self._sybil_rng = self.rng.fork("sybil")
        self._sybil_generation = 0

    def accept_into_pool(self, record: PoolRecord) -> None:
        if not self.skip_deprecation:
            super().accept_into_pool(record)
            return
        self.append(EntryKind.POOL_ADD, record)
        logger.info(
            "pool %d/%d: added %s without deprecation",
            self.board_pool_size(),
            self.threshold,
            record.pseudonym.address,
        )

    def ban(self, identity: str) -> None:
        if self.skip_ban:
            logger.info("not banning %s", identity)
            return
        super().ban(identity)

    def mint_pseudonym(self) -> Tuple[Pseudonym, PseudonymSecret, BlindSignature, Rng]:
        """A valid pseudonym signed in the clear, outside any registration."""
        rng = self._sybil_rng.fork(str(self._sybil_generation))
        self._sybil_generation += 1
        pseudonym, secret = new_pseudonym(self.params, rng.fork("key"))
        signature = signer_sign(self.params, self.signer_key, pseudonym.encode(self.params), rng.fork("sign"))
        return pseudonym, secret, signature, rng

    def _hold_sybil(self) -> Tuple[Pseudonym, BlindSignature, Rng]:
        pseudonym, secret, signature, rng = self.mint_pseudonym()
        self.sybils[pseudonym.onion_url] = (pseudonym, secret)
        self.router.register_mailbox(pseudonym.onion_url, make_responder(self.params, secret, rng.fork("reachability")))
        return pseudonym, signature, rng

    def sign_for_unregistered(self) -> Pseudonym:
        """Submit a self-issued pseudonym through the ordinary request path."""
        pseudonym, signature, rng = self._hold_sybil()
        url = pseudonym.onion_url
        self._commit_sessions[url] = signer_commit(self.params, self.signer_key, self.rng)
        request = RequestMessage(pseudonym, signature, rng.fork("blind").random_scalar(self.params.q))
        payload = encode_message(self.params, request)
        self.router.anon_send(AnonEnvelope(COORDINATOR_ADDRESS, payload, reply_channel=url))
        return pseudonym

    def pool_add_without_request(self) -> Pseudonym:
        pseudonym, signature, _ = self._hold_sybil()
        self.accept_into_pool(PoolRecord(pseudonym, signature))
        return pseudonym

    def double_sign_for(self, accomplice: CorruptedParty) -> Pseudonym:
        """A second valid pseudonym for an already registered party."""
        pseudonym, secret, signature, rng = self.mint_pseudonym()
        accomplice.take_pseudonym(pseudonym, secret, signature, rng)
        return pseudonym

    def reuse_deprecated(self) -> PoolRecord:
        previous = self.board.records(EntryKind.POOL_ADD)
        if not previous:
            raise AttackPreconditionError("no earlier pool entry to reuse")
        record = previous[0]
        self.append(EntryKind.POOL_ADD, record)
        return record

    def register_with_invalid_token(self, identity: str = GHOST_IDENTITY) -> RegisteredRecord:
        rng = self._sybil_rng.fork("identity", identity)
        key = schnorr_keygen(self.params, rng.fork("long-term-key"))
        # Signed with a key that is not the issuer's.
        forged = schnorr_sign(self.params, key, identity.encode("utf-8"), rng.fork("token"), domain=TOKEN_DOMAIN)
        record = RegisteredRecord(identity, AuthToken(identity, forged.to_bytes(self.params)), key.public)
        self.append(EntryKind.REGISTER_PARTY, record)
        self.roster_epoch += 1
        return record


def corrupted_identities(script) -> Tuple[Set[str], bool]:
    """Parties to corrupt and whether the coordinator is malicious, from a scenario script."""
    corrupted: Set[str] = set()
    malicious = False
    for step in script:
        if step.action.value != "inject":
            continue
        attack = step.attack
        if attack in COORDINATOR_ATTACKS:
            malicious = True
        elif attack not in PARTY_ATTACKS:
            raise UnknownAttackError(attack)
        elif step.actor:
            corrupted.add(step.actor)
        if attack in ACCOMPLICE_ATTACKS and step.target:
            corrupted.add(step.target)
    return corrupted, malicious


def arm(simulation, attack: str, actor: Optional[str], target: Optional[str] = None) -> None:
    """Activate an attack inside a running simulation."""
    coordinator = simulation.coordinator
    if attack in COORDINATOR_ATTACKS:
        if not isinstance(coordinator, MaliciousCoordinator):
            raise AttackPreconditionError(f"{attack} needs a malicious coordinator")
        if attack == "skip-deprecation":
            coordinator.skip_deprecation = True
        elif attack == "skip-ban":
            coordinator.skip_ban = True
            if target:
                _corrupted(simulation, target).arm("lie-bit-up")
        elif attack == "sign-for-unregistered":
            coordinator.sign_for_unregistered()
        elif attack == "pool-add-without-request":
            coordinator.pool_add_without_request()
        elif attack == "double-sign-one-party":
            if not target:
                raise AttackPreconditionError("double-sign-one-party needs a target party")
            coordinator.double_sign_for(_corrupted(simulation, target))
        elif attack == "reuse-deprecated":
            coordinator.reuse_deprecated()
        elif attack == "invalid-token-registration":
            coordinator.register_with_invalid_token()
        return

    if attack not in PARTY_ATTACKS:
        raise UnknownAttackError(attack)
    if not actor:
        raise AttackPreconditionError(f"{attack} needs an acting party")
    party = _corrupted(simulation, actor)
    if attack == "wrong-token-registration":
        victim = target or next(i for i in simulation.identities if i != actor)
        party.token = simulation.parties[victim].token
        party.armed.add(attack)
    elif attack == "colluding-pair-swap":
        if not target:
            raise AttackPreconditionError("colluding-pair-swap needs a partner")
        partner = _corrupted(simulation, target)
        hand_over_pseudonyms(partner, party)
        partner.claimed_bit = 1
        partner.armed.add(attack)
        party.armed.add(attack)
    else:
        party.arm(attack)


def _corrupted(simulation, identity: str) -> CorruptedParty:
    party = simulation.parties.get(identity)
    if not isinstance(party, CorruptedParty):
        raise AttackPreconditionError(f"{identity} is not under adversary control")
    return party
