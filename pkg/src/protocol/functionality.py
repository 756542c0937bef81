#!/usr/bin/env python3
"""
Functionality F
Stand-in for the payload computation run by the pool members after a
successful sanity check: an additive-masking secure sum, semi-honest only.
Members address each other by their pool pseudonyms over the anonymous
network. Any protocol with the signature of compute_f_secure_sum can replace it.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence

from models.anon_net import AnonEnvelope, Router
from primitives.substrate import Rng, pack_fields, unpack_fields

logger = logging.getLogger(__name__)

F_SUFFIX = b":f"
SHARE_LABEL = b"share"
PARTIAL_LABEL = b"partial"


class SecureSumAborted(RuntimeError):
    """A member did not deliver its shares or its partial sum."""

    def __init__(self, member: bytes, phase: str):
        super().__init__(f"secure sum aborted: member {member.hex()[:16]} silent in {phase} phase")
        self.member = member
        self.phase = phase


def shares_from_masks(value: int, masks: Sequence[int], modulus: int) -> List[int]:
    """Split value into len(masks) + 1 additive shares mod modulus."""
    last = (value - sum(masks)) % modulus
    return [m % modulus for m in masks] + [last]


@dataclass
class SecureSumMember:
    address: bytes
    value: int
    rng: Rng
    silent: bool = False
    output: int = 0

    @property
    def f_address(self) -> bytes:
        return self.address + F_SUFFIX


def _encode(label: bytes, sender: bytes, value: int, modulus: int) -> bytes:
    width = max(1, (modulus.bit_length() + 7) // 8)
    return pack_fields(label, sender, value.to_bytes(width, "big"))


def _broadcast_round(
    router: Router, members: Sequence[SecureSumMember], label: bytes, values: Dict[bytes, List[int]], modulus: int
) -> Dict[bytes, Dict[bytes, int]]:
    """One all-to-all round: values[sender][j] goes to members[j]; returns inbox per member."""
    for member in members:
        router.register_mailbox(member.f_address)
    for sender in members:
        if sender.silent:
            continue
        for recipient, value in zip(members, values[sender.address]):
            payload = _encode(label, sender.address, value, modulus)
            router.anon_send(AnonEnvelope(recipient.f_address, payload))
    router.flush()

    inboxes: Dict[bytes, Dict[bytes, int]] = {}
    for member in members:
        inbox: Dict[bytes, int] = {}
        for delivery in router.mailbox(member.f_address).pop_all():
            got_label, sender, raw = unpack_fields(delivery.payload)
            if got_label == label:
                inbox[sender] = int.from_bytes(raw, "big") % modulus
        inboxes[member.address] = inbox
    return inboxes


def compute_f_secure_sum(router: Router, members: Sequence[SecureSumMember], modulus: int) -> Dict[bytes, int]:
    """Every member learns sum(values) mod modulus; returns output per member address."""
    if len(members) < 2:
        raise ValueError("secure sum needs at least two members")
    if modulus < 2:
        raise ValueError(f"modulus must be at least 2, got {modulus}")

    try:
        outputs = _run_secure_sum(router, members, modulus)
    finally:
        for member in members:
            router.unregister_mailbox(member.f_address)
    logger.info("secure sum over %d members complete", len(members))
    return outputs


def _run_secure_sum(router: Router, members: Sequence[SecureSumMember], modulus: int) -> Dict[bytes, int]:
    shares: Dict[bytes, List[int]] = {}
    for member in members:
        masks = [member.rng.randbelow(modulus) for _ in range(len(members) - 1)]
        shares[member.address] = shares_from_masks(member.value, masks, modulus)
    inboxes = _broadcast_round(router, members, SHARE_LABEL, shares, modulus)

    partials: Dict[bytes, List[int]] = {}
    for member in members:
        inbox = inboxes[member.address]
        for sender in members:
            if sender.address not in inbox:
                raise SecureSumAborted(sender.address, "share")
        partial = sum(inbox.values()) % modulus
        partials[member.address] = [partial] * len(members)
    inboxes = _broadcast_round(router, members, PARTIAL_LABEL, partials, modulus)

    outputs: Dict[bytes, int] = {}
    for member in members:
        inbox = inboxes[member.address]
        for sender in members:
            if sender.address not in inbox:
                raise SecureSumAborted(sender.address, "partial")
        member.output = sum(inbox.values()) % modulus
        outputs[member.address] = member.output
    return outputs
