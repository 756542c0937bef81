#!/usr/bin/env python3
"""
Sanity Check
All registered parties verify that the pool count on the board equals the
true number of members: each posts an encrypted bit with a bit proof, the
bits are summed homomorphically and the sum is jointly decrypted. On a
mismatch the failure is diagnosed from signed pseudonym reveals and, if
needed, the joint opening of every individual input.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Mapping, Optional, Protocol, Sequence, Tuple

from models.anon_net import Pseudonym
from models.bulletin_board import (
    Contribution,
    CountShare,
    InputReveal,
    PoolRecord,
    PseudonymReveal,
    SanityBoard,
    SanityBoardEntry,
    SanityBoardRejected,
    SanityPayload,
)
from primitives.blind_signatures import BlindSignature, verify_signature
from primitives.substrate import GroupElement, GroupParams, Rng
from primitives.threshold_encryption import (
    Ciphertext,
    InvalidPartialDecryption,
    JointPublicKey,
    KeyShare,
    PartialDecryption,
    aggregate_public_key,
    combine_decryptions,
    dkg_contribute,
    partial_decrypt,
    sum_ciphertexts,
    verify_bit_proof,
    verify_partial_decryption,
)

logger = logging.getLogger(__name__)


class SanityStall(RuntimeError):
    """A roster member did not deliver its message for the current round."""

    def __init__(self, identity: str, round_name: str = ""):
        super().__init__(f"sanity check stalled on {identity}" + (f" ({round_name})" if round_name else ""))
        self.identity = identity


class SoundnessAlarm(RuntimeError):
    """An opened input lies outside {0, 1} although its bit proof verified."""


class VerdictKind(Enum):
    SUCCESS = "Success"
    BAN_PARTY = "BanParty"
    COORDINATOR_MALICIOUS = "CoordinatorMalicious"


class Cause(Enum):
    INVALID_SIGNATURE = "invalid_signature"
    LIED_IN_CHECK = "lied_in_check"
    INVALID_PROOF = "invalid_proof"
    REFUSED_REVEAL = "refused_reveal"
    DUPLICATE_REVEAL = "duplicate_reveal"
    ORPHAN_PSEUDONYM = "orphan_pseudonym"
    BOARD_INCONSISTENT = "board_inconsistent"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    identity: Optional[str] = None
    cause: Optional[Cause] = None

    @classmethod
    def success(cls) -> "Verdict":
        return cls(VerdictKind.SUCCESS)

    @classmethod
    def ban(cls, identity: str, cause: Cause) -> "Verdict":
        return cls(VerdictKind.BAN_PARTY, identity, cause)

    @classmethod
    def coordinator_malicious(cls, cause: Cause) -> "Verdict":
        return cls(VerdictKind.COORDINATOR_MALICIOUS, None, cause)

    @property
    def label(self) -> str:
        """Success, BanParty:<identity>:<cause> or CoordinatorMalicious:<cause>."""
        parts = [self.kind.value]
        if self.identity is not None:
            parts.append(self.identity)
        if self.cause is not None:
            parts.append(self.cause.value)
        return ":".join(parts)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "identity": self.identity,
            "cause": None if self.cause is None else self.cause.value,
        }


class SanityParticipant(Protocol):
    identity: str
    key_share: Optional[KeyShare]

    def sanity_rng(self, run_id: int, label: str) -> Rng: ...

    def contribute(self, joint_key: JointPublicKey, run_id: int) -> Optional[Contribution]: ...

    def reveal_pseudonym(self) -> Optional[Tuple[Pseudonym, BlindSignature]]: ...

    def sign_sanity(self, run_id: int, payload: SanityPayload) -> SanityBoardEntry: ...


@dataclass
class SanityRun:
    run_id: int
    roster: Tuple[str, ...]
    pool: Tuple[PoolRecord, ...]
    board_count: int
    joint_key: Optional[JointPublicKey] = None
    contributions: Dict[str, Contribution] = field(default_factory=dict)
    total: Optional[Ciphertext] = None
    count: Optional[int] = None
    reveals: Dict[str, PseudonymReveal] = field(default_factory=dict)
    opened_bits: Optional[Dict[str, int]] = None
    verdict: Optional[Verdict] = None

    def index_of(self, identity: str) -> int:
        """1-based threshold-encryption index."""
        return self.roster.index(identity) + 1

    @property
    def pool_urls(self) -> Tuple[bytes, ...]:
        return tuple(r.pseudonym.onion_url for r in self.pool)

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "roster": list(self.roster),
            "board_count": self.board_count,
            "count": self.count,
            "opened_bits": self.opened_bits,
            "verdict": None if self.verdict is None else self.verdict.to_dict(),
        }


def _publish(sanity_board: SanityBoard, participant: SanityParticipant, run_id: int, payload: SanityPayload) -> None:
    try:
        sanity_board.publish(participant.sign_sanity(run_id, payload))
    except SanityBoardRejected as e:
        logger.warning("sanity board refused entry from %s: %s", participant.identity, e)


def _by_identity(participants: Sequence[SanityParticipant]) -> Dict[str, SanityParticipant]:
    return {p.identity: p for p in participants}


def run_check(
    params: GroupParams,
    participants: Sequence[SanityParticipant],
    pool_snapshot: Sequence[PoolRecord],
    board_count: int,
    sanity_board: SanityBoard,
    run_id: int,
) -> Tuple[Optional[int], SanityRun]:
    """Key generation, contributions, homomorphic sum and joint decryption.

    Returns the decrypted count (None when an invalid proof ended the run
    early) and the run record. The verdict is set to Success when the count
    matches the board, and left open otherwise.
    """
    by_id = _by_identity(participants)
    roster = tuple(sorted(by_id))
    run = SanityRun(run_id=run_id, roster=roster, pool=tuple(pool_snapshot), board_count=board_count)

    public_shares = []
    for index, identity in enumerate(roster, start=1):
        participant = by_id[identity]
        participant.key_share = dkg_contribute(params, index, participant.sanity_rng(run_id, "dkg"))
        public_shares.append(participant.key_share.public)
    run.joint_key = aggregate_public_key(params, public_shares)

    for identity in roster:
        contribution = by_id[identity].contribute(run.joint_key, run_id)
        if contribution is not None:
            _publish(sanity_board, by_id[identity], run_id, contribution)

    posted = sanity_board.by_type(run_id, Contribution)
    for identity in roster:
        entry = posted.get(identity)
        if entry is None:
            raise SanityStall(identity, "contribution")
        if not verify_bit_proof(params, run.joint_key, entry.payload.ciphertext, entry.payload.proof):
            logger.warning("invalid bit proof from %s", identity)
            run.verdict = Verdict.ban(identity, Cause.INVALID_PROOF)
            return None, run
        run.contributions[identity] = entry.payload

    run.total = sum_ciphertexts(params, [run.contributions[i].ciphertext for i in roster])

    for identity in roster:
        participant = by_id[identity]
        part = partial_decrypt(params, participant.key_share, run.total, participant.sanity_rng(run_id, "count-share"))
        _publish(sanity_board, participant, run_id, CountShare(part))

    posted = sanity_board.by_type(run_id, CountShare)
    parts = []
    for index, identity in enumerate(roster, start=1):
        entry = posted.get(identity)
        if entry is None:
            raise SanityStall(identity, "count share")
        part = entry.payload.part
        if part.owner != index or not verify_partial_decryption(
            params, run.joint_key.share_of(index), run.total, part
        ):
            run.verdict = Verdict.ban(identity, Cause.INVALID_PROOF)
            return None, run
        parts.append(part)

    run.count = combine_decryptions(params, run.total, parts, run.joint_key)
    if run.count == board_count:
        run.verdict = Verdict.success()
    else:
        logger.warning("sanity check %d: decrypted count %d, board count %d", run_id, run.count, board_count)
    return run.count, run


def collect_reveals(
    participants: Sequence[SanityParticipant], sanity_board: SanityBoard, run_id: int
) -> Dict[str, PseudonymReveal]:
    """Every participant publishes its current pseudonym and signature."""
    for participant in participants:
        revealed = participant.reveal_pseudonym()
        if revealed is None:
            logger.warning("%s refuses to reveal its pseudonym", participant.identity)
            continue
        _publish(sanity_board, participant, run_id, PseudonymReveal(*revealed))
    return {author: entry.payload for author, entry in sanity_board.by_type(run_id, PseudonymReveal).items()}


def diagnose_reveals(
    params: GroupParams,
    run: SanityRun,
    reveals: Mapping[str, PseudonymReveal],
    coordinator_key: GroupElement,
) -> Optional[Verdict]:
    """Failure cases decided from the reveals alone, in order; None if neither applies."""
    for identity in run.roster:
        if identity not in reveals:
            return Verdict.ban(identity, Cause.REFUSED_REVEAL)

    for identity in run.roster:
        reveal = reveals[identity]
        if not reveal.pseudonym.is_well_formed(params) or not verify_signature(
            params, coordinator_key, reveal.pseudonym.encode(params), reveal.signature
        ):
            return Verdict.ban(identity, Cause.INVALID_SIGNATURE)

    owners: Dict[bytes, str] = {}
    for identity in run.roster:
        url = reveals[identity].pseudonym.onion_url
        if url in owners:
            return Verdict.ban(identity, Cause.DUPLICATE_REVEAL)
        owners[url] = identity

    for record in run.pool:
        if record.pseudonym.onion_url not in owners:
            logger.warning("pool pseudonym %s matches no revealed pseudonym", record.pseudonym.address)
            return Verdict.coordinator_malicious(Cause.ORPHAN_PSEUDONYM)
    return None


def open_inputs(
    params: GroupParams,
    run: SanityRun,
    participants: Sequence[SanityParticipant],
    sanity_board: SanityBoard,
) -> Dict[str, int]:
    """Jointly decrypt every individual contribution and publish the openings."""
    by_id = _by_identity(participants)
    for identity in run.roster:
        participant = by_id[identity]
        openings = tuple(
            (
                subject,
                partial_decrypt(
                    params,
                    participant.key_share,
                    run.contributions[subject].ciphertext,
                    participant.sanity_rng(run.run_id, f"open:{subject}"),
                ),
            )
            for subject in run.roster
        )
        _publish(sanity_board, participant, run.run_id, InputReveal(openings))

    posted = sanity_board.by_type(run.run_id, InputReveal)
    for identity in run.roster:
        if identity not in posted:
            raise SanityStall(identity, "input opening")

    bits: Dict[str, int] = {}
    for subject in run.roster:
        parts: list = []
        for identity in run.roster:
            openings: Dict[str, PartialDecryption] = dict(posted[identity].payload.openings)
            if subject not in openings:
                raise SanityStall(identity, "input opening")
            parts.append(openings[subject])
        try:
            value = combine_decryptions(params, run.contributions[subject].ciphertext, parts, run.joint_key)
        except InvalidPartialDecryption as e:
            raise SanityStall(run.roster[e.index - 1], "input opening") from e
        if value not in (0, 1):
            raise SoundnessAlarm(f"opened input of {subject} is {value}")
        bits[subject] = value
    run.opened_bits = bits
    return bits


def diagnose_failure(
    params: GroupParams,
    run: SanityRun,
    reveals: Mapping[str, PseudonymReveal],
    coordinator_key: GroupElement,
    opened_bits: Optional[Mapping[str, int]],
) -> Verdict:
    verdict = diagnose_reveals(params, run, reveals, coordinator_key)
    if verdict is not None:
        return verdict
    if opened_bits is None:
        raise ValueError("diagnosing a lie needs the opened inputs")

    pool_urls = set(run.pool_urls)
    for identity in run.roster:
        in_pool = int(reveals[identity].pseudonym.onion_url in pool_urls)
        if opened_bits[identity] != in_pool:
            return Verdict.ban(identity, Cause.LIED_IN_CHECK)
    return Verdict.coordinator_malicious(Cause.BOARD_INCONSISTENT)


def conduct_sanity_check(
    params: GroupParams,
    participants: Sequence[SanityParticipant],
    pool_snapshot: Sequence[PoolRecord],
    board_count: int,
    sanity_board: SanityBoard,
    run_id: int,
    coordinator_key: GroupElement,
) -> SanityRun:
    """Run the check and, on a count mismatch, the full diagnosis."""
    _, run = run_check(params, participants, pool_snapshot, board_count, sanity_board, run_id)
    if run.verdict is not None:
        return run

    run.reveals = collect_reveals(participants, sanity_board, run_id)
    verdict = diagnose_reveals(params, run, run.reveals, coordinator_key)
    if verdict is None:
        bits = open_inputs(params, run, participants, sanity_board)
        verdict = diagnose_failure(params, run, run.reveals, coordinator_key, bits)
    run.verdict = verdict
    logger.warning("sanity check %d failed: %s", run_id, verdict.label)
    return run
