#!/usr/bin/env python3
"""
Bulletin Board
The coordinator's hash-chained, append-only public log (registered parties,
threshold pool, deprecated pseudonyms), the auditor that replays the four
audit checks over every update, and the party-writable sanity board used
when a sanity check fails.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

from models.anon_net import Pseudonym, Router, reachability_check
from models.identity_provider import AuthToken, verify_token
from primitives.blind_signatures import BlindSignature, verify_signature
from primitives.schnorr import SchnorrKeyPair, schnorr_sign, verify_signature_bytes
from primitives.substrate import (
    FieldDecodeError,
    GroupElement,
    GroupParams,
    Rng,
    pack_fields,
    unpack_fields,
    validate_group,
)
from primitives.threshold_encryption import BitProof, Ciphertext, PartialDecryption

logger = logging.getLogger(__name__)

GENESIS_HASH = hashlib.sha256(b"anonpool bulletin board genesis").digest()
DUMP_HEADER = "# anonpool-board v1"
COORDINATOR_IDENTITY = "coordinator"
SANITY_DOMAIN = b"sanity-board"


class BoardWriteDenied(PermissionError):
    """Raised when anyone but the coordinator writes the main board."""


class SanityBoardRejected(ValueError):
    """Raised when a sanity-board entry has a bad author or signature."""


class EntryKind(Enum):
    REGISTER_PARTY = "RegisterParty"
    POOL_ADD = "PoolAdd"
    DEPRECATE = "Deprecate"
    BAN = "Ban"
    POOL_DRAIN = "PoolDrain"


class PartyStatus(Enum):
    ACTIVE = "active"
    BANNED = "banned"


class AuditCheck(Enum):
    """Audit check ids; CHAIN covers a broken hash chain."""

    TOKEN_VALID = 1
    POOL_PSEUDONYM_VALID = 2
    POOL_DEPRECATED = 3
    MALICIOUS_REMOVED = 4
    CHAIN = "chain"


def compute_entry_hash(prev_hash: bytes, kind: EntryKind, payload: bytes) -> bytes:
    return hashlib.sha256(pack_fields(prev_hash, kind.value.encode("ascii"), payload)).digest()


@dataclass(frozen=True)
class BoardEntry:
    seq: int
    prev_hash: bytes
    kind: EntryKind
    payload: bytes
    entry_hash: bytes

    def hash_is_valid(self) -> bool:
        return self.entry_hash == compute_entry_hash(self.prev_hash, self.kind, self.payload)

    def dump_line(self) -> str:
        return f"{self.seq}:{self.kind.value}:{self.payload.hex()}:{self.entry_hash.hex()}"


# Records: decoded payloads of board entries


@dataclass(frozen=True)
class RegisteredRecord:
    identity: str
    auth_token: AuthToken
    public_key: GroupElement
    status: PartyStatus = PartyStatus.ACTIVE

    def encode(self, params: GroupParams) -> bytes:
        return pack_fields(
            self.identity.encode("utf-8"),
            self.auth_token.to_bytes(),
            params.encode_element(self.public_key),
        )

    @classmethod
    def decode(cls, params: GroupParams, payload: bytes) -> "RegisteredRecord":
        identity, token, public_key = unpack_fields(payload)
        return cls(
            identity=identity.decode("utf-8"),
            auth_token=AuthToken.from_bytes(token),
            public_key=params.decode_element(public_key),
        )


@dataclass(frozen=True)
class PoolRecord:
    pseudonym: Pseudonym
    signature: BlindSignature

    def encode(self, params: GroupParams) -> bytes:
        return pack_fields(self.pseudonym.encode(params), self.signature.to_bytes(params))

    @classmethod
    def decode(cls, params: GroupParams, payload: bytes) -> "PoolRecord":
        pseudonym, signature = unpack_fields(payload)
        return cls(
            pseudonym=Pseudonym.decode(params, pseudonym),
            signature=BlindSignature.from_bytes(params, signature),
        )


@dataclass(frozen=True)
class DeprecationRecord:
    pseudonym: Pseudonym

    def encode(self, params: GroupParams) -> bytes:
        return self.pseudonym.encode(params)

    @classmethod
    def decode(cls, params: GroupParams, payload: bytes) -> "DeprecationRecord":
        return cls(pseudonym=Pseudonym.decode(params, payload))


@dataclass(frozen=True)
class BanRecord:
    identity: str

    def encode(self, params: GroupParams) -> bytes:
        return self.identity.encode("utf-8")

    @classmethod
    def decode(cls, params: GroupParams, payload: bytes) -> "BanRecord":
        return cls(identity=payload.decode("utf-8"))


@dataclass(frozen=True)
class DrainRecord:
    onion_urls: Tuple[bytes, ...]

    def encode(self, params: GroupParams) -> bytes:
        return pack_fields(*self.onion_urls)

    @classmethod
    def decode(cls, params: GroupParams, payload: bytes) -> "DrainRecord":
        return cls(onion_urls=tuple(unpack_fields(payload)))


BoardRecord = Union[RegisteredRecord, PoolRecord, DeprecationRecord, BanRecord, DrainRecord]

RECORD_TYPES = {
    EntryKind.REGISTER_PARTY: RegisteredRecord,
    EntryKind.POOL_ADD: PoolRecord,
    EntryKind.DEPRECATE: DeprecationRecord,
    EntryKind.BAN: BanRecord,
    EntryKind.POOL_DRAIN: DrainRecord,
}


def decode_record(params: GroupParams, entry: BoardEntry) -> BoardRecord:
    return RECORD_TYPES[entry.kind].decode(params, entry.payload)


class BoardCredential:
    """Opaque write capability held by the coordinator."""

    def __init__(self, holder: str):
        self.holder = holder

    def __repr__(self) -> str:
        return f"BoardCredential({self.holder!r})"


class BulletinBoard:
    """Append-only hash-chained log with a single writer."""

    def __init__(self, params: GroupParams, writer: BoardCredential):
        self.params = params
        self._writer = writer
        self._entries: List[BoardEntry] = []

    @property
    def entries(self) -> Tuple[BoardEntry, ...]:
        return tuple(self._entries)

    @property
    def head_hash(self) -> bytes:
        return self._entries[-1].entry_hash if self._entries else GENESIS_HASH

    def __len__(self) -> int:
        return len(self._entries)

    def append(self, kind: EntryKind, payload: bytes, credential: BoardCredential) -> BoardEntry:
        if credential is not self._writer:
            raise BoardWriteDenied(f"{credential!r} may not write the bulletin board")
        prev_hash = self.head_hash
        entry = BoardEntry(
            seq=len(self._entries),
            prev_hash=prev_hash,
            kind=kind,
            payload=payload,
            entry_hash=compute_entry_hash(prev_hash, kind, payload),
        )
        self._entries.append(entry)
        logger.debug("board entry %d: %s", entry.seq, kind.value)
        return entry

    def snapshot(self) -> Tuple[BoardEntry, ...]:
        return self.entries

    def entries_since(self, seq: int) -> Tuple[BoardEntry, ...]:
        """Entries with sequence number >= seq."""
        return tuple(self._entries[seq:])

    def records(self, kind: EntryKind) -> List[BoardRecord]:
        return [decode_record(self.params, e) for e in self._entries if e.kind == kind]

    def registered(self) -> Dict[str, RegisteredRecord]:
        """Registered section with ban status applied."""
        section: Dict[str, RegisteredRecord] = {}
        for entry in self._entries:
            if entry.kind == EntryKind.REGISTER_PARTY:
                record = RegisteredRecord.decode(self.params, entry.payload)
                section[record.identity] = record
            elif entry.kind == EntryKind.BAN:
                identity = BanRecord.decode(self.params, entry.payload).identity
                if identity in section:
                    old = section[identity]
                    section[identity] = RegisteredRecord(
                        old.identity, old.auth_token, old.public_key, PartyStatus.BANNED
                    )
        return section

    def active_identities(self) -> List[str]:
        return sorted(i for i, r in self.registered().items() if r.status == PartyStatus.ACTIVE)

    def pool(self) -> List[PoolRecord]:
        """Current threshold pool: PoolAdds since the last PoolDrain."""
        current: List[PoolRecord] = []
        for entry in self._entries:
            if entry.kind == EntryKind.POOL_ADD:
                current.append(PoolRecord.decode(self.params, entry.payload))
            elif entry.kind == EntryKind.POOL_DRAIN:
                current = []
        return current

    def deprecated(self) -> Set[bytes]:
        return {
            DeprecationRecord.decode(self.params, e.payload).pseudonym.onion_url
            for e in self._entries
            if e.kind == EntryKind.DEPRECATE
        }

    def verify_chain(self) -> bool:
        return verify_chain(self._entries)

    def dump_lines(self, coordinator_key: GroupElement, issuer_key: GroupElement) -> List[str]:
        p = self.params
        header = [
            DUMP_HEADER,
            f"# params {p.p} {p.q} {p.g} {p.h}",
            f"# coordinator {coordinator_key}",
            f"# issuer {issuer_key}",
        ]
        return header + [entry.dump_line() for entry in self._entries]

    def save_dump(self, path: str, coordinator_key: GroupElement, issuer_key: GroupElement) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(self.dump_lines(coordinator_key, issuer_key)) + "\n")


def pool_size(board: BulletinBoard) -> int:
    return len(board.pool())


def verify_chain(entries: Sequence[BoardEntry]) -> bool:
    prev_hash = GENESIS_HASH
    for expected_seq, entry in enumerate(entries):
        if entry.seq != expected_seq or entry.prev_hash != prev_hash or not entry.hash_is_valid():
            return False
        prev_hash = entry.entry_hash
    return True


def is_prefix(older: Sequence[BoardEntry], newer: Sequence[BoardEntry]) -> bool:
    """True iff older is a prefix of newer and both chains verify."""
    if len(older) > len(newer) or not verify_chain(newer):
        return False
    return all(a.entry_hash == b.entry_hash for a, b in zip(older, newer))


@dataclass
class BoardDump:
    params: GroupParams
    coordinator_key: GroupElement
    issuer_key: GroupElement
    entries: List[BoardEntry]


def load_dump(path: str) -> BoardDump:
    """Parse a board dump; prev_hash is re-derived from the preceding line."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header: Dict[str, List[str]] = {}
    entries: List[BoardEntry] = []
    prev_hash = GENESIS_HASH
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts:
                header[parts[0]] = parts[1:]
            continue
        try:
            seq, kind, payload_hex, hash_hex = line.split(":")
            entry = BoardEntry(
                seq=int(seq),
                prev_hash=prev_hash,
                kind=EntryKind(kind),
                payload=bytes.fromhex(payload_hex),
                entry_hash=bytes.fromhex(hash_hex),
            )
        except ValueError as e:
            raise FieldDecodeError(f"malformed dump line {line[:40]!r}: {e}") from e
        entries.append(entry)
        prev_hash = entry.entry_hash

    try:
        p, q, g, h = (int(x) for x in header["params"])
        coordinator_key = int(header["coordinator"][0])
        issuer_key = int(header["issuer"][0])
    except (KeyError, IndexError, ValueError) as e:
        raise FieldDecodeError(f"board dump header incomplete: {e}") from e
    params = GroupParams(p, q, g, h)
    validate_group(params)
    return BoardDump(params, coordinator_key, issuer_key, entries)


# Auditing


@dataclass(frozen=True)
class AuditVerdict:
    ok: bool
    check: Optional[AuditCheck] = None
    seq: Optional[int] = None
    detail: str = ""

    @classmethod
    def passed(cls) -> "AuditVerdict":
        return cls(ok=True)

    @classmethod
    def violation(cls, check: AuditCheck, seq: Optional[int], detail: str) -> "AuditVerdict":
        return cls(ok=False, check=check, seq=seq, detail=detail)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "check": None if self.check is None else self.check.value,
            "seq": self.seq,
            "detail": self.detail,
        }


class BoardAuditor:
    """A registered party's view of the board, updated incrementally.

    Holds the coordinator and issuer public keys plus everything derived
    from the entries audited so far. With a router attached, new pool
    pseudonyms are also challenged for reachability.
    """

    def __init__(
        self,
        params: GroupParams,
        coordinator_key: GroupElement,
        issuer_key: GroupElement,
        router: Optional[Router] = None,
    ):
        self.params = params
        self.coordinator_key = coordinator_key
        self.issuer_key = issuer_key
        self.router = router
        self.last_seq = -1
        self.last_hash = GENESIS_HASH
        self.registered: Dict[str, RegisteredRecord] = {}
        self.banned: Set[str] = set()
        self.deprecated: Set[bytes] = set()
        self.pool_history: Set[bytes] = set()
        self.pool: List[PoolRecord] = []
        self.pending_bans: Set[str] = set()
        self.violation: Optional[AuditVerdict] = None

    def expect_ban(self, identity: str) -> None:
        """A sanity-check diagnosis named this identity; the next entry must ban it."""
        self.pending_bans.add(identity)

    def audit_update(self, new_entries: Sequence[BoardEntry]) -> AuditVerdict:
        if self.violation is not None:
            return self.violation
        # Only pseudonyms added after the last drain in this batch are still held.
        drains = [e.seq for e in new_entries if e.kind == EntryKind.POOL_DRAIN]
        live_from = drains[-1] + 1 if drains else -1
        for entry in new_entries:
            if entry.seq <= self.last_seq:
                continue
            verdict = self._audit_entry(entry, live=entry.seq >= live_from)
            if not verdict.ok:
                logger.warning("audit violation at seq %s: %s", verdict.seq, verdict.detail)
                self.violation = verdict
                return verdict
        return AuditVerdict.passed()

    def check_settled(self) -> AuditVerdict:
        """After a failed sanity check: every named party must have been banned."""
        if self.violation is not None:
            return self.violation
        if self.pending_bans:
            verdict = AuditVerdict.violation(
                AuditCheck.MALICIOUS_REMOVED,
                self.last_seq,
                f"detected malicious parties not removed: {sorted(self.pending_bans)}",
            )
            self.violation = verdict
            return verdict
        return AuditVerdict.passed()

    def _audit_entry(self, entry: BoardEntry, live: bool = True) -> AuditVerdict:
        seq = entry.seq
        if entry.seq != self.last_seq + 1 or entry.prev_hash != self.last_hash or not entry.hash_is_valid():
            return AuditVerdict.violation(AuditCheck.CHAIN, seq, "hash chain broken")
        self.last_seq = entry.seq
        self.last_hash = entry.entry_hash

        if self.pending_bans and entry.kind != EntryKind.BAN:
            return AuditVerdict.violation(
                AuditCheck.MALICIOUS_REMOVED, seq, f"{entry.kind.value} appended before pending ban"
            )

        try:
            record = decode_record(self.params, entry)
        except (FieldDecodeError, ValueError) as e:
            return AuditVerdict.violation(self._check_for_kind(entry.kind), seq, f"undecodable payload: {e}")

        if isinstance(record, RegisteredRecord):
            return self._audit_registration(seq, record)
        if isinstance(record, PoolRecord):
            return self._audit_pool_add(seq, entry, record, live)
        if isinstance(record, DeprecationRecord):
            self.deprecated.add(record.pseudonym.onion_url)
            return AuditVerdict.passed()
        if isinstance(record, DrainRecord):
            return self._audit_drain(seq, record)
        return self._audit_ban(seq, record)

    @staticmethod
    def _check_for_kind(kind: EntryKind) -> AuditCheck:
        return {
            EntryKind.REGISTER_PARTY: AuditCheck.TOKEN_VALID,
            EntryKind.POOL_ADD: AuditCheck.POOL_PSEUDONYM_VALID,
            EntryKind.DEPRECATE: AuditCheck.POOL_DEPRECATED,
            EntryKind.POOL_DRAIN: AuditCheck.POOL_DEPRECATED,
            EntryKind.BAN: AuditCheck.MALICIOUS_REMOVED,
        }[kind]

    def _audit_registration(self, seq: int, record: RegisteredRecord) -> AuditVerdict:
        if record.identity in self.banned:
            return AuditVerdict.violation(
                AuditCheck.MALICIOUS_REMOVED, seq, f"banned identity {record.identity} re-admitted"
            )
        if not verify_token(self.params, self.issuer_key, record.auth_token, record.identity):
            return AuditVerdict.violation(
                AuditCheck.TOKEN_VALID, seq, f"invalid authentication token for {record.identity}"
            )
        if record.identity in self.registered:
            return AuditVerdict.violation(
                AuditCheck.TOKEN_VALID, seq, f"identity {record.identity} registered twice"
            )
        self.registered[record.identity] = record
        return AuditVerdict.passed()

    def _audit_pool_add(self, seq: int, entry: BoardEntry, record: PoolRecord, live: bool) -> AuditVerdict:
        pseudonym = record.pseudonym
        if not pseudonym.is_well_formed(self.params):
            return AuditVerdict.violation(AuditCheck.POOL_PSEUDONYM_VALID, seq, "malformed pseudonym")
        if not verify_signature(self.params, self.coordinator_key, pseudonym.encode(self.params), record.signature):
            return AuditVerdict.violation(
                AuditCheck.POOL_PSEUDONYM_VALID, seq, f"bad signature on {pseudonym.address}"
            )
        if pseudonym.onion_url in self.deprecated or pseudonym.onion_url in self.pool_history:
            return AuditVerdict.violation(
                AuditCheck.POOL_PSEUDONYM_VALID, seq, f"deprecated pseudonym {pseudonym.address} reused"
            )
        if self.router is not None and live:
            nonce = hashlib.sha256(b"audit-nonce" + entry.entry_hash).digest()
            if not reachability_check(self.params, self.router, pseudonym, nonce):
                return AuditVerdict.violation(
                    AuditCheck.POOL_PSEUDONYM_VALID, seq, f"pseudonym {pseudonym.address} unreachable"
                )
        self.pool_history.add(pseudonym.onion_url)
        self.pool.append(record)
        return AuditVerdict.passed()

    def _audit_drain(self, seq: int, record: DrainRecord) -> AuditVerdict:
        pool_urls = [r.pseudonym.onion_url for r in self.pool]
        if list(record.onion_urls) != pool_urls:
            return AuditVerdict.violation(
                AuditCheck.POOL_DEPRECATED, seq, "drained pseudonyms differ from the pool"
            )
        missing = [url for url in pool_urls if url not in self.deprecated]
        if missing:
            return AuditVerdict.violation(
                AuditCheck.POOL_DEPRECATED, seq, f"{len(missing)} drained pseudonym(s) not deprecated"
            )
        self.pool = []
        return AuditVerdict.passed()

    def _audit_ban(self, seq: int, record: BanRecord) -> AuditVerdict:
        if record.identity not in self.registered or record.identity in self.banned:
            return AuditVerdict.violation(
                AuditCheck.MALICIOUS_REMOVED, seq, f"ban of non-registered identity {record.identity}"
            )
        self.banned.add(record.identity)
        self.pending_bans.discard(record.identity)
        return AuditVerdict.passed()


def audit_update(auditor: BoardAuditor, new_entries: Sequence[BoardEntry]) -> AuditVerdict:
    return auditor.audit_update(new_entries)


def audit_dump(dump: BoardDump) -> AuditVerdict:
    """Replay every audit check over a dumped board from genesis."""
    auditor = BoardAuditor(dump.params, dump.coordinator_key, dump.issuer_key)
    return auditor.audit_update(dump.entries)


# Sanity board: written by parties, read by everyone


@dataclass(frozen=True)
class Contribution:
    ciphertext: Ciphertext
    proof: BitProof

    def encode(self, params: GroupParams) -> bytes:
        return pack_fields(b"contribution", self.ciphertext.to_bytes(params), self.proof.to_bytes(params))


@dataclass(frozen=True)
class CountShare:
    """A party's partial decryption of the homomorphic sum."""

    part: PartialDecryption

    def encode(self, params: GroupParams) -> bytes:
        return pack_fields(b"count-share", self.part.to_bytes(params))


@dataclass(frozen=True)
class PseudonymReveal:
    pseudonym: Pseudonym
    signature: BlindSignature

    def encode(self, params: GroupParams) -> bytes:
        return pack_fields(b"pseudonym-reveal", self.pseudonym.encode(params), self.signature.to_bytes(params))


@dataclass(frozen=True)
class InputReveal:
    """A party's partial decryptions of every individual sanity input."""

    openings: Tuple[Tuple[str, PartialDecryption], ...]

    def encode(self, params: GroupParams) -> bytes:
        return pack_fields(
            b"input-reveal",
            *(pack_fields(subject.encode("utf-8"), part.to_bytes(params)) for subject, part in self.openings),
        )


SanityPayload = Union[Contribution, CountShare, PseudonymReveal, InputReveal]


def sanity_message(params: GroupParams, run_id: int, author: str, payload: SanityPayload) -> bytes:
    return pack_fields(run_id.to_bytes(4, "big"), author.encode("utf-8"), payload.encode(params))


@dataclass(frozen=True)
class SanityBoardEntry:
    run_id: int
    author: str
    payload: SanityPayload
    author_signature: bytes

    @classmethod
    def signed(
        cls,
        params: GroupParams,
        run_id: int,
        author: str,
        payload: SanityPayload,
        key: SchnorrKeyPair,
        rng: Rng,
    ) -> "SanityBoardEntry":
        message = sanity_message(params, run_id, author, payload)
        signature = schnorr_sign(params, key, message, rng, domain=SANITY_DOMAIN)
        return cls(run_id, author, payload, signature.to_bytes(params))


@dataclass
class SanityBoard:
    """Broadcast channel among registered parties; the coordinator only reads."""

    params: GroupParams
    author_keys: Mapping[str, GroupElement]
    entries: List[SanityBoardEntry] = field(default_factory=list)

    def publish(self, entry: SanityBoardEntry) -> None:
        if entry.author == COORDINATOR_IDENTITY:
            raise SanityBoardRejected("the coordinator cannot write the sanity board")
        public_key = self.author_keys.get(entry.author)
        if public_key is None:
            raise SanityBoardRejected(f"{entry.author} is not a registered party")
        message = sanity_message(self.params, entry.run_id, entry.author, entry.payload)
        if not verify_signature_bytes(self.params, public_key, message, entry.author_signature, domain=SANITY_DOMAIN):
            raise SanityBoardRejected(f"bad author signature from {entry.author}")
        self.entries.append(entry)

    def by_type(self, run_id: int, payload_type: type) -> Dict[str, SanityBoardEntry]:
        """Latest entry of a payload type per author for one run."""
        found: Dict[str, SanityBoardEntry] = {}
        for entry in self.entries:
            if entry.run_id == run_id and isinstance(entry.payload, payload_type):
                found[entry.author] = entry
        return found


def sanity_board_publish(sboard: SanityBoard, entry: SanityBoardEntry) -> None:
    sboard.publish(entry)
