#!/usr/bin/env python3
"""
Wire Messages
Tagged canonical byte structures exchanged between parties and the
coordinator. Each message is one tag byte followed by length-prefixed
fields; layouts are listed in PROTOCOL.md.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Type, Union

from models.anon_net import Pseudonym
from models.identity_provider import AuthToken
from primitives.blind_signatures import BlindSignature
from primitives.substrate import GroupElement, GroupParams, Scalar, pack_fields, unpack_fields

REGISTER = 0x10
REQUEST = 0x11
RENEW = 0x12
COMMIT = 0x13
COMMITMENT = 0x20
RESPONSE = 0x21
ACCEPT = 0x22
REJECT = 0x23

RENEW_DOMAIN = b"renew-request"


class MessageDecodeError(ValueError):
    """Raised for bytes that are not a well-formed wire message."""


class RejectReason(str, Enum):
    BAD_SIGNATURE = "bad_signature"
    REPLAY = "replay"
    UNREACHABLE = "unreachable"
    NO_COMMITMENT = "no_commitment"
    MALFORMED = "malformed"
    INVALID_TOKEN = "invalid_token"
    DUPLICATE_IDENTITY = "duplicate_identity"
    BANNED = "banned"
    UNKNOWN_IDENTITY = "unknown_identity"
    BAD_AUTHOR_SIGNATURE = "bad_author_signature"
    NO_SESSION = "no_session"
    DUPLICATE_COMMIT = "duplicate_commit"


class RegistrationRejected(ValueError):
    def __init__(self, reason: RejectReason, detail: str = ""):
        super().__init__(f"registration rejected: {reason.value}" + (f" ({detail})" if detail else ""))
        self.reason = reason


class RequestRejected(ValueError):
    def __init__(self, reason: RejectReason, detail: str = ""):
        super().__init__(f"request rejected: {reason.value}" + (f" ({detail})" if detail else ""))
        self.reason = reason


@dataclass(frozen=True)
class RegisterMessage:
    """Identity-linked registration: the pseudonym travels only in blinded form."""

    identity: str
    token: AuthToken
    public_key: GroupElement
    blinded_e: Scalar

    TAG = REGISTER

    def fields(self, params: GroupParams) -> List[bytes]:
        return [
            self.identity.encode("utf-8"),
            self.token.to_bytes(),
            params.encode_element(self.public_key),
            params.encode_scalar(self.blinded_e),
        ]

    @classmethod
    def from_fields(cls, params: GroupParams, fields: List[bytes]) -> "RegisterMessage":
        identity, token, public_key, blinded_e = fields
        return cls(
            identity=identity.decode("utf-8"),
            token=AuthToken.from_bytes(token),
            public_key=params.decode_element(public_key),
            blinded_e=params.decode_scalar(blinded_e),
        )


@dataclass(frozen=True)
class RequestMessage:
    """Anonymous pool request: current pseudonym, its signature, next blinded challenge."""

    pseudonym: Pseudonym
    signature: BlindSignature
    blinded_e: Scalar

    TAG = REQUEST

    def fields(self, params: GroupParams) -> List[bytes]:
        return [
            self.pseudonym.encode(params),
            self.signature.to_bytes(params),
            params.encode_scalar(self.blinded_e),
        ]

    @classmethod
    def from_fields(cls, params: GroupParams, fields: List[bytes]) -> "RequestMessage":
        pseudonym, signature, blinded_e = fields
        return cls(
            pseudonym=Pseudonym.decode(params, pseudonym),
            signature=BlindSignature.from_bytes(params, signature),
            blinded_e=params.decode_scalar(blinded_e),
        )


@dataclass(frozen=True)
class RenewMessage:
    """Post-failure renewal, signed with the party's long-term key."""

    identity: str
    blinded_e: Scalar
    author_signature: bytes

    TAG = RENEW

    @staticmethod
    def signing_bytes(params: GroupParams, identity: str, blinded_e: Scalar) -> bytes:
        return pack_fields(identity.encode("utf-8"), params.encode_scalar(blinded_e))

    def fields(self, params: GroupParams) -> List[bytes]:
        return [self.identity.encode("utf-8"), params.encode_scalar(self.blinded_e), self.author_signature]

    @classmethod
    def from_fields(cls, params: GroupParams, fields: List[bytes]) -> "RenewMessage":
        identity, blinded_e, signature = fields
        return cls(identity.decode("utf-8"), params.decode_scalar(blinded_e), signature)


@dataclass(frozen=True)
class CommitMessage:
    """Asks for a signer commitment for the renewal of this onion URL."""

    onion_url: bytes

    TAG = COMMIT

    def fields(self, params: GroupParams) -> List[bytes]:
        return [self.onion_url]

    @classmethod
    def from_fields(cls, params: GroupParams, fields: List[bytes]) -> "CommitMessage":
        (onion_url,) = fields
        return cls(onion_url)


@dataclass(frozen=True)
class CommitmentMessage:
    a: GroupElement

    TAG = COMMITMENT

    def fields(self, params: GroupParams) -> List[bytes]:
        return [params.encode_element(self.a)]

    @classmethod
    def from_fields(cls, params: GroupParams, fields: List[bytes]) -> "CommitmentMessage":
        (a,) = fields
        return cls(params.decode_element(a))


@dataclass(frozen=True)
class ResponseMessage:
    R1: Scalar
    R2: Scalar

    TAG = RESPONSE

    def fields(self, params: GroupParams) -> List[bytes]:
        return [params.encode_scalar(self.R1), params.encode_scalar(self.R2)]

    @classmethod
    def from_fields(cls, params: GroupParams, fields: List[bytes]) -> "ResponseMessage":
        R1, R2 = fields
        return cls(params.decode_scalar(R1), params.decode_scalar(R2))


@dataclass(frozen=True)
class AcceptMessage:
    onion_url: bytes

    TAG = ACCEPT

    def fields(self, params: GroupParams) -> List[bytes]:
        return [self.onion_url]

    @classmethod
    def from_fields(cls, params: GroupParams, fields: List[bytes]) -> "AcceptMessage":
        (onion_url,) = fields
        return cls(onion_url)


@dataclass(frozen=True)
class RejectMessage:
    reason: str

    TAG = REJECT

    def fields(self, params: GroupParams) -> List[bytes]:
        return [self.reason.encode("ascii")]

    @classmethod
    def from_fields(cls, params: GroupParams, fields: List[bytes]) -> "RejectMessage":
        (reason,) = fields
        return cls(reason.decode("ascii"))


Message = Union[
    RegisterMessage,
    RequestMessage,
    RenewMessage,
    CommitMessage,
    CommitmentMessage,
    ResponseMessage,
    AcceptMessage,
    RejectMessage,
]

MESSAGE_TYPES: Dict[int, Type] = {
    cls.TAG: cls
    for cls in (
        RegisterMessage,
        RequestMessage,
        RenewMessage,
        CommitMessage,
        CommitmentMessage,
        ResponseMessage,
        AcceptMessage,
        RejectMessage,
    )
}


def encode_message(params: GroupParams, message: Message) -> bytes:
    return bytes([message.TAG]) + pack_fields(*message.fields(params))


def decode_message(params: GroupParams, data: bytes) -> Message:
    if not data:
        raise MessageDecodeError("empty message")
    message_type = MESSAGE_TYPES.get(data[0])
    if message_type is None:
        raise MessageDecodeError(f"unknown message tag 0x{data[0]:02x}")
    try:
        return message_type.from_fields(params, unpack_fields(data[1:]))
    except (ValueError, UnicodeDecodeError) as e:
        raise MessageDecodeError(f"malformed {message_type.__name__}: {e}") from e
