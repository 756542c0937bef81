#!/usr/bin/env python3
"""
Okamoto-Schnorr Blind Signatures

The coordinator signs randomized pseudonyms without learning them. The
five moves are:

    signer_commit  -> a
    user_blind     -> e   (blinded challenge)
    signer_respond -> (R1, R2)
    user_unblind   -> (e', r1, r2)
    verify_signature

with the challenge e' = H("OS-sig", a', m) over the blinded commitment
a' = a * g^b1 * h^b2 * v^b3.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

from primitives.substrate import (
    FieldDecodeError,
    GroupElement,
    GroupParams,
    Rng,
    Scalar,
    hash_to_scalar,
    pack_fields,
    unpack_fields,
)

logger = logging.getLogger(__name__)

SIGNATURE_DOMAIN = b"OS-sig"
BLIND_SIGNATURE_TAG = 0x01


class SessionReuseError(RuntimeError):
    """Raised when a signer session is asked to respond twice."""


class SignerMisbehaved(ValueError):
    """Raised when the unblinded signature does not verify."""


class BlindingInconsistent(ValueError):
    """Raised when no blinding factors map a transcript to a signature."""


@dataclass(frozen=True)
class SignerKeyPair:
    s1: Scalar
    s2: Scalar
    v: GroupElement


class SignerSession:
    """Ephemeral signer state for one signing interaction; single use."""

    def __init__(self, t1: Scalar, t2: Scalar, a: GroupElement):
        self._t1: Optional[Scalar] = t1
        self._t2: Optional[Scalar] = t2
        self.a = a

    @property
    def consumed(self) -> bool:
        return self._t1 is None

    def take_secrets(self) -> Tuple[Scalar, Scalar]:
        """Hand out (t1, t2) exactly once; later calls raise."""
        if self._t1 is None or self._t2 is None:
            raise SessionReuseError("signer session already answered a challenge")
        secrets = (self._t1, self._t2)
        self._t1 = None
        self._t2 = None
        return secrets


@dataclass(frozen=True)
class UserSession:
    beta1: Scalar
    beta2: Scalar
    beta3: Scalar
    a: GroupElement
    a_prime: GroupElement
    v: GroupElement
    message: bytes
    e_prime: Scalar
    e: Scalar


@dataclass(frozen=True)
class BlindSignature:
    e_prime: Scalar
    r1: Scalar
    r2: Scalar

    def to_bytes(self, params: GroupParams) -> bytes:
        return bytes([BLIND_SIGNATURE_TAG]) + pack_fields(
            params.encode_scalar(self.e_prime),
            params.encode_scalar(self.r1),
            params.encode_scalar(self.r2),
        )

    @classmethod
    def from_bytes(cls, params: GroupParams, data: bytes) -> "BlindSignature":
        if not data or data[0] != BLIND_SIGNATURE_TAG:
            raise FieldDecodeError("not a blind signature encoding")
        fields = unpack_fields(data[1:])
        if len(fields) != 3:
            raise FieldDecodeError("blind signature needs exactly three fields")
        e_prime, r1, r2 = (params.decode_scalar(field) for field in fields)
        return cls(e_prime=e_prime, r1=r1, r2=r2)


@dataclass(frozen=True)
class SignerTranscript:
    """What the signer sees of one interaction."""

    a: GroupElement
    e: Scalar
    R1: Scalar
    R2: Scalar


def _signature_challenge(params: GroupParams, commitment: GroupElement, message: bytes) -> Scalar:
    return hash_to_scalar(params, SIGNATURE_DOMAIN, [params.encode_element(commitment), message])


def _representation(
    params: GroupParams, v: GroupElement, x1: Scalar, x2: Scalar, e: Scalar
) -> GroupElement:
    """g^x1 * h^x2 * v^e"""
    return params.mul(params.exp(params.g, x1), params.exp(params.h, x2), params.exp(v, e))


def signer_keygen(params: GroupParams, rng: Rng) -> SignerKeyPair:
    s1 = rng.random_scalar(params.q, nonzero=True)
    s2 = rng.random_scalar(params.q, nonzero=True)
    v = params.mul(params.exp(params.g, params.q - s1), params.exp(params.h, params.q - s2))
    return SignerKeyPair(s1=s1, s2=s2, v=v)


def signer_commit(params: GroupParams, key: SignerKeyPair, rng: Rng) -> SignerSession:
    t1 = rng.random_scalar(params.q)
    t2 = rng.random_scalar(params.q)
    a = params.mul(params.exp(params.g, t1), params.exp(params.h, t2))
    return SignerSession(t1, t2, a)


def user_blind(
    params: GroupParams, v: GroupElement, a: GroupElement, message: bytes, rng: Rng
) -> UserSession:
    """Blind the signer's commitment and derive the challenge to send back."""
    params.require_member(a, "signer commitment")
    params.require_member(v, "signer public key")
    beta1 = rng.random_scalar(params.q)
    beta2 = rng.random_scalar(params.q)
    beta3 = rng.random_scalar(params.q)
    a_prime = params.mul(a, _representation(params, v, beta1, beta2, beta3))
    e_prime = _signature_challenge(params, a_prime, message)
    e = (e_prime - beta3) % params.q
    return UserSession(
        beta1=beta1,
        beta2=beta2,
        beta3=beta3,
        a=a,
        a_prime=a_prime,
        v=v,
        message=message,
        e_prime=e_prime,
        e=e,
    )


def signer_respond(
    params: GroupParams, key: SignerKeyPair, session: SignerSession, e: Scalar
) -> Tuple[Scalar, Scalar]:
    t1, t2 = session.take_secrets()
    e = e % params.q
    return (t1 + e * key.s1) % params.q, (t2 + e * key.s2) % params.q


def verify_signature(
    params: GroupParams, v: GroupElement, message: bytes, sig: BlindSignature
) -> bool:
    if not params.is_member(v):
        return False
    if not all(0 <= x < params.q for x in (sig.e_prime, sig.r1, sig.r2)):
        return False
    commitment = _representation(params, v, sig.r1, sig.r2, sig.e_prime)
    return _signature_challenge(params, commitment, message) == sig.e_prime


def user_unblind(params: GroupParams, session: UserSession, R1: Scalar, R2: Scalar) -> BlindSignature:
    signature = BlindSignature(
        e_prime=session.e_prime,
        r1=(R1 + session.beta1) % params.q,
        r2=(R2 + session.beta2) % params.q,
    )
    if not verify_signature(params, session.v, session.message, signature):
        logger.warning("unblinded signature failed verification; signer misbehaved")
        raise SignerMisbehaved("signer misbehaved: unblinded signature does not verify")
    return signature


def signer_sign(params: GroupParams, key: SignerKeyPair, message: bytes, rng: Rng) -> BlindSignature:
    """Issue a signature on a message the signer sees in the clear.

    Honest coordinators never call this. The result verifies like any
    unblinded signature.
    """
    t1 = rng.random_scalar(params.q)
    t2 = rng.random_scalar(params.q)
    a = params.mul(params.exp(params.g, t1), params.exp(params.h, t2))
    e_prime = _signature_challenge(params, a, message)
    return BlindSignature(
        e_prime=e_prime,
        r1=(t1 + e_prime * key.s1) % params.q,
        r2=(t2 + e_prime * key.s2) % params.q,
    )


def transcript_is_valid(params: GroupParams, v: GroupElement, transcript: SignerTranscript) -> bool:
    """g^R1 * h^R2 * v^e == a"""
    return _representation(params, v, transcript.R1, transcript.R2, transcript.e) == transcript.a


def explain_blinding(
    params: GroupParams,
    v: GroupElement,
    transcript: SignerTranscript,
    message: bytes,
    sig: BlindSignature,
) -> Tuple[Scalar, Scalar, Scalar]:
    """Return blinding factors that map the transcript onto the signature.

    Such factors exist for every valid (transcript, signature) pair under
    the same key, so the signer's view carries no information about which
    signature came out of which interaction.
    """
    if not transcript_is_valid(params, v, transcript):
        raise BlindingInconsistent("signer transcript does not verify")
    if not verify_signature(params, v, message, sig):
        raise BlindingInconsistent("signature does not verify")

    beta3 = (sig.e_prime - transcript.e) % params.q
    beta1 = (sig.r1 - transcript.R1) % params.q
    beta2 = (sig.r2 - transcript.R2) % params.q

    a_prime = params.mul(transcript.a, _representation(params, v, beta1, beta2, beta3))
    if _signature_challenge(params, a_prime, message) != sig.e_prime:
        raise BlindingInconsistent("reconstructed commitment does not hash to e'")
    return beta1, beta2, beta3
