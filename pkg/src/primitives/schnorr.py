#!/usr/bin/env python3
"""
Schnorr Signatures
Plain Schnorr signatures over the shared group. Used for long-term party
keys, identity tokens, onion-service identity keys and reachability replies.
"""

from dataclasses import dataclass

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

SIGNATURE_TAG = 0x07
DEFAULT_DOMAIN = b"schnorr-sig"


@dataclass(frozen=True)
class SchnorrKeyPair:
    secret: Scalar
    public: GroupElement


@dataclass(frozen=True)
class SchnorrSignature:
    e: Scalar
    z: Scalar

    def to_bytes(self, params: GroupParams) -> bytes:
        return bytes([SIGNATURE_TAG]) + pack_fields(
            params.encode_scalar(self.e), params.encode_scalar(self.z)
        )

    @classmethod
    def from_bytes(cls, params: GroupParams, data: bytes) -> "SchnorrSignature":
        if not data or data[0] != SIGNATURE_TAG:
            raise FieldDecodeError("not a Schnorr signature encoding")
        fields = unpack_fields(data[1:])
        if len(fields) != 2:
            raise FieldDecodeError("Schnorr signature needs exactly two fields")
        return cls(e=params.decode_scalar(fields[0]), z=params.decode_scalar(fields[1]))


def schnorr_keygen(params: GroupParams, rng: Rng) -> SchnorrKeyPair:
    secret = rng.random_scalar(params.q, nonzero=True)
    return SchnorrKeyPair(secret=secret, public=params.exp(params.g, secret))


def _challenge(
    params: GroupParams, domain: bytes, public: GroupElement, commitment: GroupElement, message: bytes
) -> Scalar:
    return hash_to_scalar(
        params,
        domain,
        [params.encode_element(public), params.encode_element(commitment), message],
    )


def schnorr_sign(
    params: GroupParams,
    key: SchnorrKeyPair,
    message: bytes,
    rng: Rng,
    domain: bytes = DEFAULT_DOMAIN,
) -> SchnorrSignature:
    nonce = rng.random_scalar(params.q, nonzero=True)
    commitment = params.exp(params.g, nonce)
    e = _challenge(params, domain, key.public, commitment, message)
    return SchnorrSignature(e=e, z=(nonce + e * key.secret) % params.q)


def schnorr_verify(
    params: GroupParams,
    public: GroupElement,
    message: bytes,
    signature: SchnorrSignature,
    domain: bytes = DEFAULT_DOMAIN,
) -> bool:
    if not params.is_member(public):
        return False
    if not (0 <= signature.e < params.q and 0 <= signature.z < params.q):
        return False
    commitment = params.mul(
        params.exp(params.g, signature.z), params.exp(public, params.q - signature.e)
    )
    return _challenge(params, domain, public, commitment, message) == signature.e


def verify_signature_bytes(
    params: GroupParams,
    public: GroupElement,
    message: bytes,
    data: bytes,
    domain: bytes = DEFAULT_DOMAIN,
) -> bool:
    """Verify an encoded signature; malformed encodings verify as False."""
    try:
        signature = SchnorrSignature.from_bytes(params, data)
    except FieldDecodeError:
        return False
    return schnorr_verify(params, public, message, signature, domain)
