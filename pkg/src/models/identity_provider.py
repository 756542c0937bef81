#!/usr/bin/env python3
"""
Identity Provider
Simulated issuer of inalienable authentication tokens: one token per
identity, bound to that identity by the issuer's signature.
"""

import logging
from dataclasses import dataclass
from typing import Set

from primitives.schnorr import schnorr_keygen, schnorr_sign, verify_signature_bytes
from primitives.substrate import GroupElement, GroupParams, Rng, pack_fields, unpack_fields

logger = logging.getLogger(__name__)

TOKEN_DOMAIN = b"auth-token"


class DuplicateIdentityError(ValueError):
    """Raised when a token is requested twice for the same identity."""


@dataclass(frozen=True)
class AuthToken:
    identity: str
    issuer_signature: bytes

    def to_bytes(self) -> bytes:
        return pack_fields(self.identity.encode("utf-8"), self.issuer_signature)

    @classmethod
    def from_bytes(cls, data: bytes) -> "AuthToken":
        identity, signature = unpack_fields(data)
        return cls(identity=identity.decode("utf-8"), issuer_signature=signature)


class IdentityProvider:
    """Issues tokens; the token goes only to the caller naming that identity."""

    def __init__(self, params: GroupParams, rng: Rng):
        self.params = params
        self.rng = rng
        self._keypair = schnorr_keygen(params, rng)
        self._issued: Set[str] = set()

    @property
    def public_key(self) -> GroupElement:
        return self._keypair.public

    def issue_token(self, identity: str) -> AuthToken:
        if identity in self._issued:
            raise DuplicateIdentityError(f"identity {identity!r} already holds a token")
        self._issued.add(identity)
        signature = schnorr_sign(
            self.params, self._keypair, identity.encode("utf-8"), self.rng, domain=TOKEN_DOMAIN
        )
        logger.debug("issued token for %s", identity)
        return AuthToken(identity=identity, issuer_signature=signature.to_bytes(self.params))


def verify_token(
    params: GroupParams, issuer_public_key: GroupElement, token: AuthToken, claimed_identity: str
) -> bool:
    if token.identity != claimed_identity:
        return False
    return verify_signature_bytes(
        params,
        issuer_public_key,
        token.identity.encode("utf-8"),
        token.issuer_signature,
        domain=TOKEN_DOMAIN,
    )
