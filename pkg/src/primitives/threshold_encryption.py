#!/usr/bin/env python3
"""
Threshold Encryption
Exponential ElGamal under an n-of-n additively shared key, with
disjunctive Chaum-Pedersen proofs that a ciphertext encrypts 0 or 1 and
equality proofs for partial decryptions.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

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

BIT_PROOF_DOMAIN = b"CDS-bit"
EQUALITY_PROOF_DOMAIN = b"CP-eq"

CIPHERTEXT_TAG = 0x02
BIT_PROOF_TAG = 0x03
PARTIAL_DECRYPTION_TAG = 0x08


class InvalidPlaintext(ValueError):
    """Raised when asked to encrypt something other than a bit."""


class DuplicateShareError(ValueError):
    """Raised when two public shares or two partial decryptions claim the same party index."""


class MissingPartialDecryption(ValueError):
    def __init__(self, index: int):
        super().__init__(f"no partial decryption from party {index}")
        self.index = index


class InvalidPartialDecryption(ValueError):
    def __init__(self, index: int):
        super().__init__(f"partial decryption from party {index} failed its equality proof")
        self.index = index


class PlaintextOutOfRange(ValueError):
    """Raised when no plaintext in the allowed range matches."""


@dataclass(frozen=True)
class KeyShare:
    owner: int
    x: Scalar
    y: GroupElement

    @property
    def public(self) -> Tuple[int, GroupElement]:
        return self.owner, self.y


@dataclass(frozen=True)
class JointPublicKey:
    y: GroupElement
    public_shares: Tuple[Tuple[int, GroupElement], ...]

    @property
    def roster(self) -> Tuple[int, ...]:
        return tuple(index for index, _ in self.public_shares)

    def share_of(self, index: int) -> GroupElement:
        for owner, y_i in self.public_shares:
            if owner == index:
                return y_i
        raise KeyError(index)


@dataclass(frozen=True)
class Ciphertext:
    c1: GroupElement
    c2: GroupElement

    def to_bytes(self, params: GroupParams) -> bytes:
        return bytes([CIPHERTEXT_TAG]) + pack_fields(
            params.encode_element(self.c1), params.encode_element(self.c2)
        )

    @classmethod
    def from_bytes(cls, params: GroupParams, data: bytes) -> "Ciphertext":
        if not data or data[0] != CIPHERTEXT_TAG:
            raise FieldDecodeError("not a ciphertext encoding")
        fields = unpack_fields(data[1:])
        if len(fields) != 2:
            raise FieldDecodeError("ciphertext needs exactly two fields")
        return cls(c1=params.decode_element(fields[0]), c2=params.decode_element(fields[1]))


@dataclass(frozen=True)
class BitProof:
    e0: Scalar
    z0: Scalar
    e1: Scalar
    z1: Scalar
    A0: GroupElement
    B0: GroupElement
    A1: GroupElement
    B1: GroupElement

    def to_bytes(self, params: GroupParams) -> bytes:
        scalars = [params.encode_scalar(x) for x in (self.e0, self.z0, self.e1, self.z1)]
        elements = [params.encode_element(x) for x in (self.A0, self.B0, self.A1, self.B1)]
        return bytes([BIT_PROOF_TAG]) + pack_fields(*scalars, *elements)

    @classmethod
    def from_bytes(cls, params: GroupParams, data: bytes) -> "BitProof":
        if not data or data[0] != BIT_PROOF_TAG:
            raise FieldDecodeError("not a bit proof encoding")
        fields = unpack_fields(data[1:])
        if len(fields) != 8:
            raise FieldDecodeError("bit proof needs exactly eight fields")
        e0, z0, e1, z1 = (params.decode_scalar(f) for f in fields[:4])
        A0, B0, A1, B1 = (params.decode_element(f) for f in fields[4:])
        return cls(e0=e0, z0=z0, e1=e1, z1=z1, A0=A0, B0=B0, A1=A1, B1=B1)


@dataclass(frozen=True)
class EqualityProof:
    """Compact Chaum-Pedersen proof (challenge, response)."""

    e: Scalar
    z: Scalar


@dataclass(frozen=True)
class PartialDecryption:
    owner: int
    d: GroupElement
    proof: EqualityProof

    def to_bytes(self, params: GroupParams) -> bytes:
        return bytes([PARTIAL_DECRYPTION_TAG]) + pack_fields(
            self.owner.to_bytes(4, "big"),
            params.encode_element(self.d),
            params.encode_scalar(self.proof.e),
            params.encode_scalar(self.proof.z),
        )

    @classmethod
    def from_bytes(cls, params: GroupParams, data: bytes) -> "PartialDecryption":
        if not data or data[0] != PARTIAL_DECRYPTION_TAG:
            raise FieldDecodeError("not a partial decryption encoding")
        fields = unpack_fields(data[1:])
        if len(fields) != 4:
            raise FieldDecodeError("partial decryption needs exactly four fields")
        return cls(
            owner=int.from_bytes(fields[0], "big"),
            d=params.decode_element(fields[1]),
            proof=EqualityProof(e=params.decode_scalar(fields[2]), z=params.decode_scalar(fields[3])),
        )


# Key generation


def dkg_contribute(params: GroupParams, owner: int, rng: Rng) -> KeyShare:
    """Fresh additive key share for one party."""
    x = rng.random_scalar(params.q, nonzero=True)
    return KeyShare(owner=owner, x=x, y=params.exp(params.g, x))


def aggregate_public_key(
    params: GroupParams, shares_public: Iterable[Tuple[int, GroupElement]]
) -> JointPublicKey:
    collected: Dict[int, GroupElement] = {}
    for index, y_i in shares_public:
        if index in collected:
            raise DuplicateShareError(f"party index {index} contributed twice")
        params.require_member(y_i, f"public share of party {index}")
        collected[index] = y_i
    if not collected:
        raise ValueError("at least one public share is required")
    ordered = tuple(sorted(collected.items()))
    return JointPublicKey(y=params.mul(*collected.values()), public_shares=ordered)


# Encryption and bit proofs


def _encrypt(params: GroupParams, y: GroupElement, m: int, r: Scalar) -> Ciphertext:
    return Ciphertext(
        c1=params.exp(params.g, r),
        c2=params.mul(params.exp(params.g, m), params.exp(y, r)),
    )


def _bit_challenge(params: GroupParams, c: Ciphertext, A0, B0, A1, B1) -> Scalar:
    return hash_to_scalar(
        params,
        BIT_PROOF_DOMAIN,
        [params.encode_element(x) for x in (c.c1, c.c2, A0, B0, A1, B1)],
    )


def prove_bit(
    params: GroupParams,
    public_key: JointPublicKey,
    c: Ciphertext,
    bit: int,
    r: Scalar,
    rng: Rng,
) -> BitProof:
    """OR-proof that c encrypts 0 or 1, with the real branch at `bit`.

    Only an honest (bit, r) opening yields a proof that verifies.
    """
    if bit not in (0, 1):
        raise InvalidPlaintext(f"bit proofs only cover 0 and 1, got {bit}")
    q, g, y = params.q, params.g, public_key.y

    def target(branch: int) -> GroupElement:
        # c2 / g^branch, which equals y^r on the true branch
        return params.div(c.c2, params.exp(g, branch))

    fake = 1 - bit
    e_fake = rng.random_scalar(q)
    z_fake = rng.random_scalar(q)
    A_fake = params.mul(params.exp(g, z_fake), params.exp(c.c1, q - e_fake))
    B_fake = params.mul(params.exp(y, z_fake), params.exp(target(fake), q - e_fake))

    w = rng.random_scalar(q)
    A_real = params.exp(g, w)
    B_real = params.exp(y, w)

    if bit == 0:
        A0, B0, A1, B1 = A_real, B_real, A_fake, B_fake
    else:
        A0, B0, A1, B1 = A_fake, B_fake, A_real, B_real

    e = _bit_challenge(params, c, A0, B0, A1, B1)
    e_real = (e - e_fake) % q
    z_real = (w + e_real * r) % q

    if bit == 0:
        return BitProof(e0=e_real, z0=z_real, e1=e_fake, z1=z_fake, A0=A0, B0=B0, A1=A1, B1=B1)
    return BitProof(e0=e_fake, z0=z_fake, e1=e_real, z1=z_real, A0=A0, B0=B0, A1=A1, B1=B1)


def encrypt_bit(
    params: GroupParams,
    public_key: JointPublicKey,
    bit: int,
    rng: Rng,
    randomness: Optional[Scalar] = None,
) -> Tuple[Ciphertext, BitProof]:
    """Encrypt a bit under the joint key and prove it is 0 or 1."""
    if bit not in (0, 1):
        raise InvalidPlaintext(f"only 0 or 1 can be encrypted, got {bit}")
    r = rng.random_scalar(params.q) if randomness is None else randomness % params.q
    c = _encrypt(params, public_key.y, bit, r)
    return c, prove_bit(params, public_key, c, bit, r, rng)


def verify_bit_proof(
    params: GroupParams, public_key: JointPublicKey, c: Ciphertext, proof: BitProof
) -> bool:
    q, g, y = params.q, params.g, public_key.y
    elements = (c.c1, c.c2, proof.A0, proof.B0, proof.A1, proof.B1)
    if not all(params.is_member(x) for x in elements):
        return False
    if not all(0 <= x < q for x in (proof.e0, proof.z0, proof.e1, proof.z1)):
        return False

    if (proof.e0 + proof.e1) % q != _bit_challenge(params, c, proof.A0, proof.B0, proof.A1, proof.B1):
        return False

    for branch, e_j, z_j, A_j, B_j in (
        (0, proof.e0, proof.z0, proof.A0, proof.B0),
        (1, proof.e1, proof.z1, proof.A1, proof.B1),
    ):
        target = params.div(c.c2, params.exp(g, branch))
        if params.exp(g, z_j) != params.mul(A_j, params.exp(c.c1, e_j)):
            return False
        if params.exp(y, z_j) != params.mul(B_j, params.exp(target, e_j)):
            return False
    return True


def add_ciphertexts(params: GroupParams, a: Ciphertext, b: Ciphertext) -> Ciphertext:
    return Ciphertext(c1=params.mul(a.c1, b.c1), c2=params.mul(a.c2, b.c2))


def sum_ciphertexts(params: GroupParams, ciphertexts: Sequence[Ciphertext]) -> Ciphertext:
    """Homomorphic sum; the empty sum is the trivial encryption of 0."""
    total = Ciphertext(c1=1, c2=1)
    for c in ciphertexts:
        total = add_ciphertexts(params, total, c)
    return total


# Joint decryption


def _equality_challenge(
    params: GroupParams, y_i: GroupElement, c1: GroupElement, d: GroupElement, A, B
) -> Scalar:
    return hash_to_scalar(
        params,
        EQUALITY_PROOF_DOMAIN,
        [params.encode_element(x) for x in (params.g, y_i, c1, d, A, B)],
    )


def partial_decrypt(params: GroupParams, share: KeyShare, c: Ciphertext, rng: Rng) -> PartialDecryption:
    d = params.exp(c.c1, share.x)
    w = rng.random_scalar(params.q)
    A = params.exp(params.g, w)
    B = params.exp(c.c1, w)
    e = _equality_challenge(params, share.y, c.c1, d, A, B)
    z = (w + e * share.x) % params.q
    return PartialDecryption(owner=share.owner, d=d, proof=EqualityProof(e=e, z=z))


def verify_partial_decryption(
    params: GroupParams, y_i: GroupElement, c: Ciphertext, part: PartialDecryption
) -> bool:
    """Check log_g(y_i) == log_c1(d_i)."""
    if not (params.is_member(y_i) and params.is_member(part.d)):
        return False
    e, z = part.proof.e, part.proof.z
    if not (0 <= e < params.q and 0 <= z < params.q):
        return False
    A = params.mul(params.exp(params.g, z), params.exp(y_i, params.q - e))
    B = params.mul(params.exp(c.c1, z), params.exp(part.d, params.q - e))
    return _equality_challenge(params, y_i, c.c1, part.d, A, B) == e


def combine_decryptions(
    params: GroupParams,
    c: Ciphertext,
    parts: Sequence[PartialDecryption],
    public_key: JointPublicKey,
    max_plaintext: Optional[int] = None,
) -> int:
    """Recover m from c2 / prod(d_i) = g^m by bounded search.

    Every roster member must supply exactly one valid part; the bound
    defaults to the roster size.
    """
    by_owner: Dict[int, PartialDecryption] = {}
    for part in parts:
        if part.owner not in public_key.roster:
            raise InvalidPartialDecryption(part.owner)
        if part.owner in by_owner:
            raise DuplicateShareError(f"party index {part.owner} supplied two partial decryptions")
        by_owner[part.owner] = part

    decryption_factors: List[GroupElement] = []
    for index, y_i in public_key.public_shares:
        part = by_owner.get(index)
        if part is None:
            raise MissingPartialDecryption(index)
        if not verify_partial_decryption(params, y_i, c, part):
            raise InvalidPartialDecryption(index)
        decryption_factors.append(part.d)

    target = params.div(c.c2, params.mul(*decryption_factors))
    bound = len(public_key.roster) if max_plaintext is None else max_plaintext
    candidate = 1
    for m in range(bound + 1):
        if candidate == target:
            return m
        candidate = params.mul(candidate, params.g)
    raise PlaintextOutOfRange(f"plaintext out of range [0, {bound}]")
