#!/usr/bin/env python3
"""
Crypto Substrate
Prime-order subgroup arithmetic, canonical encodings, Fiat-Shamir hashing and
the seeded random number generator every other scheme draws from.
"""

import hashlib
import logging
from dataclasses import dataclass
from typing import List, MutableSequence, Sequence, TypeVar

from Crypto.Util.number import bytes_to_long, getPrime, isPrime, long_to_bytes

logger = logging.getLogger(__name__)

# Scalars and group elements are plain ints; GroupParams validates them.
Scalar = int
GroupElement = int

# 1-byte type tags prefixed to every canonical encoding
ELEMENT_TAG = 0x04
SCALAR_TAG = 0x05

T = TypeVar("T")


class InvalidGroupParams(ValueError):
    """Raised when (p, q, g, h) do not describe a prime-order subgroup."""


class NotInSubgroup(ValueError):
    """Raised when a value is not a member of the order-q subgroup."""


class FieldDecodeError(ValueError):
    """Raised when canonical bytes cannot be parsed."""


def pack_fields(*fields: bytes) -> bytes:
    """Concatenate byte fields, each prefixed with a 4-byte big-endian length."""
    return b"".join(len(field).to_bytes(4, "big") + field for field in fields)


def unpack_fields(data: bytes) -> List[bytes]:
    """Inverse of pack_fields."""
    fields = []
    offset = 0
    while offset < len(data):
        if offset + 4 > len(data):
            raise FieldDecodeError("truncated length prefix")
        length = int.from_bytes(data[offset : offset + 4], "big")
        offset += 4
        if offset + length > len(data):
            raise FieldDecodeError("field runs past end of data")
        fields.append(data[offset : offset + length])
        offset += length
    return fields


class Rng:
    """Deterministic SHA-256 counter-mode generator.

    Identical seeds and identical draw sequences give identical outputs.
    An Rng has exactly one owner; use fork() to hand independent streams
    to other actors.
    """

    def __init__(self, seed: bytes):
        if len(seed) != 32:
            raise ValueError("Rng seed must be exactly 32 bytes")
        self.seed = seed
        self.counter = 0
        self._buffer = b""

    @classmethod
    def from_int(cls, seed: int) -> "Rng":
        """Build an Rng from a small integer seed (scenario files, CLI)."""
        if seed < 0:
            raise ValueError("seed must be non-negative")
        material = b"anonpool-seed" + seed.to_bytes(16, "big")
        return cls(hashlib.sha256(material).digest())

    def fork(self, *labels: str) -> "Rng":
        """Derive an independent stream keyed only by the seed and labels.

        The child does not depend on how many draws the parent made, so a
        fork keyed by a stable label replays identically across runs.
        """
        material = self.seed + pack_fields(*(label.encode("utf-8") for label in labels))
        return Rng(hashlib.sha256(b"fork" + material).digest())

    def read(self, n: int) -> bytes:
        """Return n pseudo-random bytes (usable as a pycryptodome randfunc)."""
        while len(self._buffer) < n:
            block = hashlib.sha256(self.seed + self.counter.to_bytes(8, "big")).digest()
            self.counter += 1
            self._buffer += block
        out, self._buffer = self._buffer[:n], self._buffer[n:]
        return out

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("upper bound must be positive")
        nbits = n.bit_length()
        nbytes = (nbits + 7) // 8
        mask = (1 << nbits) - 1
        while True:
            candidate = bytes_to_long(self.read(nbytes)) & mask
            if candidate < n:
                return candidate

    def random_scalar(self, q: int, nonzero: bool = False) -> Scalar:
        """Uniform scalar in [0, q), or [1, q) when nonzero is set."""
        if nonzero:
            return 1 + self.randbelow(q - 1)
        return self.randbelow(q)

    def shuffle(self, items: MutableSequence[T]) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]


@dataclass(frozen=True)
class GroupParams:
    """Schnorr group: order-q subgroup of Z_p^* with generators g and h."""

    p: int
    q: int
    g: GroupElement
    h: GroupElement

    @property
    def width(self) -> int:
        """Byte width of every canonical integer encoding."""
        return (self.p.bit_length() + 7) // 8

    def is_member(self, x: int) -> bool:
        return 1 <= x < self.p and pow(x, self.q, self.p) == 1

    def require_member(self, x: int, what: str = "value") -> GroupElement:
        if not self.is_member(x):
            raise NotInSubgroup(f"{what} is not in the order-q subgroup")
        return x

    def exp(self, base: GroupElement, exponent: int) -> GroupElement:
        return pow(base, exponent % self.q, self.p)

    def mul(self, *elements: GroupElement) -> GroupElement:
        result = 1
        for element in elements:
            result = (result * element) % self.p
        return result

    def inv(self, x: GroupElement) -> GroupElement:
        return pow(x, -1, self.p)

    def div(self, a: GroupElement, b: GroupElement) -> GroupElement:
        return (a * self.inv(b)) % self.p

    def encode_element(self, x: GroupElement) -> bytes:
        return bytes([ELEMENT_TAG]) + long_to_bytes(x, self.width)

    def encode_scalar(self, x: Scalar) -> bytes:
        return bytes([SCALAR_TAG]) + long_to_bytes(x % self.q, self.width)

    def decode_element(self, data: bytes) -> GroupElement:
        if len(data) != self.width + 1 or data[0] != ELEMENT_TAG:
            raise FieldDecodeError("malformed group element encoding")
        return self.require_member(bytes_to_long(data[1:]), "decoded element")

    def decode_scalar(self, data: bytes) -> Scalar:
        if len(data) != self.width + 1 or data[0] != SCALAR_TAG:
            raise FieldDecodeError("malformed scalar encoding")
        value = bytes_to_long(data[1:])
        if value >= self.q:
            raise FieldDecodeError("scalar not reduced mod q")
        return value

    def to_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "g": self.g, "h": self.h}


def validate_group(params: GroupParams) -> None:
    """Raise InvalidGroupParams unless params satisfy every group invariant."""
    p, q, g, h = params.p, params.q, params.g, params.h
    if not isPrime(p) or not isPrime(q):
        raise InvalidGroupParams("p and q must both be prime")
    if (p - 1) % q != 0:
        raise InvalidGroupParams("q must divide p - 1")
    for name, element in (("g", g), ("h", h)):
        if element == 1:
            raise InvalidGroupParams(f"generator {name} must not be the identity")
        if not params.is_member(element):
            raise InvalidGroupParams(f"generator {name} does not have order q")
    if g == h:
        raise InvalidGroupParams("g and h must be distinct")


def hash_to_group(p: int, q: int, data: bytes) -> GroupElement:
    """Map bytes into the order-q subgroup; nobody learns a discrete log."""
    cofactor = (p - 1) // q
    width = (p.bit_length() + 7) // 8
    counter = 0
    while True:
        stream = b""
        block = 0
        while len(stream) < width + 16:
            stream += hashlib.sha256(
                pack_fields(b"hash-to-group", data, counter.to_bytes(4, "big"), block.to_bytes(4, "big"))
            ).digest()
            block += 1
        candidate = pow(bytes_to_long(stream) % p, cofactor, p)
        if candidate not in (0, 1):
            return candidate
        counter += 1


def setup_group(bit_length: int, rng: Rng) -> GroupParams:
    """Generate a safe-prime Schnorr group of the given size.

    p = 2q + 1 with p and q prime, g a random quadratic residue, and
    h = hash_to_group(g) so that log_g(h) is unknown to everyone.
    """
    if bit_length < 16:
        raise ValueError("bit_length must be at least 16")

    attempts = 0
    while True:
        attempts += 1
        q = getPrime(bit_length - 1, randfunc=rng.read)
        p = 2 * q + 1
        if p.bit_length() == bit_length and isPrime(p, randfunc=rng.read):
            break
    logger.debug("found %d-bit safe prime after %d candidates", bit_length, attempts)

    while True:
        g = pow(2 + rng.randbelow(p - 3), 2, p)
        if g != 1:
            break

    width = (p.bit_length() + 7) // 8
    h = hash_to_group(p, q, bytes([ELEMENT_TAG]) + long_to_bytes(g, width))
    params = GroupParams(p=p, q=q, g=g, h=h)
    validate_group(params)
    return params


def hash_to_scalar(params: GroupParams, domain_tag: bytes, inputs: Sequence[bytes]) -> Scalar:
    """Fiat-Shamir challenge: domain-separated hash of canonical inputs, mod q."""
    if not domain_tag:
        raise ValueError("domain_tag must be non-empty")
    digest = hashlib.sha256(pack_fields(domain_tag, *inputs)).digest()
    # 64 bytes of output keeps the reduction bias negligible
    wide = hashlib.sha256(digest + b"\x00").digest() + hashlib.sha256(digest + b"\x01").digest()
    return bytes_to_long(wide) % params.q


def group_exp(params: GroupParams, base: GroupElement, exponent: Scalar) -> GroupElement:
    """base^exponent mod p for a subgroup member."""
    params.require_member(base, "base")
    return params.exp(base, exponent)
