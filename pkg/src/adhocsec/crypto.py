"""Toy cryptographic primitives.

None of this is secure. Keys are tiny, RSA works octet by octet without
padding, and both symmetric ciphers are trivially breakable. The point is to
model *who holds which key* so that delivery and secrecy properties of the
protocol can be checked exactly and reproducibly.

Two symmetric ciphers are provided and deliberately kept different:

* cipher A: additive (Vigenere-style) byte cipher, used for message bodies
  under the message-specific key;
* cipher B: XOR with an LCG keystream seeded from the key, used to wrap the
  message key under a neighborhood key.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

__all__ = [
    "CryptoError",
    "InvalidKeyError",
    "MalformedWrapError",
    "CorruptionError",
    "MacAddress",
    "RsaPublicKey",
    "RsaKeyPair",
    "NeighborhoodKey",
    "MessageKey",
    "NKEY_LEN",
    "MKEY_LEN",
    "primes_in_range",
    "rsa_keypair_from_primes",
    "rsa_keygen",
    "rsa_wrap",
    "rsa_unwrap",
    "cipher_a_encrypt",
    "cipher_a_decrypt",
    "cipher_b_encrypt",
    "cipher_b_decrypt",
    "cipher_b_keystream",
    "derive_message_key",
    "generate_neighborhood_key",
]

NKEY_LEN = 16
MKEY_LEN = 10

RSA_PRIME_MIN = 53
RSA_PRIME_MAX = 2 ** 15
RSA_DEFAULT_E = 17

_LCG_A = 1664525
_LCG_C = 1013904223
_MASK32 = 0xFFFFFFFF


class CryptoError(ValueError):
    pass


class InvalidKeyError(CryptoError):
    pass


class MalformedWrapError(CryptoError):
    pass


class CorruptionError(CryptoError):
    pass


_MAC_RE = re.compile(r"^[0-9A-Fa-f]{2}(:[0-9A-Fa-f]{2}){5}$")


@dataclass(frozen=True, order=True)
class MacAddress:
    octets: bytes

    def __post_init__(self):
        if not isinstance(self.octets, (bytes, bytearray)) or len(self.octets) != 6:
            raise CryptoError(f"MAC address must be exactly 6 octets, got {self.octets!r}")
        object.__setattr__(self, "octets", bytes(self.octets))

    @classmethod
    def parse(cls, text: str) -> "MacAddress":
        if not _MAC_RE.match(text):
            raise CryptoError(f"malformed MAC address {text!r}")
        return cls(bytes.fromhex(text.replace(":", "")))

    @classmethod
    def from_int(cls, value: int) -> "MacAddress":
        return cls(value.to_bytes(6, "big"))

    def __str__(self):
        return ":".join(f"{b:02x}" for b in self.octets)


class RsaPublicKey(NamedTuple):
    n: int
    e: int


@dataclass(frozen=True)
class RsaKeyPair:
    p: int
    q: int
    n: int
    e: int
    d: int

    @property
    def public(self) -> RsaPublicKey:
        return RsaPublicKey(self.n, self.e)

    @property
    def phi(self) -> int:
        return (self.p - 1) * (self.q - 1)


@dataclass(frozen=True)
class NeighborhoodKey:
    owner: int
    version: int
    key: bytes

    def __repr__(self):
        return f"NeighborhoodKey(owner={self.owner}, version={self.version}, key={self.key.hex()})"


@dataclass(frozen=True)
class MessageKey:
    key: bytes


@lru_cache(maxsize=None)
def primes_in_range(lo: int = RSA_PRIME_MIN, hi: int = RSA_PRIME_MAX) -> tuple[int, ...]:
    """All primes p with lo <= p <= hi (sieve of Eratosthenes)."""
    sieve = bytearray([1]) * (hi + 1)
    sieve[0:2] = b"\x00\x00"
    for i in range(2, math.isqrt(hi) + 1):
        if sieve[i]:
            sieve[i * i::i] = bytearray(len(range(i * i, hi + 1, i)))
    return tuple(i for i in range(max(lo, 2), hi + 1) if sieve[i])


def rsa_keypair_from_primes(p: int, q: int, e: int = RSA_DEFAULT_E) -> RsaKeyPair:
    """Complete a key pair from two distinct primes, bumping e until coprime to phi."""
    if p == q:
        raise InvalidKeyError("RSA primes must be distinct")
    phi = (p - 1) * (q - 1)
    while math.gcd(e, phi) != 1:
        e += 1
    d = pow(e, -1, phi)
    n = p * q
    if n <= 255:
        raise InvalidKeyError(f"modulus {n} too small to carry one octet per residue")
    return RsaKeyPair(p=p, q=q, n=n, e=e, d=d)


def rsa_keygen(rng) -> RsaKeyPair:
    """Deterministic toy key pair; ``rng`` is a ``random.Random`` or an int seed."""
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    primes = primes_in_range()
    while True:
        p = rng.choice(primes)
        q = rng.choice(primes)
        if p != q:
            return rsa_keypair_from_primes(p, q)


def _public_parts(key) -> tuple[int, int]:
    if isinstance(key, RsaKeyPair):
        return key.n, key.e
    n, e = key
    return n, e


def rsa_wrap(key, payload: bytes) -> list[int]:
    """Encrypt each octet separately: c_i = b_i^e mod n."""
    n, e = _public_parts(key)
    if n <= 255:
        raise InvalidKeyError(f"modulus {n} too small to carry one octet per residue")
    return [pow(b, e, n) for b in payload]


def rsa_unwrap(key: RsaKeyPair, residues: Sequence[int]) -> bytes:
    n, d = key.n, key.d
    out = bytearray()
    for c in residues:
        if not 0 <= c < n:
            raise MalformedWrapError(f"residue {c} outside [0, {n})")
        b = pow(c, d, n)
        if b > 255:
            raise CorruptionError(f"residue {c} decrypts to {b}, not an octet")
        out.append(b)
    return bytes(out)


def _check_key(key: bytes):
    if len(key) == 0:
        raise InvalidKeyError("symmetric key must be non-empty")


def cipher_a_encrypt(key: bytes, plaintext: bytes) -> bytes:
    _check_key(key)
    k = len(key)
    return bytes((p + key[i % k]) & 0xFF for i, p in enumerate(plaintext))


def cipher_a_decrypt(key: bytes, ciphertext: bytes) -> bytes:
    _check_key(key)
    k = len(key)
    return bytes((c - key[i % k]) & 0xFF for i, c in enumerate(ciphertext))


def _fold_seed(key: bytes) -> int:
    s = 0
    for b in key:
        s = (s * 31 + b) & _MASK32
    return s


def cipher_b_keystream(key: bytes, length: int) -> bytes:
    _check_key(key)
    s = _fold_seed(key)
    out = bytearray(length)
    for i in range(length):
        s = (_LCG_A * s + _LCG_C) & _MASK32
        out[i] = s >> 24
    return bytes(out)


def cipher_b_encrypt(key: bytes, plaintext: bytes) -> bytes:
    ks = cipher_b_keystream(key, len(plaintext))
    return bytes(p ^ k for p, k in zip(plaintext, ks))


# XOR keystream: the same operation both ways
cipher_b_decrypt = cipher_b_encrypt


def derive_message_key(mac: MacAddress, seq: int) -> MessageKey:
    """Source MAC (6 octets) followed by the 32-bit big-endian sequence number."""
    if not 0 <= seq <= _MASK32:
        raise CryptoError(f"sequence number {seq} does not fit in 32 bits")
    return MessageKey(mac.octets + seq.to_bytes(4, "big"))


def generate_neighborhood_key(owner: int, version: int, seed: int) -> NeighborhoodKey:
    """16 fresh octets, a deterministic function of (seed, owner, version)."""
    if version < 0:
        raise CryptoError(f"key version must be non-negative, got {version}")
    rng = random.Random(f"nkey/{seed}/{owner}/{version}")
    return NeighborhoodKey(owner=owner, version=version, key=rng.randbytes(NKEY_LEN))
