"""
Copyright (c) 2024 Genome Research Limited

This program is free software: you can redistribute it and/or modify it
under the terms of the GNU General Public License as published by the
Free Software Foundation, either version 3 of the License, or (at your
option) any later version.

This program is distributed in the hope that it will be useful, but
WITHOUT ANY WARRANTY; without even the implied warranty of
MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General
Public License for more details.

You should have received a copy of the GNU General Public License along
with this program. If not, see https://www.gnu.org/licenses/
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from functools import cached_property

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from ecdsa import SECP256k1, SigningKey, VerifyingKey, BadSignatureError
from ecdsa.errors import MalformedPointError
from ecdsa.util import sigdecode_string, sigencode_string_canonize

from . import typing as T
from .field import FieldElement, profiles


CURVE = SECP256k1
ORDER = int(CURVE.order)
SCALARS = profiles.production

_POINT_LENGTH = 33
_TAG_LENGTH   = 16
_NONCE        = bytes(12)  # Every seal derives a fresh key, so a fixed nonce is safe

_SEAL_INFO    = b"shardvault/seal/v1"
_ENTROPY_TAG  = b"shardvault/master-entropy/v1"


class exception(T.SimpleNamespace):
    """ Namespace of exceptions to make importing easier """
    class EntropyFailure(Exception):
        """ Raised when the entropy source cannot provide randomness """

    class InvalidScalar(ValueError):
        """ Raised when a private scalar is zero or out of range """

    class InvalidDigest(ValueError):
        """ Raised when a digest is not 32 bytes """

    class InvalidEntropy(ValueError):
        """ Raised when an entropy contribution has the wrong length """

    class AuthenticationFailure(Exception):
        """ Raised when a sealed box does not open under the given key """

    class Malformed(AuthenticationFailure):
        """ Raised when a sealed box or point cannot be parsed """


def _scalar(value:T.Union[FieldElement, int]) -> int:
    scalar = int(value)
    if not 0 < scalar < ORDER:
        raise exception.InvalidScalar("Scalar must be in [1, curve order)")

    return scalar


def fork_entropy(rng:T.EntropySource) -> T.EntropySource:
    """
    Derive an independent source for a sub-component; system sources stay
    system sources, seeded sources yield seeded (reproducible) children
    """
    if isinstance(rng, random.SystemRandom):
        return random.SystemRandom()

    return random.Random(rng.getrandbits(256))


@dataclass(frozen=True)
class PublicPoint:
    """ Non-identity point on secp256k1, held in compressed encoding """
    data:bytes

    def __post_init__(self) -> None:
        if len(self.data) != _POINT_LENGTH:
            raise exception.Malformed(f"Compressed points are {_POINT_LENGTH} bytes")

        try:
            VerifyingKey.from_string(self.data, curve=CURVE)
        except (MalformedPointError, ValueError) as e:
            raise exception.Malformed(f"Not a point on the curve: {e}")

    @classmethod
    def FromPoint(cls, point:T.Any) -> PublicPoint:
        """ Alternative constructor from an ecdsa point """
        try:
            vk = VerifyingKey.from_public_point(point, curve=CURVE)
        except (MalformedPointError, ValueError, AssertionError) as e:
            raise exception.Malformed(f"Not an encodable point: {e}")

        return cls(vk.to_string("compressed"))

    @classmethod
    def FromScalar(cls, scalar:T.Union[FieldElement, int]) -> PublicPoint:
        """ Alternative constructor: scalar * G """
        return cls.FromPoint(CURVE.generator * _scalar(scalar))

    @cached_property
    def verifying_key(self) -> VerifyingKey:
        return VerifyingKey.from_string(self.data, curve=CURVE, hashfunc=hashlib.sha256)

    @property
    def point(self) -> T.Any:
        return self.verifying_key.pubkey.point

    def __add__(self, other:PublicPoint) -> PublicPoint:
        return PublicPoint.FromPoint(self.point + other.point)

    def __mul__(self, scalar:T.Union[FieldElement, int]) -> PublicPoint:
        return PublicPoint.FromPoint(self.point * _scalar(scalar))

    def hex(self) -> str:
        return self.data.hex()


@dataclass(frozen=True)
class EncKeypair:
    """ Elliptic keypair; the public point is private_scalar * G """
    private_scalar:FieldElement = field(repr=False)
    public_point:PublicPoint

    def __post_init__(self) -> None:
        _scalar(self.private_scalar)

    @classmethod
    def FromScalar(cls, scalar:FieldElement) -> EncKeypair:
        return cls(scalar, PublicPoint.FromScalar(scalar))


@dataclass(frozen=True)
class SealedBox:
    """
    Hashed-ElGamal ciphertext: ephemeral point, Poly1305 tag and the
    ChaCha20 stream ciphertext
    """
    ephemeral_public:PublicPoint
    ciphertext:bytes
    tag:bytes

    def encode(self) -> bytes:
        """ ephemeral (33 bytes) || tag (16 bytes) || ciphertext """
        return self.ephemeral_public.data + self.tag + self.ciphertext

    @classmethod
    def decode(cls, data:bytes) -> SealedBox:
        if len(data) < _POINT_LENGTH + _TAG_LENGTH:
            raise exception.Malformed("Sealed box is truncated")

        ephemeral = PublicPoint(data[:_POINT_LENGTH])
        tag = data[_POINT_LENGTH:_POINT_LENGTH + _TAG_LENGTH]
        return cls(ephemeral, data[_POINT_LENGTH + _TAG_LENGTH:], tag)


@dataclass(frozen=True)
class Signature:
    """ ECDSA signature with low-s normalisation and recovery hint """
    r:int
    s:int
    recovery:int

    def encode(self) -> bytes:
        """ r (32 bytes) || s (32 bytes) || recovery (1 byte) """
        return self.r.to_bytes(32, "big") + self.s.to_bytes(32, "big") + bytes([self.recovery])

    @classmethod
    def decode(cls, data:bytes) -> Signature:
        if len(data) != 65:
            raise exception.Malformed("Signatures are 65 bytes")

        return cls(int.from_bytes(data[:32], "big"), int.from_bytes(data[32:64], "big"), data[64])

    @property
    def is_low_s(self) -> bool:
        return 0 < self.s <= ORDER // 2

    def recover(self, digest:bytes) -> PublicPoint:
        """ Recover the signer's public point using the hint """
        candidates = VerifyingKey.from_public_key_recovery_with_digest(
            self.encode()[:64], digest, CURVE, hashfunc=hashlib.sha256, sigdecode=sigdecode_string)

        return PublicPoint(candidates[self.recovery].to_string("compressed"))


def _draw_scalar(rng:T.EntropySource) -> FieldElement:
    try:
        return SCALARS.random(rng, nonzero=True)
    except (OSError, NotImplementedError) as e:
        raise exception.EntropyFailure(f"Entropy source failed: {e}")


def generate_keypair(rng:T.EntropySource) -> EncKeypair:
    """ Uniformly random nonzero scalar and its public point """
    return EncKeypair.FromScalar(_draw_scalar(rng))


def _seal_key(shared:PublicPoint, ephemeral:PublicPoint, recipient:PublicPoint) -> bytes:
    # Bind the key to both public points, so a box cannot be replayed
    # under a different ephemeral or recipient
    return HKDF(algorithm=hashes.SHA256(),
                length=32,
                salt=ephemeral.data + recipient.data,
                info=_SEAL_INFO).derive(shared.data)


def seal(plaintext:bytes, recipient:PublicPoint, rng:T.EntropySource) -> SealedBox:
    """
    Encrypt to the recipient's public point under a fresh ephemeral key

    @param   plaintext  Message
    @param   recipient  Recipient public point
    @param   rng        Entropy source
    @return  Sealed box
    """
    ephemeral = _draw_scalar(rng)
    ephemeral_public = PublicPoint.FromScalar(ephemeral)
    key = _seal_key(recipient * ephemeral, ephemeral_public, recipient)

    sealed = ChaCha20Poly1305(key).encrypt(_NONCE, plaintext, ephemeral_public.data)
    return SealedBox(ephemeral_public, sealed[:-_TAG_LENGTH], sealed[-_TAG_LENGTH:])


def open(box:SealedBox, private_scalar:T.Union[FieldElement, int]) -> bytes:
    """
    Decrypt a sealed box

    @param   box             Sealed box
    @param   private_scalar  Recipient's private scalar
    @return  Plaintext
    """
    scalar = _scalar(private_scalar)
    recipient = PublicPoint.FromScalar(scalar)
    key = _seal_key(box.ephemeral_public * scalar, box.ephemeral_public, recipient)

    try:
        return ChaCha20Poly1305(key).decrypt(_NONCE, box.ciphertext + box.tag, box.ephemeral_public.data)
    except InvalidTag:
        raise exception.AuthenticationFailure("Sealed box failed authentication")


def open_bytes(data:bytes, private_scalar:T.Union[FieldElement, int]) -> bytes:
    """ Convenience: decode then open """
    return open(SealedBox.decode(data), private_scalar)


def _signing_key(scalar:T.Union[FieldElement, int]) -> SigningKey:
    return SigningKey.from_secret_exponent(_scalar(scalar), curve=CURVE, hashfunc=hashlib.sha256)


def sign_digest(digest:bytes, signing_scalar:T.Union[FieldElement, int]) -> Signature:
    """
    Deterministic (RFC 6979) signature over a 32-byte digest

    @param   digest          Message digest
    @param   signing_scalar  Private scalar
    @return  Low-s signature with recovery hint
    """
    if len(digest) != 32:
        raise exception.InvalidDigest("Digests must be 32 bytes")

    key = _signing_key(signing_scalar)
    encoded = key.sign_digest_deterministic(digest, hashfunc=hashlib.sha256,
                                            sigencode=sigencode_string_canonize)

    r, s = sigdecode_string(encoded, ORDER)
    candidates = VerifyingKey.from_public_key_recovery_with_digest(
        encoded, digest, CURVE, hashfunc=hashlib.sha256, sigdecode=sigdecode_string)

    signer = key.get_verifying_key().to_string("compressed")
    recovery = next(i for i, vk in enumerate(candidates) if vk.to_string("compressed") == signer)

    return Signature(r, s, recovery)


def verify_digest(signature:Signature, public:PublicPoint, digest:bytes) -> bool:
    """ Check a low-s signature over the digest under the public point """
    if len(digest) != 32 or not signature.is_low_s:
        return False

    try:
        return public.verifying_key.verify_digest(signature.encode()[:64], digest, sigdecode=sigdecode_string)
    except BadSignatureError:
        return False


def combine_entropy(e_network:bytes, e_server:bytes, e_device:bytes) -> FieldElement:
    """
    Combine the three entropy contributions into a nonzero scalar: a
    domain-separated hash of the ordered, length-prefixed inputs, re-hashed
    with an incrementing counter in the negligible out-of-range case

    @param   e_network  32 bytes from the node network
    @param   e_server   32 bytes from the server
    @param   e_device   32 bytes from the device
    @return  Master scalar
    """
    contributions = (e_network, e_server, e_device)
    if any(len(e) != 32 for e in contributions):
        raise exception.InvalidEntropy("Entropy contributions must be 32 bytes")

    encoded = b"".join(len(e).to_bytes(4, "big") + e for e in contributions)

    counter = 0
    while True:
        digest = hashlib.sha256(_ENTROPY_TAG + counter.to_bytes(4, "big") + encoded).digest()
        if 0 < (candidate := int.from_bytes(digest, "big")) < ORDER:
            return SCALARS(candidate)

        counter += 1
