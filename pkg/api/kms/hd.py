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
import hmac
import re
from dataclasses import dataclass, field

import base58
from mnemonic import Mnemonic

from core import kms, typing as T
from core.crypto import ORDER, SCALARS, PublicPoint
from core.field import FieldElement


HARDENED = 0x80000000

_WORDLIST = Mnemonic("english")
_MASTER_HMAC_KEY = b"Bitcoin seed"

_XPRV = bytes.fromhex("0488ade4")
_XPUB = bytes.fromhex("0488b21e")

# Standard BIP-44 account-zero receive paths
PROFILES = {
    "bitcoin":  "m/44'/0'/0'/0/0",
    "litecoin": "m/44'/2'/0'/0/0",
    "ethereum": "m/44'/60'/0'/0/0"}

_ELEMENT = re.compile(r"^(\d+)(['hH]?)$")


def scalar_to_mnemonic(scalar:FieldElement) -> str:
    """ 24-word English BIP-39 encoding of the scalar's 32 bytes """
    return _WORDLIST.to_mnemonic(int(scalar).to_bytes(32, "big"))


def mnemonic_to_scalar(phrase:str) -> FieldElement:
    """
    Inverse of scalar_to_mnemonic

    @param   phrase  24-word mnemonic
    @return  Master scalar
    """
    try:
        if not _WORDLIST.check(phrase):
            raise kms.exception.InvalidMnemonic("Seed phrase checksum does not match")

        entropy = bytes(_WORDLIST.to_entropy(phrase))

    except (ValueError, LookupError) as e:
        raise kms.exception.InvalidMnemonic(f"Not a seed phrase: {e}")

    if len(entropy) != 32 or not 0 < (value := int.from_bytes(entropy, "big")) < ORDER:
        raise kms.exception.InvalidMnemonic("Seed phrase does not encode a signing key")

    return SCALARS(value)


def mnemonic_to_seed(phrase:str, passphrase:str = "") -> bytes:
    return Mnemonic.to_seed(phrase, passphrase)


def parse_path(path:T.Union[str, T.Sequence[int]]) -> T.List[int]:
    """
    Normalise a derivation path to child numbers, with hardened children
    at or above 2^31; textual paths are either "m/44'/60'/0'/0/0" or a
    named profile

    @param   path  Textual path, profile name or child numbers
    @return  Child numbers
    """
    if isinstance(path, str):
        path = PROFILES.get(path, path)
        head, *elements = path.strip().split("/")
        if head != "m":
            raise kms.exception.InvalidPath(f"Paths start at m, not {head!r}")

        indices = []
        for element in elements:
            if (match := _ELEMENT.match(element)) is None:
                raise kms.exception.InvalidPath(f"Invalid path element {element!r}")

            index, hardened = int(match[1]), bool(match[2])
            if index >= HARDENED:
                raise kms.exception.InvalidPath(f"Path element {element!r} is out of range")

            indices.append(index | HARDENED if hardened else index)

        return indices

    indices = list(path)
    if any(not isinstance(i, int) or not 0 <= i < 2**32 for i in indices):
        raise kms.exception.InvalidPath("Child numbers must be in [0, 2^32)")

    return indices


def format_path(indices:T.Sequence[int]) -> str:
    return "/".join(["m"] + [f"{i & ~HARDENED}'" if i & HARDENED else str(i) for i in indices])


def _hash160(data:bytes) -> bytes:
    return hashlib.new("ripemd160", hashlib.sha256(data).digest()).digest()


@dataclass(frozen=True)
class ChildKey:
    """ Extended private key at some depth of the derivation tree """
    depth:int
    child_number:int
    chain_code:bytes = field(repr=False)
    private_key:bytes = field(repr=False)
    parent_public:T.Optional[bytes] = field(default=None, repr=False)

    @property
    def public_key(self) -> bytes:
        return PublicPoint.FromScalar(int.from_bytes(self.private_key, "big")).data

    @property
    def parent_fingerprint(self) -> bytes:
        if self.parent_public is None:
            return bytes(4)

        return _hash160(self.parent_public)[:4]

    def _serialise(self, version:bytes, key:bytes) -> str:
        payload = version + bytes([self.depth]) + self.parent_fingerprint \
                + self.child_number.to_bytes(4, "big") + self.chain_code + key

        return base58.b58encode_check(payload).decode()

    def xprv(self) -> str:
        return self._serialise(_XPRV, b"\0" + self.private_key)

    def xpub(self) -> str:
        return self._serialise(_XPUB, self.public_key)


def master_key(seed:bytes) -> ChildKey:
    digest = hmac.new(_MASTER_HMAC_KEY, seed, hashlib.sha512).digest()
    key, chain_code = digest[:32], digest[32:]

    if not 0 < int.from_bytes(key, "big") < ORDER:
        raise kms.exception.InvalidPath("Seed yields an invalid master key")

    return ChildKey(0, 0, chain_code, key)


def derive_child(parent:ChildKey, index:int) -> ChildKey:
    """
    Private parent to private child derivation

    @param   parent  Parent key
    @param   index   Child number; hardened at or above 2^31
    @return  Child key
    """
    parent_public = parent.public_key
    if index & HARDENED:
        data = b"\0" + parent.private_key + index.to_bytes(4, "big")
    else:
        data = parent_public + index.to_bytes(4, "big")

    digest = hmac.new(parent.chain_code, data, hashlib.sha512).digest()
    tweak = int.from_bytes(digest[:32], "big")
    child = (tweak + int.from_bytes(parent.private_key, "big")) % ORDER

    # Probability below 2^-127; the child number is simply unusable
    if tweak >= ORDER or child == 0:
        raise kms.exception.InvalidPath(f"Child {index} is not a valid key; use the next index")

    return ChildKey(parent.depth + 1, index, digest[32:], child.to_bytes(32, "big"), parent_public)


def derive_path(seed:bytes, path:T.Union[str, T.Sequence[int]]) -> ChildKey:
    key = master_key(seed)
    for index in parse_path(path):
        key = derive_child(key, index)

    return key
