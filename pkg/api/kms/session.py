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

from dataclasses import dataclass, field

from core import crypto, kms, typing as T
from core.crypto import PublicPoint, Signature
from core.field import FieldElement
from core.idm import Identity
from core.kms import MasterKey
from core.meter import Meter
from . import hd


@dataclass
class Session:
    """ A caller's context: who, from which device, and what it cost """
    identity:Identity
    device_id:str
    meter:Meter = field(default_factory=Meter)


class KeyHandle(T.ContextManager["KeyHandle"]):
    """ Ephemeral holder of the master scalar; erase it when done """
    _scalar:T.Optional[FieldElement]
    public_point:PublicPoint

    def __init__(self, key:MasterKey) -> None:
        self._scalar = key.private_scalar
        self.public_point = key.public_point

    def __enter__(self) -> KeyHandle:
        return self

    def __exit__(self, *exc) -> bool:
        self.erase()
        return False

    def __del__(self) -> None:
        self.erase()

    @property
    def erased(self) -> bool:
        return self._scalar is None

    def erase(self) -> None:
        self._scalar = None

    @property
    def scalar(self) -> FieldElement:
        if self._scalar is None:
            raise kms.exception.KeyErased("Key handle has been erased")

        return self._scalar

    def sign(self, digest:bytes) -> Signature:
        return crypto.sign_digest(digest, self.scalar)

    def export_seed_phrase(self) -> str:
        return hd.scalar_to_mnemonic(self.scalar)

    def derive_chain_key(self, path:T.Union[str, T.Sequence[int]]) -> hd.ChildKey:
        """ BIP-32 child of the seed behind this key's mnemonic """
        seed = hd.mnemonic_to_seed(self.export_seed_phrase())
        return hd.derive_path(seed, path)
