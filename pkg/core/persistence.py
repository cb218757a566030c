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

from abc import ABCMeta, abstractmethod
from dataclasses import dataclass, field
from enum import Enum

from . import time, typing as T
from .idm import Identity, IdToken


class exception(T.SimpleNamespace):
    """ Namespace of exceptions to make importing easier """
    class BackendException(Exception):
        """ Raised on persistence backend failure """

    class CorruptStore(BackendException):
        """ Raised when persisted state cannot be parsed """

    class Unavailable(BackendException):
        """ Raised when a store is down """

    class NotFound(Exception):
        """ Raised when a slot holds nothing """

    class EpochMismatch(Exception):
        """ Raised when a record is encrypted under a retired at-rest epoch """

    class Unprovisioned(Exception):
        """ Raised when a device has never been provisioned """


Token = T.Union[IdToken, str]


class Slot(Enum):
    """ The two artifacts every storage holds for an identity """
    PrivkeyShard = "privkey_shard"
    EkpShard     = "ekp_shard"


@dataclass(frozen=True)
class VaultRecord:
    """ A server record as persisted: encrypted under its at-rest epoch """
    identity:Identity
    slot:Slot
    at_rest_epoch:int
    at_rest_ciphertext:bytes = field(repr=False)
    payload:T.Optional[bytes] = field(default=None, repr=False, compare=False)


class _ServerStore(metaclass=ABCMeta):
    """ Abstract base class for the token-gated server storage """
    @property
    @abstractmethod
    def epoch(self) -> int:
        """ Current at-rest epoch """

    @property
    @abstractmethod
    def available(self) -> bool:
        """ Is the server up? """

    @abstractmethod
    def set_available(self, available:bool) -> None:
        """ Fault injection: take the server down or bring it back """

    @abstractmethod
    def entropy(self, token:Token, now:T.Timestamp) -> bytes:
        """ Issue 32 bytes of server entropy to a verified caller """

    @abstractmethod
    def enrolled(self, token:Token, now:T.Timestamp) -> bool:
        """ Does the caller hold any record? """

    @abstractmethod
    def put(self, token:Token, now:T.Timestamp, slot:Slot, payload:bytes) -> None:
        """
        Store a payload under the caller's identity

        @param  token    Identity token
        @param  now      Verification time
        @param  slot     Target slot
        @param  payload  Bytes to store
        """

    @abstractmethod
    def put_vault(self, token:Token, now:T.Timestamp, payloads:T.Dict[Slot, bytes]) -> None:
        """ Replace several slots in one atomic write """

    @abstractmethod
    def get(self, token:Token, now:T.Timestamp, slot:Slot) -> bytes:
        """
        Fetch a payload, unwrapping the at-rest layer

        @param   token  Identity token
        @param   now    Verification time
        @param   slot   Source slot
        @return  Stored payload
        """

    @abstractmethod
    def delete_vault(self, token:Token, now:T.Timestamp) -> None:
        """ Remove every slot of the caller's identity """

    @abstractmethod
    def rotate_at_rest(self, now:T.Optional[T.Timestamp] = None) -> int:
        """
        Re-encrypt every record under a fresh epoch secret and destroy the
        retired one

        @param   now  Rotation time, for the auto-rotate policy
        @return  New epoch
        """

    def rotate_if_due(self, now:T.Timestamp, interval:T.TimeDelta) -> T.Optional[int]:
        """
        Apply the auto-rotate policy

        @param   now       Current time
        @param   interval  Maximum epoch lifetime
        @return  New epoch, if rotated
        """
        if now - self.rotated_at >= time.seconds(interval):
            return self.rotate_at_rest(now)

        return None

    @property
    @abstractmethod
    def rotated_at(self) -> T.Timestamp:
        """ When the current epoch began """

    @abstractmethod
    def records(self) -> T.List[VaultRecord]:
        """ Persisted records, still encrypted """


class _DeviceStore(metaclass=ABCMeta):
    """ Abstract base class for a device's local storage """
    device_id:str

    @property
    @abstractmethod
    def provisioned(self) -> bool:
        """ Has the device been provisioned? """

    @abstractmethod
    def provision(self, payloads:T.Dict[Slot, bytes]) -> None:
        """ Replace every slot in one atomic write """

    @abstractmethod
    def put(self, slot:Slot, payload:bytes) -> None:
        """ Store a payload in a provisioned device """

    @abstractmethod
    def get(self, slot:Slot) -> bytes:
        """ Fetch a payload """

    @abstractmethod
    def wipe(self) -> None:
        """ Remove everything, returning the device to unprovisioned """


class base(T.SimpleNamespace):
    """ Namespace of base classes to make importing easier """
    ServerStore = _ServerStore
    DeviceStore = _DeviceStore
