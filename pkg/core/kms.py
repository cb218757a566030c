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

from . import typing as T
from .crypto import PublicPoint, SCALARS, Signature
from .field import FieldElement
from .idm import IdToken
from .shamir import SharePoint, SharePolicy


class exception(T.SimpleNamespace):
    """ Namespace of exceptions to make importing easier """
    class AlreadyEnrolled(Exception):
        """ Raised when signing up an identity that has a vault """

    class InsufficientStorages(Exception):
        """ Raised when a flow cannot reach the storages it needs """

    class Unrecoverable(InsufficientStorages):
        """ Raised when fewer than two storages survive """

    class KeyErased(Exception):
        """ Raised when an erased key handle is used """

    class InvalidPath(ValueError):
        """ Raised when a derivation path element is invalid """

    class InvalidMnemonic(ValueError):
        """ Raised when a seed phrase fails its checksum or range check """

    class ServerReachable(ValueError):
        """ Raised when disaster recovery is asked for while the server is up """


Token = T.Union[IdToken, str]


class Storage(Enum):
    """ The three shard storages, valued by their share abscissa """
    Network = 1
    Server  = 2
    Device  = 3

    @property
    def x(self) -> FieldElement:
        return SCALARS(self.value)

    def __str__(self) -> str:
        return self.name.lower()


# 2-of-3 across the storages
SHARD_POLICY = SharePolicy(2, 3, tuple(storage.x for storage in Storage))


@dataclass(frozen=True)
class KeyShardSet:
    """ Shares of the master scalar (s) and of the Ekp scalar (E) """
    s_T:SharePoint = field(repr=False)
    s_S:SharePoint = field(repr=False)
    s_D:SharePoint = field(repr=False)
    E_T:SharePoint = field(repr=False)
    E_S:SharePoint = field(repr=False)
    E_D:SharePoint = field(repr=False)

    def key_share(self, storage:Storage) -> SharePoint:
        return {Storage.Network: self.s_T, Storage.Server: self.s_S, Storage.Device: self.s_D}[storage]

    def ekp_share(self, storage:Storage) -> SharePoint:
        return {Storage.Network: self.E_T, Storage.Server: self.E_S, Storage.Device: self.E_D}[storage]


@dataclass(frozen=True)
class MasterKey:
    private_scalar:FieldElement = field(repr=False)
    public_point:PublicPoint

    def __post_init__(self) -> None:
        if not self.private_scalar:
            raise ValueError("Master keys are nonzero")


class _KeyManager(metaclass=ABCMeta):
    """ Abstract base class for the key-management flows """
    @abstractmethod
    def signup(self, session:T.Any, token:Token, rng:T.EntropySource) -> PublicPoint:
        """
        Enrol an identity: generate the master key from three entropy
        sources, then shard and seal it across the three storages

        @param   session  Caller's session
        @param   token    Identity token
        @param   rng      Entropy source
        @return  Public key
        """

    @abstractmethod
    def signin(self, session:T.Any, token:Token) -> T.Any:
        """ Reconstruct the key from the server and device shards """

    @abstractmethod
    def sign_transaction(self, session:T.Any, token:Token, digest:bytes) -> Signature:
        """ Sign a digest under the master key """

    @abstractmethod
    def rotate_ekp(self, session:T.Any, token:Token, rng:T.EntropySource) -> int:
        """ Replace the complementary encryption keypair """

    @abstractmethod
    def reshare_key(self, session:T.Any, token:Token, rng:T.EntropySource) -> None:
        """ Replace the key shards with a fresh sharing of the same key """

    @abstractmethod
    def recover_device(self, session:T.Any, token:Token, new_device_id:str, rng:T.EntropySource) -> None:
        """ Provision a replacement device from the network and server """

    @abstractmethod
    def disaster_recover(self, session:T.Any, token:Token) -> str:
        """ Recover the seed phrase from the network and device alone """


class base(T.SimpleNamespace):
    """ Namespace of base classes to make importing easier """
    KeyManager = _KeyManager
