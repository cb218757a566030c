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
from .crypto import PublicPoint, SCALARS
from .field import FieldElement
from .idm import Identity, IdToken
from .meter import Meter
from .shamir import SharePoint, reconstruct_secret


class exception(T.SimpleNamespace):
    """ Namespace of exceptions to make importing easier """
    class InvalidConfiguration(ValueError):
        """ Raised when the network size and threshold are incompatible """

    class BadIndex(IndexError):
        """ Raised when a node index is outside 1..n """

    class AlreadyAssigned(Exception):
        """ Raised when a postbox is requested for an assigned identity """

    class NotFound(Exception):
        """ Raised when a node holds nothing for the identity """

    class NodeUnavailable(Exception):
        """ Raised by a node that is down """

    class InsufficientNodes(Exception):
        """ Raised when fewer than the threshold of nodes respond """


Token = T.Union[IdToken, str]


class NodeHealth(Enum):
    Healthy     = "healthy"
    Dead        = "dead"
    Compromised = "compromised"


@dataclass(frozen=True)
class NetworkConfig:
    """ t-of-n node network with simulated per-node latency """
    node_count:int = 9
    threshold:int = 5
    latency_ms:float = 0.0

    def __post_init__(self) -> None:
        if not 1 <= self.threshold <= self.node_count:
            raise exception.InvalidConfiguration(f"Threshold {self.threshold} is not within [1, {self.node_count}]")

        if self.latency_ms < 0:
            raise exception.InvalidConfiguration("Latency cannot be negative")

    @property
    def write_quorum(self) -> int:
        # Stale writers must stay below the threshold, so that no old
        # blob generation can ever be reconstructed
        return max(self.threshold, self.node_count - self.threshold + 1)


@dataclass(frozen=True)
class NodeShare:
    """ A node's share of an identity's postbox scalar """
    node_index:int
    share:SharePoint
    identity:Identity

    def __post_init__(self) -> None:
        if self.share.x != self.node_index:
            raise ValueError("Postbox shares must sit at their node's index")


@dataclass(frozen=True)
class BlobShard:
    """ A node's chunk-wise shares of an identity's stored blob """
    node_index:int
    generation:bytes
    chunks:T.Tuple[SharePoint, ...]


@dataclass(frozen=True)
class PostboxKey:
    scalar:FieldElement = field(repr=False)
    public_point:PublicPoint

    @classmethod
    def Reconstruct(cls, shares:T.Sequence[NodeShare], threshold:int) -> PostboxKey:
        """ Lagrange reconstruction at 0 from the nodes' shares """
        scalar = reconstruct_secret([node_share.share for node_share in shares], threshold)
        return cls(scalar, PublicPoint.FromScalar(scalar))


@dataclass(frozen=True)
class Dealing:
    """
    One dealer's contribution to a postbox DKG: the public commitment to
    its constant term and a sub-share sealed to each participant
    """
    dealer_index:int
    commitment:PublicPoint
    sealed:T.Dict[int, bytes]


@dataclass
class NodeView:
    """ Everything a node holds, as seen by an adversary who owns it """
    node_index:int
    health:NodeHealth
    shares:T.Dict[Identity, NodeShare] = field(default_factory=dict)
    blobs:T.Dict[Identity, BlobShard] = field(default_factory=dict)


class _Node(metaclass=ABCMeta):
    """ Abstract base class for a node of the threshold network """
    index:int

    # Simulated nodes charge their configured latency to the meter, rather
    # than the (negligible) wall time of an in-process call
    charges_wall_time:T.ClassVar[bool] = False
    latency_ms:float = 0.0

    @property
    @abstractmethod
    def health(self) -> NodeHealth:
        """ Current fault-injection state """

    @abstractmethod
    def mark(self, health:NodeHealth) -> None:
        """ Set the fault-injection state """

    @abstractmethod
    def transport_key(self) -> PublicPoint:
        """ Public point that DKG sub-shares for this node are sealed to """

    @abstractmethod
    def deal(self, identity:Identity, participants:T.Dict[int, PublicPoint], threshold:int) -> Dealing:
        """
        Deal a threshold sharing of a fresh random scalar to the
        participants, then forget the polynomial

        @param   identity      Identity the postbox is for
        @param   participants  Transport keys, by node index
        @param   threshold     Sharing threshold
        @return  Commitment and sealed sub-shares
        """

    @abstractmethod
    def receive(self, identity:Identity, sealed:T.Dict[int, bytes]) -> None:
        """
        Open the sub-shares dealt to this node and keep their sum as its
        postbox share

        @param   identity  Identity the postbox is for
        @param   sealed    Sealed sub-shares, by dealer index
        """

    @abstractmethod
    def fetch_share(self, token:Token, now:T.Timestamp) -> NodeShare:
        """ Token-gated postbox share fetch """

    @abstractmethod
    def put_shard(self, token:Token, now:T.Timestamp, shard:BlobShard) -> None:
        """ Token-gated blob shard store (overwrites) """

    @abstractmethod
    def get_shard(self, token:Token, now:T.Timestamp) -> BlobShard:
        """ Token-gated blob shard fetch """

    @abstractmethod
    def delete_shard(self, token:Token, now:T.Timestamp) -> None:
        """ Token-gated blob shard removal """

    @abstractmethod
    def view(self) -> NodeView:
        """ Snapshot of the node's stored state """


class _NodeNetwork(metaclass=ABCMeta):
    """ Abstract base class for the threshold node network """
    config:NetworkConfig

    @abstractmethod
    def assign_postbox(self, identity:Identity, meter:T.Optional[Meter] = None) -> PublicPoint:
        """
        Run the dealer-free DKG for the identity

        @param   identity  Identity to assign
        @param   meter     Session meter
        @return  Postbox public point
        """

    @abstractmethod
    def fetch_postbox_shares(self, token:Token, now:T.Timestamp, meter:T.Optional[Meter] = None) -> T.List[NodeShare]:
        """
        Fetch threshold-many postbox shares, contacting the minimum
        number of nodes in index order

        @param   token  Identity token
        @param   now    Verification time
        @param   meter  Session meter
        @return  Exactly t node shares
        """

    def postbox_key(self, token:Token, now:T.Timestamp, meter:T.Optional[Meter] = None) -> PostboxKey:
        """ Fetch and reconstruct the postbox key """
        shares = self.fetch_postbox_shares(token, now, meter)
        return PostboxKey.Reconstruct(shares, self.config.threshold)

    @abstractmethod
    def store_blob(self, token:Token, now:T.Timestamp, blob:bytes, rng:T.EntropySource, meter:T.Optional[Meter] = None) -> None:
        """ Split the blob across the nodes, replacing any previous one """

    @abstractmethod
    def retrieve_blob(self, token:Token, now:T.Timestamp, meter:T.Optional[Meter] = None) -> bytes:
        """ Reconstruct the identity's blob from threshold-many shards """

    @abstractmethod
    def delete_blob(self, token:Token, now:T.Timestamp, meter:T.Optional[Meter] = None) -> None:
        """ Remove the identity's blob shards from every reachable node """

    @abstractmethod
    def mark_node(self, index:int, health:NodeHealth) -> None:
        """ Fault injection """

    @abstractmethod
    def adversary_view(self) -> T.List[NodeView]:
        """ Stored state of every compromised node """


class base(T.SimpleNamespace):
    """ Namespace of base classes to make importing easier """
    Node        = _Node
    NodeNetwork = _NodeNetwork


# Field the postbox shares live in
POSTBOX_FIELD = SCALARS
