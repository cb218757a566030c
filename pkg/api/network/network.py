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

from collections import defaultdict
from threading import Lock

from api.logging import Loggable
from core import crypto, idm, network, time, typing as T
from core.crypto import PublicPoint
from core.idm import Identity
from core.meter import Meter
from core.network import BlobShard, NetworkConfig, NodeHealth, NodeShare, NodeView, Token
from core.shamir import SharePolicy
from .codec import BLOB_FIELD, split_blob, join_blob
from .node import LocalNode


_T = T.TypeVar("_T")

# Errors after which the fetch moves on to the next node
_SKIPPABLE = (network.exception.NodeUnavailable, network.exception.NotFound)


class ThresholdNetwork(Loggable, network.base.NodeNetwork):
    """ Client-side orchestration of a t-of-n node network """
    _nodes:T.Dict[int, network.base.Node]
    _locks:T.DefaultDict[Identity, Lock]
    _guard:Lock

    def __init__(self, config:NetworkConfig, nodes:T.Sequence[network.base.Node]) -> None:
        if sorted(node.index for node in nodes) != list(range(1, config.node_count + 1)):
            raise network.exception.InvalidConfiguration(f"Expected nodes 1..{config.node_count}")

        self.config = config
        self._nodes = {node.index: node for node in nodes}
        self._locks = defaultdict(Lock)
        self._guard = Lock()

    @property
    def nodes(self) -> T.List[network.base.Node]:
        return [self._nodes[index] for index in sorted(self._nodes)]

    def node(self, index:int) -> network.base.Node:
        try:
            return self._nodes[index]
        except KeyError:
            raise network.exception.BadIndex(f"No node {index} in a network of {self.config.node_count}")

    def _lock(self, identity:Identity) -> Lock:
        with self._guard:
            return self._locks[identity]

    def _call(self, node:network.base.Node, meter:T.Optional[Meter], method:T.Callable[..., _T], *args) -> _T:
        """ Invoke a node method, charging the contact to the meter """
        started = time.monotonic_ms()
        try:
            return method(*args)

        finally:
            if meter is not None:
                elapsed = time.monotonic_ms() - started
                meter.node(elapsed if node.charges_wall_time else node.latency_ms)

    def assign_postbox(self, identity:Identity, meter:T.Optional[Meter] = None) -> PublicPoint:
        with self._lock(identity):
            participants:T.Dict[int, PublicPoint] = {}
            for node in self.nodes:
                try:
                    participants[node.index] = self._call(node, meter, node.transport_key)
                except network.exception.NodeUnavailable:
                    self.log.warning(f"Node {node.index} is down; excluded from the postbox DKG")

            if len(participants) < self.config.threshold:
                raise network.exception.InsufficientNodes(
                    f"Postbox DKG needs {self.config.threshold} nodes, {len(participants)} are up")

            dealings = [self._call(self._nodes[index], meter, self._nodes[index].deal,
                                   identity, participants, self.config.threshold)
                        for index in participants]

            # Sub-shares are relayed still sealed to their recipient
            for index in participants:
                node = self._nodes[index]
                sealed = {dealing.dealer_index: dealing.sealed[index] for dealing in dealings}
                self._call(node, meter, node.receive, identity, sealed)

            postbox = dealings[0].commitment
            for dealing in dealings[1:]:
                postbox += dealing.commitment

        self.log.info(f"Assigned postbox for {identity} across {len(participants)} nodes")
        return postbox

    def fetch_postbox_shares(self, token:Token, now:T.Timestamp, meter:T.Optional[Meter] = None) -> T.List[NodeShare]:
        shares:T.List[NodeShare] = []
        not_found = 0

        for node in self.nodes:
            try:
                shares.append(self._call(node, meter, node.fetch_share, token, now))
            except network.exception.NotFound:
                not_found += 1
                continue
            except network.exception.NodeUnavailable:
                continue

            if len(shares) == self.config.threshold:
                return shares

        if not shares and not_found >= self.config.threshold:
            raise network.exception.NotFound("No postbox has been assigned")

        raise network.exception.InsufficientNodes(
            f"Only {len(shares)} of the {self.config.threshold} required nodes returned a postbox share")

    def store_blob(self, token:Token, now:T.Timestamp, blob:bytes, rng:T.EntropySource, meter:T.Optional[Meter] = None) -> None:
        policy = SharePolicy.Sequential(BLOB_FIELD, self.config.threshold, self.config.node_count)
        generation = rng.randbytes(16)
        shards = split_blob(blob, policy, rng)

        stored = 0
        for node, chunks in zip(self.nodes, shards):
            try:
                self._call(node, meter, node.put_shard, token, now, BlobShard(node.index, generation, tuple(chunks)))
                stored += 1
            except network.exception.NodeUnavailable:
                self.log.warning(f"Node {node.index} is down; blob shard not stored")

        if stored < self.config.write_quorum:
            raise network.exception.InsufficientNodes(
                f"Blob stored on {stored} nodes, {self.config.write_quorum} required")

    def retrieve_blob(self, token:Token, now:T.Timestamp, meter:T.Optional[Meter] = None) -> bytes:
        by_generation:T.DefaultDict[bytes, T.List[BlobShard]] = defaultdict(list)
        not_found = 0

        for node in self.nodes:
            try:
                shard = self._call(node, meter, node.get_shard, token, now)
            except network.exception.NotFound:
                not_found += 1
                continue
            except network.exception.NodeUnavailable:
                continue

            # NOTE A successful store reaches the write quorum, so stale
            # generations never gather threshold-many shards
            shards = by_generation[shard.generation]
            shards.append(shard)
            if len(shards) == self.config.threshold:
                return join_blob([s.chunks for s in shards], self.config.threshold)

        if not by_generation and not_found >= self.config.threshold:
            raise network.exception.NotFound("No blob is stored")

        raise network.exception.InsufficientNodes(
            f"Fewer than {self.config.threshold} nodes returned a consistent blob shard")

    def delete_blob(self, token:Token, now:T.Timestamp, meter:T.Optional[Meter] = None) -> None:
        for node in self.nodes:
            try:
                self._call(node, meter, node.delete_shard, token, now)
            except _SKIPPABLE:
                pass

    def mark_node(self, index:int, health:NodeHealth) -> None:
        self.node(index).mark(health)

    def adversary_view(self) -> T.List[NodeView]:
        return [node.view() for node in self.nodes if node.health == NodeHealth.Compromised]

    def health(self) -> T.Dict[int, NodeHealth]:
        return {node.index: node.health for node in self.nodes}


def network_init(config:NetworkConfig, verifier:idm.base.TokenVerifier, rng:T.EntropySource, *,
                 audience:str = "kms", state:T.Optional[T.Path] = None) -> ThresholdNetwork:
    """
    Build an in-process network of fresh (or persisted) nodes

    @param   config    Network configuration
    @param   verifier  Token verifier shared by the nodes
    @param   rng       Entropy source; each node gets an independent fork
    @param   audience  Token audience the nodes accept
    @param   state     Optional directory for node state files
    @return  Network handle
    """
    nodes = [LocalNode(index, verifier, crypto.fork_entropy(rng),
                       latency_ms=config.latency_ms, audience=audience,
                       state=state / f"node-{index}.json" if state is not None else None)
             for index in range(1, config.node_count + 1)]

    return ThresholdNetwork(config, nodes)
