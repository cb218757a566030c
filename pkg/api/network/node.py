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

import json
from functools import wraps
from threading import RLock

from api.logging import Loggable
from core import crypto, idm, network, typing as T
from core.crypto import PublicPoint
from core.idm import Identity
from core.network import BlobShard, Dealing, NodeHealth, NodeShare, NodeView, POSTBOX_FIELD, Token
from core.shamir import SharePoint, evaluate
from core.utils import atomic_write
from .codec import BLOB_FIELD


_AUDIENCE = "kms"


def _alive(method:T.Callable) -> T.Callable:
    """ Dead nodes drop every request """
    @wraps(method)
    def _wrapper(node:LocalNode, *args, **kwargs):
        if node.health == NodeHealth.Dead:
            raise network.exception.NodeUnavailable(f"Node {node.index} is down")

        return method(node, *args, **kwargs)

    return _wrapper


class LocalNode(Loggable, network.base.Node):
    """ In-process node, optionally persisted to a JSON state file """
    _verifier:idm.base.TokenVerifier
    _rng:T.EntropySource
    _transport:crypto.EncKeypair
    _health:NodeHealth
    _shares:T.Dict[Identity, NodeShare]
    _blobs:T.Dict[Identity, BlobShard]
    _state:T.Optional[T.Path]
    _lock:RLock

    def __init__(self, index:int, verifier:idm.base.TokenVerifier, rng:T.EntropySource, *,
                 latency_ms:float = 0.0, audience:str = _AUDIENCE, state:T.Optional[T.Path] = None) -> None:
        self.index = index
        self.latency_ms = latency_ms
        self.audience = audience
        self._verifier = verifier
        self._rng = rng
        self._state = state
        self._lock = RLock()

        if state is not None and state.exists():
            self._load(state)
        else:
            self._transport = crypto.generate_keypair(rng)
            self._health = NodeHealth.Healthy
            self._shares = {}
            self._blobs = {}
            self._save()

    def _identify(self, token:Token, now:T.Timestamp) -> Identity:
        # NOTE Tokens are verified on every request, never cached
        return self._verifier.verify_token(token, self.audience, now)

    @property
    def health(self) -> NodeHealth:
        return self._health

    def mark(self, health:NodeHealth) -> None:
        with self._lock:
            self._health = health
            self._save()

        self.log.info(f"Node {self.index} marked {health.value}")

    @_alive
    def transport_key(self) -> PublicPoint:
        return self._transport.public_point

    @_alive
    def deal(self, identity:Identity, participants:T.Dict[int, PublicPoint], threshold:int) -> Dealing:
        with self._lock:
            if identity in self._shares:
                raise network.exception.AlreadyAssigned(f"Postbox for {identity} already exists")

            coefficients = [POSTBOX_FIELD.random(self._rng, nonzero=True)] \
                         + [POSTBOX_FIELD.random(self._rng) for _ in range(threshold - 1)]

            commitment = PublicPoint.FromScalar(coefficients[0])
            sealed = {
                j: crypto.seal(evaluate(coefficients, POSTBOX_FIELD(j)).to_bytes(), key, self._rng).encode()
                for j, key in participants.items()}

            # The dealt polynomial must not outlive the dealing
            coefficients.clear()

        return Dealing(self.index, commitment, sealed)

    @_alive
    def receive(self, identity:Identity, sealed:T.Dict[int, bytes]) -> None:
        with self._lock:
            if identity in self._shares:
                raise network.exception.AlreadyAssigned(f"Postbox for {identity} already exists")

            total = POSTBOX_FIELD(0)
            for box in sealed.values():
                total += POSTBOX_FIELD.from_bytes(crypto.open_bytes(box, self._transport.private_scalar))

            share = SharePoint(POSTBOX_FIELD(self.index), total)
            self._shares[identity] = NodeShare(self.index, share, identity)
            self._save()

        self.log.debug(f"Node {self.index} holds a postbox share for {identity}")

    @_alive
    def fetch_share(self, token:Token, now:T.Timestamp) -> NodeShare:
        identity = self._identify(token, now)
        try:
            return self._shares[identity]
        except KeyError:
            raise network.exception.NotFound(f"Node {self.index} has no postbox for {identity}")

    @_alive
    def put_shard(self, token:Token, now:T.Timestamp, shard:BlobShard) -> None:
        identity = self._identify(token, now)
        with self._lock:
            self._blobs[identity] = BlobShard(self.index, shard.generation, tuple(shard.chunks))
            self._save()

    @_alive
    def get_shard(self, token:Token, now:T.Timestamp) -> BlobShard:
        identity = self._identify(token, now)
        try:
            return self._blobs[identity]
        except KeyError:
            raise network.exception.NotFound(f"Node {self.index} has no blob for {identity}")

    @_alive
    def delete_shard(self, token:Token, now:T.Timestamp) -> None:
        identity = self._identify(token, now)
        with self._lock:
            if self._blobs.pop(identity, None) is not None:
                self._save()

    def view(self) -> NodeView:
        with self._lock:
            return NodeView(self.index, self._health, dict(self._shares), dict(self._blobs))

    def _save(self) -> None:
        if self._state is None:
            return

        state = {
            "index":     self.index,
            "health":    self._health.value,
            "transport": hex(int(self._transport.private_scalar)),
            "shares":    [{"identity": [i.verifier_url, i.verifier_id],
                           "y":        hex(int(s.share.y))}
                          for i, s in self._shares.items()],
            "blobs":     [{"identity":   [i.verifier_url, i.verifier_id],
                           "generation": b.generation.hex(),
                           "chunks":     [hex(int(c.y)) for c in b.chunks]}
                          for i, b in self._blobs.items()]}

        atomic_write(self._state, json.dumps(state, indent=2).encode())

    def _load(self, state:T.Path) -> None:
        loaded = json.loads(state.read_text())
        if loaded["index"] != self.index:
            raise network.exception.BadIndex(f"State file {state.name} belongs to node {loaded['index']}")

        self._transport = crypto.EncKeypair.FromScalar(POSTBOX_FIELD(int(loaded["transport"], 16)))
        self._health = NodeHealth(loaded["health"])

        x_postbox = POSTBOX_FIELD(self.index)
        self._shares = {}
        for record in loaded["shares"]:
            identity = Identity(*record["identity"])
            share = SharePoint(x_postbox, POSTBOX_FIELD(int(record["y"], 16)))
            self._shares[identity] = NodeShare(self.index, share, identity)

        x_blob = BLOB_FIELD(self.index)
        self._blobs = {}
        for record in loaded["blobs"]:
            identity = Identity(*record["identity"])
            chunks = tuple(SharePoint(x_blob, BLOB_FIELD(int(y, 16))) for y in record["chunks"])
            self._blobs[identity] = BlobShard(self.index, bytes.fromhex(record["generation"]), chunks)
