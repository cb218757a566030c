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
import random
from functools import cached_property

from api.kms import KeyManager, Session
from api.logging import Loggable
from api.network import LocalNode, ThresholdNetwork, network_init
from api.persistence import DeviceStore, ServerStore
from api.wire import RemoteNode, RemoteServerStore
from core import idm, network, persistence, time, typing as T, utils
from core.idm import Identity, IdToken
from core.network import NetworkConfig, NodeHealth


class Workspace(Loggable):
    """
    Everything a command needs, built from configuration: the node
    network and server store (in-process, persisted under the state
    directory, or remote), device stores, the key manager and tokens
    """
    def __init__(self, cfg:T.Any, provider:idm.base.IdentityProvider, *, clock:T.Clock = time.now) -> None:
        self._cfg = cfg
        self._provider = provider
        self._clock = clock

        self.state = T.Path(cfg.storage.state).expanduser()
        self.state.mkdir(parents=True, exist_ok=True)

    @property
    def wire(self) -> bool:
        return self._cfg.wire.enabled

    @property
    def network_config(self) -> NetworkConfig:
        return NetworkConfig(self._cfg.network.nodes, self._cfg.network.threshold, self._cfg.network.latency)

    ## Entropy #########################################################

    def _invocation(self) -> int:
        # Seeded runs stay reproducible without reusing entropy across runs
        counter = self.state / "invocations"
        count = int(counter.read_text()) + 1 if counter.exists() else 1
        utils.atomic_write(counter, str(count).encode())
        return count

    @cached_property
    def rng(self) -> T.EntropySource:
        if self._cfg.seed is None:
            return random.SystemRandom()

        return random.Random(f"{self._cfg.seed}/{self._invocation()}")

    ## Storages ########################################################

    @cached_property
    def network(self) -> ThresholdNetwork:
        if self.wire:
            operator = self.operator_token()
            nodes = [RemoteNode(index, address, operator=operator)
                     for index, address in enumerate(self._cfg.wire.nodes, start=1)]
            return ThresholdNetwork(self.network_config, nodes)

        (nodes := self.state / "nodes").mkdir(exist_ok=True)
        return network_init(self.network_config, self._provider.verifier, self.rng,
                            audience=self._cfg.identity.audience, state=nodes)

    def local_node(self, index:int) -> LocalNode:
        """ One persisted in-process node, for serving over the wire """
        if not 1 <= index <= self.network_config.node_count:
            raise network.exception.BadIndex(f"No node {index} in a network of {self.network_config.node_count}")

        (nodes := self.state / "nodes").mkdir(exist_ok=True)
        return LocalNode(index, self._provider.verifier, self.rng,
                         audience=self._cfg.identity.audience, state=nodes / f"node-{index}.json")

    @property
    def _server_down(self) -> T.Path:
        return self.state / "server.down"

    def local_server(self) -> ServerStore:
        """ The file-backed server store under the state directory """
        store = ServerStore(self.state / "server", self._cfg.storage.secret, self._provider.verifier, self.rng,
                            audience=self._cfg.identity.audience, now=self._clock())
        store.set_available(not self._server_down.exists())
        return store

    @cached_property
    def server(self) -> persistence.base.ServerStore:
        if self.wire:
            return RemoteServerStore(self._cfg.wire.server, operator=self.operator_token())

        return self.local_server()

    def device(self, device_id:str) -> DeviceStore:
        return DeviceStore(self.state / "devices", device_id)

    @cached_property
    def manager(self) -> KeyManager:
        return KeyManager(self.network, self.server, self.device, clock=self._clock)

    ## Identity ########################################################

    def identity(self, user:str) -> Identity:
        return Identity(self._cfg.identity.issuer, user)

    def token(self, user:str) -> IdToken:
        return self._provider.issue_token(self.identity(user), self._cfg.identity.audience,
                                          self._cfg.identity.ttl, self._clock())

    @property
    def verifier(self) -> idm.base.TokenVerifier:
        return self._provider.verifier

    def operator_token(self) -> IdToken:
        """ Credential for the administrative operations of wire services """
        return self._provider.issue_token(Identity(self._cfg.identity.issuer, "operator"),
                                          idm.operator_audience(self._cfg.identity.audience),
                                          self._cfg.identity.ttl, self._clock())

    def session(self, user:str, device_id:str) -> Session:
        return Session(self.identity(user), device_id)

    ## Bookkeeping #####################################################

    @property
    def _last_session(self) -> T.Path:
        return self.state / "session.json"

    def record(self, session:Session) -> None:
        """ Keep the counters of the most recent session """
        utils.atomic_write(self._last_session, json.dumps(session.meter.as_dict()).encode())

    def last_session(self) -> T.Optional[T.Dict[str, T.Any]]:
        try:
            return json.loads(self._last_session.read_text())
        except (FileNotFoundError, ValueError):
            return None

    def auto_rotate(self) -> T.Optional[int]:
        """ Apply the at-rest rotation policy to an in-process server """
        if self.wire:
            return None

        try:
            if (epoch := self.server.rotate_if_due(self._clock(), self._cfg.storage.rotation)) is not None:
                self.log.info(f"At-rest encryption auto-rotated to epoch {epoch}")
            return epoch

        except persistence.exception.Unavailable:
            return None

    def mark_server(self, up:bool) -> None:
        if self.wire:
            self.server.set_available(up)
            return

        if up:
            self._server_down.unlink(missing_ok=True)
        else:
            self._server_down.touch()

        if "server" in self.__dict__:
            self.server.set_available(up)

        self.log.info(f"Server marked {'up' if up else 'down'}")

    def mark_node(self, index:int, health:NodeHealth) -> None:
        self.network.mark_node(index, health)

    ## Reporting #######################################################

    def status(self) -> T.Dict[str, T.Any]:
        nodes:T.List[T.Dict[str, T.Any]] = []
        for node in self.network.nodes:
            try:
                health = node.health.value
            except network.exception.NodeUnavailable:
                health = "unreachable"

            nodes.append({"index": node.index, "health": health})

        server:T.Dict[str, T.Any] = {"available": self.server.available}
        if server["available"]:
            records = self.server.records()
            server.update(epoch=self.server.epoch,
                          rotated_at=self.server.rotated_at,
                          records=len(records),
                          identities=len({record.identity for record in records}))

        return {"profile":     self._cfg.profile,
                "mode":        "wire" if self.wire else "in-process",
                "network":     {"nodes":        self.network_config.node_count,
                                "threshold":    self.network_config.threshold,
                                "write_quorum": self.network_config.write_quorum},
                "nodes":       nodes,
                "compromised": sum(node["health"] == NodeHealth.Compromised.value for node in nodes),
                "server":      server,
                "rotation":    time.seconds(self._cfg.storage.rotation),
                "session":     self.last_session()}
