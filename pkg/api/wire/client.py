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

import itertools
import socket
import threading

from core import network, persistence, typing as T
from core.crypto import PublicPoint
from core.idm import Identity
from core.network import BlobShard, Dealing, NodeHealth, NodeShare, NodeView, Token
from core.persistence import Slot, VaultRecord
from . import messages
from .frame import LENGTH, MAX_FRAME, Op, Request, Response, exception, pack, unpack
from .status import Status, error_for


Address = T.Tuple[str, int]

_TIMEOUT = 10.0


class Connection:
    """
    Blocking request/response channel to one service; a broken socket is
    dropped and reopened on the next call
    """
    _address:Address
    _unavailable:T.Type[Exception]
    _socket:T.Optional[socket.socket]
    _lock:threading.Lock
    _correlation:T.Iterator[int]

    def __init__(self, address:Address, unavailable:T.Type[Exception], *, timeout:float = _TIMEOUT) -> None:
        self._address = address
        self._unavailable = unavailable
        self._timeout = timeout
        self._socket = None
        self._lock = threading.Lock()
        self._correlation = itertools.count(1)

    def _connect(self) -> socket.socket:
        if self._socket is None:
            self._socket = socket.create_connection(self._address, timeout=self._timeout)

        return self._socket

    def _read(self, sock:socket.socket, size:int) -> bytes:
        data = bytearray()
        while len(data) < size:
            chunk = sock.recv(size - len(data))
            if not chunk:
                raise ConnectionResetError("Connection closed mid-frame")
            data += chunk

        return bytes(data)

    def close(self) -> None:
        with self._lock:
            if self._socket is not None:
                self._socket.close()
                self._socket = None

    def call(self, op:Op, token:T.Optional[Token] = None, payload:T.Any = None) -> T.Any:
        """
        Send one request and wait for its response

        @param   op       Operation
        @param   token    Identity token, if the operation is gated
        @param   payload  msgpack-able request payload
        @return  Decoded response payload
        """
        token_bytes = str(token).encode() if token is not None else b""
        body = pack(payload) if payload is not None else b""

        with self._lock:
            correlation = next(self._correlation) % 2**64
            request = Request(op, correlation, token_bytes, body)

            try:
                sock = self._connect()
                sock.sendall(request.encode())
                length, = LENGTH.unpack(self._read(sock, LENGTH.size))
                if length > MAX_FRAME:
                    raise exception.FrameError(f"Response of {length} bytes exceeds the frame limit")

                response = Response.decode(self._read(sock, length))

            except (OSError, exception.FrameError) as e:
                if self._socket is not None:
                    self._socket.close()
                    self._socket = None

                if isinstance(e, exception.FrameError):
                    raise
                raise self._unavailable(f"{self._address[0]}:{self._address[1]} is unreachable: {e}")

        if response.correlation != correlation:
            raise exception.FrameError(f"Response correlation {response.correlation} does not match {correlation}")

        if response.status != Status.Ok:
            raise error_for(response.status, response.payload.decode(errors="replace"))

        return unpack(response.payload) if response.payload else None


class RemoteNode(network.base.Node):
    """
    Node reached over the wire; the service applies its own clock. Fault
    injection and postbox dealing present the operator credential
    """
    charges_wall_time = True
    _operator:T.Optional[Token]

    def __init__(self, index:int, address:Address, *, operator:T.Optional[Token] = None, timeout:float = _TIMEOUT) -> None:
        self.index = index
        self.address = address
        self._operator = operator
        self._connection = Connection(address, network.exception.NodeUnavailable, timeout=timeout)

    @property
    def health(self) -> NodeHealth:
        return NodeHealth(self._connection.call(Op.Ping)["health"])

    def mark(self, health:NodeHealth) -> None:
        self._connection.call(Op.NodeMark, self._operator, health.value)

    def transport_key(self) -> PublicPoint:
        return PublicPoint(self._connection.call(Op.NodeTransport))

    def deal(self, identity:Identity, participants:T.Dict[int, PublicPoint], threshold:int) -> Dealing:
        payload = {"identity":     messages.identity(identity),
                   "participants": [[index, point.data] for index, point in participants.items()],
                   "threshold":    threshold}

        return messages.to_dealing(self._connection.call(Op.NodeDeal, self._operator, payload))

    def receive(self, identity:Identity, sealed:T.Dict[int, bytes]) -> None:
        payload = {"identity": messages.identity(identity),
                   "sealed":   [[dealer, box] for dealer, box in sealed.items()]}

        self._connection.call(Op.NodeReceive, self._operator, payload)

    def fetch_share(self, token:Token, now:T.Timestamp) -> NodeShare:
        return messages.to_node_share(self._connection.call(Op.NodeFetchShare, token))

    def put_shard(self, token:Token, now:T.Timestamp, shard:BlobShard) -> None:
        self._connection.call(Op.NodePutShard, token, messages.blob_shard(shard))

    def get_shard(self, token:Token, now:T.Timestamp) -> BlobShard:
        return messages.to_blob_shard(self._connection.call(Op.NodeGetShard, token))

    def delete_shard(self, token:Token, now:T.Timestamp) -> None:
        self._connection.call(Op.NodeDelShard, token)

    def view(self) -> NodeView:
        raise exception.Unsupported(f"Node {self.index} does not serve its stored state")

    def close(self) -> None:
        self._connection.close()


class RemoteServerStore(persistence.base.ServerStore):
    """
    Server store reached over the wire; status, fault injection and
    rotation present the operator credential
    """
    _operator:T.Optional[Token]

    def __init__(self, address:Address, *, operator:T.Optional[Token] = None, timeout:float = _TIMEOUT) -> None:
        self.address = address
        self._operator = operator
        self._connection = Connection(address, persistence.exception.Unavailable, timeout=timeout)

    def _status(self) -> T.Dict[str, T.Any]:
        return self._connection.call(Op.ServerStatus, self._operator)

    @property
    def epoch(self) -> int:
        return self._status()["epoch"]

    @property
    def rotated_at(self) -> T.Timestamp:
        return self._status()["rotated_at"]

    @property
    def available(self) -> bool:
        try:
            return self._status()["available"]
        except persistence.exception.Unavailable:
            return False

    def set_available(self, available:bool) -> None:
        self._connection.call(Op.ServerAvailable, self._operator, available)

    def entropy(self, token:Token, now:T.Timestamp) -> bytes:
        return self._connection.call(Op.ServerEntropy, token)

    def enrolled(self, token:Token, now:T.Timestamp) -> bool:
        return self._connection.call(Op.ServerEnrolled, token)

    def put(self, token:Token, now:T.Timestamp, slot:Slot, payload:bytes) -> None:
        self.put_vault(token, now, {slot: payload})

    def put_vault(self, token:Token, now:T.Timestamp, payloads:T.Dict[Slot, bytes]) -> None:
        self._connection.call(Op.ServerPutVault, token, messages.payloads(payloads))

    def get(self, token:Token, now:T.Timestamp, slot:Slot) -> bytes:
        return self._connection.call(Op.ServerGet, token, slot.value)

    def delete_vault(self, token:Token, now:T.Timestamp) -> None:
        self._connection.call(Op.ServerDelete, token)

    def rotate_at_rest(self, now:T.Optional[T.Timestamp] = None) -> int:
        return self._connection.call(Op.ServerRotate, self._operator)

    def records(self) -> T.List[VaultRecord]:
        return [messages.to_record(record) for record in self._connection.call(Op.ServerRecords, self._operator)]

    def close(self) -> None:
        self._connection.close()
