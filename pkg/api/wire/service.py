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

import asyncio
import threading
from abc import ABCMeta, abstractmethod
from contextlib import suppress

from api.logging import Loggable
from core import idm, network, persistence, time, typing as T
from core.crypto import PublicPoint
from core.network import NodeHealth
from . import messages
from .frame import LENGTH, MAX_FRAME, VERSION, Op, Request, Response, correlation_of, exception, pack, unpack
from .status import Status, status_for


Address = T.Tuple[str, int]
Handler = T.Callable[[str, T.Any], T.Any]

_AUDIENCE = "kms"

# How often the server checks its auto-rotate policy
_ROTATION_CHECK = 60.0


class _Service(Loggable, T.ContextManager["_Service"], metaclass=ABCMeta):
    """
    Threaded asyncio service answering length-prefixed request frames; a
    failing request is answered with its status and the connection stays
    open

    Administrative operations need an operator credential: a token issued
    for the operator audience of the service audience
    """
    _bind:Address
    _verifier:idm.base.TokenVerifier
    _audience:str
    _clock:T.Clock
    _delay:float
    _loop:T.Optional[asyncio.AbstractEventLoop]
    _server:T.Optional[asyncio.AbstractServer]
    _thread:T.Optional[threading.Thread]
    _ready:threading.Event
    _failure:T.Optional[OSError]
    _writers:T.Set[asyncio.StreamWriter]
    address:T.Optional[Address]

    def __init__(self, bind:Address, verifier:idm.base.TokenVerifier, *,
                 audience:str = _AUDIENCE, delay_ms:float = 0.0, clock:T.Clock = time.now) -> None:
        self._bind = bind
        self._verifier = verifier
        self._audience = audience
        self._clock = clock
        self._delay = delay_ms / 1000
        self._loop = None
        self._server = None
        self._thread = None
        self._ready = threading.Event()
        self._failure = None
        self._writers = set()
        self.address = None

    @property
    @abstractmethod
    def handlers(self) -> T.Dict[Op, Handler]:
        """ Operation dispatch table """

    @property
    def name(self) -> str:
        return type(self).__name__

    def _operator(self, handler:Handler) -> Handler:
        """ Gate a handler behind the operator credential """
        def _gated(token:str, payload:T.Any) -> T.Any:
            self._verifier.verify_token(token, idm.operator_audience(self._audience), self._clock())
            return handler(token, payload)

        return _gated

    def _dispatch(self, request:Request) -> Response:
        if request.version != VERSION:
            raise exception.VersionError(f"Protocol version {request.version} is not supported")

        try:
            handler = self.handlers[Op(request.op)]
        except (ValueError, KeyError):
            raise exception.Unsupported(f"Operation {request.op:#04x} is not supported by {self.name}")

        try:
            token = request.token.decode()
        except UnicodeDecodeError:
            token = ""

        payload = unpack(request.payload) if request.payload else None
        try:
            result = handler(token, payload)
        except (KeyError, TypeError, ValueError) as e:
            if status_for(e) != Status.Internal:
                raise
            raise exception.BadRequest(f"Malformed {Op(request.op).name} payload: {e}")

        return Response(Status.Ok, request.correlation, pack(result))

    def _respond(self, body:bytes) -> Response:
        try:
            return self._dispatch(Request.decode(body))

        except Exception as e:
            status = status_for(e)
            if status == Status.Internal:
                self.log.error(f"{self.name} failed unexpectedly: {type(e).__name__}: {e}")

            return Response(status, correlation_of(body), str(e).encode())

    async def _connection(self, reader:asyncio.StreamReader, writer:asyncio.StreamWriter) -> None:
        loop = asyncio.get_running_loop()
        self._writers.add(writer)
        try:
            while True:
                head = await reader.readexactly(LENGTH.size)
                length, = LENGTH.unpack(head)
                if length > MAX_FRAME:
                    self.log.warning(f"{self.name} dropped a connection sending a {length} byte frame")
                    break

                body = await reader.readexactly(length)
                if self._delay:
                    await asyncio.sleep(self._delay)

                response = await loop.run_in_executor(None, self._respond, body)
                writer.write(response.encode())
                await writer.drain()

        except (asyncio.IncompleteReadError, ConnectionError):
            pass

        finally:
            self._writers.discard(writer)
            writer.close()
            with suppress(ConnectionError):
                await writer.wait_closed()

    async def _background(self) -> None:
        """ Periodic housekeeping, if any """

    def _run(self) -> None:
        loop = self._loop = asyncio.new_event_loop()
        asyncio.set_event_loop(loop)

        try:
            self._server = loop.run_until_complete(asyncio.start_server(self._connection, *self._bind))
        except OSError as e:
            self._failure = e
            self._ready.set()
            loop.close()
            return

        self.address = self._server.sockets[0].getsockname()[:2]
        housekeeping = loop.create_task(self._background())
        self._ready.set()

        try:
            loop.run_forever()
        finally:
            housekeeping.cancel()
            self._server.close()

            # NOTE Open connections hold wait_closed, and would otherwise
            # keep being served
            for writer in list(self._writers):
                writer.close()

            loop.run_until_complete(self._server.wait_closed())
            loop.close()

    def start(self) -> _Service:
        self._thread = threading.Thread(target=self._run, name=self.name, daemon=True)
        self._thread.start()
        if not self._ready.wait(timeout=10):
            raise exception.WireError(f"{self.name} did not start")

        if self._failure is not None:
            raise exception.BindFailure(f"{self.name} cannot bind {self._bind[0]}:{self._bind[1]}: {self._failure}")

        self.log.info(f"{self.name} listening on {self.address[0]}:{self.address[1]}")
        return self

    def stop(self) -> None:
        if self._loop is not None and self._thread is not None:
            self._loop.call_soon_threadsafe(self._loop.stop)
            self._thread.join(timeout=10)
            self.log.info(f"{self.name} stopped")

        self._loop = self._thread = None

    def __enter__(self) -> _Service:
        return self.start()

    def __exit__(self, *exc) -> bool:
        self.stop()
        return False

    def serve_forever(self) -> None:
        """ Block until interrupted """
        self.start()
        try:
            self._thread.join()
        except KeyboardInterrupt:
            self.stop()


class ServerService(_Service):
    """ Server store endpoints """
    _store:persistence.base.ServerStore
    _rotation:T.Optional[T.TimeDelta]

    def __init__(self, store:persistence.base.ServerStore, bind:Address, verifier:idm.base.TokenVerifier, *,
                 rotation:T.Optional[T.TimeDelta] = None, **kwargs) -> None:
        super().__init__(bind, verifier, **kwargs)
        self._store = store
        self._rotation = rotation

    @property
    def handlers(self) -> T.Dict[Op, Handler]:
        store, now, operator = self._store, self._clock, self._operator

        # NOTE The store verifies user tokens itself
        return {
            Op.Ping:            lambda token, _: "pong",
            Op.ServerEnrolled:  lambda token, _: store.enrolled(token, now()),
            Op.ServerEntropy:   lambda token, _: store.entropy(token, now()),
            Op.ServerPutVault:  lambda token, p: store.put_vault(token, now(), messages.to_payloads(p)),
            Op.ServerGet:       lambda token, p: store.get(token, now(), persistence.Slot(p)),
            Op.ServerDelete:    lambda token, _: store.delete_vault(token, now()),
            Op.ServerRotate:    operator(lambda token, _: store.rotate_at_rest(now())),
            Op.ServerStatus:    operator(lambda token, _: {"epoch": store.epoch, "rotated_at": store.rotated_at,
                                                           "available": store.available}),
            Op.ServerRecords:   operator(lambda token, _: [messages.record(r) for r in store.records()]),
            Op.ServerAvailable: operator(lambda token, p: store.set_available(bool(p)))}

    async def _background(self) -> None:
        if self._rotation is None:
            return

        loop = asyncio.get_running_loop()
        while True:
            await asyncio.sleep(min(_ROTATION_CHECK, time.seconds(self._rotation)))
            if (epoch := await loop.run_in_executor(None, self._store.rotate_if_due, self._clock(), self._rotation)) is not None:
                self.log.info(f"Auto-rotated at-rest encryption to epoch {epoch}")


class NodeService(_Service):
    """
    Node endpoints, with an optional artificial per-request delay; a
    node's stored state is never served
    """
    _node:network.base.Node

    def __init__(self, node:network.base.Node, bind:Address, verifier:idm.base.TokenVerifier, **kwargs) -> None:
        super().__init__(bind, verifier, **kwargs)
        self._node = node

    @property
    def name(self) -> str:
        return f"NodeService[{self._node.index}]"

    @property
    def handlers(self) -> T.Dict[Op, Handler]:
        node, now, operator = self._node, self._clock, self._operator

        def _deal(token:str, p:T.Dict) -> T.Dict:
            participants = {index: PublicPoint(point) for index, point in p["participants"]}
            return messages.dealing(node.deal(messages.to_identity(p["identity"]), participants, p["threshold"]))

        def _receive(token:str, p:T.Dict) -> None:
            node.receive(messages.to_identity(p["identity"]), {dealer: box for dealer, box in p["sealed"]})

        return {
            Op.Ping:           lambda token, _: {"index": node.index, "health": node.health.value},
            Op.NodeTransport:  lambda token, _: node.transport_key().data,
            Op.NodeDeal:       operator(_deal),
            Op.NodeReceive:    operator(_receive),
            Op.NodeFetchShare: lambda token, _: messages.node_share(node.fetch_share(token, now())),
            Op.NodePutShard:   lambda token, p: node.put_shard(token, now(), messages.to_blob_shard(p)),
            Op.NodeGetShard:   lambda token, _: messages.blob_shard(node.get_shard(token, now())),
            Op.NodeDelShard:   lambda token, _: node.delete_shard(token, now()),
            Op.NodeMark:       operator(lambda token, p: node.mark(NodeHealth(p)))}


def serve_server_store(store:persistence.base.ServerStore, bind:Address, verifier:idm.base.TokenVerifier,
                       **kwargs) -> ServerService:
    """ Start a server store service; port 0 picks a free port """
    return ServerService(store, bind, verifier, **kwargs).start()


def serve_node(node:network.base.Node, bind:Address, verifier:idm.base.TokenVerifier, **kwargs) -> NodeService:
    """ Start a node service; port 0 picks a free port """
    return NodeService(node, bind, verifier, **kwargs).start()
