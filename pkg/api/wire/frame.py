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

import struct
from dataclasses import dataclass, field
from enum import IntEnum

import msgpack

from core import typing as T


VERSION = 1
MAX_FRAME = 16 * 1024 * 1024

# Every frame starts with the length of what follows it
LENGTH = struct.Struct(">I")

# Request: version || op || correlation id || token length || token || payload length || payload
_REQUEST_HEAD = struct.Struct(">BBQH")
_PAYLOAD_HEAD = struct.Struct(">I")

# Response: version || status || correlation id || payload length || payload
_RESPONSE_HEAD = struct.Struct(">BBQI")


class exception(T.SimpleNamespace):
    """ Namespace of exceptions to make importing easier """
    class WireError(Exception):
        """ Base exception for transport failures """

    class FrameError(WireError):
        """ Raised when a frame cannot be parsed """

    class VersionError(WireError):
        """ Raised when the peer speaks another protocol version """

    class Unsupported(WireError):
        """ Raised when the operation tag is unknown to the service """

    class BadRequest(WireError):
        """ Raised when a payload does not fit its operation """

    class RemoteError(WireError):
        """ Raised for an unexpected failure inside the service """

    class BindFailure(WireError):
        """ Raised when a service cannot listen on its address """


class Op(IntEnum):
    Ping            = 0x01

    # Server store
    ServerEnrolled  = 0x10
    ServerEntropy   = 0x11
    ServerPutVault  = 0x12
    ServerGet       = 0x13
    ServerDelete    = 0x14
    ServerRotate    = 0x15
    ServerStatus    = 0x16
    ServerRecords   = 0x17
    ServerAvailable = 0x18

    # Node
    NodeTransport   = 0x20
    NodeDeal        = 0x21
    NodeReceive     = 0x22
    NodeFetchShare  = 0x23
    NodePutShard    = 0x24
    NodeGetShard    = 0x25
    NodeDelShard    = 0x26
    NodeMark        = 0x27


def pack(obj:T.Any) -> bytes:
    return msgpack.packb(obj, use_bin_type=True)


def unpack(data:bytes) -> T.Any:
    try:
        return msgpack.unpackb(data, raw=False)
    except (ValueError, TypeError, msgpack.UnpackException) as e:
        raise exception.FrameError(f"Payload is not valid msgpack: {e}")


@dataclass(frozen=True)
class Request:
    op:int
    correlation:int
    token:bytes = b""
    payload:bytes = field(default=b"", repr=False)
    version:int = VERSION

    def encode(self) -> bytes:
        body = _REQUEST_HEAD.pack(self.version, self.op, self.correlation, len(self.token)) \
             + self.token + _PAYLOAD_HEAD.pack(len(self.payload)) + self.payload

        return LENGTH.pack(len(body)) + body

    @classmethod
    def decode(cls, body:bytes) -> Request:
        """ Parse a request body (everything after the length prefix) """
        try:
            version, op, correlation, token_length = _REQUEST_HEAD.unpack_from(body)
            offset = _REQUEST_HEAD.size
            token = body[offset:offset + token_length]
            offset += token_length

            payload_length, = _PAYLOAD_HEAD.unpack_from(body, offset)
            offset += _PAYLOAD_HEAD.size
            payload = body[offset:offset + payload_length]

        except struct.error:
            raise exception.FrameError("Request frame is truncated")

        if len(token) != token_length or len(payload) != payload_length or offset + payload_length != len(body):
            raise exception.FrameError("Request frame lengths are inconsistent")

        return cls(op, correlation, token, payload, version)


@dataclass(frozen=True)
class Response:
    status:int
    correlation:int
    payload:bytes = field(default=b"", repr=False)
    version:int = VERSION

    def encode(self) -> bytes:
        body = _RESPONSE_HEAD.pack(self.version, self.status, self.correlation, len(self.payload)) + self.payload
        return LENGTH.pack(len(body)) + body

    @classmethod
    def decode(cls, body:bytes) -> Response:
        try:
            version, status, correlation, length = _RESPONSE_HEAD.unpack_from(body)
        except struct.error:
            raise exception.FrameError("Response frame is truncated")

        payload = body[_RESPONSE_HEAD.size:]
        if len(payload) != length:
            raise exception.FrameError("Response frame length is inconsistent")

        return cls(status, correlation, payload, version)


def correlation_of(body:bytes) -> int:
    """ Best-effort correlation id of a request that failed to parse """
    if len(body) >= _REQUEST_HEAD.size:
        return _REQUEST_HEAD.unpack_from(body)[2]

    return 0
