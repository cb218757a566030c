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

import os
import struct
import zlib
from dataclasses import dataclass

import msgpack

from api.logging import Loggable
from core import persistence, typing as T
from core.utils import PRIVATE, atomic_write, umask


# File layout:
#
#   magic (4 bytes) || version (1 byte) || frame*
#
# Each frame is one atomic batch of operations:
#
#   body length (4 bytes) || CRC-32 of body (4 bytes) || msgpack body
#
# A trailing frame that is truncated or fails its checksum is a torn
# write; replay discards it and cuts it from the file.
MAGIC   = b"SVLT"
VERSION = 1

_HEADER = MAGIC + bytes([VERSION])
_FRAME  = struct.Struct(">II")


@dataclass(frozen=True)
class Put:
    key:T.Tuple[str, str, str]
    epoch:int
    ciphertext:bytes

    def pack(self) -> T.List:
        return ["put", *self.key, self.epoch, self.ciphertext]

@dataclass(frozen=True)
class Delete:
    key:T.Tuple[str, str, str]

    def pack(self) -> T.List:
        return ["del", *self.key]

Operation = T.Union[Put, Delete]


def _unpack(op:T.List) -> Operation:
    match op:
        case ["put", url, subject, slot, epoch, ciphertext]:
            return Put((url, subject, slot), epoch, ciphertext)

        case ["del", url, subject, slot]:
            return Delete((url, subject, slot))

    raise persistence.exception.CorruptStore(f"Unknown log operation {op[:1]}")


def _frame(batch:T.Sequence[Operation]) -> bytes:
    body = msgpack.packb([op.pack() for op in batch], use_bin_type=True)
    return _FRAME.pack(len(body), zlib.crc32(body)) + body


class RecordLog(Loggable):
    """ Append-only, batch-framed record log with rewrite-on-compact """
    _path:T.Path

    def __init__(self, path:T.Path) -> None:
        self._path = path
        if not path.exists():
            atomic_write(path, _HEADER)

    def _committed(self) -> T.Tuple[T.List[bytes], int, int]:
        """ Bodies of the intact frames, the offset they end at and the file size """
        data = self._path.read_bytes()
        if data[:len(_HEADER)] != _HEADER:
            raise persistence.exception.CorruptStore(f"{self._path.name} is not a version {VERSION} record log")

        bodies:T.List[bytes] = []
        offset = len(_HEADER)
        while offset + _FRAME.size <= len(data):
            length, checksum = _FRAME.unpack_from(data, offset)
            body = data[offset + _FRAME.size:offset + _FRAME.size + length]
            if len(body) < length or zlib.crc32(body) != checksum:
                break

            bodies.append(body)
            offset += _FRAME.size + length

        return bodies, offset, len(data)

    def _truncate(self, size:int) -> None:
        with self._path.open("r+b") as handle:
            handle.truncate(size)
            handle.flush()
            os.fsync(handle.fileno())

    def replay(self) -> T.Iterator[Operation]:
        """
        Every committed operation, in order; a torn tail is cut off first,
        so that later appends follow the last intact frame
        """
        bodies, end, size = self._committed()
        if end < size:
            self.log.warning(f"Discarding {size - end} bytes of torn writes from {self._path.name}")
            self._truncate(end)

        for body in bodies:
            for op in msgpack.unpackb(body, raw=False):
                yield _unpack(op)

    @umask(PRIVATE)
    def append(self, batch:T.Sequence[Operation]) -> None:
        """ Commit a batch of operations as a single frame """
        with self._path.open("ab") as handle:
            handle.write(_frame(batch))
            handle.flush()
            os.fsync(handle.fileno())

    def rewrite(self, batch:T.Sequence[Operation]) -> None:
        """ Atomically replace the log with a single frame """
        atomic_write(self._path, _HEADER + (_frame(batch) if batch else b""))
