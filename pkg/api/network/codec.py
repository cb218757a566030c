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

import struct

from core import typing as T
from core.field import FieldElement, profiles
from core.shamir import SharePoint, SharePolicy, split_secret, reconstruct_secret


CHUNK_SIZE = 32
BLOB_FIELD = profiles.blob

# Version byte and 8-byte plaintext length, ahead of the payload
_HEADER = struct.Struct(">BQ")
_VERSION = 1


class exception(T.SimpleNamespace):
    """ Namespace of exceptions to make importing easier """
    class CorruptBlob(Exception):
        """ Raised when reconstructed chunks do not decode """


def chunk_count(length:int) -> int:
    """ Number of chunks a blob of the given length occupies """
    return -(-(length + _HEADER.size) // CHUNK_SIZE)


def to_chunks(blob:bytes) -> T.List[FieldElement]:
    """ Frame, zero-pad and cut the blob into field elements """
    framed = _HEADER.pack(_VERSION, len(blob)) + blob
    framed += bytes(-len(framed) % CHUNK_SIZE)

    return [BLOB_FIELD.from_bytes(framed[i:i + CHUNK_SIZE]) for i in range(0, len(framed), CHUNK_SIZE)]


def from_chunks(chunks:T.Sequence[FieldElement]) -> bytes:
    """ Inverse of to_chunks """
    try:
        framed = b"".join(chunk.value.to_bytes(CHUNK_SIZE, "big") for chunk in chunks)
    except OverflowError:
        raise exception.CorruptBlob("Chunk value exceeds its width")

    if len(framed) < _HEADER.size:
        raise exception.CorruptBlob("Blob is missing its header")

    version, length = _HEADER.unpack_from(framed)
    if version != _VERSION:
        raise exception.CorruptBlob(f"Unknown blob version {version}")

    if chunk_count(length) != len(chunks):
        raise exception.CorruptBlob("Blob length disagrees with its chunk count")

    return framed[_HEADER.size:_HEADER.size + length]


def split_blob(blob:bytes, policy:SharePolicy, rng:T.EntropySource) -> T.List[T.List[SharePoint]]:
    """
    Share every chunk independently under the policy

    @param   blob    Plaintext
    @param   policy  Sharing policy over the blob field
    @param   rng     Entropy source
    @return  Per-abscissa chunk shares, in the policy's order
    """
    per_chunk = [split_secret(chunk, policy, rng) for chunk in to_chunks(blob)]
    return [list(column) for column in zip(*per_chunk)] if per_chunk else [[] for _ in policy.xs]


def join_blob(shards:T.Sequence[T.Sequence[SharePoint]], k:int) -> bytes:
    """
    Reconstruct the blob from at least k shards of one generation

    @param   shards  Per-node chunk shares
    @param   k       Threshold
    @return  Plaintext
    """
    lengths = {len(shard) for shard in shards}
    if len(lengths) != 1:
        raise exception.CorruptBlob("Shards disagree on the chunk count")

    chunks = [reconstruct_secret(column, k) for column in zip(*shards)]
    return from_chunks(chunks)
