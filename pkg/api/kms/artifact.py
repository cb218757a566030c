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

from core import crypto, shamir, typing as T
from core.crypto import SCALARS, PublicPoint
from core.field import FieldElement
from core.shamir import SharePoint


# Share: x (4 bytes) || y (32 bytes)
_SHARE = struct.Struct(">I32s")

# Ekp share, as stored: epoch (4 bytes) || share
_EKP_SHARE = struct.Struct(">I")

# Network blob: sealed key shard length (4 bytes) || sealed key shard || Ekp share
_BLOB = struct.Struct(">I")


def encode_share(share:SharePoint) -> bytes:
    return _SHARE.pack(int(share.x), share.y.to_bytes())


def decode_share(data:bytes) -> SharePoint:
    try:
        x, y = _SHARE.unpack(data)
        return SharePoint(SCALARS(x), SCALARS.from_bytes(y))

    except (struct.error, shamir.exception.InvalidShare) as e:
        raise crypto.exception.Malformed(f"Not an encoded share: {e}")


def encode_ekp_share(share:SharePoint, epoch:int) -> bytes:
    return _EKP_SHARE.pack(epoch) + encode_share(share)


def decode_ekp_share(data:bytes) -> T.Tuple[int, SharePoint]:
    """ Ekp share and the epoch it was issued in """
    if len(data) != _EKP_SHARE.size + _SHARE.size:
        raise crypto.exception.Malformed("Ekp shares are 40 bytes")

    epoch, = _EKP_SHARE.unpack_from(data)
    return epoch, decode_share(data[_EKP_SHARE.size:])


def seal_share(share:SharePoint, ekp:PublicPoint, rng:T.EntropySource) -> bytes:
    return crypto.seal(encode_share(share), ekp, rng).encode()


def open_share(sealed:bytes, ekp_scalar:FieldElement) -> SharePoint:
    return decode_share(crypto.open_bytes(sealed, ekp_scalar))


def double_wrap(share:SharePoint, postbox:PublicPoint, ekp:PublicPoint, rng:T.EntropySource) -> bytes:
    """ Inner seal to the postbox key, outer seal to the Ekp """
    inner = crypto.seal(encode_share(share), postbox, rng).encode()
    return crypto.seal(inner, ekp, rng).encode()


def double_unwrap(wrapped:bytes, ekp_scalar:FieldElement, postbox_scalar:FieldElement) -> SharePoint:
    inner = crypto.open_bytes(wrapped, ekp_scalar)
    return decode_share(crypto.open_bytes(inner, postbox_scalar))


def encode_network_blob(wrapped:bytes, ekp_share:bytes) -> bytes:
    return _BLOB.pack(len(wrapped)) + wrapped + ekp_share


def decode_network_blob(blob:bytes) -> T.Tuple[bytes, bytes]:
    """ Double-wrapped key shard and encoded Ekp share """
    if len(blob) < _BLOB.size:
        raise crypto.exception.Malformed("Network blob is truncated")

    length, = _BLOB.unpack_from(blob)
    wrapped = blob[_BLOB.size:_BLOB.size + length]
    if len(wrapped) != length:
        raise crypto.exception.Malformed("Network blob is truncated")

    return wrapped, blob[_BLOB.size + length:]
