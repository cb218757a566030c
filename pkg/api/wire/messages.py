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

# msgpack representations of the domain types. Field elements travel as
# 32/33-byte big-endian strings, since msgpack integers stop at 64 bits.

from api.network.codec import BLOB_FIELD
from core import typing as T
from core.crypto import PublicPoint
from core.idm import Identity
from core.network import BlobShard, Dealing, NodeShare, POSTBOX_FIELD
from core.persistence import Slot, VaultRecord
from core.shamir import SharePoint


def identity(value:Identity) -> T.List[str]:
    return [value.verifier_url, value.verifier_id]

def to_identity(value:T.List[str]) -> Identity:
    return Identity(*value)


def dealing(value:Dealing) -> T.Dict:
    return {"dealer":     value.dealer_index,
            "commitment": value.commitment.data,
            "sealed":     [[index, box] for index, box in value.sealed.items()]}

def to_dealing(value:T.Dict) -> Dealing:
    return Dealing(value["dealer"], PublicPoint(value["commitment"]),
                   {index: box for index, box in value["sealed"]})


def node_share(value:NodeShare) -> T.Dict:
    return {"index":    value.node_index,
            "y":        value.share.y.to_bytes(),
            "identity": identity(value.identity)}

def to_node_share(value:T.Dict) -> NodeShare:
    share = SharePoint(POSTBOX_FIELD(value["index"]), POSTBOX_FIELD.from_bytes(value["y"]))
    return NodeShare(value["index"], share, to_identity(value["identity"]))


def blob_shard(value:BlobShard) -> T.Dict:
    return {"index":      value.node_index,
            "generation": value.generation,
            "chunks":     [chunk.y.to_bytes() for chunk in value.chunks]}

def to_blob_shard(value:T.Dict) -> BlobShard:
    x = BLOB_FIELD(value["index"])
    chunks = tuple(SharePoint(x, BLOB_FIELD.from_bytes(y)) for y in value["chunks"])
    return BlobShard(value["index"], value["generation"], chunks)


def payloads(value:T.Dict[Slot, bytes]) -> T.List[T.List]:
    return [[slot.value, payload] for slot, payload in value.items()]

def to_payloads(value:T.List[T.List]) -> T.Dict[Slot, bytes]:
    return {Slot(slot): payload for slot, payload in value}


def record(value:VaultRecord) -> T.List:
    return [*identity(value.identity), value.slot.value, value.at_rest_epoch, value.at_rest_ciphertext]

def to_record(value:T.List) -> VaultRecord:
    url, subject, slot, epoch, ciphertext = value
    return VaultRecord(Identity(url, subject), Slot(slot), epoch, ciphertext)
