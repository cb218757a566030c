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
from contextlib import suppress
from dataclasses import dataclass, field
from threading import Lock, RLock

from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from api.logging import Loggable
from core import crypto, kms, network, persistence, time, typing as T
from core.crypto import PublicPoint, Signature
from core.field import FieldElement
from core.idm import Identity
from core.kms import KeyShardSet, MasterKey, SHARD_POLICY, Storage, Token
from core.network import PostboxKey
from core.persistence import Slot
from core.shamir import SharePoint, derive_share_at, reconstruct_secret, split_secret
from . import artifact, hd
from .session import KeyHandle, Session


DeviceFactory = T.Callable[[str], persistence.base.DeviceStore]

# Failures that mean a storage cannot take part in a flow
_UNREACHABLE = (network.exception.InsufficientNodes,
                network.exception.NotFound,
                persistence.exception.Unavailable,
                persistence.exception.Unprovisioned,
                persistence.exception.NotFound)


def _kdf(material:bytes, *, salt:T.Optional[bytes], info:bytes) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=32, salt=salt, info=info).derive(material)


def _reconstruct_ekp(shares:T.Sequence[SharePoint]) -> FieldElement:
    """ Ekp scalar from two shares; a zero means the shares are from different epochs """
    scalar = reconstruct_secret(shares, SHARD_POLICY.k)
    if not scalar:
        raise crypto.exception.AuthenticationFailure("Ekp shares do not belong together")

    return scalar


def _reconstruct_key(shares:T.Sequence[SharePoint]) -> MasterKey:
    scalar = reconstruct_secret(shares, SHARD_POLICY.k)
    if not scalar:
        raise crypto.exception.AuthenticationFailure("Key shards do not belong together")

    return MasterKey(scalar, PublicPoint.FromScalar(scalar))


Payloads = T.Dict[Slot, bytes]


def _network_artifacts(blob:bytes) -> T.Tuple[bytes, int, SharePoint]:
    """ Double-wrapped key shard, Ekp epoch and Ekp share of a network blob """
    wrapped, ekp_share = artifact.decode_network_blob(blob)
    return (wrapped, *artifact.decode_ekp_share(ekp_share))

def _stored_artifacts(payloads:Payloads) -> T.Tuple[bytes, int, SharePoint]:
    """ Sealed key shard, Ekp epoch and Ekp share of a server or device """
    return (payloads[Slot.PrivkeyShard], *artifact.decode_ekp_share(payloads[Slot.EkpShard]))


@dataclass(frozen=True)
class _Placed:
    """ The artifacts of a vault as stored, before any opening """
    blob:bytes = field(repr=False)
    server:Payloads = field(repr=False)
    device:Payloads = field(repr=False)


@dataclass
class _Opened:
    """ Every opened shard of a vault, held only for the span of a flow """
    postbox:PostboxKey
    epoch:int
    shards:KeyShardSet = field(repr=False)
    placed:_Placed = field(repr=False)

    @property
    def key_shares(self) -> T.Dict[Storage, SharePoint]:
        return {storage: self.shards.key_share(storage) for storage in Storage}


class KeyManager(Loggable, kms.base.KeyManager):
    """ Orchestrates the key-management flows across the three storages """
    _network:network.base.NodeNetwork
    _server:persistence.base.ServerStore
    _devices:DeviceFactory
    _clock:T.Clock
    _locks:T.DefaultDict[Identity, RLock]
    _guard:Lock

    def __init__(self, node_network:network.base.NodeNetwork, server:persistence.base.ServerStore,
                 devices:DeviceFactory, *, clock:T.Clock = time.now) -> None:
        self._network = node_network
        self._server = server
        self._devices = devices
        self._clock = clock
        self._locks = defaultdict(RLock)
        self._guard = Lock()

    def _lock(self, session:Session) -> RLock:
        # One flow at a time per identity
        with self._guard:
            return self._locks[session.identity]

    def _server_call(self, session:Session, method:T.Callable, *args) -> T.Any:
        session.meter.server()
        return method(*args)

    ## Artifact placement ##############################################

    def _place(self, session:Session, token:Token, now:T.Timestamp, rng:T.EntropySource,
               key_shares:T.Dict[Storage, SharePoint], postbox:PublicPoint, epoch:int,
               previous:T.Optional[_Placed] = None) -> None:
        """
        Generate a fresh Ekp, seal the key shards under it and replace the
        artifacts in all three storages; everything is sealed before
        anything is replaced

        @param   previous  Artifacts to put back if a later storage fails
        """
        ekp = crypto.generate_keypair(rng)
        ekp_shares = dict(zip(Storage, split_secret(ekp.private_scalar, SHARD_POLICY, rng)))

        wrapped = artifact.double_wrap(key_shares[Storage.Network], postbox, ekp.public_point, rng)
        blob = artifact.encode_network_blob(wrapped, artifact.encode_ekp_share(ekp_shares[Storage.Network], epoch))

        payloads = {
            storage: {Slot.PrivkeyShard: artifact.seal_share(key_shares[storage], ekp.public_point, rng),
                      Slot.EkpShard:     artifact.encode_ekp_share(ekp_shares[storage], epoch)}
            for storage in (Storage.Server, Storage.Device)}

        replaced:T.List[Storage] = []
        try:
            self._network.store_blob(token, now, blob, rng, session.meter)
            replaced.append(Storage.Network)
            self._server_call(session, self._server.put_vault, token, now, payloads[Storage.Server])
            replaced.append(Storage.Server)
            self._devices(session.device_id).provision(payloads[Storage.Device])

        except Exception:
            if previous is not None:
                self._restore(session, token, now, rng, previous, replaced)
            raise

    def _restore(self, session:Session, token:Token, now:T.Timestamp, rng:T.EntropySource,
                 previous:_Placed, replaced:T.Sequence[Storage]) -> None:
        """ Put back what a failed placement replaced, so no storage is left an epoch ahead """
        self.log.warning(f"Placement for {session.identity} failed after {len(replaced)} storages; restoring them")

        for storage in reversed(replaced):
            try:
                match storage:
                    case Storage.Network:
                        self._network.store_blob(token, now, previous.blob, rng, session.meter)

                    case Storage.Server:
                        self._server_call(session, self._server.put_vault, token, now, previous.server)

            except Exception as e:
                self.log.error(f"Cannot restore the {storage} artifacts of {session.identity}: {e}")

    def _fetch_network(self, session:Session, token:Token, now:T.Timestamp) -> T.Tuple[PostboxKey, bytes]:
        postbox = self._network.postbox_key(token, now, session.meter)
        return postbox, self._network.retrieve_blob(token, now, session.meter)

    def _fetch_server(self, session:Session, token:Token, now:T.Timestamp) -> Payloads:
        return {slot: self._server_call(session, self._server.get, token, now, slot)
                for slot in (Slot.EkpShard, Slot.PrivkeyShard)}

    def _fetch_device(self, device_id:str) -> Payloads:
        device = self._devices(device_id)
        return {slot: device.get(slot) for slot in (Slot.EkpShard, Slot.PrivkeyShard)}

    def _open_all(self, session:Session, token:Token, now:T.Timestamp) -> _Opened:
        """ Fetch and open the artifacts of all three storages """
        try:
            postbox, blob = self._fetch_network(session, token, now)
            placed = _Placed(blob, self._fetch_server(session, token, now), self._fetch_device(session.device_id))

        except _UNREACHABLE as e:
            raise kms.exception.InsufficientStorages(f"This flow needs all three storages: {e}")

        wrapped, epoch_T, E_T = _network_artifacts(placed.blob)
        sealed_S, epoch_S, E_S = _stored_artifacts(placed.server)
        sealed_D, epoch_D, E_D = _stored_artifacts(placed.device)

        ekp = _reconstruct_ekp([E_T, E_S])
        shards = KeyShardSet(s_T=artifact.double_unwrap(wrapped, ekp, postbox.scalar),
                             s_S=artifact.open_share(sealed_S, ekp),
                             s_D=artifact.open_share(sealed_D, ekp),
                             E_T=E_T, E_S=E_S, E_D=E_D)

        # Every pair of shards must agree on the key and the Ekp
        key = _reconstruct_key([shards.key_share(Storage.Network), shards.key_share(Storage.Server)])
        if _reconstruct_key([shards.key_share(Storage.Server), shards.key_share(Storage.Device)]) != key \
        or _reconstruct_ekp([shards.ekp_share(Storage.Server), shards.ekp_share(Storage.Device)]) != ekp:
            raise crypto.exception.AuthenticationFailure("Key shards are inconsistent")

        return _Opened(postbox, max(epoch_T, epoch_S, epoch_D), shards, placed)

    ## Flows ###########################################################

    def signup(self, session:Session, token:Token, rng:T.EntropySource) -> PublicPoint:
        with self._lock(session):
            now = self._clock()
            identity = session.identity

            if self._server_call(session, self._server.enrolled, token, now):
                raise kms.exception.AlreadyEnrolled(f"{identity} already has a vault")

            try:
                assigned = self._network.assign_postbox(identity, session.meter)
            except network.exception.AlreadyAssigned:
                # A previous signup that was rolled back leaves its postbox
                self.log.info(f"Reusing the existing postbox for {identity}")
                assigned = None

            postbox = self._network.postbox_key(token, now, session.meter)
            if assigned is not None and postbox.public_point != assigned:
                raise crypto.exception.AuthenticationFailure("Postbox shares do not match the DKG commitments")

            e_network = _kdf(postbox.scalar.to_bytes(), salt=rng.randbytes(32), info=b"shardvault/e-network")
            e_server = self._server_call(session, self._server.entropy, token, now)
            e_device = _kdf(rng.randbytes(32), salt=None, info=b"shardvault/e-device/" + session.device_id.encode())

            master = crypto.combine_entropy(e_network, e_server, e_device)
            key_shares = dict(zip(Storage, split_secret(master, SHARD_POLICY, rng)))
            public = PublicPoint.FromScalar(master)

            try:
                self._place(session, token, now, rng, key_shares, postbox.public_point, 0)

            except Exception:
                # No partial vault survives a failed signup
                self.log.warning(f"Signup for {identity} failed; rolling back")
                with suppress(Exception):
                    self._network.delete_blob(token, now, session.meter)
                with suppress(Exception):
                    self._server_call(session, self._server.delete_vault, token, now)
                with suppress(Exception):
                    self._devices(session.device_id).wipe()
                raise

        self.log.info(f"Enrolled {identity} with public key {public.hex()}")
        return public

    def signin(self, session:Session, token:Token) -> KeyHandle:
        with self._lock(session):
            now = self._clock()
            sealed_S, _, E_S = _stored_artifacts(self._fetch_server(session, token, now))
            sealed_D, _, E_D = _stored_artifacts(self._fetch_device(session.device_id))

            ekp = _reconstruct_ekp([E_S, E_D])
            key = _reconstruct_key([artifact.open_share(sealed_S, ekp), artifact.open_share(sealed_D, ekp)])

        self.log.debug(f"Signed in {session.identity} on device {session.device_id}")
        return KeyHandle(key)

    def sign_transaction(self, session:Session, token:Token, digest:bytes) -> Signature:
        with self.signin(session, token) as handle:
            return handle.sign(digest)

    def rotate_ekp(self, session:Session, token:Token, rng:T.EntropySource) -> int:
        with self._lock(session):
            now = self._clock()
            opened = self._open_all(session, token, now)
            epoch = opened.epoch + 1
            self._place(session, token, now, rng, opened.key_shares, opened.postbox.public_point, epoch,
                        previous=opened.placed)

        self.log.info(f"Rotated the encryption keypair of {session.identity} to epoch {epoch}")
        return epoch

    def reshare_key(self, session:Session, token:Token, rng:T.EntropySource) -> None:
        with self._lock(session):
            now = self._clock()
            opened = self._open_all(session, token, now)
            key = _reconstruct_key(list(opened.key_shares.values()))

            # Same secret, fresh polynomial; the Ekp is replaced with it
            key_shares = dict(zip(Storage, split_secret(key.private_scalar, SHARD_POLICY, rng)))
            self._place(session, token, now, rng, key_shares, opened.postbox.public_point, opened.epoch + 1,
                        previous=opened.placed)

        self.log.info(f"Reshared the key of {session.identity}")

    def recover_device(self, session:Session, token:Token, new_device_id:str, rng:T.EntropySource) -> None:
        with self._lock(session):
            now = self._clock()
            postbox, blob = self._fetch_network(session, token, now)
            wrapped, epoch, E_T = _network_artifacts(blob)
            sealed_S, _, E_S = _stored_artifacts(self._fetch_server(session, token, now))

            ekp = _reconstruct_ekp([E_T, E_S])
            s_T = artifact.double_unwrap(wrapped, ekp, postbox.scalar)
            s_S = artifact.open_share(sealed_S, ekp)

            s_D = derive_share_at([s_T, s_S], SHARD_POLICY.k, Storage.Device.x)
            E_D = derive_share_at([E_T, E_S], SHARD_POLICY.k, Storage.Device.x)

            self._devices(new_device_id).provision({
                Slot.PrivkeyShard: artifact.seal_share(s_D, PublicPoint.FromScalar(ekp), rng),
                Slot.EkpShard:     artifact.encode_ekp_share(E_D, epoch)})

            session.device_id = new_device_id
            self.log.info(f"Provisioned device {new_device_id} for {session.identity}")

            # Disarm the old device
            self.rotate_ekp(session, token, rng)

    def disaster_recover(self, session:Session, token:Token) -> str:
        with self._lock(session):
            now = self._clock()
            try:
                sealed_D, _, E_D = _stored_artifacts(self._fetch_device(session.device_id))
            except (persistence.exception.Unprovisioned, persistence.exception.NotFound) as e:
                raise kms.exception.Unrecoverable(f"Only the node network remains: {e}")

            postbox, blob = self._fetch_network(session, token, now)
            wrapped, _, E_T = _network_artifacts(blob)

            ekp = _reconstruct_ekp([E_T, E_D])
            s_T = artifact.double_unwrap(wrapped, ekp, postbox.scalar)
            s_D = artifact.open_share(sealed_D, ekp)

            with KeyHandle(_reconstruct_key([s_T, s_D])) as handle:
                phrase = handle.export_seed_phrase()

        self.log.warning(f"Disaster recovery completed for {session.identity}")
        return phrase


def export_seed_phrase(handle:KeyHandle) -> str:
    return handle.export_seed_phrase()


def derive_chain_key(handle:KeyHandle, path:T.Union[str, T.Sequence[int]]) -> hd.ChildKey:
    return handle.derive_chain_key(path)


def seed_to_scalar(phrase:str) -> FieldElement:
    return hd.mnemonic_to_scalar(phrase)
