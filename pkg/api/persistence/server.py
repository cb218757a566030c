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
from functools import wraps
from threading import RLock

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from api.logging import Loggable
from core import crypto, idm, persistence, time, typing as T
from core.idm import Identity
from core.persistence import Slot, Token, VaultRecord
from core.utils import atomic_write
from .log import Delete, Put, RecordLog


_AUDIENCE = "kms"
_NONCE_LENGTH = 12

# Salt file: epoch (8 bytes) || rotated at (8 bytes) || salt (32 bytes)
_SALT = struct.Struct(">Qq32s")

_Key = T.Tuple[Identity, Slot]


def derive_epoch_secret(master:bytes, salt:bytes, epoch:int) -> bytes:
    """ Epoch secret: HKDF of the master secret under the epoch's salt """
    return HKDF(algorithm=hashes.SHA256(),
                length=32,
                salt=salt,
                info=b"shardvault/at-rest/" + epoch.to_bytes(8, "big")).derive(master)


def _aad(identity:Identity, slot:Slot, epoch:int) -> bytes:
    return b"\0".join([identity.verifier_url.encode(), identity.verifier_id.encode(),
                       slot.value.encode(), epoch.to_bytes(8, "big")])


def open_record(record:VaultRecord, epoch_secret:bytes) -> bytes:
    """
    Decrypt a persisted record under the given epoch secret

    @param   record        Persisted record
    @param   epoch_secret  At-rest secret
    @return  Payload
    """
    nonce, ciphertext = record.at_rest_ciphertext[:_NONCE_LENGTH], record.at_rest_ciphertext[_NONCE_LENGTH:]
    try:
        return AESGCM(epoch_secret).decrypt(nonce, ciphertext, _aad(record.identity, record.slot, record.at_rest_epoch))
    except InvalidTag:
        raise crypto.exception.AuthenticationFailure("Record failed at-rest authentication")


def _up(method:T.Callable) -> T.Callable:
    @wraps(method)
    def _wrapper(store:FileServerStore, *args, **kwargs):
        if not store.available:
            raise persistence.exception.Unavailable("Server store is down")

        return method(store, *args, **kwargs)

    return _wrapper


class FileServerStore(Loggable, persistence.base.ServerStore):
    """
    Token-gated server storage, persisted as a record log and encrypted at
    rest under a rotating epoch secret
    """
    _master:bytes
    _verifier:idm.base.TokenVerifier
    _rng:T.EntropySource
    _log:RecordLog
    _salt_path:T.Path
    _index:T.Dict[_Key, VaultRecord]
    _epoch:int
    _rotated_at:T.Timestamp
    _salt:bytes
    _available:bool
    _lock:RLock

    def __init__(self, directory:T.Path, master:bytes, verifier:idm.base.TokenVerifier, rng:T.EntropySource, *,
                 audience:str = _AUDIENCE, now:T.Optional[T.Timestamp] = None) -> None:
        self._master = master
        self._verifier = verifier
        self._rng = rng
        self.audience = audience
        self._available = True
        self._lock = RLock()

        directory.mkdir(parents=True, exist_ok=True)
        self._salt_path = directory / "server.salt"
        if self._salt_path.exists():
            self._load_salt()
        else:
            self._write_salt(0, now if now is not None else time.now(), rng.randbytes(32))

        self._log = RecordLog(directory / "server.log")
        self._index = {}
        for op in self._log.replay():
            url, subject, slot = op.key
            key = (Identity(url, subject), Slot(slot))
            if isinstance(op, Put):
                self._index[key] = VaultRecord(*key, op.epoch, op.ciphertext)
            else:
                self._index.pop(key, None)

    def _load_salt(self) -> None:
        try:
            self._epoch, self._rotated_at, self._salt = _SALT.unpack(self._salt_path.read_bytes())
        except struct.error:
            raise persistence.exception.CorruptStore("At-rest salt file is damaged")

    def _write_salt(self, epoch:int, rotated_at:T.Timestamp, salt:bytes) -> None:
        # NOTE Overwriting the salt is what destroys the retired epoch
        # secret; the master secret alone cannot regenerate it
        atomic_write(self._salt_path, _SALT.pack(epoch, rotated_at, salt))
        self._epoch, self._rotated_at, self._salt = epoch, rotated_at, salt

    def _identify(self, token:Token, now:T.Timestamp) -> Identity:
        return self._verifier.verify_token(token, self.audience, now)

    def epoch_secret(self) -> bytes:
        """ Current epoch secret, for operators and compromise drills """
        return derive_epoch_secret(self._master, self._salt, self._epoch)

    def _seal(self, identity:Identity, slot:Slot, payload:bytes, secret:bytes, epoch:int) -> VaultRecord:
        nonce = self._rng.randbytes(_NONCE_LENGTH)
        ciphertext = nonce + AESGCM(secret).encrypt(nonce, payload, _aad(identity, slot, epoch))
        return VaultRecord(identity, slot, epoch, ciphertext)

    @property
    def epoch(self) -> int:
        return self._epoch

    @property
    def rotated_at(self) -> T.Timestamp:
        return self._rotated_at

    @property
    def available(self) -> bool:
        return self._available

    def set_available(self, available:bool) -> None:
        self._available = available
        self.log.info(f"Server store marked {'up' if available else 'down'}")

    @_up
    def entropy(self, token:Token, now:T.Timestamp) -> bytes:
        self._identify(token, now)
        return self._rng.randbytes(32)

    @_up
    def enrolled(self, token:Token, now:T.Timestamp) -> bool:
        identity = self._identify(token, now)
        with self._lock:
            return any(key[0] == identity for key in self._index)

    @_up
    def put(self, token:Token, now:T.Timestamp, slot:Slot, payload:bytes) -> None:
        self.put_vault(token, now, {slot: payload})

    @_up
    def put_vault(self, token:Token, now:T.Timestamp, payloads:T.Dict[Slot, bytes]) -> None:
        identity = self._identify(token, now)
        with self._lock:
            secret = self.epoch_secret()
            records = [self._seal(identity, slot, payload, secret, self._epoch) for slot, payload in payloads.items()]
            self._log.append([Put(_log_key(r.identity, r.slot), r.at_rest_epoch, r.at_rest_ciphertext) for r in records])
            for record in records:
                self._index[record.identity, record.slot] = record

        self.log.debug(f"Stored {len(records)} slot(s) for {identity}")

    @_up
    def get(self, token:Token, now:T.Timestamp, slot:Slot) -> bytes:
        identity = self._identify(token, now)
        with self._lock:
            try:
                record = self._index[identity, slot]
            except KeyError:
                raise persistence.exception.NotFound(f"No {slot.value} stored for {identity}")

            if record.at_rest_epoch != self._epoch:
                raise persistence.exception.EpochMismatch(
                    f"Record is under epoch {record.at_rest_epoch}, current epoch is {self._epoch}")

            return open_record(record, self.epoch_secret())

    @_up
    def delete_vault(self, token:Token, now:T.Timestamp) -> None:
        identity = self._identify(token, now)
        with self._lock:
            keys = [key for key in self._index if key[0] == identity]
            if keys:
                self._log.append([Delete(_log_key(*key)) for key in keys])
                for key in keys:
                    del self._index[key]

    def rotate_at_rest(self, now:T.Optional[T.Timestamp] = None) -> int:
        with self._lock:
            retired = self.epoch_secret()
            payloads = {key: open_record(record, retired) for key, record in self._index.items()}

            # NOTE The log is rewritten before the salt; both are atomic
            # replacements, but not jointly
            epoch = self._epoch + 1
            salt = self._rng.randbytes(32)
            secret = derive_epoch_secret(self._master, salt, epoch)

            rotated = {key: self._seal(*key, payload, secret, epoch) for key, payload in payloads.items()}
            self._log.rewrite([Put(_log_key(*key), r.at_rest_epoch, r.at_rest_ciphertext) for key, r in rotated.items()])
            self._write_salt(epoch, now if now is not None else time.now(), salt)
            self._index = rotated

        self.log.info(f"Rotated at-rest encryption to epoch {epoch} ({len(rotated)} records)")
        return epoch

    def records(self) -> T.List[VaultRecord]:
        with self._lock:
            return list(self._index.values())


def _log_key(identity:Identity, slot:Slot) -> T.Tuple[str, str, str]:
    return identity.verifier_url, identity.verifier_id, slot.value
