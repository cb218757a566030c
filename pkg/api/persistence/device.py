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

import binascii
import json

from core import persistence, typing as T
from core.persistence import Slot
from core.utils import atomic_write, base64, fingerprint


class FileDeviceStore(persistence.base.DeviceStore):
    """ Device storage as one JSON file per device """
    _path:T.Path

    def __init__(self, directory:T.Path, device_id:str) -> None:
        if not device_id:
            raise ValueError("Device IDs cannot be empty")

        directory.mkdir(parents=True, exist_ok=True)
        self.device_id = device_id

        # Device IDs are arbitrary text, so files are named by digest
        self._path = directory / f"device-{fingerprint(device_id, 16)}.json"

    @property
    def provisioned(self) -> bool:
        return self._path.exists()

    def _read(self) -> T.Dict[Slot, bytes]:
        if not self.provisioned:
            raise persistence.exception.Unprovisioned(f"Device {self.device_id} is not provisioned")

        try:
            stored = json.loads(self._path.read_text())
            if stored["device_id"] != self.device_id:
                raise persistence.exception.CorruptStore(f"Device file does not belong to {self.device_id}")

            return {Slot(slot): base64.decode(payload) for slot, payload in stored["slots"].items()}

        except (KeyError, ValueError, binascii.Error) as e:
            raise persistence.exception.CorruptStore(f"Device file for {self.device_id} is damaged: {e}")

    def _write(self, payloads:T.Dict[Slot, bytes]) -> None:
        stored = {
            "device_id": self.device_id,
            "slots":     {slot.value: base64.encode(payload) for slot, payload in payloads.items()}}

        atomic_write(self._path, json.dumps(stored, indent=2).encode())

    def provision(self, payloads:T.Dict[Slot, bytes]) -> None:
        self._write(payloads)

    def put(self, slot:Slot, payload:bytes) -> None:
        payloads = self._read()
        payloads[slot] = payload
        self._write(payloads)

    def get(self, slot:Slot) -> bytes:
        try:
            return self._read()[slot]
        except KeyError:
            raise persistence.exception.NotFound(f"Device {self.device_id} holds no {slot.value}")

    def wipe(self) -> None:
        self._path.unlink(missing_ok=True)
