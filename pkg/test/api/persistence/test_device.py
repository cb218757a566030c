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

import json
import unittest
from tempfile import TemporaryDirectory

from api.persistence import DeviceStore
from core import persistence, typing as T
from core.persistence import Slot


class TestDeviceStore(unittest.TestCase):
    def setUp(self):
        self._tmp = TemporaryDirectory()
        self.directory = T.Path(self._tmp.name) / "devices"
        self.device = DeviceStore(self.directory, "alice's phone")

    def tearDown(self):
        self._tmp.cleanup()

    def test_empty_id(self):
        self.assertRaises(ValueError, DeviceStore, self.directory, "")

    def test_unprovisioned(self):
        self.assertFalse(self.device.provisioned)
        self.assertRaises(persistence.exception.Unprovisioned, self.device.get, Slot.PrivkeyShard)
        self.assertRaises(persistence.exception.Unprovisioned, self.device.put, Slot.PrivkeyShard, b"x")

    def test_provision(self):
        self.device.provision({Slot.PrivkeyShard: b"key", Slot.EkpShard: b"ekp"})
        self.assertTrue(self.device.provisioned)
        self.assertEqual(self.device.get(Slot.PrivkeyShard), b"key")
        self.assertEqual(self.device.get(Slot.EkpShard), b"ekp")

        # Another handle on the same device sees the same state
        self.assertEqual(DeviceStore(self.directory, "alice's phone").get(Slot.EkpShard), b"ekp")

    def test_put(self):
        self.device.provision({Slot.PrivkeyShard: b"key"})
        self.assertRaises(persistence.exception.NotFound, self.device.get, Slot.EkpShard)

        self.device.put(Slot.EkpShard, b"ekp")
        self.device.put(Slot.PrivkeyShard, b"key'")
        self.assertEqual(self.device.get(Slot.EkpShard), b"ekp")
        self.assertEqual(self.device.get(Slot.PrivkeyShard), b"key'")

    def test_devices_are_separate(self):
        self.device.provision({Slot.PrivkeyShard: b"key"})
        other = DeviceStore(self.directory, "alice's laptop")
        self.assertFalse(other.provisioned)

    def test_wipe(self):
        self.device.provision({Slot.PrivkeyShard: b"key"})
        self.device.wipe()
        self.assertFalse(self.device.provisioned)
        self.assertRaises(persistence.exception.Unprovisioned, self.device.get, Slot.PrivkeyShard)

        # Wiping twice is harmless
        self.device.wipe()

    def test_private_file(self):
        self.device.provision({Slot.PrivkeyShard: b"key"})
        stored, = self.directory.iterdir()
        self.assertEqual(stored.stat().st_mode & 0o777, 0o600)
        self.assertNotIn("phone", stored.name)

    def test_corrupt(self):
        self.device.provision({Slot.PrivkeyShard: b"key"})
        stored, = self.directory.iterdir()

        stored.write_text("{not json")
        self.assertRaises(persistence.exception.CorruptStore, self.device.get, Slot.PrivkeyShard)

        stored.write_text(json.dumps({"device_id": "someone else's", "slots": {}}))
        self.assertRaises(persistence.exception.CorruptStore, self.device.get, Slot.PrivkeyShard)

        stored.write_text(json.dumps({"device_id": "alice's phone", "slots": {"no_such_slot": ""}}))
        self.assertRaises(persistence.exception.CorruptStore, self.device.get, Slot.PrivkeyShard)


if __name__ == "__main__":
    unittest.main()
