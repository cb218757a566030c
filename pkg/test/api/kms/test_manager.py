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

import hashlib
import random
import shutil
import unittest
from tempfile import TemporaryDirectory
from unittest import mock

from api.idm import IdentityProvider
from api.kms import KeyManager, Session, export_seed_phrase, seed_to_scalar
from api.kms.manager import _reconstruct_ekp, _reconstruct_key
from api.network import network_init
from api.persistence import DeviceStore, ServerStore
from core import crypto, idm, kms, network, persistence, typing as T
from core.crypto import SCALARS, PublicPoint
from core.idm import Identity
from core.kms import SHARD_POLICY, Storage
from core.network import NetworkConfig, NodeHealth
from core.shamir import split_secret
from core.time import FixedClock


_PROVIDER = IdentityProvider(b"k" * 32)
_ALICE = Identity("https://idp.example.com", "alice")
_DIGEST = hashlib.sha256(b"pay bob 1 coin").digest()


class _Deployment(unittest.TestCase):
    """ A fresh in-process deployment per test, with alice enrolled """
    def setUp(self):
        self._tmp = TemporaryDirectory()
        state = T.Path(self._tmp.name)
        self.state = state

        self.clock = FixedClock(10_000)
        self.rng = random.Random(31337)
        self.network = network_init(NetworkConfig(9, 5, 50.0), _PROVIDER.verifier, self.rng)
        self.server = ServerStore(state / "server", b"m" * 32, _PROVIDER.verifier, self.rng, now=self.clock())
        self.devices = state / "devices"
        self.manager = KeyManager(self.network, self.server, self._device, clock=self.clock)

        self.public = self.manager.signup(self.session(), self.token(), self.rng)

    def tearDown(self):
        self._tmp.cleanup()

    def _device(self, device_id:str) -> DeviceStore:
        return DeviceStore(self.devices, device_id)

    def session(self, device_id:str = "phone") -> Session:
        return Session(_ALICE, device_id)

    def token(self) -> str:
        return _PROVIDER.issue_token(_ALICE, "kms", 600, self.clock()).encoded

    def public_key(self, device_id:str = "phone") -> PublicPoint:
        with self.manager.signin(self.session(device_id), self.token()) as handle:
            return handle.public_point


class TestFlows(_Deployment):
    def test_signup(self):
        self.assertTrue(self.server.enrolled(self.token(), self.clock()))
        self.assertTrue(self._device("phone").provisioned)
        self.assertEqual(self.public_key(), self.public)

    def test_already_enrolled(self):
        self.assertRaises(kms.exception.AlreadyEnrolled, self.manager.signup, self.session(), self.token(), self.rng)

    def test_sign(self):
        signature = self.manager.sign_transaction(self.session(), self.token(), _DIGEST)
        self.assertTrue(crypto.verify_digest(signature, self.public, _DIGEST))
        self.assertTrue(signature.is_low_s)
        self.assertEqual(signature.recover(_DIGEST), self.public)

    def test_key_handle(self):
        with self.manager.signin(self.session(), self.token()) as handle:
            self.assertFalse(handle.erased)
            self.assertEqual(PublicPoint.FromScalar(handle.scalar), self.public)

        self.assertTrue(handle.erased)
        self.assertRaises(kms.exception.KeyErased, handle.sign, _DIGEST)
        self.assertRaises(kms.exception.KeyErased, handle.export_seed_phrase)

    def test_seed_phrase(self):
        with self.manager.signin(self.session(), self.token()) as handle:
            phrase = export_seed_phrase(handle)
            child = handle.derive_chain_key("ethereum")

        self.assertEqual(len(phrase.split()), 24)
        self.assertEqual(PublicPoint.FromScalar(seed_to_scalar(phrase)), self.public)
        self.assertEqual(child.depth, 5)

    def test_key_invariance(self):
        self.assertEqual(self.manager.rotate_ekp(self.session(), self.token(), self.rng), 1)
        self.assertEqual(self.public_key(), self.public)

        self.manager.reshare_key(self.session(), self.token(), self.rng)
        self.assertEqual(self.public_key(), self.public)

        self.manager.recover_device(self.session(), self.token(), "tablet", self.rng)
        self.assertEqual(self.public_key("tablet"), self.public)

        phrase = self.manager.disaster_recover(self.session("tablet"), self.token())
        self.assertEqual(PublicPoint.FromScalar(seed_to_scalar(phrase)), self.public)

    def test_rotation_epochs(self):
        self.assertEqual(self.manager.rotate_ekp(self.session(), self.token(), self.rng), 1)
        self.assertEqual(self.manager.rotate_ekp(self.session(), self.token(), self.rng), 2)

        # Resharing replaces the encryption keypair too
        self.manager.reshare_key(self.session(), self.token(), self.rng)
        self.assertEqual(self.manager.rotate_ekp(self.session(), self.token(), self.rng), 4)

    def test_reshare_changes_shards(self):
        before = self._device("phone").get(persistence.Slot.PrivkeyShard)
        self.manager.reshare_key(self.session(), self.token(), self.rng)
        self.assertNotEqual(self._device("phone").get(persistence.Slot.PrivkeyShard), before)

    def test_expired_token(self):
        token = self.token()
        self.clock.advance(600)
        self.assertRaises(idm.exception.Expired, self.manager.signin, self.session(), token)


class TestCounters(_Deployment):
    def test_signin(self):
        session = self.session()
        self.manager.signin(session, self.token()).erase()
        self.assertEqual(session.meter.as_dict(), {"node_fetches": 0, "server_calls": 2, "latency_ms": 0.0})

    def test_disaster_recover(self):
        session = self.session()
        self.manager.disaster_recover(session, self.token())

        # Minimum contact: threshold-many nodes for the postbox key and the blob each
        self.assertEqual(session.meter.server_calls, 0)
        self.assertEqual(session.meter.node_fetches, 10)
        self.assertEqual(session.meter.latency_ms, 500.0)

    def test_recover_device(self):
        session = self.session()
        self.manager.recover_device(session, self.token(), "tablet", self.rng)
        self.assertGreaterEqual(session.meter.latency_ms, 250.0)
        self.assertGreater(session.meter.server_calls, 0)

    def test_failed_contacts_count(self):
        for index in (1, 2):
            self.network.mark_node(index, NodeHealth.Dead)

        session = self.session()
        self.manager.disaster_recover(session, self.token())
        self.assertEqual(session.meter.node_fetches, 14)


class TestRecoveryMatrix(_Deployment):
    def test_server_down(self):
        self.server.set_available(False)
        self.assertRaises(persistence.exception.Unavailable, self.manager.signin, self.session(), self.token())
        self.assertRaises(kms.exception.InsufficientStorages, self.manager.rotate_ekp, self.session(), self.token(), self.rng)

        phrase = self.manager.disaster_recover(self.session(), self.token())
        self.assertEqual(PublicPoint.FromScalar(seed_to_scalar(phrase)), self.public)

    def test_device_lost(self):
        self._device("phone").wipe()
        self.assertRaises(persistence.exception.Unprovisioned, self.manager.signin, self.session(), self.token())

        session = self.session()
        self.manager.recover_device(session, self.token(), "tablet", self.rng)
        self.assertEqual(session.device_id, "tablet")
        self.assertEqual(self.public_key("tablet"), self.public)

    def test_old_device_disarmed(self):
        self.manager.recover_device(self.session(), self.token(), "tablet", self.rng)

        # The old device still holds artifacts, but from a retired epoch
        self.assertTrue(self._device("phone").provisioned)
        self.assertRaises(crypto.exception.AuthenticationFailure, self.manager.signin, self.session("phone"), self.token())

    def test_network_down(self):
        for index in range(1, 6):
            self.network.mark_node(index, NodeHealth.Dead)

        self.assertEqual(self.public_key(), self.public)
        self.assertRaises(network.exception.InsufficientNodes, self.manager.disaster_recover, self.session(), self.token())
        self.assertRaises(kms.exception.InsufficientStorages, self.manager.rotate_ekp, self.session(), self.token(), self.rng)
        self.assertRaises(kms.exception.InsufficientStorages, self.manager.reshare_key, self.session(), self.token(), self.rng)

    def test_compromised_nodes_serve(self):
        for index in range(1, 5):
            self.network.mark_node(index, NodeHealth.Compromised)

        phrase = self.manager.disaster_recover(self.session(), self.token())
        self.assertEqual(PublicPoint.FromScalar(seed_to_scalar(phrase)), self.public)

    def test_only_network_remains(self):
        self.server.set_available(False)
        self._device("phone").wipe()
        self.assertRaises(kms.exception.Unrecoverable, self.manager.disaster_recover, self.session(), self.token())
        self.assertTrue(issubclass(kms.exception.Unrecoverable, kms.exception.InsufficientStorages))

    def test_server_alone(self):
        for index in range(1, 6):
            self.network.mark_node(index, NodeHealth.Dead)
        self._device("phone").wipe()

        self.assertRaises(persistence.exception.Unprovisioned, self.manager.signin, self.session(), self.token())
        self.assertRaises(network.exception.InsufficientNodes, self.manager.recover_device,
                          self.session(), self.token(), "tablet", self.rng)
        self.assertRaises(kms.exception.Unrecoverable, self.manager.disaster_recover, self.session(), self.token())

    def test_device_alone(self):
        for index in range(1, 6):
            self.network.mark_node(index, NodeHealth.Dead)
        self.server.set_available(False)

        self.assertRaises(persistence.exception.Unavailable, self.manager.signin, self.session(), self.token())
        self.assertRaises(network.exception.InsufficientNodes, self.manager.disaster_recover, self.session(), self.token())
        self.assertRaises(kms.exception.InsufficientStorages, self.manager.rotate_ekp, self.session(), self.token(), self.rng)


class TestSignupRollback(_Deployment):
    def test_rollback(self):
        bob = Identity("https://idp.example.com", "bob")
        token = lambda: _PROVIDER.issue_token(bob, "kms", 600, self.clock()).encoded
        session = Session(bob, "laptop")

        with mock.patch.object(self.server, "put_vault", side_effect=persistence.exception.Unavailable("down")):
            self.assertRaises(persistence.exception.Unavailable, self.manager.signup, session, token(), self.rng)

        # Nothing of the failed vault survives
        self.assertFalse(self.server.enrolled(token(), self.clock()))
        self.assertFalse(self._device("laptop").provisioned)
        self.assertRaises(network.exception.NotFound, self.network.retrieve_blob, token(), self.clock())

        # A retry reuses the postbox and succeeds
        public = self.manager.signup(Session(bob, "laptop"), token(), self.rng)
        with self.manager.signin(Session(bob, "laptop"), token()) as handle:
            self.assertEqual(handle.public_point, public)

        # Alice is untouched throughout
        self.assertEqual(self.public_key(), self.public)


class TestEpochMixing(_Deployment):
    def test_stale_device(self):
        device_file, = self.devices.iterdir()
        stale = device_file.read_bytes()

        self.manager.rotate_ekp(self.session(), self.token(), self.rng)
        device_file.write_bytes(stale)

        self.assertRaises(crypto.exception.AuthenticationFailure, self.manager.signin, self.session(), self.token())

    def test_mixed_shares(self):
        # Two epochs of the same secret: shares from different splits
        # must never reconstruct it
        rng = random.Random(4242)
        for _ in range(1000):
            secret = SCALARS.random(rng, nonzero=True)
            _, old_S, old_D = split_secret(secret, SHARD_POLICY, rng)
            _, new_S, new_D = split_secret(secret, SHARD_POLICY, rng)

            self.assertEqual(_reconstruct_ekp([new_S, new_D]), secret)
            for mixed in ([new_S, old_D], [old_S, new_D]):
                try:
                    scalar = _reconstruct_ekp(mixed)
                except crypto.exception.AuthenticationFailure:
                    continue

                self.assertNotEqual(scalar, secret)

    def test_reshared_key_shares(self):
        before = self.manager._open_all(self.session(), self.token(), self.clock()).key_shares

        for _ in range(5):
            self.manager.reshare_key(self.session(), self.token(), self.rng)
            after = self.manager._open_all(self.session(), self.token(), self.clock()).key_shares
            self.assertEqual(_reconstruct_key([after[Storage.Server], after[Storage.Device]]).public_point, self.public)

            for old, new in [(Storage.Server, Storage.Device), (Storage.Device, Storage.Server),
                             (Storage.Network, Storage.Server), (Storage.Network, Storage.Device)]:
                try:
                    mixed = _reconstruct_key([before[old], after[new]])
                except crypto.exception.AuthenticationFailure:
                    continue

                self.assertNotEqual(mixed.public_point, self.public)

            before = after

    def test_server_snapshot_after_rotation(self):
        snapshot = self.state / "snapshot"
        shutil.copytree(self.state / "server", snapshot)
        self.manager.rotate_ekp(self.session(), self.token(), self.rng)

        # Whoever kept a copy of the server from before the rotation
        stolen = ServerStore(snapshot, b"m" * 32, _PROVIDER.verifier, self.rng, now=self.clock())
        manager = KeyManager(self.network, stolen, self._device, clock=self.clock)

        self.assertRaises(crypto.exception.AuthenticationFailure, manager.signin, self.session(), self.token())
        self.assertRaises(crypto.exception.AuthenticationFailure, manager.rotate_ekp, self.session(), self.token(), self.rng)
        self.assertRaises(crypto.exception.AuthenticationFailure, manager.recover_device,
                          self.session(), self.token(), "tablet", self.rng)

        # The live deployment is unaffected
        self.assertEqual(self.public_key(), self.public)


class TestPlacementFailure(_Deployment):
    def _still_whole(self):
        self.assertEqual(self.public_key(), self.public)
        phrase = self.manager.disaster_recover(self.session(), self.token())
        self.assertEqual(PublicPoint.FromScalar(seed_to_scalar(phrase)), self.public)

    def test_server_fails_during_rotation(self):
        with mock.patch.object(self.server, "put_vault", side_effect=persistence.exception.Unavailable("down")):
            self.assertRaises(persistence.exception.Unavailable, self.manager.rotate_ekp,
                              self.session(), self.token(), self.rng)

        self._still_whole()
        self.assertEqual(self.manager.rotate_ekp(self.session(), self.token(), self.rng), 1)

        self.manager.recover_device(self.session(), self.token(), "tablet", self.rng)
        self.assertEqual(self.public_key("tablet"), self.public)

    def test_device_fails_during_reshare(self):
        with mock.patch.object(DeviceStore, "provision", side_effect=OSError("disk full")):
            self.assertRaises(OSError, self.manager.reshare_key, self.session(), self.token(), self.rng)

        self._still_whole()
        self.assertEqual(self.manager.rotate_ekp(self.session(), self.token(), self.rng), 1)

    def test_server_fails_during_device_recovery(self):
        with mock.patch.object(self.server, "put_vault", side_effect=persistence.exception.Unavailable("down")):
            self.assertRaises(persistence.exception.Unavailable, self.manager.recover_device,
                              self.session(), self.token(), "tablet", self.rng)

        # The replacement device holds the artifacts of the epoch that survived
        self.assertEqual(self.public_key("tablet"), self.public)
        self.manager.recover_device(self.session(), self.token(), "laptop", self.rng)
        self.assertEqual(self.public_key("laptop"), self.public)


if __name__ == "__main__":
    unittest.main()
