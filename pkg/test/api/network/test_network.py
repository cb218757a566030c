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

import itertools
import json
import random
import unittest
from tempfile import TemporaryDirectory

from api.idm import IdentityProvider
from api.network import LocalNode, ThresholdNetwork, network_init
from core import idm, network, typing as T
from core.crypto import PublicPoint
from core.idm import Identity
from core.meter import Meter
from core.network import NetworkConfig, NodeHealth, PostboxKey
from core.shamir import reconstruct_secret


_PROVIDER = IdentityProvider(b"n" * 32)
_ALICE = Identity("https://idp.example.com", "alice")
_BOB = Identity("https://idp.example.com", "bob")
_NOW = 10_000


def _token(identity:Identity = _ALICE) -> str:
    return _PROVIDER.issue_token(identity, "kms", 600, _NOW).encoded


class TestConfiguration(unittest.TestCase):
    def test_config(self):
        self.assertRaises(network.exception.InvalidConfiguration, NetworkConfig, 3, 4)
        self.assertRaises(network.exception.InvalidConfiguration, NetworkConfig, 3, 0)
        self.assertRaises(network.exception.InvalidConfiguration, NetworkConfig, 9, 5, -1.0)

    def test_write_quorum(self):
        self.assertEqual(NetworkConfig(9, 5).write_quorum, 5)
        self.assertEqual(NetworkConfig(9, 3).write_quorum, 7)
        self.assertEqual(NetworkConfig(9, 8).write_quorum, 8)

    def test_node_indices(self):
        verifier = _PROVIDER.verifier
        nodes = [LocalNode(i, verifier, random.Random(i)) for i in (1, 2, 4)]
        self.assertRaises(network.exception.InvalidConfiguration, ThresholdNetwork, NetworkConfig(3, 2), nodes)

        nodes = [LocalNode(i, verifier, random.Random(i)) for i in (1, 2, 3)]
        net = ThresholdNetwork(NetworkConfig(3, 2), nodes)
        self.assertRaises(network.exception.BadIndex, net.node, 4)
        self.assertRaises(network.exception.BadIndex, net.mark_node, 0, NodeHealth.Dead)


class TestPostboxDKG(unittest.TestCase):
    def setUp(self):
        self.net = network_init(NetworkConfig(9, 5), _PROVIDER.verifier, random.Random(2024))
        self.postbox = self.net.assign_postbox(_ALICE)

    def _shares(self):
        return [node.view().shares[_ALICE] for node in self.net.nodes]

    def test_every_threshold_subset_agrees(self):
        shares = self._shares()
        secrets = {reconstruct_secret([s.share for s in subset], 5)
                   for subset in itertools.combinations(shares, 5)}

        self.assertEqual(len(secrets), 1)
        self.assertEqual(PublicPoint.FromScalar(secrets.pop()), self.postbox)

    def test_below_threshold_reveals_nothing(self):
        shares = self._shares()
        secret = PostboxKey.Reconstruct(shares, 5).scalar

        for subset in itertools.combinations(shares, 4):
            self.assertNotEqual(reconstruct_secret([s.share for s in subset], 4), secret)

    def test_shares_sit_at_node_indices(self):
        self.assertEqual([s.share.x.value for s in self._shares()], list(range(1, 10)))

    def test_postbox_key(self):
        key = self.net.postbox_key(_token(), _NOW)
        self.assertEqual(key.public_point, self.postbox)

    def test_already_assigned(self):
        self.assertRaises(network.exception.AlreadyAssigned, self.net.assign_postbox, _ALICE)

    def test_independent_identities(self):
        self.assertNotEqual(self.net.assign_postbox(_BOB), self.postbox)

    def test_tokens_are_checked(self):
        stranger = IdentityProvider(b"s" * 32).issue_token(_ALICE, "kms", 600, _NOW)
        self.assertRaises(idm.exception.BadSignature, self.net.fetch_postbox_shares, stranger, _NOW)
        self.assertRaises(idm.exception.Expired, self.net.fetch_postbox_shares, _token(), _NOW + 600)

    def test_unknown_identity(self):
        self.assertRaises(network.exception.NotFound, self.net.fetch_postbox_shares, _token(_BOB), _NOW)


class TestMinimumContact(unittest.TestCase):
    def setUp(self):
        self.net = network_init(NetworkConfig(9, 5, latency_ms=50.0), _PROVIDER.verifier, random.Random(7))
        self.net.assign_postbox(_ALICE)

    def test_healthy(self):
        meter = Meter()
        shares = self.net.fetch_postbox_shares(_token(), _NOW, meter)

        self.assertEqual([s.node_index for s in shares], [1, 2, 3, 4, 5])
        self.assertEqual(meter.node_fetches, 5)
        self.assertEqual(meter.latency_ms, 250.0)

    def test_dead_nodes_are_skipped(self):
        self.net.mark_node(1, NodeHealth.Dead)
        self.net.mark_node(3, NodeHealth.Dead)

        meter = Meter()
        shares = self.net.fetch_postbox_shares(_token(), _NOW, meter)
        self.assertEqual([s.node_index for s in shares], [2, 4, 5, 6, 7])
        self.assertEqual(meter.node_fetches, 7)

    def test_insufficient(self):
        for index in range(1, 6):
            self.net.mark_node(index, NodeHealth.Dead)

        self.assertRaises(network.exception.InsufficientNodes, self.net.fetch_postbox_shares, _token(), _NOW)

    def test_dead_during_assignment(self):
        self.net.mark_node(9, NodeHealth.Dead)
        postbox = self.net.assign_postbox(_BOB)
        self.net.mark_node(9, NodeHealth.Healthy)

        self.assertEqual(self.net.postbox_key(_token(_BOB), _NOW).public_point, postbox)
        self.assertNotIn(_BOB, self.net.node(9).view().shares)

    def test_assignment_needs_threshold(self):
        for index in range(1, 6):
            self.net.mark_node(index, NodeHealth.Dead)

        self.assertRaises(network.exception.InsufficientNodes, self.net.assign_postbox, _BOB)


class TestBlobs(unittest.TestCase):
    def setUp(self):
        self.rng = random.Random(99)
        self.net = network_init(NetworkConfig(9, 5), _PROVIDER.verifier, self.rng)

    def test_roundtrip(self):
        blob = bytes(range(200))
        self.net.store_blob(_token(), _NOW, blob, self.rng)
        self.assertEqual(self.net.retrieve_blob(_token(), _NOW), blob)

    def test_empty(self):
        self.net.store_blob(_token(), _NOW, b"", self.rng)
        self.assertEqual(self.net.retrieve_blob(_token(), _NOW), b"")

    def test_survives_dead_nodes(self):
        self.net.store_blob(_token(), _NOW, b"payload", self.rng)
        for index in (2, 4, 6, 8):
            self.net.mark_node(index, NodeHealth.Dead)

        self.assertEqual(self.net.retrieve_blob(_token(), _NOW), b"payload")

    def test_write_quorum(self):
        for index in range(1, 6):
            self.net.mark_node(index, NodeHealth.Dead)

        self.assertRaises(network.exception.InsufficientNodes, self.net.store_blob, _token(), _NOW, b"x", self.rng)

    def test_stale_generation(self):
        self.net.store_blob(_token(), _NOW, b"old", self.rng)
        for index in range(1, 5):
            self.net.mark_node(index, NodeHealth.Dead)

        self.net.store_blob(_token(), _NOW, b"new", self.rng)
        for index in range(1, 5):
            self.net.mark_node(index, NodeHealth.Healthy)

        self.assertEqual(self.net.retrieve_blob(_token(), _NOW), b"new")

    def test_missing(self):
        self.assertRaises(network.exception.NotFound, self.net.retrieve_blob, _token(), _NOW)

    def test_delete(self):
        self.net.store_blob(_token(), _NOW, b"x", self.rng)
        self.net.delete_blob(_token(), _NOW)
        self.assertRaises(network.exception.NotFound, self.net.retrieve_blob, _token(), _NOW)

    def test_isolated_by_identity(self):
        self.net.store_blob(_token(_ALICE), _NOW, b"alice", self.rng)
        self.net.store_blob(_token(_BOB), _NOW, b"bob", self.rng)
        self.assertEqual(self.net.retrieve_blob(_token(_ALICE), _NOW), b"alice")
        self.assertEqual(self.net.retrieve_blob(_token(_BOB), _NOW), b"bob")


class TestCompromise(unittest.TestCase):
    def setUp(self):
        self.net = network_init(NetworkConfig(9, 5), _PROVIDER.verifier, random.Random(31337))
        self.net.assign_postbox(_ALICE)
        self.secret = self.net.postbox_key(_token(), _NOW).scalar

    def test_adversary_view(self):
        for index in (2, 5, 7):
            self.net.mark_node(index, NodeHealth.Compromised)

        views = self.net.adversary_view()
        self.assertEqual([v.node_index for v in views], [2, 5, 7])
        self.assertTrue(all(_ALICE in v.shares for v in views))

    def test_below_threshold(self):
        for index in (1, 3, 5, 7):
            self.net.mark_node(index, NodeHealth.Compromised)

        stolen = [v.shares[_ALICE].share for v in self.net.adversary_view()]
        self.assertNotEqual(reconstruct_secret(stolen, 4), self.secret)

    def test_at_threshold(self):
        for index in (1, 3, 5, 7, 9):
            self.net.mark_node(index, NodeHealth.Compromised)

        stolen = [v.shares[_ALICE].share for v in self.net.adversary_view()]
        self.assertEqual(reconstruct_secret(stolen, 5), self.secret)

    def test_compromised_nodes_still_serve(self):
        for index in range(1, 10):
            self.net.mark_node(index, NodeHealth.Compromised)

        self.assertEqual(self.net.postbox_key(_token(), _NOW).scalar, self.secret)


class TestPersistence(unittest.TestCase):
    _tmp:TemporaryDirectory

    def setUp(self):
        self._tmp = TemporaryDirectory()
        self.state = T.Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_no_node_holds_the_postbox_key(self):
        rng = random.Random(5)
        net = network_init(NetworkConfig(5, 3), _PROVIDER.verifier, rng, state=self.state)
        postbox = net.assign_postbox(_ALICE)
        net.store_blob(_token(), _NOW, b"persisted", rng)
        scalar = net.postbox_key(_token(), _NOW).scalar
        self.assertEqual(PublicPoint.FromScalar(scalar), postbox)

        for node in net.nodes:
            path = self.state / f"node-{node.index}.json"
            persisted = path.read_text()

            # One summed share per identity; the dealt sub-shares are gone
            self.assertEqual(len(json.loads(persisted)["shares"]), 1)
            self.assertNotIn(f"{int(scalar):x}", persisted)

            view = node.view()
            self.assertEqual(list(view.shares), [_ALICE])
            self.assertNotEqual(view.shares[_ALICE].share.y, scalar)

        # Coalitions below the threshold reconstruct something else
        for coalition in itertools.combinations(net.nodes, 2):
            shares = [node.view().shares[_ALICE].share for node in coalition]
            self.assertNotEqual(reconstruct_secret(shares, 2), scalar)

    def test_reload(self):
        rng = random.Random(1)
        net = network_init(NetworkConfig(5, 3), _PROVIDER.verifier, rng, state=self.state)
        postbox = net.assign_postbox(_ALICE)
        net.store_blob(_token(), _NOW, b"persisted", rng)
        net.mark_node(2, NodeHealth.Dead)

        # Fresh entropy, same state files
        reloaded = network_init(NetworkConfig(5, 3), _PROVIDER.verifier, random.Random(2), state=self.state)
        self.assertEqual(reloaded.node(2).health, NodeHealth.Dead)
        self.assertEqual(reloaded.node(1).transport_key(), net.node(1).transport_key())
        self.assertEqual(reloaded.postbox_key(_token(), _NOW).public_point, postbox)
        self.assertEqual(reloaded.retrieve_blob(_token(), _NOW), b"persisted")

    def test_private_files(self):
        network_init(NetworkConfig(3, 2), _PROVIDER.verifier, random.Random(1), state=self.state)
        for path in self.state.iterdir():
            self.assertEqual(path.stat().st_mode & 0o077, 0)

    def test_misplaced_state(self):
        LocalNode(1, _PROVIDER.verifier, random.Random(1), state=self.state / "node.json")
        self.assertRaises(network.exception.BadIndex,
                          LocalNode, 2, _PROVIDER.verifier, random.Random(1), state=self.state / "node.json")


if __name__ == "__main__":
    unittest.main()
