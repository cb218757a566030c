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

import argparse

from core import typing as T
from core.network import NodeHealth
from bin.common import version


def _digest(value:str) -> bytes:
    try:
        digest = bytes.fromhex(value)
    except ValueError:
        raise argparse.ArgumentTypeError("digest must be hexadecimal")

    if len(digest) != 32:
        raise argparse.ArgumentTypeError("digest must be 32 bytes")

    return digest

def _index(value:str) -> int:
    if not value.isdigit() or int(value) < 1:
        raise argparse.ArgumentTypeError("node indices start at 1")

    return int(value)


_user_help = "verified identity subject"
_device_help = "device identifier"

# Commands that act on a user's vault from one of their devices
_flows = {
    "signup":           "enroll a user and place their key shards",
    "signin":           "reconstruct the key from server and device",
    "sign":             "sign a 32-byte digest with the reconstructed key",
    "rotate":           "replace the encryption keypair guarding the shards",
    "reshare":          "re-split the key with a fresh polynomial",
    "recover-device":   "provision a new device from network and server",
    "disaster-recover": "recover the seed phrase from network and device",
    "export-seed":      "show the seed phrase of the key",
    "derive":           "derive a BIP-32 child key"}


def _parser_factory() -> argparse.ArgumentParser:
    """ Build an argument parser meeting requirements """
    top_level = argparse.ArgumentParser("shardvault")
    top_level.add_argument("--version", action="version", version=f"%(prog)s {version.shardvault}")
    top_level.add_argument("--json", action="store_true", help="machine-readable output")

    sub_level = top_level.add_subparsers(
        description="Key management across the node network, server and devices",
        required=True,
        dest="action",
        metavar="ACTION")

    sub_level.add_parser("init-network", help="create the node network state")

    for action, summary in _flows.items():
        sub_parser = sub_level.add_parser(action, help=summary)
        sub_parser.add_argument("--user", required=True, help=_user_help)
        sub_parser.add_argument("--device", default="primary", help=f"{_device_help} (default: primary)")

        match action:
            case "sign":
                sub_parser.add_argument("--digest-hex", dest="digest", required=True, type=_digest,
                                        help="SHA-256 digest to sign, hex encoded", metavar="HEX")

            case "recover-device":
                sub_parser.add_argument("--new-device", required=True, help="identifier of the replacement device")

            case "disaster-recover":
                sub_parser.add_argument("--assume-server-dead", action="store_true",
                                        help="treat the server as unreachable for this run")
                sub_parser.add_argument("--reveal", action="store_true", help="print the words, not a fingerprint")

            case "export-seed":
                sub_parser.add_argument("--reveal", action="store_true", help="print the words, not a fingerprint")

            case "derive":
                sub_parser.add_argument("--path", required=True,
                                        help="derivation path (m/44'/0'/0'/0/0) or profile (bitcoin, litecoin, ethereum)")

    sub_parser = sub_level.add_parser("mark-node", help="fault injection on a node")
    sub_parser.add_argument("--index", required=True, type=_index, help="node index")
    sub_parser.add_argument("--state", required=True, choices=[health.value for health in NodeHealth])

    sub_parser = sub_level.add_parser("mark-server", help="fault injection on the server")
    sub_parser.add_argument("--state", required=True, choices=["up", "down"])

    sub_level.add_parser("rotate-salt", help="rotate the server's at-rest encryption")
    sub_level.add_parser("status", help="report the deployment state")
    sub_level.add_parser("verify", help="check configuration and storage reachability")

    sub_level.add_parser("serve-server", help="serve the server store over the wire")
    sub_parser = sub_level.add_parser("serve-node", help="serve one node over the wire")
    sub_parser.add_argument("--index", required=True, type=_index, help="node index")

    return top_level


def parse_args(args:T.List[str]) -> argparse.Namespace:
    return _parser_factory().parse_args(args)
