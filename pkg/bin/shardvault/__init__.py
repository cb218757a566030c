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
import json
import sys

from api import report
from api.kms import hd
from api.logging import log
from api.network.codec import exception as codec_exception
from api import wire
from api.wire import exception as wire_exception
from bin.common import config, idm
from core import crypto, kms, network, persistence, shamir, typing as T, utils
from core import idm as core_idm
from core.network import NodeHealth

from . import usage
from .workspace import Workspace


Result = T.Dict[str, T.Any]

# First matching family wins
_EXIT_CODES:T.List[T.Tuple[T.Type[Exception], int]] = [
    (core_idm.exception.TokenError,                  3),

    (persistence.exception.CorruptStore,             5),
    (crypto.exception.AuthenticationFailure,         5),
    (codec_exception.CorruptBlob,                    5),
    (wire_exception.FrameError,                      5),

    (kms.exception.InsufficientStorages,             4),
    (network.exception.InsufficientNodes,            4),
    (network.exception.NodeUnavailable,              4),
    (persistence.exception.Unavailable,              4),
    (shamir.exception.InsufficientShares,            4),
    (wire_exception.WireError,                       4),

    (kms.exception.AlreadyEnrolled,                  6),
    (network.exception.AlreadyAssigned,              6),
    (network.exception.NotFound,                     6),
    (persistence.exception.NotFound,                 6),
    (persistence.exception.Unprovisioned,            6),
    (persistence.exception.EpochMismatch,            6),

    (network.exception.BadIndex,                     2),
    (ValueError,                                     2)]

def exit_code(error:BaseException) -> T.Optional[int]:
    """ Exit status of a handled error family, if it is one """
    for family, code in _EXIT_CODES:
        if isinstance(error, family):
            return code

    return None


## Key flows ###########################################################

def signup(ws:Workspace, args:argparse.Namespace) -> Result:
    ws.auto_rotate()
    session = ws.session(args.user, args.device)
    public = ws.manager.signup(session, ws.token(args.user), ws.rng)
    ws.record(session)

    return {"identity": str(session.identity), "device": session.device_id,
            "public_key": public.hex(), "counters": session.meter.as_dict()}


def signin(ws:Workspace, args:argparse.Namespace) -> Result:
    ws.auto_rotate()
    session = ws.session(args.user, args.device)
    with ws.manager.signin(session, ws.token(args.user)) as handle:
        public = handle.public_point

    ws.record(session)
    return {"identity": str(session.identity), "public_key": public.hex(), "counters": session.meter.as_dict()}


def sign(ws:Workspace, args:argparse.Namespace) -> Result:
    ws.auto_rotate()
    session = ws.session(args.user, args.device)
    signature = ws.manager.sign_transaction(session, ws.token(args.user), args.digest)
    ws.record(session)

    return {"signature": signature.encode().hex(), "r": f"{signature.r:064x}", "s": f"{signature.s:064x}",
            "recovery": signature.recovery, "public_key": signature.recover(args.digest).hex(),
            "counters": session.meter.as_dict()}


def rotate(ws:Workspace, args:argparse.Namespace) -> Result:
    ws.auto_rotate()
    session = ws.session(args.user, args.device)
    epoch = ws.manager.rotate_ekp(session, ws.token(args.user), ws.rng)
    ws.record(session)

    return {"identity": str(session.identity), "ekp_epoch": epoch, "counters": session.meter.as_dict()}


def reshare(ws:Workspace, args:argparse.Namespace) -> Result:
    ws.auto_rotate()
    session = ws.session(args.user, args.device)
    ws.manager.reshare_key(session, ws.token(args.user), ws.rng)
    ws.record(session)

    return {"identity": str(session.identity), "counters": session.meter.as_dict()}


def recover_device(ws:Workspace, args:argparse.Namespace) -> Result:
    ws.auto_rotate()
    session = ws.session(args.user, args.device)
    ws.manager.recover_device(session, ws.token(args.user), args.new_device, ws.rng)
    ws.record(session)

    return {"identity": str(session.identity), "device": session.device_id, "counters": session.meter.as_dict()}


def disaster_recover(ws:Workspace, args:argparse.Namespace) -> Result:
    if not args.assume_server_dead and ws.server.available:
        raise kms.exception.ServerReachable("The server is up; mark it down or pass --assume-server-dead")

    if args.assume_server_dead and not ws.wire:
        # For this run only; the persisted flag is left alone
        ws.server.set_available(False)

    session = ws.session(args.user, args.device)
    phrase = ws.manager.disaster_recover(session, ws.token(args.user))
    ws.record(session)

    result:Result = {"identity": str(session.identity), "words": len(phrase.split()),
                     "fingerprint": utils.fingerprint(phrase), "counters": session.meter.as_dict()}
    if args.reveal:
        result["mnemonic"] = phrase

    return result


def export_seed(ws:Workspace, args:argparse.Namespace) -> Result:
    ws.auto_rotate()
    session = ws.session(args.user, args.device)
    with ws.manager.signin(session, ws.token(args.user)) as handle:
        phrase = handle.export_seed_phrase()

    ws.record(session)
    result:Result = {"words": len(phrase.split()), "fingerprint": utils.fingerprint(phrase)}
    if args.reveal:
        result["mnemonic"] = phrase

    return result


def derive(ws:Workspace, args:argparse.Namespace) -> Result:
    ws.auto_rotate()
    session = ws.session(args.user, args.device)
    with ws.manager.signin(session, ws.token(args.user)) as handle:
        child = handle.derive_chain_key(args.path)

    ws.record(session)
    result:Result = {"path": hd.format_path(hd.parse_path(args.path)), "depth": child.depth,
                     "public_key": child.public_key.hex()}
    try:
        result["xpub"] = child.xpub()
    except ValueError:
        # Parent fingerprints need RIPEMD-160, which some OpenSSL builds lack
        log.warning("RIPEMD-160 is unavailable; extended key serialisation skipped")

    return result


## Operations ##########################################################

def init_network(ws:Workspace, args:argparse.Namespace) -> Result:
    health = ws.network.health()
    if not ws.wire:
        ws.local_server()

    return {"nodes": len(health), "threshold": ws.network_config.threshold,
            "healthy": sum(state == NodeHealth.Healthy for state in health.values())}


def mark_node(ws:Workspace, args:argparse.Namespace) -> Result:
    ws.mark_node(args.index, NodeHealth(args.state))
    return {"node": args.index, "state": args.state}


def mark_server(ws:Workspace, args:argparse.Namespace) -> Result:
    ws.mark_server(args.state == "up")
    return {"server": args.state}


def rotate_salt(ws:Workspace, args:argparse.Namespace) -> Result:
    epoch = ws.server.rotate_at_rest()
    return {"at_rest_epoch": epoch}


def status(ws:Workspace, args:argparse.Namespace) -> Result:
    ws.auto_rotate()
    return ws.status()


def verify(ws:Workspace, args:argparse.Namespace) -> Result:
    context = ws.status()
    healthy = sum(node["health"] == NodeHealth.Healthy.value for node in context["nodes"])

    if healthy < ws.network_config.threshold:
        raise network.exception.InsufficientNodes(
            f"{healthy} healthy nodes; the network needs {ws.network_config.threshold}")

    if not context["server"]["available"]:
        raise persistence.exception.Unavailable("Server store is unreachable")

    return {"healthy_nodes": healthy, "server": "up", "mode": context["mode"]}


def serve_server(ws:Workspace, args:argparse.Namespace) -> Result:
    if (bind := config.wire.server) is None:
        raise wire_exception.BindFailure("No server address is configured")

    wire.serve_server_store(ws.local_server(), bind, ws.verifier, audience=config.identity.audience,
                            rotation=config.storage.rotation).serve_forever()
    return {}


def serve_node(ws:Workspace, args:argparse.Namespace) -> Result:
    if not 0 < args.index <= len(config.wire.nodes):
        raise network.exception.BadIndex(f"No address is configured for node {args.index}")

    wire.serve_node(ws.local_node(args.index), config.wire.nodes[args.index - 1], ws.verifier,
                    audience=config.identity.audience, delay_ms=config.wire.delay).serve_forever()
    return {}


_commands:T.Dict[str, T.Callable[[Workspace, argparse.Namespace], Result]] = {
    "init-network":     init_network,
    "signup":           signup,
    "signin":           signin,
    "sign":             sign,
    "rotate":           rotate,
    "reshare":          reshare,
    "recover-device":   recover_device,
    "disaster-recover": disaster_recover,
    "export-seed":      export_seed,
    "derive":           derive,
    "mark-node":        mark_node,
    "mark-server":      mark_server,
    "rotate-salt":      rotate_salt,
    "status":           status,
    "verify":           verify,
    "serve-server":     serve_server,
    "serve-node":       serve_node}


def _print(action:str, result:Result, as_json:bool) -> None:
    if as_json:
        print(json.dumps(result, sort_keys=True))

    elif action == "status":
        print(report.status(result), end="")

    else:
        for key, value in result.items():
            if isinstance(value, dict):
                value = ", ".join(f"{k}={v}" for k, v in value.items())
            print(f"{key}\t{value}")


def main(argv:T.List[str] = sys.argv) -> int:
    args = usage.parse_args(argv[1:])

    try:
        result = _commands[args.action](Workspace(config, idm), args)

    except Exception as e:
        if (code := exit_code(e)) is None:
            raise

        print(f"error\t{type(e).__name__}\t{e}", file=sys.stderr)
        return code

    if result:
        _print(args.action, result, args.json)

    return 0
