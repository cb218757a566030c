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

from enum import IntEnum

from core import crypto, idm, network, persistence, shamir, typing as T
from .frame import exception


class Status(IntEnum):
    Ok                = 0x00

    BadSignature      = 0x10
    Expired           = 0x11
    AudienceMismatch  = 0x12

    NotFound          = 0x20
    EpochMismatch     = 0x21
    Unprovisioned     = 0x22
    Unavailable       = 0x23
    CorruptStore      = 0x24

    AuthFailure       = 0x30
    Malformed         = 0x31

    AlreadyAssigned   = 0x40
    NodeNotFound      = 0x41
    NodeUnavailable   = 0x42
    InsufficientNodes = 0x43
    BadIndex          = 0x44
    InvalidShare      = 0x45

    VersionError      = 0x70
    Unsupported       = 0x71
    BadRequest        = 0x72
    FrameError        = 0x73
    Internal          = 0x7f


# Every error class that can cross the wire has exactly one status
_ERRORS:T.Dict[Status, T.Type[Exception]] = {
    Status.BadSignature:      idm.exception.BadSignature,
    Status.Expired:           idm.exception.Expired,
    Status.AudienceMismatch:  idm.exception.AudienceMismatch,
    Status.NotFound:          persistence.exception.NotFound,
    Status.EpochMismatch:     persistence.exception.EpochMismatch,
    Status.Unprovisioned:     persistence.exception.Unprovisioned,
    Status.Unavailable:       persistence.exception.Unavailable,
    Status.CorruptStore:      persistence.exception.CorruptStore,
    Status.AuthFailure:       crypto.exception.AuthenticationFailure,
    Status.Malformed:         crypto.exception.Malformed,
    Status.AlreadyAssigned:   network.exception.AlreadyAssigned,
    Status.NodeNotFound:      network.exception.NotFound,
    Status.NodeUnavailable:   network.exception.NodeUnavailable,
    Status.InsufficientNodes: network.exception.InsufficientNodes,
    Status.BadIndex:          network.exception.BadIndex,
    Status.InvalidShare:      shamir.exception.InvalidShare,
    Status.VersionError:      exception.VersionError,
    Status.Unsupported:       exception.Unsupported,
    Status.BadRequest:        exception.BadRequest,
    Status.FrameError:        exception.FrameError,
    Status.Internal:          exception.RemoteError}

_STATUSES = {error: status for status, error in _ERRORS.items()}


def status_for(error:BaseException) -> Status:
    """ Status of the most specific mapped class the error is an instance of """
    for cls in type(error).__mro__:
        if (status := _STATUSES.get(cls)) is not None:
            return status

    return Status.Internal


def error_for(status:int, message:str) -> Exception:
    """ Rebuild the error a status stands for """
    try:
        return _ERRORS[Status(status)](message)
    except (ValueError, KeyError):
        return exception.RemoteError(f"Unknown status {status:#04x}: {message}")
