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

from abc import ABCMeta
from dataclasses import dataclass
from functools import cached_property

import yaml

from api.idm.token import MINIMUM_SECRET_LENGTH
from core import config, time, typing as T


class _YAMLConfig(config.base.Config, metaclass=ABCMeta):
    """ Abstract base class for building configuration from YAML """
    @staticmethod
    def _build(source:T.Path) -> T.Dict:
        with source.open() as stream:
            try:
                if not isinstance(parsed := yaml.safe_load(stream), dict):
                    raise config.exception.InvalidConfiguration(f"Configuration in {source.name} is not a mapping")
                return parsed

            except yaml.YAMLError:
                raise config.exception.InvalidConfiguration(f"Could not parse {source.name}")


# Type constructors

# NOTE Key material is always shared over the secp256k1 scalar field, so
# that reconstructed keys can sign; the profile only decides whether a
# fixed seed is allowed. Small fields exist for unit tests alone.
PROFILES = ("test", "production")

def _Profile(value:str) -> str:
    if value not in PROFILES:
        raise ValueError(f"Unknown profile {value}")

    return value

def _Secret(value:T.Any) -> bytes:
    secret = bytes.fromhex(str(value))
    if len(secret) < MINIMUM_SECRET_LENGTH:
        raise ValueError(f"Secrets must be at least {MINIMUM_SECRET_LENGTH} bytes")

    return secret

def _Positive(value:T.Any) -> int:
    if (value := int(value)) < 1:
        raise ValueError("Expected a positive integer")

    return value

def _NonNegative(value:T.Any) -> float:
    if (value := float(value)) < 0:
        raise ValueError("Expected a non-negative number")

    return value

def _Hours(hours:T.Any) -> T.TimeDelta:
    return time.delta(hours=_Positive(hours))

def _Address(value:str) -> T.Tuple[str, int]:
    host, _, port = str(value).rpartition(":")
    if not host or not port.isdigit() or not 0 <= (number := int(port)) < 65536:
        raise ValueError(f"Expected host:port, not {value}")

    return host, number

@dataclass
class _Optional:
    """ Nullable Type Constructor """
    cast:T.Callable

    def __call__(self, data:T.Any):
        return None if data is None else self.cast(data)

@dataclass
class _ListOf:
    """ Homogeneous Collection Type Constructor """
    cast:T.Callable

    def __call__(self, data:T.Any):
        if not isinstance(data, list):
            data = [] if data is None else [data]

        return [self.cast(value) for value in data]


_TypeConstructor = T.Callable[[T.Any], T.Any]

class _Required:
    """ Sentinel object to mark required settings """

@dataclass
class _Setting:
    cast:_TypeConstructor = str
    default:T.Any = _Required()

    @property
    def is_scalar(self):
        return not isinstance(self.cast, _ListOf)


_schema = {
    "profile":         _Setting(cast=_Profile, default="production"),
    "seed":            _Setting(cast=_Optional(int), default=None),

    "identity": {
        "issuer":      _Setting(),
        "secret":      _Setting(cast=_Secret),
        "audience":    _Setting(default="kms"),
        "ttl":         _Setting(cast=_Positive, default=600)},

    "network": {
        "nodes":       _Setting(cast=_Positive, default=9),
        "threshold":   _Setting(cast=_Positive, default=5),
        "latency":     _Setting(cast=_NonNegative, default=0.0)},

    "storage": {
        "state":       _Setting(cast=T.Path),
        "secret":      _Setting(cast=_Secret),
        "rotation":    _Setting(cast=_Hours, default=168)},

    "wire": {
        "enabled":     _Setting(cast=bool, default=False),
        "server":      _Setting(cast=_Optional(_Address), default=None),
        "nodes":       _Setting(cast=_ListOf(_Address), default=[]),
        "delay":       _Setting(cast=_NonNegative, default=0.0)}}

def _validate(data:T.Dict, schema:T.Dict) -> bool:
    """
    Recursively validate and type cast the input data in-place against
    the given schema, returning the validity of the input
    """
    for key, setting in schema.items():
        if isinstance(setting, dict):
            if key not in data or data[key] is None:
                data[key] = {}

            if not isinstance(data[key], dict) or not _validate(data[key], setting):
                return False

        else:
            if key not in data:
                if isinstance(setting.default, _Required):
                    return False

                data[key] = setting.default

            if setting.is_scalar and isinstance(data[key], list):
                return False

            try:
                # NOTE Type constructors are not idempotent, so this must
                # run against the input data at most once
                data[key] = setting.cast(data[key])

            except (ValueError, TypeError):
                return False

    return True

def _coherent(data:T.Dict) -> bool:
    """ Cross-setting constraints, on already cast contents """
    if data["seed"] is not None and data["profile"] != "test":
        return False

    if not data["network"]["threshold"] <= data["network"]["nodes"]:
        return False

    wire = data["wire"]
    if wire["enabled"] and (wire["server"] is None or len(wire["nodes"]) != data["network"]["nodes"]):
        return False

    return True

class Config(_YAMLConfig):
    @cached_property
    def _is_valid(self):
        return _validate(self._contents, _schema) and _coherent(self._contents)
