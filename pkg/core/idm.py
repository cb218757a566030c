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

from abc import ABCMeta, abstractmethod
from dataclasses import dataclass, field

from . import typing as T


class exception(T.SimpleNamespace):
    """ Namespace of exceptions to make importing easier """
    class InvalidIdentity(ValueError):
        """ Raised when an identity has an empty component """

    class InvalidLifetime(ValueError):
        """ Raised when a token is requested with a non-positive lifetime """

    class TokenError(Exception):
        """ Base exception for token verification failures """

    class BadSignature(TokenError):
        """ Raised when a token cannot be decoded or its MAC does not match """

    class Expired(TokenError):
        """ Raised when a token is used outside [issued_at, expires_at) """

    class AudienceMismatch(TokenError):
        """ Raised when a token was issued for another audience """


@dataclass(frozen=True)
class Identity:
    """ User key: the (verifier_url, verifier_id) pair """
    verifier_url:str
    verifier_id:str

    def __post_init__(self) -> None:
        if not (self.verifier_url and self.verifier_id):
            raise exception.InvalidIdentity("Identities need both a verifier URL and ID")

    def __str__(self) -> str:
        return f"{self.verifier_url}/{self.verifier_id}"


@dataclass(frozen=True)
class IdToken:
    """ Signed identity assertion, carried in its compact encoding """
    issuer:str
    subject:str
    audience:str
    issued_at:T.Timestamp
    expires_at:T.Timestamp
    encoded:str = field(repr=False)

    @property
    def identity(self) -> Identity:
        return Identity(self.issuer, self.subject)

    def __str__(self) -> str:
        return self.encoded


def operator_audience(audience:str) -> str:
    """ Audience of the operator credentials for a service audience """
    return f"{audience}/operator"


class _IdentityProvider(metaclass=ABCMeta):
    """ Abstract base class for token issuers """
    @abstractmethod
    def issue_token(self, identity:Identity, audience:str, ttl:int, now:T.Timestamp) -> IdToken:
        """
        Issue a token asserting the identity

        @param   identity  Subject of the token
        @param   audience  Intended audience
        @param   ttl       Lifetime in seconds (positive)
        @param   now       Issuance time
        @return  Signed token
        """


class _TokenVerifier(metaclass=ABCMeta):
    """ Abstract base class for token verification """
    @abstractmethod
    def verify_token(self, token:T.Union[IdToken, str], expected_audience:str, now:T.Timestamp) -> Identity:
        """
        Verify signature, audience and expiry, in that order

        @param   token              Token or its compact encoding
        @param   expected_audience  Audience the caller requires
        @param   now                Verification time
        @return  Embedded identity
        """


class base(T.SimpleNamespace):
    """ Namespace of base classes to make importing easier """
    IdentityProvider = _IdentityProvider
    TokenVerifier    = _TokenVerifier
