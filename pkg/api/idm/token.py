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

import jwt

from core import idm, typing as T
from core.idm import Identity, IdToken


_ALGORITHM = "HS256"
_CLAIMS    = ["iss", "sub", "aud", "iat", "exp"]

# HS256 keys shorter than the digest weaken the MAC
MINIMUM_SECRET_LENGTH = 32


def _check_secret(secret:bytes) -> bytes:
    if len(secret) < MINIMUM_SECRET_LENGTH:
        raise ValueError(f"Token secrets must be at least {MINIMUM_SECRET_LENGTH} bytes")

    return secret


class MockIdentityProvider(idm.base.IdentityProvider):
    """ Stand-in OIDC provider: HMAC-signed tokens with the OIDC claim set """
    _secret:bytes

    def __init__(self, secret:bytes) -> None:
        self._secret = _check_secret(secret)

    def issue_token(self, identity:Identity, audience:str, ttl:int, now:T.Timestamp) -> IdToken:
        if ttl <= 0:
            raise idm.exception.InvalidLifetime("Token lifetime must be positive")

        claims = {
            "iss": identity.verifier_url,
            "sub": identity.verifier_id,
            "aud": audience,
            "iat": now,
            "exp": now + ttl}

        encoded = jwt.encode(claims, self._secret, algorithm=_ALGORITHM)
        return IdToken(identity.verifier_url, identity.verifier_id, audience, now, now + ttl, encoded)

    @property
    def verifier(self) -> TokenVerifier:
        return TokenVerifier(self._secret)


class TokenVerifier(idm.base.TokenVerifier):
    """ Verifier for tokens minted by the provider sharing its secret """
    _secret:bytes

    def __init__(self, secret:bytes) -> None:
        self._secret = _check_secret(secret)

    def decode(self, token:T.Union[IdToken, str], expected_audience:str) -> IdToken:
        """ Check the MAC and audience, without regard to time """
        encoded = token.encoded if isinstance(token, IdToken) else token

        # NOTE Time is checked by the caller against an injected clock,
        # so PyJWT's wall-clock checks are switched off
        try:
            claims = jwt.decode(encoded, self._secret,
                                algorithms=[_ALGORITHM],
                                audience=expected_audience,
                                options={"verify_exp": False,
                                         "verify_iat": False,
                                         "verify_nbf": False,
                                         "require":    _CLAIMS})

        except jwt.InvalidAudienceError:
            raise idm.exception.AudienceMismatch(f"Token was not issued for {expected_audience}")

        except jwt.InvalidTokenError as e:
            raise idm.exception.BadSignature(f"Token did not verify: {e}")

        try:
            return IdToken(str(claims["iss"]), str(claims["sub"]), str(claims["aud"]),
                           int(claims["iat"]), int(claims["exp"]), encoded)

        except (TypeError, ValueError):
            raise idm.exception.BadSignature("Token claims are malformed")

    def verify_token(self, token:T.Union[IdToken, str], expected_audience:str, now:T.Timestamp) -> Identity:
        decoded = self.decode(token, expected_audience)

        # Validity interval is [issued_at, expires_at)
        if not decoded.issued_at <= now < decoded.expires_at:
            raise idm.exception.Expired("Token is outside its validity interval")

        try:
            return decoded.identity
        except idm.exception.InvalidIdentity:
            raise idm.exception.BadSignature("Token does not name an identity")
