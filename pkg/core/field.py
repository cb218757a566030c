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

from dataclasses import dataclass, field
from functools import total_ordering

from ecdsa import SECP256k1
from ecdsa.numbertheory import is_prime

from . import typing as T


class exception(T.SimpleNamespace):
    """ Namespace of exceptions to make importing easier """
    class NotPrime(Exception):
        """ Raised when a field modulus fails the primality test """

    class FieldMismatch(Exception):
        """ Raised when elements of different fields are combined """

    class NotInvertible(ArithmeticError):
        """ Raised on inversion of (or division by) zero """


@dataclass(frozen=True)
class FieldSpec:
    """ Prime field GF(modulus) """
    modulus:int
    verified:bool = field(default=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        # Verified constants skip the (probabilistic) primality test
        if self.modulus < 2 or not (self.verified or is_prime(self.modulus)):
            raise exception.NotPrime(f"{self.modulus} is not prime")

    def __call__(self, value:int) -> FieldElement:
        """ Construct a canonically reduced element of this field """
        return FieldElement(value % self.modulus, self)

    @property
    def byte_length(self) -> int:
        return (self.modulus.bit_length() + 7) // 8

    def random(self, rng:T.EntropySource, *, nonzero:bool = False) -> FieldElement:
        """ Uniformly random element, optionally excluding zero """
        return self(rng.randrange(1 if nonzero else 0, self.modulus))

    def from_bytes(self, data:bytes) -> FieldElement:
        return self(int.from_bytes(data, "big"))


@total_ordering
@dataclass(frozen=True)
class FieldElement:
    """ Element of a prime field, always held in [0, modulus) """
    value:int
    spec:FieldSpec = field(repr=False)

    def __post_init__(self) -> None:
        if not 0 <= self.value < self.spec.modulus:
            raise ValueError(f"{self.value} is not reduced modulo {self.spec.modulus}")

    def _coerce(self, other:T.Union[FieldElement, int]) -> int:
        if isinstance(other, FieldElement):
            if other.spec != self.spec:
                raise exception.FieldMismatch("Cannot combine elements of different fields")
            return other.value

        if isinstance(other, int):
            return other

        return NotImplemented

    def __add__(self, other:T.Union[FieldElement, int]) -> FieldElement:
        return self.spec(self.value + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other:T.Union[FieldElement, int]) -> FieldElement:
        return self.spec(self.value - self._coerce(other))

    def __rsub__(self, other:int) -> FieldElement:
        return self.spec(self._coerce(other) - self.value)

    def __mul__(self, other:T.Union[FieldElement, int]) -> FieldElement:
        return self.spec(self.value * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self) -> FieldElement:
        return self.spec(-self.value)

    def inverse(self) -> FieldElement:
        if self.value == 0:
            raise exception.NotInvertible("Zero has no multiplicative inverse")

        return self.spec(pow(self.value, -1, self.spec.modulus))

    def __truediv__(self, other:T.Union[FieldElement, int]) -> FieldElement:
        return self * self.spec(self._coerce(other)).inverse()

    def __pow__(self, exponent:int) -> FieldElement:
        if exponent < 0:
            return self.inverse() ** -exponent

        return self.spec(pow(self.value, exponent, self.spec.modulus))

    def __eq__(self, other:T.Any) -> bool:
        if isinstance(other, FieldElement):
            return self.spec == other.spec and self.value == other.value

        if isinstance(other, int):
            return self.value == other % self.spec.modulus

        return NotImplemented

    def __lt__(self, other:FieldElement) -> bool:
        return self.value < self._coerce(other)

    def __hash__(self) -> int:
        return hash((self.value, self.spec.modulus))

    def __int__(self) -> int:
        return self.value

    def __bool__(self) -> bool:
        return self.value != 0

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(self.spec.byte_length, "big")


class profiles(T.SimpleNamespace):
    """ Named fields """
    # Scalar group of secp256k1, so every reconstructed value is a valid
    # signing scalar
    production = FieldSpec(int(SECP256k1.order), verified=True)

    # Smallest prime above 2^256: any 32-byte chunk is a field element
    blob = FieldSpec(2**256 + 297, verified=True)

    @staticmethod
    def test(modulus:int = 257) -> FieldSpec:
        return FieldSpec(modulus)
