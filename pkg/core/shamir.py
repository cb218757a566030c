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

from dataclasses import dataclass

from . import typing as T
from .field import FieldElement, FieldSpec


class exception(T.SimpleNamespace):
    """ Namespace of exceptions to make importing easier """
    class InvalidPolicy(Exception):
        """ Raised when a sharing policy is unsatisfiable or ambiguous """

    class InvalidShare(Exception):
        """ Raised when a share sits at the reserved abscissa """

    class DuplicateAbscissa(Exception):
        """ Raised when two shares have the same x-coordinate """

    class InsufficientShares(Exception):
        """ Raised when fewer shares than the threshold are provided """


@dataclass(frozen=True)
class SharePoint:
    """ Evaluation (x, P(x)) of a secret-bearing polynomial """
    x:FieldElement
    y:FieldElement

    def __post_init__(self) -> None:
        # x = 0 is where the secret lives
        if not self.x:
            raise exception.InvalidShare("Shares cannot be taken at x = 0")

    @classmethod
    def At(cls, spec:FieldSpec, x:int, y:int) -> SharePoint:
        """ Alternative constructor from plain integers """
        return cls(spec(x), spec(y))


@dataclass(frozen=True)
class SharePolicy:
    """ k-of-n sharing at fixed abscissae """
    k:int
    n:int
    xs:T.Tuple[FieldElement, ...]

    def __post_init__(self) -> None:
        if not 1 <= self.k <= self.n:
            raise exception.InvalidPolicy(f"Threshold {self.k} is not within [1, {self.n}]")

        if len(self.xs) != self.n:
            raise exception.InvalidPolicy(f"Expected {self.n} abscissae, got {len(self.xs)}")

        if any(not x for x in self.xs):
            raise exception.InvalidPolicy("Abscissae must be nonzero")

        if len(set(self.xs)) != self.n:
            raise exception.InvalidPolicy("Abscissae must be distinct")

    @classmethod
    def Sequential(cls, spec:FieldSpec, k:int, n:int) -> SharePolicy:
        """ Alternative constructor with x = 1, 2, ..., n """
        return cls(k, n, tuple(spec(x) for x in range(1, n + 1)))


def _check_distinct(points:T.Sequence[SharePoint]) -> None:
    xs = [point.x for point in points]
    if len(set(xs)) != len(xs):
        raise exception.DuplicateAbscissa("Shares must have distinct x-coordinates")


def _select(shares:T.Sequence[SharePoint], k:int) -> T.List[SharePoint]:
    """ Deterministic selection: the k shares with the smallest x """
    if len(shares) < k:
        raise exception.InsufficientShares(f"Need {k} shares, got {len(shares)}")

    _check_distinct(shares)
    return sorted(shares, key=lambda share: share.x.value)[:k]


def evaluate(coefficients:T.Sequence[FieldElement], x:FieldElement) -> FieldElement:
    """ Horner evaluation of the polynomial with the given coefficients """
    accumulator = x.spec(0)
    for coefficient in reversed(coefficients):
        accumulator = accumulator * x + coefficient

    return accumulator


def split_secret(secret:FieldElement, policy:SharePolicy, rng:T.EntropySource) -> T.List[SharePoint]:
    """
    Share the secret on a uniformly random polynomial of degree k - 1
    with P(0) = secret

    @param   secret  Secret field element
    @param   policy  Sharing policy
    @param   rng     Entropy source
    @return  n shares, in the policy's abscissa order
    """
    spec = secret.spec
    if any(x.spec != spec for x in policy.xs):
        raise exception.InvalidPolicy("Policy abscissae are not in the secret's field")

    coefficients = [secret] + [spec.random(rng) for _ in range(policy.k - 1)]
    return [SharePoint(x, evaluate(coefficients, x)) for x in policy.xs]


def interpolate_at(points:T.Sequence[SharePoint], x:FieldElement) -> FieldElement:
    """
    Evaluate the unique interpolating polynomial through the points at x

    @param   points  Points with distinct abscissae
    @param   x       Evaluation point
    @return  Value of the interpolant at x
    """
    if not points:
        raise exception.InsufficientShares("Cannot interpolate through no points")

    _check_distinct(points)

    total = x.spec(0)
    for i, point in enumerate(points):
        numerator, denominator = x.spec(1), x.spec(1)
        for j, other in enumerate(points):
            if i != j:
                numerator   *= x - other.x
                denominator *= point.x - other.x

        total += point.y * numerator / denominator

    return total


def reconstruct_secret(shares:T.Sequence[SharePoint], k:int) -> FieldElement:
    """
    Recover P(0) from the k shares with the smallest abscissae

    @param   shares  At least k shares with distinct abscissae
    @param   k       Threshold
    @return  Secret
    """
    selected = _select(shares, k)
    return interpolate_at(selected, selected[0].x.spec(0))


def derive_share_at(shares:T.Sequence[SharePoint], k:int, new_x:FieldElement) -> SharePoint:
    """
    Evaluate the sharing polynomial at a fresh abscissa, producing a
    replacement share consistent with the surviving ones

    @param   shares  At least k shares with distinct abscissae
    @param   k       Threshold
    @param   new_x   Nonzero abscissa not used by any given share
    @return  New share
    """
    if any(share.x == new_x for share in shares):
        raise exception.DuplicateAbscissa(f"A share already exists at x = {new_x.value}")

    selected = _select(shares, k)
    return SharePoint(new_x, interpolate_at(selected, new_x))
