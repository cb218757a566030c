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

import random
import unittest

from core.field import FieldSpec, exception, profiles


class TestFieldSpec(unittest.TestCase):
    def test_prime_check(self):
        self.assertRaises(exception.NotPrime, FieldSpec, 15)
        self.assertRaises(exception.NotPrime, FieldSpec, 1)
        self.assertEqual(FieldSpec(257).modulus, 257)

    def test_reduction(self):
        gf = profiles.test(17)
        self.assertEqual(gf(20).value, 3)
        self.assertEqual(gf(-1).value, 16)
        self.assertRaises(ValueError, type(gf(0)), 17, gf)

    def test_byte_length(self):
        self.assertEqual(profiles.production.byte_length, 32)
        self.assertEqual(profiles.blob.byte_length, 33)
        self.assertEqual(profiles.test().byte_length, 2)

    def test_random(self):
        gf = profiles.test(17)
        rng = random.Random(1)
        self.assertTrue(all(0 < gf.random(rng, nonzero=True).value < 17 for _ in range(200)))

    def test_blob_field_holds_any_chunk(self):
        chunk = b"\xff" * 32
        self.assertEqual(profiles.blob.from_bytes(chunk).value, 2**256 - 1)


class TestFieldElement(unittest.TestCase):
    gf = profiles.test(17)

    def test_arithmetic(self):
        a, b = self.gf(5), self.gf(14)
        self.assertEqual(a + b, 2)
        self.assertEqual(a - b, 8)
        self.assertEqual(a * b, 2)
        self.assertEqual(-a, 12)
        self.assertEqual(a + 13, 1)
        self.assertEqual(1 - a, 13)

    def test_inverse(self):
        for value in range(1, 17):
            element = self.gf(value)
            self.assertEqual(element * element.inverse(), 1)

        self.assertRaises(exception.NotInvertible, self.gf(0).inverse)
        self.assertEqual(self.gf(3) / self.gf(3), 1)

    def test_pow(self):
        self.assertEqual(self.gf(3) ** 16, 1)
        self.assertEqual(self.gf(3) ** -1, self.gf(3).inverse())

    def test_field_mismatch(self):
        other = profiles.test(257)
        self.assertRaises(exception.FieldMismatch, lambda: self.gf(1) + other(1))

    def test_equality_and_hashing(self):
        self.assertEqual(self.gf(3), self.gf(20))
        self.assertNotEqual(self.gf(3), profiles.test(257)(3))
        self.assertEqual(len({self.gf(3), self.gf(20)}), 1)
        self.assertFalse(self.gf(0))
        self.assertTrue(self.gf(1))

    def test_to_bytes(self):
        self.assertEqual(profiles.production(1).to_bytes(), bytes(31) + b"\x01")
        self.assertEqual(self.gf(16).to_bytes(), b"\x10")


if __name__ == "__main__":
    unittest.main()
