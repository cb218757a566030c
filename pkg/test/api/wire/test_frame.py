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

import unittest

from api.wire import Op, Request, Response, Status, VERSION
from api.wire.frame import MAX_FRAME, correlation_of, exception, pack, unpack


class TestRequest(unittest.TestCase):
    def test_layout(self):
        request = Request(Op.Ping, 7, b"tok", b"pl")
        body = bytes([VERSION, 0x01]) + (7).to_bytes(8, "big") + b"\x00\x03tok" + b"\x00\x00\x00\x02pl"
        self.assertEqual(request.encode(), len(body).to_bytes(4, "big") + body)

    def test_decode(self):
        request = Request(Op.ServerGet, 2**64 - 1, b"token", pack("ekp_shard"))
        self.assertEqual(Request.decode(request.encode()[4:]), request)

        empty = Request(Op.Ping, 1)
        self.assertEqual(Request.decode(empty.encode()[4:]), empty)

    def test_malformed(self):
        body = Request(Op.Ping, 1, b"tok", b"payload").encode()[4:]

        self.assertRaises(exception.FrameError, Request.decode, b"")
        self.assertRaises(exception.FrameError, Request.decode, body[:5])
        self.assertRaises(exception.FrameError, Request.decode, body[:-1])
        self.assertRaises(exception.FrameError, Request.decode, body + b"\0")

        # Token length pointing past the end of the frame
        overstated = body[:10] + b"\xff\xff" + body[12:]
        self.assertRaises(exception.FrameError, Request.decode, overstated)

    def test_correlation_of(self):
        self.assertEqual(correlation_of(Request(Op.Ping, 42).encode()[4:]), 42)
        self.assertEqual(correlation_of(b"\x01"), 0)


class TestResponse(unittest.TestCase):
    def test_layout(self):
        response = Response(Status.NotFound, 9, b"msg")
        body = bytes([VERSION, 0x20]) + (9).to_bytes(8, "big") + b"\x00\x00\x00\x03msg"
        self.assertEqual(response.encode(), len(body).to_bytes(4, "big") + body)

    def test_decode(self):
        response = Response(Status.Ok, 3, pack({"index": 1, "health": "healthy"}))
        self.assertEqual(Response.decode(response.encode()[4:]), response)

    def test_malformed(self):
        body = Response(Status.Ok, 3, b"payload").encode()[4:]
        self.assertRaises(exception.FrameError, Response.decode, body[:13])
        self.assertRaises(exception.FrameError, Response.decode, body[:-1])
        self.assertRaises(exception.FrameError, Response.decode, body + b"\0")


class TestPayloads(unittest.TestCase):
    def test_unpack(self):
        self.assertEqual(unpack(pack([1, b"\x00\xff", "text", None])), [1, b"\x00\xff", "text", None])

    def test_garbage(self):
        for garbage in (b"\xc1", b"\x92\x01", b"\x01\x02"):
            self.assertRaises(exception.FrameError, unpack, garbage)

    def test_limits(self):
        self.assertEqual(MAX_FRAME, 16 * 1024 * 1024)
        self.assertTrue(issubclass(exception.FrameError, exception.WireError))
        self.assertTrue(issubclass(exception.BindFailure, exception.WireError))


if __name__ == "__main__":
    unittest.main()
