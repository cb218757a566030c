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

import time as _time
from datetime import datetime, timedelta, timezone

# NOTE Token validity and rotation policy work in whole unix seconds;
# components take a clock so tests never read the wall clock
now       = lambda: int(_time.time())
epoch     = lambda ts: datetime.fromtimestamp(ts, timezone.utc)
timestamp = lambda dt: int(dt.astimezone(timezone.utc).timestamp())

delta   = timedelta
seconds = lambda d: int(d.total_seconds())

# Monotonic milliseconds, for metering remote calls
monotonic_ms = lambda: _time.perf_counter() * 1000

ISO8601 = "%Y-%m-%dT%H:%M:%SZ%z"


class FixedClock:
    """ Manually advanced clock, for deterministic token expiry """
    def __init__(self, start:int = 0) -> None:
        self._now = start

    def __call__(self) -> int:
        return self._now

    def advance(self, by:int) -> int:
        self._now += by
        return self._now
