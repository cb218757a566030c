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

from dataclasses import dataclass, field
from threading import Lock

from . import typing as T


@dataclass
class Meter:
    """ Per-session message counters and node latency accumulator """
    node_fetches:int = 0
    server_calls:int = 0
    latency_ms:float = 0.0
    _lock:Lock = field(default_factory=Lock, init=False, repr=False, compare=False)

    def node(self, latency_ms:float) -> None:
        """ Record one node contact and the latency it cost """
        with self._lock:
            self.node_fetches += 1
            self.latency_ms += latency_ms

    def server(self) -> None:
        """ Record one server call """
        with self._lock:
            self.server_calls += 1

    def as_dict(self) -> T.Dict[str, T.Union[int, float]]:
        with self._lock:
            return {"node_fetches": self.node_fetches,
                    "server_calls": self.server_calls,
                    "latency_ms":   round(self.latency_ms, 3)}
