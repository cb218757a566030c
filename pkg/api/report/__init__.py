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

import importlib.resources as resource

from jinja2 import Environment, StrictUndefined

from core import time, typing as T, utils


def _since(timestamp:T.Timestamp) -> str:
    return utils.human_time(max(time.now() - timestamp, 0))

def _environment() -> Environment:
    env = Environment(trim_blocks=True, lstrip_blocks=True, undefined=StrictUndefined)
    env.filters["human_time"] = utils.human_time
    env.filters["since"] = _since
    env.filters["timestamp"] = lambda ts: time.epoch(ts).strftime(time.ISO8601)
    return env


def render(template:str, context:T.Dict[str, T.Any]) -> str:
    """
    Render a Jinja2 template string with the given context

    @param   template  Jinja2 template
    @param   context   Template context
    @return  Rendered text
    """
    return _environment().from_string(template).render(context)


def status(context:T.Dict[str, T.Any]) -> str:
    """ Human-readable deployment status """
    return render(resource.files(__package__).joinpath("status.j2").read_text(), context)
