"""Placement-aware pick-and-place engine."""

from pickplace._core import *  # noqa: F401,F403
from pickplace._core import __version__  # noqa: F401
