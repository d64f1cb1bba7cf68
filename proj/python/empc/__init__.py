"""Learned explicit MPC toolkit for the rotary pendulum."""

from empc._core import *  # noqa: F401,F403
from empc._core import __doc__  # noqa: F401
