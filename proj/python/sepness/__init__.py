"""Boundary-driven exclusion process toolkit."""

from ._sepness import *  # noqa: F401,F403
from ._sepness import __doc__  # noqa: F401
