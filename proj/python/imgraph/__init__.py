"""Hierarchical quartic image similarity graphs with visually sorted map navigation."""

from ._imgraph import *  # noqa: F401,F403
from ._imgraph import Error, __doc__  # noqa: F401

__version__ = "0.1.0"
