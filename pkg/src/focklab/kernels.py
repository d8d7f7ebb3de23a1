"""Kernel backend selection: compiled extension with pure-Python fallback.

The compiled core (:mod:`focklab._speedups`) is used when importable; the
pure-Python reference (:mod:`focklab._fallback`) otherwise.  Setting the
environment variable ``FOCKLAB_PURE_PYTHON=1`` forces the fallback, which is
handy for debugging and for benchmarking the two paths against each other.
"""

import os

from . import _fallback

try:
    from . import _speedups
except ImportError:  # extension not built
    _speedups = None

if _speedups is not None and not os.environ.get("FOCKLAB_PURE_PYTHON"):
    _impl = _speedups
else:
    _impl = _fallback

BACKEND = _impl.BACKEND
HAVE_COMPILED = _speedups is not None

enumerate_states = _impl.enumerate_states
rank_in_sector = _impl.rank_in_sector
annihilation_entries = _impl.annihilation_entries
