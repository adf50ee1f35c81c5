"""Selects the compiled metric kernels at import, falling back to pure Python.

``USING_COMPILED`` tells callers (and the benchmark) which implementation
is active.
"""

from __future__ import annotations

try:
    from . import _kernels as _impl

    USING_COMPILED = True
except ImportError:  # extension not built on this host
    from . import _kernels_py as _impl

    USING_COMPILED = False

lcs_length = _impl.lcs_length
clipped_ngram_stats = _impl.clipped_ngram_stats
