"""Kernel backend selection.

The compiled extension (``_fast``, built from Cython) is preferred; the
pure-numpy fallback (``_pure``) is used when the extension is missing or
when ``GROUNDER_PURE_PY`` is set in the environment. Both expose the
same two functions and are cross-checked in the test suite; a benchmark
comparing them lives in ``benchmarks/bench_kernels.py``.
"""

import os

if os.environ.get("GROUNDER_PURE_PY"):
    from . import _pure as _impl

    BACKEND = "pure"
else:
    try:
        from . import _fast as _impl

        BACKEND = "compiled"
    except ImportError:
        from . import _pure as _impl

        BACKEND = "pure"

gru_seq_forward = _impl.gru_seq_forward
gru_seq_backward = _impl.gru_seq_backward


def backend_name() -> str:
    return BACKEND
