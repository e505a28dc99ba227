"""Backend selection for the event loop.

The compiled extension is used when it imports; ``CELLBENCH_PURE_PYTHON=1``
forces the reference implementation.
"""

import logging
import os

from . import _pykernel

_log = logging.getLogger(__name__)

UNBOUNDED_BUFFER = (1 << 62) - 1

python_run_events = _pykernel.run_events
compiled_run_events = None

try:
    from ._ckernel import run_events as compiled_run_events
except ImportError:  # extension not built
    _log.debug("compiled kernel unavailable, using pure Python event loop")

if compiled_run_events is not None and not os.environ.get("CELLBENCH_PURE_PYTHON"):
    run_events = compiled_run_events
    BACKEND = "cython"
else:
    run_events = python_run_events
    BACKEND = "python"


def get_run_events(backend: str | None = None):
    if backend in (None, "auto"):
        return run_events
    if backend == "python":
        return python_run_events
    if backend == "cython":
        if compiled_run_events is None:
            raise RuntimeError("compiled kernel is not built; run `pip install -e . --no-build-isolation`")
        return compiled_run_events
    raise ValueError(f"unknown backend {backend!r}")
