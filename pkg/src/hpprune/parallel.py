"""Thread-pool control for the embarrassingly parallel passes.

The ``HP_PRUNE_THREADS`` environment variable caps worker parallelism:
0 or unset means auto (cpu count), 1 forces serial execution.  Results
are collected by position, so the worker count never changes output.
"""

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import UsageError

ENV_VAR = "HP_PRUNE_THREADS"

# below this many items the pool costs more than it saves
_SERIAL_CUTOFF = 64


def worker_count() -> int:
    """Resolve the configured worker count (always >= 1)."""
    raw = os.environ.get(ENV_VAR)
    if raw is None or raw.strip() == "":
        n = 0
    else:
        try:
            n = int(raw)
        except ValueError:
            raise UsageError(f"{ENV_VAR} must be an integer, got {raw!r}") from None
    if n < 0:
        raise UsageError(f"{ENV_VAR} must be >= 0, got {n}")
    if n == 0:
        return os.cpu_count() or 1
    return n


def thread_map(fn, items):
    """Apply fn to every item, preserving order."""
    items = list(items)
    workers = worker_count()
    if workers == 1 or len(items) < _SERIAL_CUTOFF:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
