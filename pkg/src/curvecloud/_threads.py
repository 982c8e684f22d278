"""Worker-thread control for the compiled kernels.

Kernels that release the GIL can be block-split across a small thread pool.
Every block writes to a disjoint slice of the output array and the block
boundaries depend only on the input size, so results are bitwise identical
for any thread count.
"""

import os
from concurrent.futures import ThreadPoolExecutor

_count: int | None = None
_pool: ThreadPoolExecutor | None = None
_pool_size = 0


def _default_count() -> int:
    env = os.environ.get("CURVECLOUD_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"CURVECLOUD_THREADS must be an integer, got {env!r}")
        if n < 1:
            raise ValueError("CURVECLOUD_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def get_num_threads() -> int:
    """Number of worker threads the compiled kernels may use."""
    global _count
    if _count is None:
        _count = _default_count()
    return _count


def set_num_threads(n: int) -> int:
    """Set the worker-thread count; returns the previous value."""
    if not isinstance(n, int) or n < 1:
        raise ValueError("thread count must be an integer >= 1")
    global _count
    prev = get_num_threads()
    _count = n
    return prev


def _get_pool(size: int) -> ThreadPoolExecutor:
    global _pool, _pool_size
    if _pool is None or _pool_size != size:
        if _pool is not None:
            _pool.shutdown(wait=True)
        _pool = ThreadPoolExecutor(max_workers=size)
        _pool_size = size
    return _pool


def run_blocks(n_items: int, min_items: int, fn) -> None:
    """Run ``fn(lo, hi)`` over [0, n_items), split across the thread pool.

    ``fn`` must only write to output slots owned by its [lo, hi) block.
    Falls back to a single direct call when the work is small or the
    thread count is 1, which by construction changes nothing numerically.
    """
    if n_items <= 0:
        return
    nt = get_num_threads()
    if nt == 1 or n_items < max(min_items, 2 * nt):
        fn(0, n_items)
        return
    nblocks = min(nt, n_items)
    step = (n_items + nblocks - 1) // nblocks
    bounds = [(lo, min(lo + step, n_items)) for lo in range(0, n_items, step)]
    pool = _get_pool(nt)
    futures = [pool.submit(fn, lo, hi) for lo, hi in bounds]
    for fut in futures:
        fut.result()
