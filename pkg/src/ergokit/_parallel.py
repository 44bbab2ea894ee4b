import os
from concurrent.futures import ThreadPoolExecutor


def max_workers():
    """Thread cap from ``ERGOKIT_THREADS`` (default: CPU count)."""
    env = os.environ.get("ERGOKIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def map_parallel(fn, items):
    """Order-preserving map; results never depend on scheduling."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
