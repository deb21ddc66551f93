import contextvars
from concurrent.futures import ThreadPoolExecutor

_THREADS = contextvars.ContextVar("robustkit_threads", default=1)


def default_threads():
    return _THREADS.get()


def set_default_threads(k):
    return _THREADS.set(max(1, int(k)))


def parallel_map(fn, items, threads=None):
    """Order-preserving map; results never depend on the worker count."""
    items = list(items)
    threads = default_threads() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    ctx = contextvars.copy_context()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda x: ctx.copy().run(fn, x), items))
