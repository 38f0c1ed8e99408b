"""Deterministic fan-out over independent per-input work items.

Results are collected by index, so the output is identical for any worker
count; workers only change wall-clock time.
"""

from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, workers: int = 1) -> list:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    out = [None] * len(items)

    def run(k: int):
        out[k] = fn(items[k])

    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(run, range(len(items))))
    return out
