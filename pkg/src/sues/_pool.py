from __future__ import annotations

import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "SUES_WORKERS"


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def pmap(fn, tasks, workers: int = 1) -> list:
    """Ordered map; results never depend on ``workers``."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks)), mp_context=ctx) as ex:
        return list(ex.map(fn, tasks))


def chunks(lo: int, hi: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, hi - lo))
    step = -(-(hi - lo) // parts)
    return [(a, min(hi, a + step)) for a in range(lo, hi, step)]
