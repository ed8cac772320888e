"""Ordered process-pool map: results come back in task order for any worker count."""

from concurrent.futures import ProcessPoolExecutor


def ordered_map(fn, tasks, workers=1):
    tasks = list(tasks)
    if workers is None or workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))
