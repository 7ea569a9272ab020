"""Small shared helpers: fixed-topology summation and worker pools."""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def pairwise_sum(values, axis=0):
    """Sum along `axis` with a fixed binary-tree topology.

    The result depends only on the number and order of the summands, never on
    how the work that produced them was scheduled.
    """
    a = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    if a.shape[0] == 0:
        return np.zeros(a.shape[1:])
    while a.shape[0] > 1:
        if a.shape[0] % 2:
            a = np.concatenate([a, np.zeros((1,) + a.shape[1:])])
        a = a[0::2] + a[1::2]
    return a[0]


def resolve_workers(workers=None):
    """Number of worker threads; `None` reads ``VAREXP_THREADS`` (0 = auto)."""
    if workers is None:
        try:
            workers = int(os.environ.get("VAREXP_THREADS", "0"))
        except ValueError:
            workers = 0
    if workers <= 0:
        workers = os.cpu_count() or 1
    return max(1, int(workers))


def ordered_map(func, items, workers=None):
    """Map `func` over `items`, returning results in input order."""
    items = list(items)
    n = resolve_workers(workers)
    if n == 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))
