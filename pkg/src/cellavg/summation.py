"""Order-independent floating point reduction."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np


def exact_sum(values) -> float:
    """Correctly rounded sum (``math.fsum``); independent of summation order."""
    arr = np.asarray(values, dtype=float).ravel()
    return math.fsum(arr[arr != 0].tolist())


def parallel_exact_sum(fn: Callable, chunks: Sequence, threads: int = 1) -> float:
    """fsum of ``fn(chunk)`` partial arrays over `chunks`.

    Each partial is returned as the array of nonzero terms and everything is
    merged in one correctly rounded sum, so the result is bit-identical for any
    thread count.
    """
    if threads <= 1 or len(chunks) <= 1:
        parts: Iterable = map(fn, chunks)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, chunks))
    terms: list[float] = []
    for p in parts:
        arr = np.asarray(p, dtype=float).ravel()
        terms.extend(arr[arr != 0].tolist())
    return math.fsum(terms)
