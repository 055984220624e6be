"""
Ordered work pool and deterministic seed derivation.
"""

import hashlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from tqdm import tqdm

T = TypeVar("T")
R = TypeVar("R")


def derive_seed(seed: int, *task_id) -> int:
    """
    Derive a per-task seed from a global seed by stable hashing.

    Args:
        seed: Global seed
        task_id: Any printable parts identifying the task

    Returns:
        Seed in [0, 2**63)
    """
    key = ":".join([str(seed)] + [repr(part) for part in task_id])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def parallel_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    threads: int = 1,
    desc: Optional[str] = None,
    progress: bool = False,
) -> List[R]:
    """
    Map a function over items, returning results in input order.

    Each task owns its mutable state; results are collected in submission
    order so reductions over them are reproducible.

    Args:
        fn: Task function
        items: Task inputs
        threads: Worker count; 1 runs inline
        desc: Progress bar label
        progress: Show a tqdm progress bar

    Returns:
        List of results aligned with items
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in tqdm(items, desc=desc, disable=not progress)]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, item) for item in items]
        return [f.result() for f in tqdm(futures, desc=desc, disable=not progress)]
