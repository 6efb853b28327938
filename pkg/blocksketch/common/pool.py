from __future__ import annotations

import concurrent.futures
from typing import Callable, List, Optional, Sequence, TypeVar

from .config import Config

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(func: Callable[[T], R], items: Sequence[T], workers: Optional[int] = None) -> List[R]:
    """Apply `func` to every item in a thread pool; results come back in item order.

    `func` must not share mutable state across items; each item carries its
    own random stream.
    """
    workers = Config.threads() if workers is None else max(1, int(workers))
    if workers == 1 or len(items) <= 1:
        return [func(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items))
