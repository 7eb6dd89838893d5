import concurrent.futures
import logging
from typing import Callable, Iterable, List, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """Apply `fn` to every item, in worker processes when `workers > 1`.

    Results come back in the order of `items` regardless of scheduling. `fn` and the items must be picklable.
    """
    items = list(items)
    if not workers or workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    logger.debug("Running %d tasks on %d processes", len(items), workers)
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))
