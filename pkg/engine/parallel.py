# engine/parallel.py
import logging

from joblib import Parallel, delayed

import config

logger = logging.getLogger(__name__)


def parallel_map(func, items, threads=None):
    """Apply func to every item, returning results in submission order.

    Each work item reduces in its own fixed order, so the output does not
    depend on the worker count.
    """
    items = list(items)
    threads = config.THREADS if threads is None else threads
    if threads <= 1 or len(items) < 2:
        return [func(item) for item in items]
    logger.debug("mapping %d items over %d threads", len(items), threads)
    return Parallel(n_jobs=threads, prefer="threads")(delayed(func)(item) for item in items)
