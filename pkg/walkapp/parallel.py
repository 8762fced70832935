import logging

from django.conf import settings
from joblib import Parallel, delayed

logger = logging.getLogger(__name__)


def default_threads():
    if not settings.configured:
        return 1
    return max(1, int(getattr(settings, 'WALKAPP', {}).get('THREADS', 1)))


def ordered_map(func, items, threads=None):
    """
    Map ``func`` over ``items`` and return the results in input order.

    Workers are threads (numpy releases the GIL in the heavy kernels), so the
    result is identical for every ``threads`` value.
    """
    items = list(items)
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(items) < 2:
        return [func(item) for item in items]
    logger.debug('mapping %d tasks over %d threads', len(items), threads)
    return Parallel(n_jobs=threads, prefer='threads')(delayed(func)(item) for item in items)
