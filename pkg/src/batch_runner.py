"""
Bounded thread-pool execution with progress reporting.
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed

from tqdm import tqdm

logger = logging.getLogger(__name__)


def run_ordered(operation, items, max_workers=4, desc=None, show_progress=True):
    """Apply operation to every item concurrently and return results in input order.

    If several items fail, the exception of the first failing item (in input
    order) is raised, so errors are reproducible regardless of scheduling.

    Args:
        operation: Callable taking (index, item)
        items: Sequence of work items
        max_workers: Upper bound on concurrent calls
        desc: Progress bar label
        show_progress: Whether to display a tqdm progress bar

    Returns:
        list: operation results aligned with items
    """
    items = list(items)
    if not items:
        return []
    if max_workers <= 1 or len(items) == 1:
        results = []
        for index, item in enumerate(tqdm(items, desc=desc, disable=not show_progress)):
            results.append(operation(index, item))
        return results

    progress_bar = tqdm(total=len(items), desc=desc, disable=not show_progress)
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = [executor.submit(operation, index, item) for index, item in enumerate(items)]
        for _ in as_completed(futures):
            progress_bar.update(1)
    progress_bar.close()

    results = []
    for future in futures:
        results.append(future.result())
    return results
