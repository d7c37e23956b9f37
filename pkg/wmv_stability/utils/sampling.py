# wmv-stability/wmv_stability/utils/sampling.py
"""
Replicate-indexed random streams and order-independent Monte Carlo aggregation.

Samples are drawn in fixed-size blocks; block ``k`` always uses the generator
seeded by ``SeedSequence([seed, k])``, so results do not depend on how many
workers evaluate the blocks.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Tuple

import numpy as np

from wmv_stability import config
from wmv_stability.utils.validation import DomainError

logger = logging.getLogger(__name__)


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Generator for one replicate block, derived from (seed, replicate)."""
    return np.random.default_rng(np.random.SeedSequence([seed, replicate]))


def replicate_blocks(runs: int,
                     block_size: int = config.MC_BLOCK_SIZE) -> List[Tuple[int, int]]:
    """
    Split a run count into (block_index, block_size) pairs.

    Args:
        runs: Total number of samples
        block_size: Samples per block

    Returns:
        List of (index, size) tuples covering exactly ``runs`` samples
    """
    if runs < 1:
        raise DomainError(f"runs must be at least 1, got {runs}")
    full, remainder = divmod(runs, block_size)
    blocks = [(k, block_size) for k in range(full)]
    if remainder:
        blocks.append((full, remainder))
    return blocks


def run_replicates(draw: Callable[[np.random.Generator, int], np.ndarray],
                   runs: int, seed: int, workers: int = 1,
                   block_size: int = config.MC_BLOCK_SIZE) -> np.ndarray:
    """
    Evaluate ``draw(rng, size)`` over all replicate blocks and concatenate.

    Args:
        draw: Callable producing one value per sample for a block
        runs: Total number of samples
        seed: Master seed (non-negative integer)
        workers: Thread count; output is identical for any value
        block_size: Samples per block

    Returns:
        np.ndarray: Per-sample values in block order
    """
    if seed is None or int(seed) < 0:
        raise DomainError(f"seed must be a non-negative integer, got {seed!r}")
    if workers < 1:
        raise DomainError(f"workers must be at least 1, got {workers}")

    blocks = replicate_blocks(runs, block_size)
    logger.debug(f"Sampling {runs:,} runs in {len(blocks):,} blocks with {workers} worker(s)")

    def job(block: Tuple[int, int]) -> np.ndarray:
        index, size = block
        return np.asarray(draw(replicate_rng(int(seed), index), size), dtype=float)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, blocks))
    else:
        parts = [job(block) for block in blocks]

    return np.concatenate(parts)


def summarize(values: np.ndarray) -> Tuple[float, float]:
    """
    Mean and standard error of per-sample values.

    Both sums are exactly rounded, so the result does not depend on
    sample order.
    """
    values = np.asarray(values, dtype=float)
    count = values.size
    if count == 0:
        raise DomainError("Cannot summarize an empty sample")
    mean = math.fsum(values) / count
    if count == 1:
        return mean, 0.0
    variance = math.fsum((values - mean) ** 2) / (count - 1)
    return mean, math.sqrt(variance / count)


def binomial_stderr(estimate: float, runs: int) -> float:
    """Standard error of an empirical frequency."""
    return math.sqrt(max(estimate * (1.0 - estimate), 0.0) / runs)
