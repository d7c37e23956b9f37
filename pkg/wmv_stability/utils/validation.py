# wmv-stability/wmv_stability/utils/validation.py
"""
Error types and input validators shared by the analysis modules.
"""
import logging
from typing import Iterable, Sequence

import numpy as np

from wmv_stability import config

logger = logging.getLogger(__name__)


class WMVError(Exception):
    """Base class for all analysis errors."""


class DomainError(WMVError, ValueError):
    """A probability, role, length or grid value is outside its legal range."""


class MeanMismatchError(DomainError):
    """Distribution means do not match the trust vector (trust is biased)."""


class GridTooCoarseError(DomainError):
    """Too few grid points to judge the shape of a curve."""


class BoundNotApplicableError(DomainError):
    """The support-width hypothesis of the optimality bounds fails."""


class CapacityError(WMVError, ValueError):
    """An enumeration would exceed the configured budget."""


class SupportOverflowError(CapacityError):
    """The support product of a distribution is too large for exact mode."""


ROLE_RANGES = {
    'trust': (0.5, 1.0),
    'trustworthiness': (0.0, 1.0),
}


def validate_probabilities(values: Iterable[float], role: str,
                           field: str = 'values') -> np.ndarray:
    """
    Validate a vector of per-source probabilities against its role.

    Args:
        values: Per-source probabilities
        role: 'trust' or 'trustworthiness'
        field: Name used in error messages

    Returns:
        np.ndarray: The values as a float array
    """
    if role not in ROLE_RANGES:
        raise DomainError(f"Unknown role for {field}: {role!r}")

    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                     dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"{field} must be a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{field} contains non-finite values")

    low, high = ROLE_RANGES[role]
    bad = np.flatnonzero((arr < low) | (arr > high))
    if bad.size:
        i = int(bad[0])
        raise DomainError(
            f"{field}[{i}] = {arr[i]!r} is outside [{low}, {high}] for role={role}"
        )
    return arr


def validate_lengths(first: Sequence, second: Sequence,
                     names: tuple = ('trust', 'truth')) -> int:
    """Check two per-source vectors have the same length and return it."""
    if len(first) != len(second):
        raise DomainError(
            f"Length mismatch: {names[0]} has {len(first)} sources, "
            f"{names[1]} has {len(second)}"
        )
    return len(first)


def validate_capacity(n: int, capacity: int = config.ENUMERATION_CAPACITY) -> None:
    """Reject source counts whose 2**n realizations exceed the enumeration budget."""
    if n < 1:
        raise DomainError(f"Source count must be positive, got {n}")
    if n > capacity:
        raise CapacityError(
            f"n = {n} sources exceeds the enumeration capacity of {capacity} "
            f"({2 ** n:,} realizations)"
        )


def validate_index(index: int, n: int, field: str = 'index') -> int:
    """Check a source index is within range."""
    if not 0 <= index < n:
        raise DomainError(f"{field} = {index} is out of range for {n} sources")
    return int(index)


def validate_grid(grid: Iterable[float], field: str = 'grid',
                  low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """
    Validate a sweep grid: strictly increasing, finite, within [low, high].

    Args:
        grid: Abscissa values
        field: Name used in error messages
        low: Smallest legal value
        high: Largest legal value

    Returns:
        np.ndarray: The grid as a float array
    """
    arr = np.asarray(list(grid) if not isinstance(grid, np.ndarray) else grid, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"{field} must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{field} contains non-finite values")
    if np.any(np.diff(arr) <= 0):
        raise DomainError(f"{field} must be strictly increasing")
    if arr[0] < low or arr[-1] > high:
        raise DomainError(
            f"{field} spans [{arr[0]!r}, {arr[-1]!r}], outside the legal range [{low}, {high}]"
        )
    return arr
