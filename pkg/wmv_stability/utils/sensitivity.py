# wmv-stability/wmv_stability/utils/sensitivity.py
"""
Correctness sweeps, 2-D surfaces, breakpoint prediction and shape checks.

Three sweep regimes are supported:

* direct: trust and truth move together (the optimal rule's own curve)
* truth_varying: the decision set is fixed while the truth moves
* trust_varying: the truth is fixed while the trust moves
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from wmv_stability import config
from wmv_stability.utils.core import (
    VectorLike,
    _realization_tables,
    as_trust,
    as_truth,
    correctness,
    correctness_batch,
)
from wmv_stability.utils.validation import (
    DomainError,
    GridTooCoarseError,
    validate_capacity,
    validate_grid,
    validate_index,
    validate_lengths,
    validate_probabilities,
)

logger = logging.getLogger(__name__)


class SweepMode(str, Enum):
    DIRECT = 'direct'
    TRUTH_VARYING = 'truth_varying'
    TRUST_VARYING = 'trust_varying'


class Shape(str, Enum):
    PIECEWISE_LINEAR_CONVEX = 'piecewise_linear_convex'
    SEGMENTWISE_CONCAVE = 'segmentwise_concave'
    STAIRCASE = 'staircase'


@dataclass
class SweepResult:
    """One correctness curve over a grid of a varied coordinate."""
    mode: SweepMode
    varied_indices: List[int]
    grid: np.ndarray
    values: np.ndarray
    breakpoints: Optional[np.ndarray] = None
    source_count: int = 0
    reference: Optional[float] = None
    optimum: Optional[float] = None

    def __post_init__(self):
        self.mode = SweepMode(self.mode)
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise DomainError(
                f"values has {self.values.size} entries but grid has {self.grid.size}"
            )
        if self.grid.size > 1 and np.any(np.diff(self.grid) <= 0):
            raise DomainError("grid must be strictly increasing")
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise DomainError("correctness values must lie in [0, 1]")
        if self.breakpoints is not None:
            self.breakpoints = np.asarray(self.breakpoints, dtype=float)

    def __len__(self) -> int:
        return self.grid.size

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'x': self.grid, 'omega': self.values}, columns=config.SWEEP_COLUMNS)


@dataclass(frozen=True)
class IdenticalGroupSpec:
    """``m`` sources sharing one probability swept over ``p_grid``, plus fixed ``rest``."""
    m: int
    p_grid: Tuple[float, ...]
    rest: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.m < 1:
            raise DomainError(f"m must be at least 1, got {self.m}")
        object.__setattr__(self, 'p_grid', tuple(float(x) for x in self.p_grid))
        rest = tuple(float(x) for x in self.rest)
        if rest:
            validate_probabilities(rest, 'trust', field='rest')
        object.__setattr__(self, 'rest', rest)

    @property
    def n(self) -> int:
        return self.m + len(self.rest)


def _mode_grid(grid: Sequence[float], mode: SweepMode, field: str) -> Tuple[np.ndarray, np.ndarray]:
    """
    Validate a grid for a mode.

    Returns:
        Tuple of (grid as given, values actually substituted)
    """
    if mode is SweepMode.DIRECT:
        arr = validate_grid(grid, field=field, low=0.5, high=1.0)
        return arr, arr
    arr = validate_grid(grid, field=field, low=0.0, high=1.0)
    if mode is SweepMode.TRUTH_VARYING:
        return arr, arr
    clamped = np.clip(arr, 0.5, 1.0)
    below = int(np.sum(arr < 0.5))
    if below:
        logger.warning(f"{below:,} {field} value(s) below 0.5 clamped to 0.5 for the trust role")
    return arr, clamped


def _substitute(trust: np.ndarray, truth: np.ndarray, mode: SweepMode,
                indices: Sequence[int], columns: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    rows = columns.shape[0]
    trust_rows = np.tile(trust, (rows, 1))
    truth_rows = np.tile(truth, (rows, 1))
    for col, index in enumerate(indices):
        if mode in (SweepMode.DIRECT, SweepMode.TRUST_VARYING):
            trust_rows[:, index] = columns[:, col]
        if mode in (SweepMode.DIRECT, SweepMode.TRUTH_VARYING):
            truth_rows[:, index] = columns[:, col]
    return trust_rows, truth_rows


def _dedupe(values: np.ndarray, tolerance: float = config.BREAKPOINT_TOLERANCE) -> List[float]:
    kept: List[float] = []
    for v in np.sort(values):
        if not kept or v - kept[-1] > tolerance:
            kept.append(float(v))
    return kept


def sweep(base_trust: VectorLike, base_truth: VectorLike, mode: Union[SweepMode, str],
          index: int, grid: Sequence[float],
          capacity: int = config.ENUMERATION_CAPACITY) -> SweepResult:
    """
    Correctness along one coordinate.

    Args:
        base_trust: Trust vector the sweep starts from
        base_truth: Trustworthiness vector the sweep starts from
        mode: Which vector(s) take the grid value
        index: Varied source
        grid: Strictly increasing abscissas

    Returns:
        SweepResult: Values, predicted breakpoints and plateau reference
    """
    mode = SweepMode(mode)
    t = as_trust(base_trust).as_array()
    p = as_truth(base_truth).as_array()
    n = validate_lengths(t, p)
    validate_capacity(n, capacity)
    index = validate_index(index, n)
    given, used = _mode_grid(grid, mode, 'grid')

    trust_rows, truth_rows = _substitute(t, p, mode, [index], used[:, None])
    values = correctness_batch(trust_rows, truth_rows, capacity)

    breakpoints = None
    if mode is SweepMode.TRUTH_VARYING:
        breakpoints = np.array([])
    else:
        breakpoints = np.array(predict_breakpoints_single(t, index, capacity))

    reference = optimum = None
    if mode is SweepMode.TRUST_VARYING:
        others = np.delete(np.arange(n), index)
        if p[index] >= 0.5 and np.array_equal(t[others], p[others]):
            reference = float(p[index])
            optimum = correctness(np.clip(p, 0.5, 1.0), p, capacity)

    logger.debug(f"Swept source {index} over {given.size:,} points ({mode.value})")
    return SweepResult(mode=mode, varied_indices=[index], grid=given, values=values,
                       breakpoints=breakpoints, source_count=n,
                       reference=reference, optimum=optimum)


def sweep_identical(spec: IdenticalGroupSpec,
                    mode: Union[SweepMode, str] = SweepMode.DIRECT,
                    capacity: int = config.ENUMERATION_CAPACITY) -> SweepResult:
    """
    Direct-mode correctness when the first ``m`` sources share one probability.

    The identical sources occupy indices ``0..m-1``; ``rest`` follows.
    """
    mode = SweepMode(mode)
    if mode is not SweepMode.DIRECT:
        raise DomainError("Identical-group sweeps are defined for direct mode only")
    validate_capacity(spec.n, capacity)
    grid = validate_grid(spec.p_grid, field='p_grid', low=0.5, high=1.0)

    rows = np.column_stack([np.repeat(grid[:, None], spec.m, axis=1),
                            np.tile(np.array(spec.rest, dtype=float), (grid.size, 1))])
    values = correctness_batch(rows, rows, capacity)
    return SweepResult(mode=mode, varied_indices=list(range(spec.m)), grid=grid, values=values,
                       breakpoints=np.array(predict_breakpoints_identical(spec, capacity)),
                       source_count=spec.n)


def surface_2d(base_trust: VectorLike, base_truth: VectorLike, mode: Union[SweepMode, str],
               index_i: int, index_j: int, grid_i: Sequence[float], grid_j: Sequence[float],
               capacity: int = config.ENUMERATION_CAPACITY) -> np.ndarray:
    """
    Correctness over the product of two grids.

    Returns:
        np.ndarray: (len(grid_i), len(grid_j)) matrix, row ``k`` at ``grid_i[k]``
    """
    mode = SweepMode(mode)
    t = as_trust(base_trust).as_array()
    p = as_truth(base_truth).as_array()
    n = validate_lengths(t, p)
    validate_capacity(n, capacity)
    index_i = validate_index(index_i, n, 'index_i')
    index_j = validate_index(index_j, n, 'index_j')
    if index_i == index_j:
        raise DomainError("Surface indices must differ")
    _, used_i = _mode_grid(grid_i, mode, 'grid_i')
    _, used_j = _mode_grid(grid_j, mode, 'grid_j')

    xx, yy = np.meshgrid(used_i, used_j, indexing='ij')
    columns = np.column_stack([xx.ravel(), yy.ravel()])
    trust_rows, truth_rows = _substitute(t, p, mode, [index_i, index_j], columns)
    values = correctness_batch(trust_rows, truth_rows, capacity)
    logger.debug(f"Surface over {columns.shape[0]:,} cells ({mode.value})")
    return values.reshape(used_i.size, used_j.size)


def surface_to_frame(grid_i: Sequence[float], grid_j: Sequence[float],
                     values: np.ndarray) -> pd.DataFrame:
    """Long-form ``x,y,omega`` table of a surface, row-major."""
    xx, yy = np.meshgrid(np.asarray(grid_i, dtype=float), np.asarray(grid_j, dtype=float),
                         indexing='ij')
    return pd.DataFrame({'x': xx.ravel(), 'y': yy.ravel(), 'omega': np.asarray(values).ravel()},
                        columns=config.SURFACE_COLUMNS)


def predict_breakpoints_single(base_trust: VectorLike, index: int,
                               capacity: int = config.ENUMERATION_CAPACITY) -> List[float]:
    """
    Values of source ``index`` at which a realization pair changes sides.

    For every assignment of the other sources with probability ``P`` and
    negated probability ``Q``, the pair flips at ``P / (P + Q)``. Only
    thresholds in [0.5, 1] are kept.

    Returns:
        Sorted, de-duplicated thresholds
    """
    t = as_trust(base_trust).as_array()
    n = len(t)
    validate_capacity(n, capacity)
    index = validate_index(index, n)
    if n == 1:
        return []

    table = _realization_tables(np.delete(t, index)[None, :])[0]
    opposite = table[::-1]
    total = table + opposite
    valid = total > 0
    thresholds = table[valid] / total[valid]
    thresholds = thresholds[(thresholds >= 0.5) & (thresholds <= 1.0)]
    return _dedupe(thresholds)


def predict_breakpoints_identical(spec: IdenticalGroupSpec,
                                  capacity: int = config.ENUMERATION_CAPACITY) -> List[float]:
    """
    Shared values of an identical group at which a realization pair changes sides.

    For ``k < m / 2`` identical sources disagreeing and a fixed-source
    assignment with probabilities ``P`` and ``Q`` for it and its negation,
    the threshold is ``1 / (1 + (Q / P) ** (1 / (m - 2k)))``.
    """
    validate_capacity(spec.n, capacity)
    if not spec.rest:
        return []

    table = _realization_tables(np.array(spec.rest)[None, :])[0]
    opposite = table[::-1]
    valid = table > 0
    ratios = opposite[valid] / table[valid]

    thresholds = []
    for k in range((spec.m + 1) // 2):
        exponent = 1.0 / (spec.m - 2 * k)
        thresholds.append(1.0 / (1.0 + ratios ** exponent))
    thresholds = np.concatenate(thresholds)
    thresholds = thresholds[(thresholds >= 0.5) & (thresholds <= 1.0)]
    return _dedupe(thresholds)


def _slopes(result: SweepResult) -> np.ndarray:
    return np.diff(result.values) / np.diff(result.grid)


def _kink_indices(result: SweepResult, tolerance: float) -> np.ndarray:
    return np.flatnonzero(np.diff(_slopes(result)) > tolerance) + 1


def detect_kinks(result: SweepResult, tolerance: float = config.SHAPE_TOLERANCE) -> List[float]:
    """Grid points where the discrete slope increases by more than ``tolerance``."""
    if len(result) < 3:
        return []
    return [float(result.grid[k]) for k in _kink_indices(result, tolerance)]


def count_plateaus(values: Sequence[float], tolerance: float = config.CLUSTER_TOLERANCE) -> int:
    """Number of distinct values after clustering neighbours within ``tolerance``."""
    arr = np.sort(np.asarray(values, dtype=float))
    if arr.size == 0:
        return 0
    return int(1 + np.sum(np.diff(arr) > tolerance))


@dataclass
class ShapeReport:
    shape: Shape
    violations: List[str] = field(default_factory=list)
    kinks: List[float] = field(default_factory=list)
    plateaus: Optional[int] = None

    @property
    def passed(self) -> bool:
        return not self.violations


def _near_breakpoint(breakpoints: np.ndarray, low: float, high: float) -> bool:
    return bool(np.any((breakpoints >= low) & (breakpoints <= high)))


def _check_monotone(result: SweepResult, tolerance: float, report: ShapeReport) -> None:
    drops = np.flatnonzero(np.diff(result.values) < -tolerance)
    for k in drops:
        report.violations.append(
            f"monotonicity: value drops by {result.values[k] - result.values[k + 1]:.3e} "
            f"between x={result.grid[k]:.6g} and x={result.grid[k + 1]:.6g}"
        )


def _check_kinks_explained(result: SweepResult, tolerance: float, report: ShapeReport) -> None:
    if result.breakpoints is None:
        return
    g = result.grid
    for k in _kink_indices(result, tolerance):
        step = max(g[k] - g[k - 1], g[k + 1] - g[k]) * (1.0 + 1e-9)
        if not _near_breakpoint(result.breakpoints, g[k] - step, g[k] + step):
            report.violations.append(
                f"breakpoints: slope change at x={g[k]:.6g} has no predicted breakpoint nearby"
            )


def _check_staircase(result: SweepResult, tolerance: float, report: ShapeReport) -> None:
    g, v = result.grid, result.values
    report.plateaus = count_plateaus(v)
    if result.source_count:
        limit = 2 ** (result.source_count - 1)
        if report.plateaus > limit:
            report.violations.append(
                f"staircase: {report.plateaus} distinct values exceed the {limit} possible plateaus"
            )

    top = v.max()
    if result.optimum is not None and top > result.optimum + tolerance:
        report.violations.append(
            f"staircase: value {top!r} exceeds the optimum {result.optimum!r}"
        )

    ref = result.reference
    if ref is None or ref < g[0] or ref > g[-1]:
        return
    at = np.flatnonzero(np.abs(g - ref) <= config.CLUSTER_TOLERANCE)
    if at.size:
        best = v[at].max()
    else:
        hi = int(np.searchsorted(g, ref))
        best = max(v[hi - 1], v[hi])
    if best < top - config.CLUSTER_TOLERANCE:
        report.violations.append(
            f"staircase: maximum {top!r} is not on the plateau containing x={ref:.6g} ({best!r})"
        )

    left = g <= ref
    right = g >= ref
    if np.any(np.diff(v[left]) < -tolerance):
        report.violations.append(f"staircase: values decrease below x={ref:.6g}")
    if np.any(np.diff(v[right]) > tolerance):
        report.violations.append(f"staircase: values increase above x={ref:.6g}")


def verify_shape(result: SweepResult, expected: Union[Shape, str],
                 tolerance: float = config.SHAPE_TOLERANCE) -> ShapeReport:
    """
    Check a curve against one of the three shapes a sweep can take.

    * piecewise_linear_convex: non-decreasing, slopes non-decreasing, and
      every slope change near a predicted breakpoint
    * segmentwise_concave: non-decreasing and concave between breakpoints
    * staircase: few plateaus, peak on the plateau holding the true value

    Returns:
        ShapeReport: Empty ``violations`` means the curve passes
    """
    expected = Shape(expected)
    if len(result) < 3:
        raise GridTooCoarseError(f"Shape checks need at least 3 grid points, got {len(result)}")

    report = ShapeReport(shape=expected, kinks=detect_kinks(result, tolerance))
    g = result.grid
    slope_changes = np.diff(_slopes(result))

    if expected is Shape.PIECEWISE_LINEAR_CONVEX:
        _check_monotone(result, tolerance, report)
        for k in np.flatnonzero(slope_changes < -tolerance) + 1:
            report.violations.append(f"convexity: slope decreases at x={g[k]:.6g}")
        _check_kinks_explained(result, tolerance, report)

    elif expected is Shape.SEGMENTWISE_CONCAVE:
        _check_monotone(result, tolerance, report)
        breakpoints = result.breakpoints if result.breakpoints is not None else np.array([])
        for k in np.flatnonzero(slope_changes > tolerance) + 1:
            if not _near_breakpoint(breakpoints, g[k - 1], g[k + 1]):
                report.violations.append(
                    f"concavity: slope increases at x={g[k]:.6g} away from any breakpoint"
                )

    else:
        _check_staircase(result, tolerance, report)

    if report.violations:
        logger.debug(f"{expected.value}: {len(report.violations)} violation(s)")
    return report
