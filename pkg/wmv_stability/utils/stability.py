# wmv-stability/wmv_stability/utils/stability.py
"""
Stability of weighted voting when trustworthiness is uncertain.

Two gaps are measured against the believed correctness ``omega(p_hat, p_hat)``:

* SoC (stability of correctness): the mean achieved correctness when trust
  stays at ``p_hat`` but the truth is drawn from ``P`` with mean ``p_hat``.
* SoO (stability of optimality): the mean correctness when trust is set to
  each drawn truth, i.e. the best achievable in hindsight.

Expectations are exact over a discrete support product when the budget says
so, otherwise Monte Carlo over replicate-seeded blocks.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from wmv_stability import config
from wmv_stability.utils.core import (
    as_trust,
    as_truth,
    build_decision_set,
    correctness_batch,
    revealed_correctness_batch,
)
from wmv_stability.utils.distributions import (
    ExtremeOnCube,
    TrustworthinessDistribution,
    fit_beta_mean_var,
)
from wmv_stability.utils.sampling import run_replicates, summarize
from wmv_stability.utils.validation import (
    BoundNotApplicableError,
    DomainError,
    MeanMismatchError,
    SupportOverflowError,
    validate_capacity,
    validate_lengths,
)

logger = logging.getLogger(__name__)

__all__ = [
    'Budget', 'StabilityReport', 'EXACT',
    'expected_correctness_fixed_trust', 'expected_correctness_revealed',
    'expected_correctness_fixed_truth', 'soc_gap', 'soo',
    'soo_bound_strong', 'soo_bound_weak', 'extreme_upper_bound',
    'hypercube_vertex_bound', 'extreme_distribution', 'infer_deltas',
    'fit_beta_mean_var',
]


@dataclass(frozen=True)
class Budget:
    """
    How expectations are computed.

    ``runs == 0`` means exact enumeration over the support product; any
    positive value is the Monte Carlo sample count, which needs a seed.
    """
    runs: int = 0
    seed: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        if self.runs < 0:
            raise DomainError(f"runs must be non-negative, got {self.runs}")
        if self.runs > 0 and self.seed is None:
            raise DomainError("Monte Carlo runs need an explicit seed")
        if self.workers < 1:
            raise DomainError(f"workers must be at least 1, got {self.workers}")

    @property
    def exact(self) -> bool:
        return self.runs == 0

    @property
    def mode(self) -> str:
        return 'exact' if self.exact else 'monte_carlo'

    @classmethod
    def auto(cls, distribution: TrustworthinessDistribution, runs: int = 0,
             seed: Optional[int] = None, workers: int = 1,
             limit: int = config.EXACT_SUPPORT_LIMIT) -> 'Budget':
        """Exact when the distribution is discrete and small enough, otherwise sampled."""
        size = distribution.support_size
        if size is not None and size <= limit:
            return cls()
        if runs <= 0 and size is not None:
            raise SupportOverflowError(
                f"Support product has {size:,} points, above the exact limit {limit:,}; "
                f"give a positive run count and a seed"
            )
        if runs <= 0:
            raise DomainError(
                "Distribution cannot be enumerated exactly; give a positive run count and a seed"
            )
        return cls(runs, seed, workers)


EXACT = Budget()


@dataclass
class StabilityReport:
    """Believed and achieved correctness for one trust vector and distribution."""
    omega_trust: float
    e_omega_mixed: float
    e_omega_revealed: float
    soc_gap: float
    soo: float
    bound_strong: Optional[float] = None
    bound_weak: Optional[float] = None
    mode: str = 'exact'
    runs: int = 0
    standard_errors: Dict[str, float] = field(default_factory=dict)

    @property
    def bounds_applicable(self) -> bool:
        return self.bound_strong is not None

    def to_dict(self) -> Dict:
        record = asdict(self)
        errors = record.pop('standard_errors')
        for key, value in errors.items():
            record[f'{key}_stderr'] = value
        return record


def _check_distribution(n: int, distribution: TrustworthinessDistribution) -> None:
    if len(distribution) != n:
        raise DomainError(f"Distribution has {len(distribution)} sources, expected {n}")


def _check_unbiased(trust: np.ndarray, distribution: TrustworthinessDistribution) -> None:
    gaps = np.abs(distribution.means - trust)
    if np.any(gaps > config.MEAN_TOLERANCE):
        i = int(np.argmax(gaps))
        raise MeanMismatchError(
            f"Distribution mean {distribution.means[i]!r} for source {i} differs from "
            f"trust {trust[i]!r}"
        )


def _expect(row_values, distribution: TrustworthinessDistribution,
            budget: Budget) -> Tuple[float, float]:
    """
    Expectation of a row-wise function of trustworthiness draws.

    Args:
        row_values: Callable mapping a (rows, n) batch to (rows,) values
        distribution: Product distribution to integrate against
        budget: Exact or Monte Carlo

    Returns:
        Tuple of (estimate, standard error); the error is 0 in exact mode
    """
    if budget.exact:
        points, weights = distribution.support_product()
        values = row_values(points)
        return math.fsum(weights * values), 0.0

    values = run_replicates(lambda rng, size: row_values(distribution.sample(rng, size)),
                            budget.runs, budget.seed, budget.workers)
    return summarize(values)


def expected_correctness_fixed_trust(trust, distribution: TrustworthinessDistribution,
                                     budget: Budget = EXACT,
                                     capacity: int = config.ENUMERATION_CAPACITY) -> Tuple[float, float]:
    """
    Mean correctness of the fixed decision set of ``trust`` when the truth is
    drawn from ``distribution``.

    Correctness is linear in the truth for a fixed decision set, so the
    exact value also equals the correctness at the distribution's means.

    Returns:
        Tuple of (estimate, standard error)
    """
    t = as_trust(trust)
    _check_distribution(len(t), distribution)
    decision = build_decision_set(t, capacity)
    estimate, stderr = _expect(decision.correctness_rows, distribution, budget)

    if budget.exact:
        at_means = decision.correctness(np.clip(distribution.means, 0.0, 1.0))
        if abs(at_means - estimate) > config.MEAN_TOLERANCE:
            logger.warning(f"Exact expectation {estimate!r} disagrees with the value at the means {at_means!r}")
    return estimate, stderr


def expected_correctness_revealed(distribution: TrustworthinessDistribution,
                                  budget: Budget = EXACT,
                                  capacity: int = config.ENUMERATION_CAPACITY) -> Tuple[float, float]:
    """Mean correctness when trust is set to each drawn truth."""
    validate_capacity(len(distribution), capacity)
    return _expect(lambda rows: revealed_correctness_batch(rows, capacity), distribution, budget)


def expected_correctness_fixed_truth(truth, trust_distribution: TrustworthinessDistribution,
                                     budget: Budget = EXACT,
                                     capacity: int = config.ENUMERATION_CAPACITY) -> Tuple[float, float]:
    """
    Mean correctness when the truth is fixed and trust values are drawn.

    Draws below 0.5 are used as trust 0.5.
    """
    p = as_truth(truth).as_array()
    _check_distribution(len(p), trust_distribution)

    def row_values(rows: np.ndarray) -> np.ndarray:
        clamped = np.clip(rows, 0.5, 1.0)
        return correctness_batch(clamped, p[None, :], capacity)

    return _expect(row_values, trust_distribution, budget)


def soc_gap(trust, distribution: TrustworthinessDistribution, budget: Budget = EXACT,
            capacity: int = config.ENUMERATION_CAPACITY) -> Tuple[float, float]:
    """
    Achieved minus believed correctness for unbiased uncertain trust.

    Returns:
        Tuple of (gap, standard error); exactly 0 up to rounding in exact mode
    """
    t = as_trust(trust)
    _check_distribution(len(t), distribution)
    _check_unbiased(t.as_array(), distribution)
    decision = build_decision_set(t, capacity)
    believed = decision.correctness_rows(t.as_array()[None, :])[0]
    achieved, stderr = expected_correctness_fixed_trust(t, distribution, budget, capacity)
    gap = achieved - believed
    logger.debug(f"SoC gap {gap:.3e} ({budget.mode})")
    return gap, stderr


def infer_deltas(trust, distribution: TrustworthinessDistribution) -> Optional[np.ndarray]:
    """
    Per-source support half-widths about the trust values, when the bound
    hypothesis ``delta_i <= 1 - p_hat_i`` can hold.

    Returns:
        np.ndarray or None when some marginal is unbounded or too wide
    """
    t = as_trust(trust).as_array()
    deltas = distribution.deltas(t)
    if deltas is None:
        return None
    if np.any(deltas > 1.0 - t + config.MEAN_TOLERANCE):
        return None
    return deltas


def _check_deltas(trust: np.ndarray, deltas) -> np.ndarray:
    d = np.broadcast_to(np.asarray(deltas, dtype=float), trust.shape).copy()
    if np.any(~np.isfinite(d)) or np.any(d < 0):
        raise DomainError(f"deltas must be finite and non-negative: {d.tolist()}")
    slack = 1.0 - trust
    bad = np.flatnonzero(d > slack + config.MEAN_TOLERANCE)
    if bad.size:
        i = int(bad[0])
        raise BoundNotApplicableError(
            f"delta[{i}] = {d[i]!r} exceeds 1 - trust = {slack[i]!r}; the bound does not apply"
        )
    return d


def _bound_ratios(trust: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    with np.errstate(divide='ignore', invalid='ignore'):
        ratios = np.where(trust < 1.0, deltas / np.where(trust < 1.0, 1.0 - trust, 1.0), 0.0)
    return np.minimum(ratios, 1.0)


def _believed(trust: np.ndarray, omega: Optional[float], capacity: int) -> float:
    if omega is not None:
        return float(omega)
    return build_decision_set(trust, capacity).correctness_rows(trust[None, :])[0]


def soo_bound_strong(trust, deltas, omega: Optional[float] = None,
                     capacity: int = config.ENUMERATION_CAPACITY) -> float:
    """
    Product-form upper bound on SoO:
    ``(1 - omega) * (1 - prod(1 - delta_i / (2 (1 - p_hat_i))))``.

    Args:
        trust: Trust vector
        deltas: Per-source (or one shared) support half-width
        omega: Believed correctness, computed when not given

    Returns:
        float: Bound value
    """
    t = as_trust(trust).as_array()
    d = _check_deltas(t, deltas)
    ratios = _bound_ratios(t, d)
    believed = _believed(t, omega, capacity)
    return (1.0 - believed) * (1.0 - math.prod(1.0 - ratios / 2.0))


def soo_bound_weak(trust, deltas, omega: Optional[float] = None,
                   capacity: int = config.ENUMERATION_CAPACITY) -> float:
    """Additive upper bound on SoO: ``(1 - omega) / 2 * sum(delta_i / (1 - p_hat_i))``."""
    t = as_trust(trust).as_array()
    d = _check_deltas(t, deltas)
    ratios = _bound_ratios(t, d)
    believed = _believed(t, omega, capacity)
    return (1.0 - believed) / 2.0 * math.fsum(ratios)


def soo(trust, distribution: TrustworthinessDistribution, budget: Budget = EXACT,
        capacity: int = config.ENUMERATION_CAPACITY) -> StabilityReport:
    """
    Full stability report: believed correctness, both achieved means, the
    SoC and SoO gaps, and the optimality bounds when they apply.
    """
    t = as_trust(trust)
    arr = t.as_array()
    _check_distribution(len(t), distribution)
    _check_unbiased(arr, distribution)

    decision = build_decision_set(t, capacity)
    believed = decision.correctness_rows(arr[None, :])[0]
    mixed, mixed_se = expected_correctness_fixed_trust(t, distribution, budget, capacity)
    revealed, revealed_se = expected_correctness_revealed(distribution, budget, capacity)

    report = StabilityReport(
        omega_trust=believed,
        e_omega_mixed=mixed,
        e_omega_revealed=revealed,
        soc_gap=mixed - believed,
        soo=revealed - believed,
        mode=budget.mode,
        runs=budget.runs,
        standard_errors={
            'e_omega_mixed': mixed_se,
            'e_omega_revealed': revealed_se,
            'soc_gap': mixed_se,
            'soo': revealed_se,
        },
    )

    deltas = infer_deltas(t, distribution)
    if deltas is not None:
        report.bound_strong = soo_bound_strong(arr, deltas, omega=believed)
        report.bound_weak = soo_bound_weak(arr, deltas, omega=believed)
    else:
        logger.info("Optimality bounds do not apply to this distribution")

    logger.debug(f"SoO {report.soo:.6g}, SoC {report.soc_gap:.3e} ({budget.mode})")
    return report


def _check_cube(center: np.ndarray, cube, capacity: int) -> Tuple[np.ndarray, np.ndarray]:
    cube = np.asarray(cube, dtype=float)
    if cube.ndim != 2 or cube.shape != (center.size, 2):
        raise DomainError(f"cube must be {center.size} (a, b) pairs, got shape {cube.shape}")
    validate_capacity(center.size, capacity)
    low, high = cube[:, 0], cube[:, 1]
    if np.any(low < 0) or np.any(high > 1) or np.any(low > high):
        raise DomainError(f"cube intervals must satisfy 0 <= a <= b <= 1: {cube.tolist()}")
    outside = (center < low - config.MEAN_TOLERANCE) | (center > high + config.MEAN_TOLERANCE)
    if np.any(outside):
        i = int(np.flatnonzero(outside)[0])
        raise DomainError(f"mean {center[i]!r} of source {i} lies outside [{low[i]!r}, {high[i]!r}]")
    return low, high


def extreme_distribution(center, cube) -> TrustworthinessDistribution:
    """Product of the two-point extreme marginals on a cube with the given means."""
    center = np.asarray(center, dtype=float)
    low, high = _check_cube(center, cube, config.ENUMERATION_CAPACITY)
    return TrustworthinessDistribution(
        [ExtremeOnCube(a, b, c) for a, b, c in zip(low, high, center)]
    )


def _vertex_expectation(center: np.ndarray, cube, capacity: int) -> float:
    """
    Vertex-weighted average of revealed correctness over a cube.

    Vertex weights are ``prod (b_i - p_i) / (b_i - a_i)`` for lower ends and
    ``prod (p_i - a_i) / (b_i - a_i)`` for upper ends; degenerate axes carry
    weight 1 at their single point.
    """
    _check_cube(center, cube, capacity)
    distribution = extreme_distribution(center, cube)
    points, weights = distribution.support_product(limit=1 << len(distribution))
    return math.fsum(weights * revealed_correctness_batch(points, capacity))


def extreme_upper_bound(trust, cube, capacity: int = config.VERTEX_CAPACITY) -> float:
    """
    Mean revealed correctness under the extreme distribution on ``cube``
    with means ``trust``; no distribution on the cube with those means does
    better.
    """
    t = as_trust(trust).as_array()
    return _vertex_expectation(t, cube, capacity)


def hypercube_vertex_bound(truth, cube, capacity: int = config.VERTEX_CAPACITY) -> float:
    """
    Upper bound on revealed correctness at ``truth`` from the cube's vertices.

    Revealed correctness is convex along each axis, so interpolating the
    vertex values with the barycentric weights of ``truth`` bounds it above.
    """
    p = as_truth(truth).as_array()
    return _vertex_expectation(p, cube, capacity)
