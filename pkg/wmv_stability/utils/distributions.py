# wmv-stability/wmv_stability/utils/distributions.py
"""
Per-source marginal distributions over [0, 1] and their product.

Discrete marginals expose an explicit support for exact expectations;
continuous ones (Beta, truncated normal) are sampled through scipy.stats.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from wmv_stability import config
from wmv_stability.utils.validation import DomainError, SupportOverflowError

logger = logging.getLogger(__name__)

_EDGE = 1e-12


def _check_unit(value: float, field: str) -> float:
    value = float(value)
    if not math.isfinite(value) or value < -_EDGE or value > 1.0 + _EDGE:
        raise DomainError(f"{field} = {value!r} is outside [0, 1]")
    return min(1.0, max(0.0, value))


def fit_beta_mean_var(mean: float, variance: float) -> Tuple[float, float]:
    """
    Beta shape parameters with the given mean and variance.

    Args:
        mean: Mean in (0, 1)
        variance: Variance in (0, mean * (1 - mean))

    Returns:
        Tuple of (alpha, beta)
    """
    if not 0.0 < mean < 1.0:
        raise DomainError(f"Beta mean must be in (0, 1), got {mean!r}")
    limit = mean * (1.0 - mean)
    term = limit / variance - 1.0 if variance > 0.0 else 0.0
    # mean * (1 - mean) rounds up for some means, so check the shape term too
    if not 0.0 < variance < limit or term <= config.MEAN_TOLERANCE:
        raise DomainError(
            f"Beta variance {variance!r} is infeasible for mean {mean!r} "
            f"(must be in (0, {limit!r}))"
        )
    return mean * term, (1.0 - mean) * term


class Marginal:
    """Distribution of one source's trustworthiness."""
    kind = 'marginal'

    @property
    def expectation(self) -> float:
        raise NotImplementedError

    def support(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """(values, probabilities) for discrete marginals, None otherwise."""
        return None

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def delta_about(self, center: float) -> Optional[float]:
        """Half-width of the smallest interval around ``center`` holding the support."""
        return None

    def to_dict(self) -> Dict:
        raise NotImplementedError


class _DiscreteMarginal(Marginal):

    @property
    def expectation(self) -> float:
        values, probs = self.support()
        return math.fsum(values * probs)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        values, probs = self.support()
        if values.size == 1:
            return np.full(size, values[0])
        return rng.choice(values, size=size, p=probs)

    def delta_about(self, center: float) -> Optional[float]:
        values, _ = self.support()
        return float(np.max(np.abs(values - center)))


@dataclass(frozen=True)
class PointMass(_DiscreteMarginal):
    p: float
    kind = 'point'

    def __post_init__(self):
        object.__setattr__(self, 'p', _check_unit(self.p, 'p'))

    def support(self):
        return np.array([self.p]), np.array([1.0])

    def to_dict(self):
        return {'kind': self.kind, 'p': self.p}


@dataclass(frozen=True)
class TwoPoint(_DiscreteMarginal):
    """Mass ``prob_a`` at ``a`` and the rest at ``b``."""
    a: float
    b: float
    prob_a: float
    kind = 'two_point'

    def __post_init__(self):
        object.__setattr__(self, 'a', _check_unit(self.a, 'a'))
        object.__setattr__(self, 'b', _check_unit(self.b, 'b'))
        if not 0.0 <= self.prob_a <= 1.0:
            raise DomainError(f"prob_a = {self.prob_a!r} is outside [0, 1]")

    def support(self):
        if self.a == self.b or self.prob_a in (0.0, 1.0):
            point = self.a if self.prob_a > 0.0 else self.b
            return np.array([point]), np.array([1.0])
        return np.array([self.a, self.b]), np.array([self.prob_a, 1.0 - self.prob_a])

    def to_dict(self):
        return {'kind': self.kind, 'a': self.a, 'b': self.b, 'prob_a': self.prob_a}


@dataclass(frozen=True)
class ExtremeSymmetric(_DiscreteMarginal):
    """Half the mass at ``mean - delta`` and half at ``mean + delta``."""
    mean: float
    delta: float
    kind = 'extreme'

    def __post_init__(self):
        if self.delta < 0:
            raise DomainError(f"delta must be non-negative, got {self.delta!r}")
        _check_unit(self.mean - self.delta, 'mean - delta')
        _check_unit(self.mean + self.delta, 'mean + delta')

    def support(self):
        if self.delta == 0:
            return np.array([self.mean]), np.array([1.0])
        values = np.clip([self.mean - self.delta, self.mean + self.delta], 0.0, 1.0)
        return values, np.array([0.5, 0.5])

    @property
    def expectation(self) -> float:
        return self.mean

    def delta_about(self, center: float) -> Optional[float]:
        return abs(self.mean - center) + self.delta

    def to_dict(self):
        return {'kind': self.kind, 'mean': self.mean, 'delta': self.delta}


@dataclass(frozen=True)
class ExtremeOnCube(_DiscreteMarginal):
    """
    The two-point distribution on the ends of [a, b] with the given mean.

    This is the extreme element of the convex order among distributions on
    [a, b] with that mean.
    """
    a: float
    b: float
    mean: float
    kind = 'cube'

    def __post_init__(self):
        a = _check_unit(self.a, 'a')
        b = _check_unit(self.b, 'b')
        if a > b:
            raise DomainError(f"Interval [{a!r}, {b!r}] is empty")
        if not a - _EDGE <= self.mean <= b + _EDGE:
            raise DomainError(f"mean {self.mean!r} lies outside [{a!r}, {b!r}]")
        object.__setattr__(self, 'a', a)
        object.__setattr__(self, 'b', b)

    @property
    def prob_a(self) -> float:
        if self.b == self.a:
            return 1.0
        return min(1.0, max(0.0, (self.b - self.mean) / (self.b - self.a)))

    def support(self):
        prob_a = self.prob_a
        if self.b == self.a or prob_a == 1.0:
            return np.array([self.a]), np.array([1.0])
        if prob_a == 0.0:
            return np.array([self.b]), np.array([1.0])
        return np.array([self.a, self.b]), np.array([prob_a, 1.0 - prob_a])

    @property
    def expectation(self) -> float:
        return self.mean

    def delta_about(self, center: float) -> Optional[float]:
        return max(center - self.a, self.b - center, 0.0)

    def to_dict(self):
        return {'kind': self.kind, 'a': self.a, 'b': self.b, 'mean': self.mean}


@dataclass(frozen=True)
class Discrete(_DiscreteMarginal):
    values: Tuple[float, ...]
    probs: Tuple[float, ...]
    kind = 'discrete'

    def __post_init__(self):
        values = tuple(_check_unit(v, 'value') for v in self.values)
        probs = tuple(float(q) for q in self.probs)
        if not values or len(values) != len(probs):
            raise DomainError("Discrete marginal needs matching, non-empty values and probs")
        if any(q < 0 for q in probs) or abs(math.fsum(probs) - 1.0) > config.MEAN_TOLERANCE:
            raise DomainError(f"Discrete probabilities must be non-negative and sum to 1: {probs}")
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'probs', probs)

    def support(self):
        return np.array(self.values), np.array(self.probs)

    def to_dict(self):
        return {'kind': self.kind, 'values': list(self.values), 'probs': list(self.probs)}


@dataclass(frozen=True)
class BetaMeanVar(Marginal):
    """Beta distribution parametrised by mean and variance."""
    mean: float
    variance: float
    kind = 'beta'

    def __post_init__(self):
        fit_beta_mean_var(self.mean, self.variance)

    @property
    def shape(self) -> Tuple[float, float]:
        return fit_beta_mean_var(self.mean, self.variance)

    @property
    def expectation(self) -> float:
        return self.mean

    def frozen(self):
        alpha, beta = self.shape
        return stats.beta(alpha, beta)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.frozen().rvs(size=size, random_state=rng)

    def to_dict(self):
        return {'kind': self.kind, 'mean': self.mean, 'variance': self.variance}


@dataclass(frozen=True)
class TruncNormalSymmetric(Marginal):
    """
    Normal(mean, sigma) truncated to [mean - half_width, mean + half_width].

    The default half-width keeps the support inside [0.5, 1].
    """
    mean: float
    sigma: float
    half_width: Optional[float] = None
    kind = 'truncnormal'

    def __post_init__(self):
        mean = _check_unit(self.mean, 'mean')
        if self.sigma <= 0:
            raise DomainError(f"sigma must be positive, got {self.sigma!r}")
        half_width = self.half_width
        if half_width is None:
            half_width = max(0.0, min(mean - 0.5, 1.0 - mean))
        if half_width < 0:
            raise DomainError(f"half_width must be non-negative, got {half_width!r}")
        _check_unit(mean - half_width, 'mean - half_width')
        _check_unit(mean + half_width, 'mean + half_width')
        object.__setattr__(self, 'half_width', float(half_width))

    @property
    def expectation(self) -> float:
        return self.mean

    def frozen(self):
        bound = self.half_width / self.sigma
        return stats.truncnorm(-bound, bound, loc=self.mean, scale=self.sigma)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.half_width == 0:
            return np.full(size, self.mean)
        draws = self.frozen().rvs(size=size, random_state=rng)
        return np.clip(draws, 0.0, 1.0)

    def delta_about(self, center: float) -> Optional[float]:
        return abs(self.mean - center) + self.half_width

    def to_dict(self):
        return {'kind': self.kind, 'mean': self.mean, 'sigma': self.sigma,
                'half_width': self.half_width}


MARGINAL_KINDS = ('point', 'two_point', 'extreme', 'cube', 'discrete', 'beta', 'truncnormal')


def marginal_from_params(kind: str, mean: Optional[float] = None, **params) -> Marginal:
    """
    Build a marginal from a kind name and keyword parameters.

    ``mean`` fills the location of kinds that are centred on the trust value.
    """
    try:
        if kind == 'point':
            return PointMass(params.get('p', mean))
        if kind == 'two_point':
            return TwoPoint(params['a'], params['b'], params['prob_a'])
        if kind == 'extreme':
            return ExtremeSymmetric(params.get('mean', mean), params['delta'])
        if kind == 'cube':
            return ExtremeOnCube(params['a'], params['b'], params.get('mean', mean))
        if kind == 'discrete':
            return Discrete(tuple(params['values']), tuple(params['probs']))
        if kind == 'beta':
            return BetaMeanVar(params.get('mean', mean), params['variance'])
        if kind == 'truncnormal':
            return TruncNormalSymmetric(params.get('mean', mean), params['sigma'],
                                        params.get('half_width'))
    except KeyError as e:
        raise DomainError(f"Distribution '{kind}' is missing parameter {e}") from e
    except TypeError as e:
        raise DomainError(f"Distribution '{kind}' needs a mean: {e}") from e
    raise DomainError(f"Unknown distribution kind {kind!r}; expected one of {MARGINAL_KINDS}")


class TrustworthinessDistribution:
    """Product of independent per-source marginals."""

    def __init__(self, marginals: Sequence[Marginal]):
        self.marginals = tuple(marginals)
        if not self.marginals:
            raise DomainError("A distribution needs at least one source")

    @classmethod
    def from_means(cls, kind: str, means: Sequence[float], **params) -> 'TrustworthinessDistribution':
        """One marginal of ``kind`` per mean, sharing the other parameters."""
        return cls([marginal_from_params(kind, mean=float(m), **params) for m in means])

    def __len__(self) -> int:
        return len(self.marginals)

    def __repr__(self) -> str:
        return f"TrustworthinessDistribution({list(self.marginals)!r})"

    @property
    def means(self) -> np.ndarray:
        return np.array([m.expectation for m in self.marginals])

    @property
    def is_discrete(self) -> bool:
        return all(m.support() is not None for m in self.marginals)

    @property
    def support_size(self) -> Optional[int]:
        if not self.is_discrete:
            return None
        return math.prod(m.support()[0].size for m in self.marginals)

    def support_product(self, limit: int = config.EXACT_SUPPORT_LIMIT) -> Tuple[np.ndarray, np.ndarray]:
        """
        Enumerate the joint support.

        Returns:
            Tuple of (points, weights): (K, n) support points and (K,) probabilities
        """
        if not self.is_discrete:
            raise DomainError("Exact expectations need discrete marginals; use Monte Carlo")
        size = self.support_size
        if size > limit:
            raise SupportOverflowError(
                f"Support product has {size:,} points, above the exact limit of {limit:,}"
            )
        supports = [m.support() for m in self.marginals]
        points = np.array(list(itertools.product(*[values for values, _ in supports])), dtype=float)
        weights = np.array([math.prod(w) for w in itertools.product(*[probs for _, probs in supports])])
        return points.reshape(size, len(self)), weights

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """(size, n) independent draws, one column per source in order."""
        return np.column_stack([m.sample(rng, size) for m in self.marginals])

    def deltas(self, center: Sequence[float]) -> Optional[np.ndarray]:
        """Per-source support half-widths about ``center``; None if any is unbounded."""
        widths = [m.delta_about(float(c)) for m, c in zip(self.marginals, center)]
        if any(w is None for w in widths):
            return None
        return np.array(widths, dtype=float)

    def to_dict(self) -> Dict:
        return {'marginals': [m.to_dict() for m in self.marginals]}
