# wmv-stability/wmv_stability/utils/core.py
"""
Weighted Majority Voting over the full realization space.

A realization is encoded as an integer bitmask over ``n`` sources: bit ``i``
set means source ``i`` reports the correct answer. Negating a realization
flips every bit, so for an array indexed by mask the negated view is simply
the array reversed.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, Sequence, Tuple, Union

import numpy as np

from wmv_stability import config
from wmv_stability.utils.sampling import binomial_stderr, run_replicates
from wmv_stability.utils.validation import (
    DomainError,
    validate_capacity,
    validate_lengths,
    validate_probabilities,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProbabilityVector:
    """Per-source probabilities tagged with their role ('trust' or 'trustworthiness')."""
    values: Tuple[float, ...]
    role: str = 'trustworthiness'

    def __post_init__(self):
        arr = validate_probabilities(self.values, self.role, field=self.role)
        object.__setattr__(self, 'values', tuple(float(v) for v in arr))

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, index: int) -> float:
        return self.values[index]

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    def replace(self, index: int, value: float) -> 'ProbabilityVector':
        values = list(self.values)
        values[index] = value
        return ProbabilityVector(tuple(values), self.role)


VectorLike = Union[ProbabilityVector, Sequence[float], np.ndarray]


def as_trust(values: VectorLike) -> ProbabilityVector:
    """Coerce to a trust vector, checking every value is in [0.5, 1]."""
    if isinstance(values, ProbabilityVector):
        if values.role == 'trust':
            return values
        values = values.values
    return ProbabilityVector(tuple(np.asarray(values, dtype=float).ravel()), 'trust')


def as_truth(values: VectorLike) -> ProbabilityVector:
    """Coerce to a trustworthiness vector, checking every value is in [0, 1]."""
    if isinstance(values, ProbabilityVector):
        if values.role == 'trustworthiness':
            return values
        values = values.values
    return ProbabilityVector(tuple(np.asarray(values, dtype=float).ravel()), 'trustworthiness')


@dataclass(frozen=True)
class Realization:
    """One joint outcome of ``n`` sources, stored as a bitmask."""
    mask: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"Realization needs at least one source, got n={self.n}")
        if not 0 <= self.mask < (1 << self.n):
            raise DomainError(f"mask {self.mask} is out of range for n={self.n}")

    @classmethod
    def from_states(cls, states: Iterable[int]) -> 'Realization':
        """Build from a sequence of +1 / -1 states."""
        states = list(states)
        mask = 0
        for i, s in enumerate(states):
            if s not in (1, -1):
                raise DomainError(f"state[{i}] = {s!r} must be +1 or -1")
            if s == 1:
                mask |= 1 << i
        return cls(mask, len(states))

    @property
    def states(self) -> Tuple[int, ...]:
        return tuple(1 if (self.mask >> i) & 1 else -1 for i in range(self.n))

    def negate(self) -> 'Realization':
        return Realization(self.mask ^ ((1 << self.n) - 1), self.n)

    def __neg__(self) -> 'Realization':
        return self.negate()


@dataclass(frozen=True)
class WeightVector:
    """Log-odds weights; sources with trust 1 form the infinite tier."""
    weights: Tuple[float, ...]
    infinite: FrozenSet[int] = field(default_factory=frozenset)

    def __len__(self) -> int:
        return len(self.weights)


def compute_weights(trust: VectorLike) -> WeightVector:
    """
    Log-odds weight ``ln(p / (1 - p))`` of each trusted source.

    Args:
        trust: Trust vector with values in [0.5, 1]

    Returns:
        WeightVector: Finite weights, ``inf`` entries for trust 1
    """
    p = as_trust(trust).as_array()
    infinite = p >= 1.0
    with np.errstate(divide='ignore'):
        w = np.where(infinite, np.inf, np.log(p / np.where(infinite, 1.0, 1.0 - p)))
    return WeightVector(tuple(float(x) for x in w),
                        frozenset(int(i) for i in np.flatnonzero(infinite)))


def weighted_vote(weights: WeightVector, votes: Realization) -> int:
    """
    Outcome of one weighted vote over +1 / -1 reports.

    The infinite tier decides by simple majority when it is not tied; the
    finite weights decide otherwise. An exact tie goes to source 0's report.

    Returns:
        int: +1 or -1
    """
    validate_lengths(weights, votes.states, names=('weights', 'votes'))
    states = np.array(votes.states, dtype=float)

    if weights.infinite:
        tier = int(sum(states[i] for i in weights.infinite))
        if tier != 0:
            return 1 if tier > 0 else -1

    finite = np.array([w if i not in weights.infinite else 0.0
                       for i, w in enumerate(weights.weights)])
    score = math.fsum(finite * states)
    scale = math.fsum(np.abs(finite))
    if abs(score) <= config.TIE_TOLERANCE * scale:
        return int(states[0])
    return 1 if score > 0 else -1


def _product_table(plus: np.ndarray, minus: np.ndarray) -> np.ndarray:
    """
    Per-mask products of per-source factors, for a batch of rows.

    Args:
        plus: (rows, n) factors used when a source's bit is set
        minus: (rows, n) factors used when it is clear

    Returns:
        np.ndarray: (rows, 2**n) table indexed by mask
    """
    rows, n = plus.shape
    table = np.ones((rows, 1))
    for i in range(n):
        table = np.concatenate([table * minus[:, i:i + 1], table * plus[:, i:i + 1]], axis=1)
    return table


def _tier_scores(infinite: np.ndarray) -> np.ndarray:
    """(rows, 2**n) net +1 count among infinite-tier sources."""
    rows, n = infinite.shape
    step = infinite.astype(np.int8)
    scores = np.zeros((rows, 1), dtype=np.int8)
    for i in range(n):
        scores = np.concatenate([scores - step[:, i:i + 1], scores + step[:, i:i + 1]], axis=1)
    return scores


def _realization_tables(truth_rows: np.ndarray) -> np.ndarray:
    return _product_table(truth_rows, 1.0 - truth_rows)


def _membership(trust_rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Decision-set membership for a batch of trust rows.

    A mask is a member when it beats its negation under the trust
    probabilities. Ties (relative difference within ``TIE_TOLERANCE``) go to
    the mask whose source 0 bit is set.

    Returns:
        Tuple of (rows, 2**n) boolean membership and (rows,) tied-pair counts
    """
    rows, n = trust_rows.shape
    size = 1 << n
    infinite = trust_rows >= 1.0
    plus = np.where(infinite, 1.0, trust_rows)
    minus = np.where(infinite, 1.0, 1.0 - trust_rows)

    probs = _product_table(plus, minus)
    opposite = probs[:, ::-1]
    diff = probs - opposite
    tied = np.abs(diff) <= config.TIE_TOLERANCE * np.maximum(probs, opposite)
    source0 = np.tile(np.array([False, True]), size // 2)

    finite_win = np.where(tied, source0, diff > 0)
    finite_tie = tied & source0

    if infinite.any():
        scores = _tier_scores(infinite)
        member = (scores > 0) | ((scores == 0) & finite_win)
        ties = ((scores == 0) & finite_tie).sum(axis=1)
    else:
        member = finite_win
        ties = finite_tie.sum(axis=1)
    return member, ties


def _masked_row_sums(member: np.ndarray, tables: np.ndarray) -> np.ndarray:
    """
    Row sums of ``tables`` over member masks.

    Each row is summed with ``math.fsum``, which rounds exactly and so agrees
    bit for bit with ``stable_sum`` on the single-vector path.
    """
    member = np.broadcast_to(member, tables.shape)
    sums = np.fromiter((math.fsum(row[mask].tolist()) for row, mask in zip(tables, member)),
                       dtype=float, count=tables.shape[0])
    return np.clip(sums, 0.0, 1.0)


def _chunk_rows(rows: int, n: int) -> int:
    return max(1, config.BATCH_CELLS // (1 << n))


def stable_sum(values: Iterable[float]) -> float:
    """Exactly rounded sum, taken in descending magnitude order."""
    arr = np.asarray(values, dtype=float).ravel()
    order = np.argsort(-np.abs(arr), kind='stable')
    return math.fsum(arr[order])


def realization_table(truth: VectorLike,
                      capacity: int = config.ENUMERATION_CAPACITY) -> np.ndarray:
    """
    Probability of every realization under a trustworthiness vector.

    Args:
        truth: Trustworthiness vector
        capacity: Maximum source count to enumerate

    Returns:
        np.ndarray: (2**n,) probabilities indexed by mask
    """
    p = as_truth(truth).as_array()
    validate_capacity(len(p), capacity)
    return _realization_tables(p[None, :])[0]


def realization_probability(tau: Realization, truth: VectorLike) -> float:
    """Probability of one realization under independent sources."""
    p = as_truth(truth).as_array()
    validate_lengths(p, tau.states, names=('truth', 'realization'))
    states = np.array(tau.states)
    return float(np.prod(np.where(states > 0, p, 1.0 - p)))


@dataclass(frozen=True, eq=False)
class DecisionSet:
    """
    Realizations for which a trust vector's weighted vote picks the correct answer.

    Exactly one of each realization / negation pair is a member.
    """
    trust: ProbabilityVector
    membership: np.ndarray
    tie_count: int = 0

    @property
    def n(self) -> int:
        return len(self.trust)

    def __len__(self) -> int:
        return int(self.membership.sum())

    def __contains__(self, tau: Realization) -> bool:
        if tau.n != self.n:
            raise DomainError(f"Realization has {tau.n} sources, decision set has {self.n}")
        return bool(self.membership[tau.mask])

    def masks(self) -> np.ndarray:
        return np.flatnonzero(self.membership)

    def members(self) -> List[Realization]:
        return [Realization(int(m), self.n) for m in self.masks()]

    def correctness(self, truth: VectorLike) -> float:
        """Sum of member probabilities under ``truth``."""
        p = as_truth(truth).as_array()
        validate_lengths(self.trust, p)
        table = _realization_tables(p[None, :])[0]
        return min(1.0, max(0.0, stable_sum(table[self.membership])))

    def correctness_rows(self, truth_rows: np.ndarray) -> np.ndarray:
        """Correctness for each row of a (rows, n) truth batch."""
        truth_rows = np.atleast_2d(np.asarray(truth_rows, dtype=float))
        if truth_rows.shape[1] != self.n:
            raise DomainError(f"truth rows have {truth_rows.shape[1]} sources, expected {self.n}")
        out = np.empty(truth_rows.shape[0])
        step = _chunk_rows(truth_rows.shape[0], self.n)
        for start in range(0, truth_rows.shape[0], step):
            stop = start + step
            tables = _realization_tables(truth_rows[start:stop])
            out[start:stop] = _masked_row_sums(self.membership[None, :], tables)
        return out


def build_decision_set(trust: VectorLike,
                       capacity: int = config.ENUMERATION_CAPACITY) -> DecisionSet:
    """
    Enumerate the decision set of a trust vector.

    Args:
        trust: Trust vector with values in [0.5, 1]
        capacity: Maximum source count to enumerate

    Returns:
        DecisionSet: Membership over all 2**n masks
    """
    t = as_trust(trust)
    validate_capacity(len(t), capacity)
    member, ties = _membership(t.as_array()[None, :])
    tie_count = int(ties[0])
    if tie_count:
        logger.debug(f"Decision set for {len(t)} sources resolved {tie_count} tied pair(s)")
    return DecisionSet(trust=t, membership=member[0], tie_count=tie_count)


def correctness(trust: VectorLike, truth: VectorLike,
                capacity: int = config.ENUMERATION_CAPACITY) -> float:
    """
    Probability that the weighted vote under ``trust`` is correct when the
    sources behave according to ``truth``.

    Args:
        trust: Trust vector, values in [0.5, 1]
        truth: Trustworthiness vector, values in [0, 1]
        capacity: Maximum source count to enumerate

    Returns:
        float: Correctness in [0, 1]
    """
    t = as_trust(trust)
    p = as_truth(truth)
    validate_lengths(t, p)
    return build_decision_set(t, capacity).correctness(p)


def correctness_batch(trust_rows: np.ndarray, truth_rows: np.ndarray,
                      capacity: int = config.ENUMERATION_CAPACITY) -> np.ndarray:
    """
    Vectorised correctness for paired (rows, n) trust and truth batches.

    A single row on either side is broadcast against the other.
    """
    trust_rows = np.atleast_2d(np.asarray(trust_rows, dtype=float))
    truth_rows = np.atleast_2d(np.asarray(truth_rows, dtype=float))
    if trust_rows.shape[1] != truth_rows.shape[1]:
        raise DomainError(
            f"Length mismatch: trust has {trust_rows.shape[1]} sources, "
            f"truth has {truth_rows.shape[1]}"
        )
    n = trust_rows.shape[1]
    validate_capacity(n, capacity)
    validate_probabilities(trust_rows.ravel(), 'trust', field='trust')
    validate_probabilities(truth_rows.ravel(), 'trustworthiness', field='truth')

    rows = max(trust_rows.shape[0], truth_rows.shape[0])
    trust_rows = np.broadcast_to(trust_rows, (rows, n))
    truth_rows = np.broadcast_to(truth_rows, (rows, n))

    out = np.empty(rows)
    step = _chunk_rows(rows, n)
    for start in range(0, rows, step):
        stop = start + step
        member, _ = _membership(trust_rows[start:stop])
        out[start:stop] = _masked_row_sums(member, _realization_tables(truth_rows[start:stop]))
    return out


def revealed_correctness(truth: VectorLike,
                         capacity: int = config.ENUMERATION_CAPACITY) -> float:
    """
    Correctness when trust equals the true trustworthiness.

    Values below 0.5 cannot be trusted as such; the trust side is clamped to
    0.5 while the truth side keeps the actual value.
    """
    p = as_truth(truth)
    return correctness(np.clip(p.as_array(), 0.5, 1.0), p, capacity)


def revealed_correctness_batch(truth_rows: np.ndarray,
                               capacity: int = config.ENUMERATION_CAPACITY) -> np.ndarray:
    """Row-wise :func:`revealed_correctness` for a (rows, n) batch."""
    truth_rows = np.atleast_2d(np.asarray(truth_rows, dtype=float))
    return correctness_batch(np.clip(truth_rows, 0.5, 1.0), truth_rows, capacity)


def simulate_correctness(trust: VectorLike, truth: VectorLike, runs: int, seed: int,
                         workers: int = 1,
                         capacity: int = config.ENUMERATION_CAPACITY) -> Tuple[float, float]:
    """
    Monte Carlo estimate of :func:`correctness` by sampling realizations.

    Args:
        trust: Trust vector
        truth: Trustworthiness vector the realizations are drawn from
        runs: Number of sampled realizations
        seed: Master seed
        workers: Worker threads; the estimate does not depend on this

    Returns:
        Tuple of (estimate, standard error)
    """
    t = as_trust(trust)
    p = as_truth(truth).as_array()
    validate_lengths(t, p)
    decision = build_decision_set(t, capacity)
    bits = np.left_shift(1, np.arange(len(p), dtype=np.int64))

    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        hits = rng.random((size, len(p))) < p
        masks = hits.astype(np.int64) @ bits
        return decision.membership[masks].astype(float)

    hits = run_replicates(draw, runs, seed, workers)
    estimate = math.fsum(hits) / runs
    logger.debug(f"Simulated correctness {estimate:.6f} from {runs:,} runs")
    return estimate, binomial_stderr(estimate, runs)
