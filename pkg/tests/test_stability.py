# wmv-stability/tests/test_stability.py

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wmv_stability.utils.core import correctness, revealed_correctness
from wmv_stability.utils.distributions import (
    Discrete,
    ExtremeOnCube,
    PointMass,
    TrustworthinessDistribution,
)
from wmv_stability.utils.stability import (
    EXACT,
    Budget,
    expected_correctness_fixed_trust,
    expected_correctness_fixed_truth,
    expected_correctness_revealed,
    extreme_distribution,
    extreme_upper_bound,
    hypercube_vertex_bound,
    infer_deltas,
    soc_gap,
    soo,
    soo_bound_strong,
    soo_bound_weak,
)
from wmv_stability.utils.validation import (
    BoundNotApplicableError,
    CapacityError,
    DomainError,
    MeanMismatchError,
    SupportOverflowError,
)


def extreme(means, delta):
    return TrustworthinessDistribution.from_means('extreme', means, delta=delta)


class TestBudget:

    def test_exact_by_default(self):
        assert EXACT.exact
        assert EXACT.mode == 'exact'

    def test_monte_carlo_needs_seed(self):
        with pytest.raises(DomainError):
            Budget(runs=100)
        assert Budget(runs=100, seed=0).mode == 'monte_carlo'

    def test_auto(self):
        assert Budget.auto(extreme([0.7, 0.8], 0.05)).exact
        beta = TrustworthinessDistribution.from_means('beta', [0.7, 0.8], variance=0.01)
        with pytest.raises(DomainError):
            Budget.auto(beta)
        assert Budget.auto(beta, runs=1000, seed=1).runs == 1000

    def test_auto_falls_back_on_large_support(self):
        dist = extreme([0.7] * 13, 0.05)
        assert not Budget.auto(dist, runs=1000, seed=1).exact
        with pytest.raises(SupportOverflowError):
            Budget.auto(dist)


class TestExpectations:

    def test_fixed_trust_is_linear(self):
        estimate, stderr = expected_correctness_fixed_trust([0.7] * 3, extreme([0.7] * 3, 0.1))
        assert estimate == pytest.approx(0.784, abs=1e-12)
        assert stderr == 0.0

    def test_exact_expectation_equals_value_at_means(self, caplog):
        rng = np.random.default_rng(12)
        for _ in range(50):
            n = int(rng.integers(1, 6))
            trust = rng.uniform(0.5, 1.0, size=n)
            marginals = []
            for _ in range(n):
                k = int(rng.integers(1, 4))
                marginals.append(Discrete(tuple(rng.uniform(0.0, 1.0, size=k)),
                                          tuple(rng.dirichlet(np.ones(k)))))
            dist = TrustworthinessDistribution(marginals)
            estimate, _ = expected_correctness_fixed_trust(trust, dist)
            assert abs(estimate - correctness(trust, dist.means)) <= 1e-12
        assert 'disagrees' not in caplog.text

    def test_fixed_trust_monte_carlo(self, running_example):
        dist = TrustworthinessDistribution.from_means('beta', running_example, variance=0.004)
        estimate, stderr = expected_correctness_fixed_trust(
            running_example, dist, Budget(runs=20_000, seed=1))
        assert stderr > 0
        assert abs(estimate - 0.845) <= 4 * stderr

    def test_revealed_single_source(self):
        estimate, _ = expected_correctness_revealed(extreme([0.7], 0.1))
        assert estimate == pytest.approx(0.7, abs=1e-12)

    def test_fixed_truth_point_trust(self, running_example):
        dist = TrustworthinessDistribution.from_means('point', running_example)
        estimate, _ = expected_correctness_fixed_truth(running_example, dist)
        assert estimate == pytest.approx(0.845, abs=1e-12)

    def test_fixed_truth_never_beats_optimum(self, running_example):
        dist = TrustworthinessDistribution.from_means('truncnormal', running_example, sigma=0.05)
        estimate, stderr = expected_correctness_fixed_truth(
            running_example, dist, Budget(runs=10_000, seed=4))
        assert estimate <= 0.845 + 1e-12
        assert stderr >= 0

    def test_wrong_source_count(self, running_example):
        with pytest.raises(DomainError):
            expected_correctness_fixed_trust(running_example, extreme([0.7], 0.1))


class TestSocGap:

    def test_point_mass_gap_is_zero(self, running_example):
        dist = TrustworthinessDistribution.from_means('point', running_example)
        gap, stderr = soc_gap(running_example, dist)
        assert gap == 0.0
        assert stderr == 0.0

    def test_extreme_on_cube_gap_vanishes(self, running_example):
        cube = [(0.6, 1.0), (0.5, 0.9), (0.55, 0.95), (0.5, 0.8)]
        dist = extreme_distribution(running_example, cube)
        gap, _ = soc_gap(running_example, dist)
        assert abs(gap) <= 1e-12

    @given(st.lists(st.floats(min_value=0.55, max_value=0.95), min_size=1, max_size=6),
           st.floats(min_value=0.0, max_value=0.05))
    @settings(max_examples=50, deadline=None)
    def test_unbiased_gap_vanishes(self, trust, delta):
        gap, _ = soc_gap(trust, extreme(trust, delta))
        assert abs(gap) <= 1e-12

    def test_monte_carlo_gap_within_noise(self, running_example):
        dist = TrustworthinessDistribution.from_means('beta', running_example, variance=0.004)
        gap, stderr = soc_gap(running_example, dist, Budget(runs=20_000, seed=8))
        assert abs(gap) <= 4 * stderr

    def test_biased_distribution_rejected(self):
        dist = TrustworthinessDistribution([PointMass(0.7), PointMass(0.8)])
        with pytest.raises(MeanMismatchError):
            soc_gap([0.7, 0.7], dist)


class TestBounds:

    def test_running_example_values(self, running_example):
        assert soo_bound_strong(running_example, 0.05) == pytest.approx(0.0501025390625, rel=1e-9)
        assert soo_bound_weak(running_example, 0.05) == pytest.approx(0.0574791666667, rel=1e-9)

    def test_single_source(self):
        assert soo_bound_strong([0.7], [0.05]) == pytest.approx(0.025)
        assert soo_bound_weak([0.7], [0.05]) == pytest.approx(0.025)

    def test_zero_width_is_zero(self, running_example):
        assert soo_bound_strong(running_example, 0.0) == 0.0
        assert soo_bound_weak(running_example, 0.0) == 0.0

    def test_certain_source_contributes_nothing(self):
        assert soo_bound_weak([1.0, 0.8], [0.0, 0.0]) == 0.0

    def test_hypothesis_violated(self, running_example):
        with pytest.raises(BoundNotApplicableError):
            soo_bound_strong(running_example, [0.25, 0.0, 0.0, 0.0])
        with pytest.raises(DomainError):
            soo_bound_weak(running_example, -0.01)

    def test_given_omega_is_used(self):
        assert soo_bound_weak([0.7], [0.05], omega=0.5) == pytest.approx(0.5 / 2 / 6)

    @given(st.lists(st.floats(min_value=0.5, max_value=0.99), min_size=1, max_size=6),
           st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=100, deadline=None)
    def test_strong_never_exceeds_weak(self, trust, scale):
        deltas = [scale * (1 - p) for p in trust]
        assert soo_bound_strong(trust, deltas) <= soo_bound_weak(trust, deltas) + 1e-15

    def test_infer_deltas(self, running_example):
        np.testing.assert_allclose(infer_deltas(running_example, extreme(running_example, 0.05)),
                                   [0.05] * 4)
        wide = TrustworthinessDistribution([ExtremeOnCube(0.5, 1.0, 0.8)])
        assert infer_deltas([0.8], wide) is None
        beta = TrustworthinessDistribution.from_means('beta', [0.8], variance=0.01)
        assert infer_deltas([0.8], beta) is None


class TestSoo:

    def test_point_mass_report(self, running_example):
        dist = TrustworthinessDistribution.from_means('point', running_example)
        report = soo(running_example, dist)
        assert report.omega_trust == pytest.approx(0.845, abs=1e-12)
        assert report.soo == pytest.approx(0.0, abs=1e-12)
        assert report.bound_strong == 0.0
        assert report.mode == 'exact'

    def test_running_example_within_bounds(self, running_example):
        report = soo(running_example, extreme(running_example, 0.05))
        assert report.soo >= -1e-12
        assert report.soo <= report.bound_strong + 1e-12
        assert report.bound_strong <= report.bound_weak
        assert report.soc_gap == pytest.approx(0.0, abs=1e-12)

    def test_single_source_has_no_optimality_gap(self):
        report = soo([0.7], extreme([0.7], 0.1))
        assert report.soo == pytest.approx(0.0, abs=1e-12)

    def test_bounds_skipped_for_wide_support(self):
        report = soo([0.8], TrustworthinessDistribution([ExtremeOnCube(0.5, 1.0, 0.8)]))
        assert not report.bounds_applicable
        assert report.soo >= -1e-12

    def test_to_dict_flattens_errors(self, running_example):
        report = soo(running_example, extreme(running_example, 0.05))
        record = report.to_dict()
        assert record['soo_stderr'] == 0.0
        assert 'standard_errors' not in record

    def test_monte_carlo_is_worker_independent(self, running_example):
        dist = TrustworthinessDistribution.from_means('beta', running_example, variance=0.002)
        serial = soo(running_example, dist, Budget(runs=25_000, seed=3))
        threaded = soo(running_example, dist, Budget(runs=25_000, seed=3, workers=3))
        assert serial.to_dict() == threaded.to_dict()
        assert serial.soo > -4 * serial.standard_errors['soo']


class TestVertexBounds:

    def test_extreme_upper_bound_single_source(self):
        assert extreme_upper_bound([0.7], [(0.6, 0.9)]) == pytest.approx(0.7, abs=1e-12)

    def test_hypercube_bound_single_source(self):
        assert hypercube_vertex_bound([0.7], [(0.5, 1.0)]) == pytest.approx(0.7, abs=1e-12)

    def test_degenerate_cube(self, running_example):
        cube = [(p, p) for p in running_example]
        assert hypercube_vertex_bound(running_example, cube) == pytest.approx(0.845, abs=1e-12)

    def test_hypercube_bound_dominates(self, running_example):
        cube = [(p - 0.1, p + 0.1) for p in running_example]
        bound = hypercube_vertex_bound(running_example, cube)
        assert bound >= revealed_correctness(running_example) - 1e-12

    def test_extreme_dominates_narrower_distribution(self, running_example):
        cube = [(p - 0.1, p + 0.1) for p in running_example]
        narrow, _ = expected_correctness_revealed(extreme(running_example, 0.05))
        assert extreme_upper_bound(running_example, cube) >= narrow - 1e-12

    def test_cube_validation(self, running_example):
        with pytest.raises(DomainError):
            hypercube_vertex_bound([0.7], [(0.8, 0.9)])
        with pytest.raises(DomainError):
            hypercube_vertex_bound([0.7], [(0.6, 0.9), (0.6, 0.9)])
        with pytest.raises(CapacityError):
            hypercube_vertex_bound([0.7] * 13, [(0.6, 0.8)] * 13)

    def test_upper_bound_matches_exact_correctness_at_vertices(self):
        # a two-source cube evaluated by hand
        cube = [(0.6, 0.8), (0.5, 0.9)]
        expected = 0.0
        for a, wa in ((0.6, 0.5), (0.8, 0.5)):
            for b, wb in ((0.5, 0.5), (0.9, 0.5)):
                expected += wa * wb * correctness([a, b], [a, b])
        assert extreme_upper_bound([0.7, 0.7], cube) == pytest.approx(expected, abs=1e-12)
