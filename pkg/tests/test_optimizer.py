import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiermpc.errors import InvalidInputError, StructuralError
from hiermpc.optimizer import (
    CemConfig,
    PlanCandidate,
    plan_iteration,
    sample_population,
    select_elites,
    update_nominal,
)
from hiermpc.spline import NoiseSchedule, SplinePlan
from hiermpc.surrogate import QuadraticSurrogate, SurrogateResult

H = 1.5


def nominal(d=2, value=0.0):
    return SplinePlan.uniform(np.full((4, d), value), H)


def cand(cost, i, value=0.0):
    return PlanCandidate(nominal(1, value), cost, i)


class ZeroEngine:
    """Every plan costs its squared knot norm; the zero plan is optimal."""

    def run(self, state, plans):
        return [SurrogateResult(float(np.sum(p.knots ** 2))) for p in plans]


class FailingEngine:
    def __init__(self, fail_all=False):
        self.fail_all = fail_all

    def run(self, state, plans):
        return [SurrogateResult(math.inf, True) if (self.fail_all or i % 2) else SurrogateResult(float(i))
                for i, _ in enumerate(plans)]


def test_config_validation():
    with pytest.raises(InvalidInputError):
        CemConfig(num_samples=2, num_elites=3)
    with pytest.raises(InvalidInputError):
        CemConfig(num_elites=0)
    with pytest.raises(InvalidInputError):
        CemConfig(weighting="softmax")


def test_population_size_and_nominal_first():
    pop = sample_population(nominal(), CemConfig(), 0)
    assert len(pop) == 32
    assert np.array_equal(pop[0].knots, nominal().knots)
    assert not np.array_equal(pop[1].knots, nominal().knots)


def test_zero_noise_population_is_nominal():
    cfg = CemConfig(noise=NoiseSchedule(0.0, 0.0, H))
    assert all(np.array_equal(p.knots, nominal(2, 0.3).knots) for p in sample_population(nominal(2, 0.3), cfg, 5))


def test_population_deterministic():
    a = sample_population(nominal(), CemConfig(seed=11), 3)
    b = sample_population(nominal(), CemConfig(seed=11), 3)
    assert all(np.array_equal(p.knots, q.knots) for p, q in zip(a, b))
    c = sample_population(nominal(), CemConfig(seed=11), 4)
    assert not np.array_equal(a[1].knots, c[1].knots)


def test_population_noise_follows_schedule():
    cfg = CemConfig(num_samples=4000, num_elites=3, include_nominal=False)
    pop = np.stack([p.knots for p in sample_population(nominal(), cfg, 0)])
    std = pop.std(axis=(0, 2))
    expected = [0.02, 0.02 + (0.6 - 0.02) / 3, 0.02 + 2 * (0.6 - 0.02) / 3, 0.6]
    assert np.allclose(std, expected, rtol=0.05)


def test_population_entry_depends_only_on_its_index():
    # a smaller population is a prefix of a larger one drawn from the same seed
    small = sample_population(nominal(), CemConfig(num_samples=8), 2)
    large = sample_population(nominal(), CemConfig(num_samples=32), 2)
    assert all(np.array_equal(p.knots, q.knots) for p, q in zip(small, large))


def test_population_clamped():
    lo, hi = np.full(2, -0.1), np.full(2, 0.1)
    for p in sample_population(nominal(), CemConfig(), 0, (lo, hi)):
        assert np.all(p.knots >= lo) and np.all(p.knots <= hi)


def test_select_argmin():
    assert select_elites([cand(3, 0), cand(1, 1), cand(2, 2)], 1)[0].cost == 1


def test_select_ties_by_index_all_permutations():
    base = [cand(1, 0), cand(1, 1), cand(2, 2)]
    for perm in itertools.permutations(base):
        # oracle: stable sort of the index-ordered list
        oracle = sorted(sorted(perm, key=lambda c: c.sample_index), key=lambda c: c.cost)
        got = select_elites(perm, 3)
        assert [c.sample_index for c in got] == [c.sample_index for c in oracle]
        assert select_elites(perm, 1)[0].sample_index == 0


def test_select_full_population_sorted():
    got = select_elites([cand(3, 0), cand(1, 1), cand(2, 2)], 3)
    assert [c.cost for c in got] == [1, 2, 3]


def test_select_errors():
    with pytest.raises(StructuralError):
        select_elites([], 1)
    with pytest.raises(InvalidInputError):
        select_elites([cand(1, 0)], 2)


@given(st.lists(st.floats(0, 100), min_size=1, max_size=40), st.data())
def test_select_costs_nondecreasing(costs, data):
    k = data.draw(st.integers(1, len(costs)))
    got = select_elites([cand(c, i) for i, c in enumerate(costs)], k)
    assert all(a.cost <= b.cost for a, b in zip(got, got[1:]))
    assert got[-1].cost <= sorted(costs)[k - 1]


def test_candidate_cost_rules():
    with pytest.raises(InvalidInputError):
        cand(math.nan, 0)
    assert cand(math.inf, 0).cost == math.inf


def test_update_single_elite():
    e = PlanCandidate(SplinePlan.uniform([[1.0], [2.0], [3.0], [4.0]], H), 0.0, 0)
    assert np.array_equal(update_nominal([e]).knots, e.plan.knots)


def test_update_two_elites_mean():
    a = PlanCandidate(SplinePlan([0.0, H], [0.0, 0.0], H), 0.0, 0)
    b = PlanCandidate(SplinePlan([0.0, H], [2.0, 4.0], H), 0.0, 1)
    got = update_nominal([a, b]).knots[:, 0]
    oracle = [math.fsum([0.0, 2.0]) / 2, math.fsum([0.0, 4.0]) / 2]
    assert got.tolist() == oracle == [1.0, 2.0]


def test_update_identical_elites():
    plan = SplinePlan.uniform(np.arange(8.0).reshape(4, 2) / 7, H)
    got = update_nominal([PlanCandidate(plan, 0.0, i) for i in range(3)])
    assert np.array_equal(got.knots, plan.knots)


def test_update_shape_mismatch():
    a = PlanCandidate(SplinePlan.uniform(np.zeros((4, 1)), H), 0.0, 0)
    b = PlanCandidate(SplinePlan.uniform(np.zeros((3, 1)), H), 0.0, 1)
    with pytest.raises(StructuralError):
        update_nominal([a, b])


def test_update_exponential_favors_cheap():
    a = PlanCandidate(SplinePlan([0.0, H], [0.0, 0.0], H), 0.0, 0)
    b = PlanCandidate(SplinePlan([0.0, H], [1.0, 1.0], H), 10.0, 1)
    got = update_nominal([a, b], "exponential", 1.0).knots[0, 0]
    assert got == pytest.approx(math.exp(-10) / (1 + math.exp(-10)))


def test_iteration_at_optimum_keeps_nominal():
    updated, best = plan_iteration(None, nominal(), ZeroEngine(), CemConfig(), 0)
    assert best.cost == 0.0 and best.sample_index == 0
    assert np.array_equal(best.plan.knots, nominal().knots)


def test_iteration_zero_noise_best_is_nominal():
    cfg = CemConfig(noise=NoiseSchedule(0.0, 0.0, H))
    start = nominal(2, 0.4)
    updated, best = plan_iteration(None, start, ZeroEngine(), cfg, 0)
    assert np.array_equal(best.plan.knots, start.knots)
    assert np.array_equal(updated.knots, start.knots)


def test_iteration_best_not_worse_than_nominal():
    engine = QuadraticSurrogate()
    start = nominal(2, 0.2)
    _, best = plan_iteration(None, start, engine, CemConfig(seed=3), 0)
    assert best.cost <= engine.cost(start)


def test_iteration_failures_are_isolated():
    updated, best = plan_iteration(None, nominal(), FailingEngine(), CemConfig(), 0)
    assert best.sample_index == 0 and math.isfinite(best.cost)
    with pytest.raises(StructuralError):
        plan_iteration(None, nominal(), FailingEngine(fail_all=True), CemConfig(), 0)


def test_iteration_respects_bounds():
    lo, hi = np.full(2, -0.05), np.full(2, 0.05)
    updated, _ = plan_iteration(None, nominal(), QuadraticSurrogate(), CemConfig(), 0, (lo, hi))
    assert np.all(updated.knots >= lo) and np.all(updated.knots <= hi)


def test_iteration_deterministic():
    engine = QuadraticSurrogate()
    a = plan_iteration(None, nominal(), engine, CemConfig(seed=9), 2)
    b = plan_iteration(None, nominal(), engine, CemConfig(seed=9), 2)
    assert np.array_equal(a[0].knots, b[0].knots) and a[1].cost == b[1].cost


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_best_cost_monotone_when_best_carried(seed):
    # carrying the best plan forward as the next nominal: sample 0 reproduces it
    engine = QuadraticSurrogate()
    plan, costs = nominal(), []
    cfg = CemConfig(seed=seed)
    for it in range(15):
        _, best = plan_iteration(None, plan, engine, cfg, it)
        costs.append(best.cost)
        plan = best.plan
    assert all(b <= a for a, b in zip(costs, costs[1:]))


def _converge(seed, iterations=50):
    engine = QuadraticSurrogate()
    plan = nominal()
    for it in range(iterations):
        plan, best = plan_iteration(None, plan, engine, CemConfig(seed=seed), it)
        if best.cost < 1e-2:
            return it + 1
    return None


@pytest.mark.parametrize("seed", range(10))
def test_quadratic_surrogate_converges(seed):
    assert _converge(seed) is not None
