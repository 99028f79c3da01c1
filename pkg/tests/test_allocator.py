from __future__ import annotations

import itertools
import warnings

import numpy as np
import pytest

from flipadapt import allocator
from flipadapt.allocator import (
    APC,
    AMPC,
    InfeasibleRateError,
    LinkBudget,
    NonMonotoneLadderWarning,
    allocate,
    ampc_allocate,
    apc_allocate,
    group_and_average,
    initial_modulation,
    select_index,
    select_pair,
)
from flipadapt.ber_model import ber, solve_power
from flipadapt.bsc import BitFlipSet


def budget(P_tot=100.0, R=4.0, gamma=1.0):
    return LinkBudget(P_tot, R, gamma)


@pytest.mark.parametrize("nb,r,m", [(16, 4, 4), (17, 4, 6), (100, 2, 2), (64, 5, 6)])
def test_initial_modulation(nb, r, m):
    assert initial_modulation(nb, r) == m


def test_initial_modulation_infeasible():
    with pytest.raises(InfeasibleRateError):
        initial_modulation(100, 11)


def test_group_and_average_example():
    groups, means = group_and_average(BitFlipSet(np.array([0.2, 0.01, 0.1, 0.02])), 2)
    assert np.allclose(means, [0.015, 0.15])
    _, means = group_and_average(BitFlipSet(np.full(6, 0.1)), 4)
    assert np.allclose(means, 0.1)
    groups, _ = group_and_average(BitFlipSet(np.full(5, 0.1)), 2)
    assert [g.size for g in groups] == [2, 2, 1]


def test_apc_plan_matches_solver():
    mu = BitFlipSet(np.array([0.2, 0.01, 0.1, 0.02]))
    plan = apc_allocate(mu, budget(R=2))
    assert np.all(plan.levels == 2)
    for p, mb in zip(plan.powers, plan.mu_bar):
        assert p == pytest.approx(solve_power(mb, 2, 1.0))
        assert abs(ber(p, 2, 1.0) - mb) <= 1e-9


def test_apc_near_half_needs_almost_no_power():
    plan = apc_allocate(BitFlipSet(np.full(8, 0.5 - 1e-9)), budget(R=2))
    assert plan.P_sum < 1e-6


def brute_force_pair(mu_low, mu_high, m):
    """Cheapest (m_low, m_high) over all +/-2 splits of a two-group pair."""
    allm = np.concatenate([mu_low, mu_high])
    best = None
    for d in range(0, m, 2):
        ml, mh = m - d, m + d
        if ml < 2 or mh > 10:
            continue
        lo, hi = allm[:ml].mean(), allm[ml:].mean()
        try:
            total = solve_power(lo, ml, 1.0) + solve_power(hi, mh, 1.0)
        except ValueError:
            continue
        if best is None or total < best[0]:
            best = (total, ml, mh)
    return best


def test_four_and_four_example_stays_balanced():
    # regrouping pulls two 0.01 bits into the 6-bit group (mean 0.07), so the
    # shift costs more than (4, 4) and is rejected
    mu = BitFlipSet(np.array([0.01] * 4 + [0.1] * 4))
    b = budget(R=4)
    apc, ampc = apc_allocate(mu, b), ampc_allocate(mu, b)
    best = brute_force_pair(np.full(4, 0.01), np.full(4, 0.1), 4)
    assert (best[1], best[2]) == (4, 4)
    assert list(ampc.levels) == [4, 4]
    assert ampc.P_sum == pytest.approx(apc.P_sum)


def test_shift_accepted_when_it_pays():
    mu = np.array([0.006, 0.02, 0.083, 0.247, 0.33, 0.368, 0.387, 0.421])
    plan = ampc_allocate(BitFlipSet(mu), budget(R=4))
    best = brute_force_pair(mu[:4], mu[4:], 4)
    assert (best[1], best[2]) == (2, 6)
    assert list(plan.levels) == [2, 6]
    assert plan.P_sum < apc_allocate(BitFlipSet(mu), budget(R=4)).P_sum


def test_equal_mu_keeps_apc_plan():
    mu = BitFlipSet(np.full(16, 0.07))
    b = budget(R=4)
    a, c = apc_allocate(mu, b), ampc_allocate(mu, b)
    assert np.array_equal(a.levels, c.levels)
    assert np.allclose(a.powers, c.powers)


@pytest.mark.parametrize("nb", [8, 12, 16, 17, 30, 64])
def test_ampc_invariants(nb):
    rng = np.random.default_rng(nb)
    for _ in range(20):
        mu = BitFlipSet(rng.uniform(0.005, 0.45, nb))
        b = budget(R=4)
        apc, ampc = apc_allocate(mu, b), ampc_allocate(mu, b)
        assert ampc.T == apc.T
        assert ampc.levels.sum() == ampc.T * ampc.m_init
        assert ampc.rate >= 4
        # within each symmetric pair the low-mu group never carries more bits
        T = ampc.T
        assert all(ampc.levels[t] <= ampc.levels[T - 1 - t] for t in range(T // 2))
        assert np.all((ampc.levels >= 2) & (ampc.levels <= 10))
        assert ampc.P_sum <= apc.P_sum
        # groups partition the stream
        pos = np.concatenate(ampc.groups())
        assert np.array_equal(pos, np.arange(ampc.capacity))
        for p, m, mb in zip(ampc.powers, ampc.levels, ampc.mu_bar):
            assert abs(ber(p, int(m), 1.0) - mb) <= 1e-9


def test_two_group_ampc_is_optimal_among_shifts():
    rng = np.random.default_rng(0)
    for _ in range(30):
        mu = np.sort(rng.uniform(0.005, 0.45, 8))
        plan = ampc_allocate(BitFlipSet(mu), budget(R=4))
        best = brute_force_pair(mu[:4], mu[4:], 4)
        assert plan.P_sum == pytest.approx(best[0], rel=1e-9)


def test_gamma_scaling_of_plans():
    mu = BitFlipSet(np.random.default_rng(1).uniform(0.01, 0.4, 32))
    for method in (APC, AMPC):
        a = allocate(mu, budget(gamma=1.0), method)
        b = allocate(mu, budget(gamma=2.0), method)
        assert np.array_equal(a.levels, b.levels)
        assert np.allclose(b.powers, a.powers / 2, rtol=1e-9)


def test_required_total_power():
    plan = apc_allocate(BitFlipSet(np.array([0.1, 0.2])), budget(R=2))
    assert allocator.required_total_power(plan) == pytest.approx(plan.powers.sum())


def test_select_index_examples():
    assert select_index([150, 90, 40], 100) == (1, 1.0)
    assert select_index([150, 90, 40], 1e12) == (0, 1.0)
    k, scale = select_index([150, 140, 130], 100)
    assert k == 2 and scale == pytest.approx(100 / 130)


def test_select_index_warns_on_non_monotone_ladder():
    with pytest.warns(NonMonotoneLadderWarning):
        select_index([50, 90], 100)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        select_index([90, 50], 100)


def test_select_pair_scaling_flag():
    sets = [BitFlipSet(np.full(16, x)) for x in (0.001, 0.01, 0.05)]
    plan = select_pair(sets, budget(P_tot=1.0), AMPC)
    assert plan.k_star == 3 and plan.scaled
    assert plan.P_sum <= 1.0
    assert plan.P_sum == pytest.approx(1.0)
    plan = select_pair(sets, budget(P_tot=1e6), AMPC)
    assert plan.k_star == 1 and not plan.scaled


def test_k_star_non_increasing_in_budget():
    sets = [BitFlipSet(np.full(16, x)) for x in (0.001, 0.01, 0.05, 0.2)]
    ks = [select_pair(sets, budget(P_tot=p)).k_star for p in np.logspace(-1, 3, 30)]
    assert all(b <= a for a, b in zip(ks, ks[1:]))


def test_sort_round_trip():
    mu = BitFlipSet(np.random.default_rng(3).uniform(0.01, 0.4, 20))
    plan = apc_allocate(mu, budget(R=2))
    bits = np.random.default_rng(4).integers(0, 2, (5, 20))
    assert np.array_equal(allocator.restore_order(allocator.apply_sort(bits, plan), plan), bits)
    sorted_mu = allocator.apply_sort(mu.mu, plan)
    assert np.all(np.diff(sorted_mu) >= 0)
    with pytest.raises(ValueError):
        allocator.apply_sort(bits[:, :3], plan)


def test_plan_csv_round_trip(tmp_path):
    mu = BitFlipSet(np.random.default_rng(5).uniform(0.01, 0.4, 24))
    plan = ampc_allocate(mu, budget(R=4))
    allocator.write_plan_csv(plan, tmp_path / "plan.csv")
    back = allocator.read_plan_csv(tmp_path / "plan.csv")
    assert np.array_equal(back["m_t"], plan.levels)
    assert np.array_equal(back["p_t"], plan.powers)
    assert np.array_equal(back["mu_bar"], plan.mu_bar)


def test_verify_matching_passes_and_flags_halved_power():
    mu = BitFlipSet(np.array([0.02] * 2 + [0.1] * 2))
    plan = apc_allocate(mu, budget(R=2))
    report = allocator.verify_matching(plan, 1.0, n_bits=200_000, seed=1)
    assert report.ok
    from dataclasses import replace

    bad = replace(plan, powers=plan.powers / 2)
    report = allocator.verify_matching(bad, 1.0, n_bits=200_000, seed=1)
    assert list(report.failures) == [0, 1]


def test_link_budget_validation():
    with pytest.raises(ValueError):
        LinkBudget(0.0, 4, 1)
    with pytest.raises(ValueError):
        LinkBudget(1.0, 4, 1, epsilon=0.5)
    with pytest.raises(ValueError):
        allocate(BitFlipSet(np.full(4, 0.1)), budget(), "bogus")


def test_two_group_split_ordering_with_fixed_means():
    # group means held at 0.01 (low) and 0.1 (high)
    low, high = 0.01, 0.1
    totals = {
        (ml, mh): solve_power(low, ml, 1.0) + solve_power(high, mh, 1.0)
        for ml, mh in itertools.product((2, 4, 6), repeat=2)
        if ml + mh == 8
    }
    assert totals[(2, 6)] < totals[(4, 4)] < totals[(6, 2)]
