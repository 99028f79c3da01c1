"""Per-symbol power and modulation allocation that realises trained flip probabilities.

Bits are ranked by flip probability (ascending) and packed into ``T``
consecutive groups, one group per QAM symbol.  Each symbol gets the power
at which the model BER of its modulation level equals the mean flip
probability of its group.

* APC keeps every symbol at the lowest modulation level meeting the rate
  target.
* AMPC walks symmetric (lowest, highest) group pairs inwards and moves two
  bits of capacity from the low-probability symbol to the high-probability
  one while that strictly reduces the pair's power.

Positions in a plan refer to the sorted bit stream.  When the frame holds
more bits than the flip set, zero padding fills the tail; padding carries
no information and is left out of every group mean.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import ber_model
from .ber_model import InfeasibleTargetError, M_MAX, M_MIN, solve_power
from .bsc import BitFlipSet
from .phy import monte_carlo_ber

APC = "apc"
AMPC = "ampc"
METHODS = (APC, AMPC)


class InfeasibleRateError(ValueError):
    """The target rate needs a modulation level above ``m_max``."""


class NonMonotoneLadderWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LinkBudget:
    P_tot: float
    R_target: float
    gamma: float
    epsilon: float | None = None
    # weight of the power term in the joint objective; recorded, unused by the allocators
    nu: float = 0.0
    m_min: int = M_MIN
    m_max: int = M_MAX

    def __post_init__(self):
        if not self.P_tot > 0:
            raise ValueError("P_tot must be positive")
        if not self.R_target > 0:
            raise ValueError("R_target must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.epsilon is not None and not 0 < self.epsilon <= 0.1:
            raise ValueError("epsilon must lie in (0, 0.1]")
        ber_model.check_modulation(self.m_min)
        ber_model.check_modulation(self.m_max)
        if self.m_min > self.m_max:
            raise ValueError("m_min exceeds m_max")


@dataclass(frozen=True)
class AllocationPlan:
    levels: np.ndarray
    powers: np.ndarray
    starts: np.ndarray  # first sorted-stream position of each group
    mu_bar: np.ndarray
    sort_perm: np.ndarray
    n_bits: int
    m_init: int
    method: str
    k_star: int | None = None
    scaled: bool = False
    p_sums: tuple = field(default=())

    @property
    def T(self) -> int:
        return int(self.levels.size)

    @property
    def P_sum(self) -> float:
        return required_total_power(self)

    @property
    def rate(self) -> float:
        return self.n_bits / self.T

    @property
    def capacity(self) -> int:
        return int(self.levels.sum())

    def groups(self) -> list[np.ndarray]:
        """Sorted-stream positions per symbol; indices ``>= n_bits`` are padding."""
        return [np.arange(s, s + m) for s, m in zip(self.starts, self.levels)]


def initial_modulation(n_bits: int, R_target: float, m_max: int = M_MAX, m_min: int = M_MIN) -> int:
    """Lowest even level whose symbol count ``ceil(NB/m)`` meets the rate target."""
    if n_bits < 1:
        raise ValueError("need at least one bit")
    limit = n_bits / R_target
    for m in range(m_min, m_max + 1, 2):
        if math.ceil(n_bits / m) <= limit:
            return m
    raise InfeasibleRateError(
        f"rate {R_target} unattainable for {n_bits} bits with m <= {m_max}"
    )


def group_and_average(mu: BitFlipSet, m: int) -> tuple[list[np.ndarray], np.ndarray]:
    """Split the ascending flip probabilities into runs of ``m``; return (groups, means).

    Groups hold sorted-stream positions; the final group may be short.
    """
    s = mu.sorted_mu
    T = math.ceil(s.size / m)
    groups = [np.arange(t * m, min((t + 1) * m, s.size)) for t in range(T)]
    return groups, np.array([s[g].mean() for g in groups])


def _check_budget_mu(mu):
    return mu if isinstance(mu, BitFlipSet) else BitFlipSet(np.asarray(mu, dtype=float))


def apc_allocate(mu: BitFlipSet, budget: LinkBudget) -> AllocationPlan:
    mu = _check_budget_mu(mu)
    n = len(mu)
    m0 = initial_modulation(n, budget.R_target, budget.m_max, budget.m_min)
    _, mu_bar = group_and_average(mu, m0)
    T = mu_bar.size
    powers = np.array([solve_power(x, m0, budget.gamma) for x in mu_bar])
    return AllocationPlan(
        levels=np.full(T, m0, dtype=np.int64),
        powers=powers,
        starts=np.arange(T, dtype=np.int64) * m0,
        mu_bar=mu_bar,
        sort_perm=mu.sort_perm,
        n_bits=n,
        m_init=m0,
        method=APC,
    )


def ampc_allocate(mu: BitFlipSet, budget: LinkBudget) -> AllocationPlan:
    """Joint modulation and power control over symmetric group pairs."""
    mu = _check_budget_mu(mu)
    s = mu.sorted_mu
    n = s.size
    gamma = budget.gamma
    m0 = initial_modulation(n, budget.R_target, budget.m_max, budget.m_min)
    T = math.ceil(n / m0)
    L = T * m0
    prefix = np.concatenate(([0.0], np.cumsum(s)))

    def mean(a, b):  # inclusive sorted positions, padding excluded
        b = min(b, n - 1)
        return (prefix[b + 1] - prefix[a]) / (b - a + 1)

    cache = {}

    def power(target, m):
        key = (target, m)
        if key not in cache:
            cache[key] = solve_power(target, m, gamma)
        return cache[key]

    levels = np.full(T, m0, dtype=np.int64)
    powers = np.zeros(T)
    starts = np.zeros(T, dtype=np.int64)
    mu_bar = np.zeros(T)

    def assign(t, a, b, target):
        levels[t] = b - a + 1
        starts[t] = a
        mu_bar[t] = target
        powers[t] = power(target, levels[t])

    ls, le = 0, m0 - 1
    hs, he = L - m0, L - 1
    t = 0
    while t < T // 2:
        ml, mh = le - ls + 1, he - hs + 1
        mu_l, mu_h = mean(ls, le), mean(hs, he)
        p_sum = power(mu_l, ml) + power(mu_h, mh)

        shift = ml - 2 >= budget.m_min and mh + 2 <= budget.m_max
        # the low group must stay non-empty and clear of the extended high group
        shift = shift and le - 2 >= ls and hs - 2 > le - 2
        if shift:
            try:
                p_shift = power(mean(ls, le - 2), ml - 2) + power(mean(hs - 2, he), mh + 2)
            except InfeasibleTargetError:
                shift = False
        if not shift or not p_shift < p_sum:
            assign(t, ls, le, mu_l)
            assign(T - 1 - t, hs, he, mu_h)
            ls, he = le + 1, hs - 1
            le, hs = ls + m0 - 1, he - m0 + 1
            t += 1
            continue
        le -= 2
        hs -= 2

    if T % 2:
        assign(T // 2, ls, he, mean(ls, he))

    return AllocationPlan(
        levels=levels,
        powers=powers,
        starts=starts,
        mu_bar=mu_bar,
        sort_perm=mu.sort_perm,
        n_bits=n,
        m_init=m0,
        method=AMPC,
    )


def allocate(mu: BitFlipSet, budget: LinkBudget, method: str = AMPC) -> AllocationPlan:
    if method == APC:
        return apc_allocate(mu, budget)
    if method == AMPC:
        return ampc_allocate(mu, budget)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def required_total_power(plan: AllocationPlan) -> float:
    return float(np.sum(plan.powers))


def select_index(p_sums: Sequence[float], P_tot: float) -> tuple[int, float]:
    """Smallest 0-based index whose required power fits ``P_tot``.

    Returns ``(index, scale)``.  When nothing fits, the last entry is chosen
    and ``scale = P_tot / p_sums[-1]`` shrinks its powers onto the budget.
    """
    p_sums = [float(x) for x in p_sums]
    if not p_sums:
        raise ValueError("empty ladder")
    finite = [x for x in p_sums if math.isfinite(x)]
    if any(b > a for a, b in zip(finite, finite[1:])):
        warnings.warn(
            f"required power is not non-increasing along the ladder: {p_sums}",
            NonMonotoneLadderWarning,
            stacklevel=2,
        )
    for k, p in enumerate(p_sums):
        if p <= P_tot:
            return k, 1.0
    last = p_sums[-1]
    if not math.isfinite(last):
        raise InfeasibleTargetError("no ladder entry admits a feasible allocation")
    return len(p_sums) - 1, P_tot / last


def select_pair(mu_sets: Sequence[BitFlipSet], budget: LinkBudget, method: str = AMPC) -> AllocationPlan:
    """Allocate for every ladder entry and keep the first that fits the budget.

    ``mu_sets`` is ordered by ascending regularisation weight, or may be a
    PairBundle.  Entries whose targets the modulation levels cannot reach
    count as infeasible.  The returned plan's ``k_star`` is 1-based.
    """
    mu_sets = [e.mu for e in mu_sets.entries] if hasattr(mu_sets, "entries") else list(mu_sets)
    if not mu_sets:
        raise ValueError("ladder needs at least one flip-probability set")
    plans = []
    for mu in mu_sets:
        try:
            plans.append(allocate(mu, budget, method))
        except InfeasibleTargetError:
            plans.append(None)
    p_sums = [math.inf if p is None else p.P_sum for p in plans]
    k, scale = select_index(p_sums, budget.P_tot)
    plan = replace(plans[k], k_star=k + 1, p_sums=tuple(p_sums))
    if scale < 1.0:
        powers = plan.powers * scale
        while powers.sum() > budget.P_tot:  # rounding can overshoot by an ulp
            scale = np.nextafter(scale, 0.0)
            powers = plan.powers * scale
        plan = replace(plan, powers=powers, scaled=True)
    return plan


def apply_sort(bits, plan: AllocationPlan) -> np.ndarray:
    """Reorder bits so that position ``j`` carries the ``j``-th smallest flip probability."""
    bits = np.asarray(bits)
    if bits.shape[-1] != plan.sort_perm.size:
        raise ValueError("bit count does not match the plan")
    return bits[..., plan.sort_perm]


def restore_order(bits, plan: AllocationPlan) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.shape[-1] != plan.sort_perm.size:
        raise ValueError("bit count does not match the plan")
    out = np.empty_like(bits)
    out[..., plan.sort_perm] = bits
    return out


def default_epsilon(mu_bar) -> np.ndarray:
    return np.maximum(0.05 * np.asarray(mu_bar, dtype=float), 1e-4)


@dataclass
class MatchingReport:
    empirical: np.ndarray
    std_error: np.ndarray
    target: np.ndarray
    tolerance: np.ndarray

    @property
    def passed(self) -> np.ndarray:
        return np.abs(self.empirical - self.target) <= np.maximum(self.tolerance, 3 * self.std_error)

    @property
    def ok(self) -> bool:
        return bool(np.all(self.passed))

    @property
    def failures(self) -> np.ndarray:
        return np.flatnonzero(~self.passed)


def verify_matching(
    plan: AllocationPlan,
    gamma: float,
    epsilon=None,
    n_bits: int = 1_000_000,
    seed=None,
) -> MatchingReport:
    """Monte Carlo BER of every symbol's (power, level) against its group mean.

    ``epsilon`` may be a scalar, a per-group array or ``None`` for the
    default ``max(0.05 mu_bar, 1e-4)``.
    """
    tol = default_epsilon(plan.mu_bar) if epsilon is None else np.broadcast_to(
        np.asarray(epsilon, dtype=float), plan.mu_bar.shape
    )
    streams = np.random.SeedSequence(seed).spawn(plan.T)
    est = np.zeros(plan.T)
    se = np.zeros(plan.T)
    for t in range(plan.T):
        est[t], se[t] = monte_carlo_ber(
            plan.powers[t], int(plan.levels[t]), gamma, n_bits, seed=streams[t]
        )
    return MatchingReport(est, se, plan.mu_bar.copy(), np.array(tol, dtype=float))


CSV_COLUMNS = ("t", "m_t", "p_t", "group_id", "mu_bar")


def write_plan_csv(plan: AllocationPlan, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for t in range(plan.T):
            writer.writerow(
                [t, int(plan.levels[t]), repr(float(plan.powers[t])), t, repr(float(plan.mu_bar[t]))]
            )


def read_plan_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {
        "t": np.array([int(r["t"]) for r in rows]),
        "m_t": np.array([int(r["m_t"]) for r in rows]),
        "p_t": np.array([float(r["p_t"]) for r in rows]),
        "group_id": np.array([int(r["group_id"]) for r in rows]),
        "mu_bar": np.array([float(r["mu_bar"]) for r in rows]),
    }


def plan_summary(plan: AllocationPlan) -> dict:
    return {
        "k_star": plan.k_star,
        "method": plan.method,
        "T": plan.T,
        "P_sum": plan.P_sum,
        "R": plan.rate,
        "scaled": plan.scaled,
        "m_init": plan.m_init,
        "n_bits": plan.n_bits,
    }


def write_plan_summary(plan: AllocationPlan, path) -> None:
    with open(path, "w") as fh:
        json.dump(plan_summary(plan), fh, indent=2)
        fh.write("\n")
