import math

import numpy as np
import pytest

import oracles
from sedna import analysis, planner
from sedna.analysis import Infeasible, InfeasibleReliability
from sedna.planner import PlanInputs


def test_closed_form_default_example():
    b = math.sqrt(2 * 0.875 * math.log(1e9))
    assert b == pytest.approx(6.022, abs=1e-3)
    assert planner.closed_form_m(0.875, 1e-9, 1) == pytest.approx(49.7, abs=0.1)
    for k in (1, 5, 40):
        assert planner.closed_form_m(1.0, 1e-6, k) >= k
    with pytest.raises(InfeasibleReliability):
        planner.closed_form_m(0.875, 0.0, 1)


def test_exact_min_m_default_and_product_oracle():
    assert float(oracles.all_censored_prob(256, 32, 9)) == pytest.approx(2.49e-9, rel=1e-2)
    assert float(oracles.all_censored_prob(256, 32, 10)) == pytest.approx(2.3e-10, rel=1e-2)
    assert oracles.min_m_single_honest(256, 32, 1e-9) == 10
    assert planner.exact_min_m(256, 32, 1e-9, 1) == 10


def test_exact_min_m_edge_cases():
    for k in (1, 7, 30):
        assert planner.exact_min_m(64, 0, 1e-9, k) == k
    with pytest.raises(Infeasible):
        planner.exact_min_m(16, 4, 1e-3, 13)
    with pytest.raises(InfeasibleReliability):
        planner.exact_min_m(16, 4, 0.0, 1)


@pytest.mark.parametrize("n,c_e,delta", [(12, 3, 1e-2), (16, 5, 1e-4), (10, 0, 0.1), (9, 4, 1e-3)])
def test_exact_min_m_matches_linear_scan(n, c_e, delta):
    for k in range(1, n - c_e + 1):
        assert planner.exact_min_m(n, c_e, delta, k) == oracles.brute_min_m(n, c_e, delta, k)


def test_min_m_by_k_matches_bisection():
    table = planner.min_m_by_k(64, 16, 1e-6)
    for k in range(1, 49):
        assert table[k] == planner.exact_min_m(64, 16, 1e-6, k)


def test_closed_form_dominates_exact_on_grid():
    rng = np.random.default_rng(4)
    points = 0
    while points < 100:
        n = int(rng.integers(8, 512))
        c_e = int(rng.integers(0, n // 2))
        delta = float(10.0 ** -rng.uniform(1, 12))
        k = int(rng.integers(1, n - c_e + 1))
        cf = planner.closed_form_m(1 - c_e / n, delta, k)
        exact = planner.exact_min_m(n, c_e, delta, k)
        assert math.ceil(cf) >= exact
        points += 1


def test_plan_naive_defaults():
    r = planner.plan_naive(PlanInputs(S=4096))
    assert r.m == 10 and r.cost.l_pub == 10 * (200 + 4096)
    r0 = planner.plan_naive(PlanInputs(c_e=0))
    assert r0.m == 1 and r0.overhead == pytest.approx(4296 / 4096)
    assert planner.plan_naive(PlanInputs(delta=1e-3)).m < 10


def test_plan_mds_convergence_and_small_payloads():
    overheads = [planner.plan_mds(PlanInputs(S=2 ** e)).overhead for e in range(10, 23)]
    assert all(b <= a for a, b in zip(overheads, overheads[1:]))
    assert overheads[-1] == pytest.approx(8 / 7, rel=0.05)
    assert overheads[-1] >= 8 / 7
    tiny = planner.plan_mds(PlanInputs(S=100))
    assert tiny.k <= 2


def test_rateless_lane_requirement_shift():
    K = 17
    assert [analysis.lanes_needed(K, s) for s in (1, 4, 17)] == [17, 5, 1]


def test_rateless_reliability_infeasible():
    with pytest.raises(InfeasibleReliability):
        planner.plan_rateless(PlanInputs(delta=1e-12, delta_code=1e-9))


def test_rateless_pinned_default_symbol_size():
    r = planner.plan_rateless(PlanInputs(S=4096, ell_sym_grid=(256,), delta_code=0.0))
    assert r.K == 17 and r.ell_sym == 256


def test_large_payload_near_floor():
    cmp = planner.compare_strategies(PlanInputs(S=2 ** 20))
    floor = 8 / 7
    assert cmp.plans["mds"].overhead <= 1.25 * floor
    assert cmp.plans["rateless"].overhead <= 1.25 * floor
    assert cmp.plans["naive"].overhead == pytest.approx(cmp.plans["naive"].m, rel=0.01)


def test_small_payload_naive_competitive():
    cmp = planner.compare_strategies(PlanInputs(S=150))
    assert cmp.plans["naive"].cost.l_pub <= 2 * min(p.cost.l_pub for p in cmp.plans.values())


def test_plans_are_feasible_when_reevaluated():
    for S in (512, 4096, 65536):
        inputs = PlanInputs(S=S, delta=1e-6)
        for name, r in planner.compare_strategies(inputs).plans.items():
            assert 1 - r.success_prob <= inputs.delta * (1 + 1e-9), name


# ---------------------------------------------------------------- exhaustive n <= 16

CASES = [
    PlanInputs(n=16, c_e=3, delta=1e-3, S=600, M_h=40, M_s=4, ell_sym_grid=(32, 64, 128), s_max=8, delta_code=1e-5),
    PlanInputs(n=12, c_e=4, delta=1e-2, S=300, M_h=20, M_s=2, ell_sym_grid=(16, 50, 100), s_max=10, delta_code=0.0),
    PlanInputs(n=16, c_e=0, delta=1e-6, S=1000, M_h=100, M_s=8, ell_sym_grid=(64, 256), s_max=6, delta_code=1e-7),
    PlanInputs(n=9, c_e=2, delta=0.05, S=90, M_h=10, M_s=1, ell_sym_grid=(8, 30), s_max=12, delta_code=0.0),
]


@pytest.mark.parametrize("inputs", CASES)
def test_exhaustive_small_n(inputs):
    mds = planner.plan_mds(inputs)
    assert (mds.cost.l_pub, mds.m, mds.k) == oracles.brute_mds(inputs)
    K_of = lambda ell: oracles.decode_threshold_int(inputs.S, ell, 5, 100)  # noqa: E731
    rl = planner.plan_rateless(inputs)
    assert (rl.cost.l_pub, rl.m, rl.s, -rl.ell_sym) == oracles.brute_rateless(inputs, K_of)
