"""Bandwidth-minimal submission parameters for a target per-slot failure budget.

Every search is exact (hypergeometric tails); the Chernoff closed form is
reported next to each result as a conservative cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import analysis, codec
from .analysis import CostBreakdown, Infeasible, InfeasibleReliability, honest_lanes

DEFAULT_ELL_SYM_GRID = (64, 128, 256, 512, 1024, 2048, 4096)
DEFAULT_S_MAX = 64
# Tails are float sums of lgamma terms (relative error ~1e-13); a failure
# probability equal to the budget must not be rejected on rounding.
BUDGET_RTOL = 1e-10

CSV_COLUMNS = (
    "variant", "n", "c_e", "delta", "S", "m", "k", "s", "ell_sym", "K",
    "L_pub", "L_min", "overhead", "success_prob", "early_decode_prob", "m_closed_form",
)


@dataclass(frozen=True)
class PlanInputs:
    n: int = 256
    c_e: int = 32
    delta: float = 1e-9
    S: int = 4096
    M_h: int = 200
    M_s: int = 8
    epsilon: float = 0.05
    # None: look up the codec's table per (K, blocks)
    delta_code: float | None = None
    ell_sym_grid: tuple[int, ...] = DEFAULT_ELL_SYM_GRID
    s_max: int = DEFAULT_S_MAX
    mds_max_lanes: int = codec.MAX_MDS_SHARES

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not 0 <= self.c_e < self.n:
            raise Infeasible(f"need 0 <= c_e < n, got c_e={self.c_e}, n={self.n}")
        if self.S < 1:
            raise ValueError("S must be >= 1")
        if self.s_max < 1 or not self.ell_sym_grid:
            raise ValueError("empty rateless search grid")

    @property
    def honest_ratio(self) -> float:
        return 1 - self.c_e / self.n


@dataclass(frozen=True)
class PlanResult:
    variant: str
    inputs: PlanInputs
    m: int
    cost: CostBreakdown
    success_prob: float
    early_decode_prob: float
    m_closed_form: float
    k: int | None = None
    s: int | None = None
    ell_sym: int | None = None
    K: int | None = None
    delta_code: float = 0.0
    clamp_binding: bool = False

    @property
    def m_exact(self) -> int:
        return self.m

    @property
    def overhead(self) -> float:
        return self.cost.overhead

    def row(self) -> dict:
        i = self.inputs
        return {
            "variant": self.variant, "n": i.n, "c_e": i.c_e, "delta": i.delta, "S": i.S,
            "m": self.m, "k": self.k if self.k is not None else "",
            "s": self.s if self.s is not None else "",
            "ell_sym": self.ell_sym if self.ell_sym is not None else "",
            "K": self.K if self.K is not None else "",
            "L_pub": self.cost.l_pub, "L_min": self.cost.l_min,
            "overhead": self.cost.overhead,
            "success_prob": self.success_prob,
            "early_decode_prob": self.early_decode_prob,
            "m_closed_form": self.m_closed_form,
        }


def closed_form_m(c_r: float, delta_eff: float, k: int) -> float:
    """Chernoff-based lane count: ((b + sqrt(b^2 + 4 c_r k)) / (2 c_r))^2,
    b = sqrt(2 c_r ln(1/delta_eff))."""
    if delta_eff <= 0:
        raise InfeasibleReliability("effective failure budget must be > 0")
    if not 0 < c_r <= 1:
        raise ValueError("honest ratio must lie in (0, 1]")
    if k < 1:
        raise ValueError("k must be >= 1")
    b = math.sqrt(2 * c_r * math.log(1 / delta_eff))
    return ((b + math.sqrt(b * b + 4 * c_r * k)) / (2 * c_r)) ** 2


def failure_prob(n: int, c_e: int, m: int, k: int) -> float:
    return analysis.hypergeom_tail_lt(honest_lanes(n, c_e, m), k)


def within_budget(p: float, budget: float) -> bool:
    return p <= budget * (1 + BUDGET_RTOL)


@lru_cache(maxsize=4096)
def exact_min_m(n: int, c_e: int, delta_eff: float, k: int) -> int:
    """Smallest m with P[H < k] <= delta_eff, H ~ Hypergeom(n, n - c_e, m).

    P[H < k] is non-increasing in m, so bisection returns the same m as a
    linear scan over m = k..n.
    """
    if delta_eff <= 0:
        raise InfeasibleReliability("effective failure budget must be > 0")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n - c_e:
        raise Infeasible(f"need k <= n - c_e honest lanes, got k={k}, n-c_e={n - c_e}")
    lo, hi = k, n
    while lo < hi:
        mid = (lo + hi) // 2
        if within_budget(failure_prob(n, c_e, mid, k), delta_eff):
            hi = mid
        else:
            lo = mid + 1
    return lo


@lru_cache(maxsize=64)
def min_m_by_k(n: int, c_e: int, delta_eff: float) -> np.ndarray:
    """``out[k]`` = exact_min_m(n, c_e, delta_eff, k) for k = 1..n-c_e (out[0] unused).

    One pass over m: the largest feasible k for fanout m is the number of
    leading pmf terms whose running sum stays within the budget.
    """
    out = np.zeros(n - c_e + 1, dtype=np.int64)
    best_k = 0
    for m in range(1, n + 1):
        pmf = analysis.hypergeom_pmf_vector(honest_lanes(n, c_e, m))
        cdf = np.cumsum(pmf)
        # P[H < k] = cdf[k-1]
        feasible = int(np.searchsorted(cdf, delta_eff * (1 + BUDGET_RTOL), side="right"))
        k_max = min(feasible, n - c_e)
        if k_max > best_k:
            out[best_k + 1:k_max + 1] = m
            best_k = k_max
        if best_k == n - c_e:
            break
    return out


def _naive_result(inputs: PlanInputs, m: int) -> PlanResult:
    n, c_e = inputs.n, inputs.c_e
    return PlanResult(
        variant="naive",
        inputs=inputs,
        m=m,
        cost=analysis.bandwidth_cost("naive", inputs.S, inputs.M_h, m=m),
        success_prob=analysis.hypergeom_tail_ge(honest_lanes(n, c_e, m), 1),
        early_decode_prob=analysis.early_decode_prob(n, c_e, m, 1, 1),
        m_closed_form=closed_form_m(inputs.honest_ratio, inputs.delta, 1),
        K=1,
    )


def plan_naive(inputs: PlanInputs) -> PlanResult:
    return _naive_result(inputs, exact_min_m(inputs.n, inputs.c_e, inputs.delta, 1))


def _mds_result(inputs: PlanInputs, m: int, k: int, clamp_binding: bool = False) -> PlanResult:
    n, c_e = inputs.n, inputs.c_e
    return PlanResult(
        variant="mds",
        inputs=inputs,
        m=m,
        k=k,
        K=k,
        cost=analysis.bandwidth_cost("mds", inputs.S, inputs.M_h, m=m, k=k),
        success_prob=analysis.hypergeom_tail_ge(honest_lanes(n, c_e, m), k),
        early_decode_prob=analysis.early_decode_prob(n, c_e, m, 1, k),
        m_closed_form=closed_form_m(inputs.honest_ratio, inputs.delta, k),
        clamp_binding=clamp_binding,
    )


def plan_mds(inputs: PlanInputs) -> PlanResult:
    """argmin over k of m(k) * (M_h + ceil(S/k)); ties go to the smaller m, then k."""
    n, c_e = inputs.n, inputs.c_e
    m_of_k = min_m_by_k(n, c_e, inputs.delta)
    best = best_unclamped = None
    for k in range(1, n - c_e + 1):
        m = int(m_of_k[k])
        key = (m * (inputs.M_h + -(-inputs.S // k)), m, k)
        if best_unclamped is None or key < best_unclamped:
            best_unclamped = key
        if m <= inputs.mds_max_lanes and (best is None or key < best):
            best = key
    if best is None:
        raise Infeasible(f"no (m, k) with m <= {inputs.mds_max_lanes} meets delta={inputs.delta}")
    _, m, k = best
    return _mds_result(inputs, m, k, clamp_binding=best != best_unclamped)


def _rateless_delta_code(inputs: PlanInputs, S: int, ell: int) -> tuple[int, float]:
    params = codec.RatelessParams(S, ell, inputs.epsilon)
    dc = inputs.delta_code if inputs.delta_code is not None else codec.delta_code_for(params)
    return params.decode_threshold, dc


def rateless_candidates(inputs: PlanInputs):
    """Yield (cost, m, s, ell, K, delta_code) for every feasible grid point."""
    n, c_e = inputs.n, inputs.c_e
    for ell in inputs.ell_sym_grid:
        K, dc = _rateless_delta_code(inputs, inputs.S, ell)
        budget = inputs.delta - dc
        if budget <= 0:
            continue
        for s in range(1, inputs.s_max + 1):
            need = analysis.lanes_needed(K, s)
            if need > n - c_e:
                continue
            m = exact_min_m(n, c_e, budget, need)
            yield m * (inputs.M_h + s * (inputs.M_s + ell)), m, s, ell, K, dc
            if need == 1:
                break


def plan_rateless(inputs: PlanInputs) -> PlanResult:
    """Grid search over (ell_sym, s); ties: smaller m, then smaller s, then larger ell_sym."""
    best = None
    floor_dc = min(_rateless_delta_code(inputs, inputs.S, ell)[1] for ell in inputs.ell_sym_grid)
    reliability_blocked = inputs.delta <= floor_dc
    for cost, m, s, ell, K, dc in rateless_candidates(inputs):
        key = (cost, m, s, -ell)
        if best is None or key < best[0]:
            best = (key, m, s, ell, K, dc)
    if best is None:
        if reliability_blocked:
            raise InfeasibleReliability(
                f"need delta > delta_code; delta={inputs.delta} but the smallest decode failure"
                f" probability over the symbol-size grid is {floor_dc:.3g}"
            )
        raise Infeasible("no rateless configuration meets the failure budget")
    _, m, s, ell, K, dc = best
    return rateless_result(inputs, m, s, ell, K, dc)


def rateless_result(inputs: PlanInputs, m: int, s: int, ell: int, K: int, dc: float) -> PlanResult:
    n, c_e = inputs.n, inputs.c_e
    return PlanResult(
        variant="rateless",
        inputs=inputs,
        m=m,
        s=s,
        ell_sym=ell,
        K=K,
        cost=analysis.bandwidth_cost("rateless", inputs.S, inputs.M_h, inputs.M_s, ell, m=m, s=s, K=K),
        success_prob=analysis.single_slot_success(n, c_e, m, s, K, dc),
        early_decode_prob=analysis.early_decode_prob(n, c_e, m, s, K),
        m_closed_form=closed_form_m(inputs.honest_ratio, inputs.delta - dc, analysis.lanes_needed(K, s)),
        delta_code=dc,
    )


PLANNERS = {"naive": plan_naive, "mds": plan_mds, "rateless": plan_rateless}


def plan(variant: str, inputs: PlanInputs) -> PlanResult:
    try:
        return PLANNERS[variant](inputs)
    except KeyError:
        raise ValueError(f"unknown variant {variant!r}") from None


@dataclass
class Comparison:
    inputs: PlanInputs
    plans: dict[str, PlanResult] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    floors: dict[str, float] = field(default_factory=dict)

    @property
    def cheapest(self) -> str | None:
        if not self.plans:
            return None
        return min(self.plans.values(), key=lambda p: (p.cost.l_pub, p.variant)).variant

    def naive_to_rateless(self) -> float | None:
        if "naive" in self.plans and "rateless" in self.plans:
            return self.plans["naive"].overhead / self.plans["rateless"].overhead
        return None


def compare_strategies(inputs: PlanInputs) -> Comparison:
    out = Comparison(inputs)
    for variant in PLANNERS:
        try:
            out.plans[variant] = plan(variant, inputs)
        except Infeasible as exc:
            out.errors[variant] = str(exc)
    if "naive" in out.plans:
        out.floors["naive"] = analysis.overhead_floor("naive", inputs.n, inputs.c_e, m_opt=out.plans["naive"].m)
    out.floors["mds"] = analysis.overhead_floor("mds", inputs.n, inputs.c_e)
    out.floors["rateless"] = analysis.overhead_floor("rateless", inputs.n, inputs.c_e, inputs.epsilon)
    return out


def with_inputs(inputs: PlanInputs, **changes) -> PlanInputs:
    return replace(inputs, **changes)
