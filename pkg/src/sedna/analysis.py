"""Closed-form probabilities and byte costs for the three submission strategies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import gammaln

from .codec import exact_fraction


class Infeasible(ValueError):
    pass


class InfeasibleReliability(Infeasible):
    """Target failure budget is not above the code's own failure probability."""


@dataclass(frozen=True)
class HypergeomSpec:
    population: int
    successes: int
    draws: int

    def __post_init__(self):
        if not 0 <= self.successes <= self.population:
            raise ValueError(f"need 0 <= successes <= population, got {self}")
        if not 0 <= self.draws <= self.population:
            raise ValueError(f"need 0 <= draws <= population, got {self}")

    @property
    def support(self) -> range:
        lo = max(0, self.draws - (self.population - self.successes))
        return range(lo, min(self.draws, self.successes) + 1)


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def hypergeom_logpmf(spec: HypergeomSpec, x: int) -> float:
    if x not in spec.support:
        return -math.inf
    N, K, m = spec.population, spec.successes, spec.draws
    return _log_comb(K, x) + _log_comb(N - K, m - x) - _log_comb(N, m)


def _sum_pmf(spec: HypergeomSpec, xs: range) -> float:
    total = math.fsum(math.exp(hypergeom_logpmf(spec, x)) for x in xs)
    return min(1.0, max(0.0, total))


def hypergeom_tail_ge(spec: HypergeomSpec, k: int) -> float:
    """P[X >= k], summed term by term so tiny tails keep full precision."""
    sup = spec.support
    if k <= sup.start:
        return 1.0
    return _sum_pmf(spec, range(k, sup.stop))


def hypergeom_tail_lt(spec: HypergeomSpec, k: int) -> float:
    """P[X < k] (the failure side of the liveness constraint)."""
    sup = spec.support
    if k >= sup.stop:
        return 1.0
    return _sum_pmf(spec, range(sup.start, max(k, sup.start)))


def hypergeom_pmf_vector(spec: HypergeomSpec) -> np.ndarray:
    """pmf over x = 0..draws (zeros outside the support)."""
    N, K, m = spec.population, spec.successes, spec.draws
    x = np.arange(m + 1)
    out = np.zeros(m + 1)
    sup = spec.support
    xs = x[sup.start:sup.stop]
    logc = lambda a, b: gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)  # noqa: E731
    out[sup.start:sup.stop] = np.exp(logc(K, xs) + logc(N - K, m - xs) - logc(N, m))
    return out


def honest_lanes(n: int, c_e: int, m: int) -> HypergeomSpec:
    """H: honest lanes among m sampled."""
    return HypergeomSpec(n, n - c_e, m)


def adversarial_lanes(n: int, c_e: int, m: int) -> HypergeomSpec:
    """A: censoring lanes among m sampled."""
    return HypergeomSpec(n, c_e, m)


def lanes_needed(K: int, s: int) -> int:
    return -(-K // s)


def single_slot_success(n: int, c_e: int, m: int, s: int, K: int, delta_code: float = 0.0) -> float:
    """Lower bound (1 - delta_code) * P[H >= ceil(K/s)] on inclusion in one slot."""
    if not 1 <= m <= n or s < 1:
        raise ValueError("need 1 <= m <= n and s >= 1")
    return (1.0 - delta_code) * hypergeom_tail_ge(honest_lanes(n, c_e, m), lanes_needed(K, s))


def expected_slots_upper(p: float) -> float:
    """Mean of the dominating geometric variable; inf when p == 0."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    return math.inf if p == 0 else 1.0 / p


def early_decode_prob(n: int, c_e: int, m: int, s: int, K: int) -> float:
    """P[A >= ceil(K/s)]: adversarial lanes alone hold K symbols in one slot."""
    if m * s < K:
        return 0.0
    return hypergeom_tail_ge(adversarial_lanes(n, c_e, m), lanes_needed(K, s))


@dataclass(frozen=True)
class CostBreakdown:
    l_pub: int
    l_min: int
    S: int

    @property
    def overhead(self) -> float:
        return self.l_pub / self.S


def bandwidth_cost(
    variant: str,
    S: int,
    M_h: int,
    M_s: int = 0,
    ell_sym: int | None = None,
    m: int = 1,
    k: int | None = None,
    s: int = 1,
    K: int | None = None,
    epsilon: float = 0.05,
) -> CostBreakdown:
    """Published and minimum-needed bytes; shares and lane counts are rounded up."""
    if variant == "naive":
        bundle = M_h + S
        return CostBreakdown(m * bundle, bundle, S)
    if variant == "mds":
        if k is None:
            raise ValueError("mds cost needs k")
        bundle = M_h + -(-S // k)
        return CostBreakdown(m * bundle, k * bundle, S)
    if variant == "rateless":
        if ell_sym is None:
            raise ValueError("rateless cost needs ell_sym")
        if K is None:
            K = math.ceil((1 + exact_fraction(epsilon)) * S / ell_sym)
        bundle = M_h + s * (M_s + ell_sym)
        return CostBreakdown(m * bundle, lanes_needed(K, s) * bundle, S)
    raise ValueError(f"unknown variant {variant!r}")


def overhead_floor(variant: str, n: int, c_e: int, epsilon: float = 0.05, m_opt: int | None = None) -> float:
    if variant == "naive":
        if m_opt is None:
            raise ValueError("naive floor is m_opt; pass it")
        return float(m_opt)
    if c_e >= n:
        raise Infeasible("coded variants cannot tolerate c_e = n")
    rate = 1 - Fraction(c_e, n)
    if variant == "mds":
        return float(1 / rate)
    if variant == "rateless":
        return float((1 + exact_fraction(epsilon)) / rate)
    raise ValueError(f"unknown variant {variant!r}")


def it_lower_bound(n: int, c_e: int, S: int) -> Fraction:
    """Least total length n*S/(n - c_e) for deterministic threshold schemes."""
    if c_e >= n:
        raise Infeasible("no scheme survives c_e >= n")
    return Fraction(n * S, n - c_e)


def leakage_bound(r: int, ell_sym: int) -> int:
    """Payload bits r observed symbols can reveal."""
    if r < 0:
        raise ValueError("r must be >= 0")
    return r * ell_sym * 8
