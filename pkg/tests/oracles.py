"""Reference implementations that share no code with the package.

Used to freeze expected values; each one trades speed for obviousness.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction


def gf_mul_bitwise(a: int, b: int) -> int:
    """Carry-less multiply with reduction by x^8+x^4+x^3+x^2+1."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        if a & 0x100:
            a ^= 0x11D
        b >>= 1
    return out


def decode_threshold_int(S: int, ell: int, eps_num: int, eps_den: int) -> int:
    """ceil((1 + num/den) * S / ell) in pure integer arithmetic."""
    top = (eps_den + eps_num) * S
    bottom = eps_den * ell
    return -(-top // bottom)


def enumerate_tail_ge(n: int, honest: int, m: int, threshold: int) -> Fraction:
    """P[#honest in a uniform m-subset >= threshold] by listing every subset."""
    lanes = range(n)
    good = total = 0
    for subset in itertools.combinations(lanes, m):
        total += 1
        if sum(1 for x in subset if x < honest) >= threshold:
            good += 1
    return Fraction(good, total)


def all_censored_prob(n: int, c_e: int, m: int) -> Fraction:
    """P[every sampled lane is adversarial] = prod_{i<m} (c_e - i)/(n - i)."""
    p = Fraction(1)
    for i in range(m):
        p *= Fraction(max(c_e - i, 0), n - i)
    return p


def min_m_single_honest(n: int, c_e: int, delta: float) -> int:
    """Smallest m with P[no honest lane] <= delta, via the product form."""
    for m in range(1, n + 1):
        if all_censored_prob(n, c_e, m) <= Fraction(delta):
            return m
    raise ValueError("unreachable")


def comb_tail_lt(n: int, honest: int, m: int, k: int) -> Fraction:
    """P[H < k] from exact binomial coefficients."""
    num = sum(math.comb(honest, x) * math.comb(n - honest, m - x) for x in range(0, k))
    return Fraction(num, math.comb(n, m))


def brute_min_m(n: int, c_e: int, delta: float, k: int) -> int | None:
    for m in range(k, n + 1):
        if comb_tail_lt(n, n - c_e, m, k) <= Fraction(delta):
            return m
    return None


def singular_prob_square(b: int, q: int = 256) -> float:
    """1 - prod_{i=1}^{b} (1 - q^-i): a uniform b x b matrix is singular."""
    p = 1.0
    for i in range(1, b + 1):
        p *= 1.0 - q ** (-i)
    return 1.0 - p


# planner argmins by exhaustive search over every (m, k) / (ell, s, m)


def brute_mds(inputs):
    n, c_e = inputs.n, inputs.c_e
    best = None
    for k in range(1, n - c_e + 1):
        for m in range(k, n + 1):
            if comb_tail_lt(n, n - c_e, m, k) <= Fraction(inputs.delta):
                key = (m * (inputs.M_h + -(-inputs.S // k)), m, k)
                best = key if best is None or key < best else best
                break
    return best


def brute_rateless(inputs, K_of):
    n, c_e = inputs.n, inputs.c_e
    best = None
    budget = Fraction(inputs.delta) - Fraction(inputs.delta_code)
    for ell in inputs.ell_sym_grid:
        K = K_of(ell)
        for s in range(1, inputs.s_max + 1):
            need = -(-K // s)
            for m in range(need, n + 1):
                if need <= n - c_e and comb_tail_lt(n, n - c_e, m, need) <= budget:
                    key = (m * (inputs.M_h + s * (inputs.M_s + ell)), m, s, -ell)
                    best = key if best is None or key < best else best
                    break
    return best
