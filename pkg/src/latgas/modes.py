"""Most-likely velocity occupation counts in a canonical sector.

For the coordinate-velocity gas on a block of Lbar sites, fix the
conserved vector (I_0, I_1, ..., I_d) with I_j >= 0.  Writing K_j for
the number of particles with velocity -e_j (so K_j + I_j carry +e_j),
the sector-uniform measure induces on K the weight

    barnu(K)  proportional to  prod_j  C(Lbar, K_j) C(Lbar, K_j + I_j)

on the hyperplane 2 sum_j K_j = I_0 - sum_j I_j.  This module locates
the maximizers of barnu exactly: a ratio test decides single-swap
comparisons via the function h_n, a greedy walk follows strictly
increasing weights to a fixed point, and a brute-force enumeration
serves as an independent check on small instances.

All arithmetic is exact (integers and Fractions).
"""

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError, InfeasibleSectorError

__all__ = [
    "h",
    "CountVector",
    "barnu_weight",
    "ratio_le",
    "weight_ratio",
    "is_solution",
    "greedy_mode",
    "all_modes_bruteforce",
    "enumerate_feasible",
]


def h(n, a, Lbar):
    """h_n(a) = ((Lbar - a) / (1 + a)) ((Lbar - a - n) / (1 + a + n)).

    Exact Fraction.  Defined for integer 0 <= a <= Lbar - n; other
    arguments raise DomainError.
    """
    if not (0 <= n <= Lbar):
        raise DomainError(f"need 0 <= n <= Lbar, got n={n}, Lbar={Lbar}")
    if not (0 <= a <= Lbar - n):
        raise DomainError(f"need 0 <= a <= Lbar - n, got a={a}")
    return (Fraction(Lbar - a, 1 + a)
            * Fraction(Lbar - a - n, 1 + a + n))


def _h_ext(n, a, Lbar):
    # boundary extension used by the swap tests: at a = -1 the first
    # denominator vanishes and the natural value is +infinity (a count
    # of zero can never be decremented)
    if a == -1:
        return math.inf
    return h(n, a, Lbar)


@dataclass(frozen=True)
class CountVector:
    """Counts K on the feasibility hyperplane of sector (Lbar, I)."""

    K: tuple
    I: tuple
    Lbar: int

    def __post_init__(self):
        K, I, Lbar = self.K, self.I, self.Lbar
        d = len(K)
        if len(I) != d + 1:
            raise DomainError("I must have one more entry than K")
        if any(ij < 0 for ij in I[1:]):
            raise DomainError("momentum components must be >= 0 "
                              "(reorient axes first)")
        if (I[0] - sum(I[1:])) % 2 != 0:
            raise InfeasibleSectorError(
                f"parity obstruction: I_0 - sum I_j odd for I={I}")
        if 2 * sum(K) != I[0] - sum(I[1:]):
            raise InfeasibleSectorError(
                f"counts off the hyperplane 2 sum K = I_0 - sum I_j: {K}")
        for j in range(d):
            if not (0 <= K[j] and K[j] + I[j + 1] <= Lbar):
                raise InfeasibleSectorError(
                    f"count K_{j + 1}={K[j]} outside [0, Lbar - I_j]")

    @property
    def d(self):
        return len(self.K)

    def move(self, j, k):
        """The swapped vector K + d_j - d_k (0-based axes)."""
        K = list(self.K)
        K[j] += 1
        K[k] -= 1
        return CountVector(K=tuple(K), I=self.I, Lbar=self.Lbar)


def barnu_weight(cv):
    """Exact integer weight prod_j C(Lbar, K_j) C(Lbar, K_j + I_j)."""
    w = 1
    for j in range(cv.d):
        w *= math.comb(cv.Lbar, cv.K[j]) * math.comb(cv.Lbar,
                                                     cv.K[j] + cv.I[j + 1])
    return w


def weight_ratio(cv, j, k):
    """barnu(K + d_j - d_k) / barnu(K) as an exact Fraction."""
    return Fraction(barnu_weight(cv.move(j, k)), barnu_weight(cv))


def ratio_le(cv, j, k):
    """Whether the swap j <- k does not increase the weight.

    Decided through the h comparison
    barnu(K + d_j - d_k) <= barnu(K)  iff
    h_{I_j}(K_j) <= h_{I_k}(K_k - 1), evaluated exactly.
    """
    if cv.K[k] < 1:
        raise DomainError("cannot decrement a zero count")
    lhs = _h_ext(cv.I[j + 1], cv.K[j], cv.Lbar)
    rhs = _h_ext(cv.I[k + 1], cv.K[k] - 1, cv.Lbar)
    return lhs <= rhs


def is_solution(cv):
    """Whether K satisfies min_k h_{I_k}(K_k - 1) >= max_j h_{I_j}(K_j).

    Equivalent to: no single swap strictly increases the weight.
    """
    lo = min(_h_ext(cv.I[k + 1], cv.K[k] - 1, cv.Lbar)
             for k in range(cv.d))
    hi = max(_h_ext(cv.I[j + 1], cv.K[j], cv.Lbar) for j in range(cv.d))
    return lo >= hi


def greedy_mode(cv, max_steps=None):
    """Walk strictly weight-increasing swaps to a solution.

    At each step decrement the axis k0 minimizing h_{I_k}(K_k - 1) and
    increment the axis j0 maximizing h_{I_j}(K_j), ties broken by the
    lowest index; stop when the defining inequality holds.  Returns
    (solution, path) where path lists every visited CountVector
    including the endpoints.  Each step increases barnu strictly, so
    the walk terminates.
    """
    if max_steps is None:
        max_steps = cv.d * (cv.Lbar + 1) * (cv.Lbar + 2)
    path = [cv]
    for _ in range(max_steps):
        hs_dec = [_h_ext(cv.I[k + 1], cv.K[k] - 1, cv.Lbar)
                  for k in range(cv.d)]
        hs_inc = [_h_ext(cv.I[j + 1], cv.K[j], cv.Lbar)
                  for j in range(cv.d)]
        k0 = min(range(cv.d), key=lambda k: (hs_dec[k], k))
        j0 = max(range(cv.d), key=lambda j: (hs_inc[j], -j))
        if hs_dec[k0] >= hs_inc[j0]:
            return cv, path
        cv = cv.move(j0, k0)
        path.append(cv)
    raise RuntimeError("greedy walk failed to terminate")


def enumerate_feasible(Lbar, I):
    """All count vectors on the hyperplane of sector (Lbar, I)."""
    d = len(I) - 1
    if any(ij < 0 or ij > Lbar for ij in I[1:]):
        return []
    total2 = I[0] - sum(I[1:])
    if total2 < 0 or total2 % 2:
        return []
    total = total2 // 2
    out = []
    ranges = [range(0, Lbar - I[j + 1] + 1) for j in range(d)]
    for K in itertools.product(*ranges):
        if sum(K) == total:
            out.append(CountVector(K=K, I=tuple(I), Lbar=Lbar))
    return out


def all_modes_bruteforce(Lbar, I):
    """Exhaustive maximizers and fixed points of the swap test.

    Returns (maximizers, solutions): count vectors of maximal exact
    weight, and count vectors satisfying is_solution.  The two lists
    agree; tests assert this on every small instance.
    """
    feas = enumerate_feasible(Lbar, I)
    if not feas:
        raise InfeasibleSectorError(f"empty sector (Lbar={Lbar}, I={I})")
    weights = [barnu_weight(cv) for cv in feas]
    wmax = max(weights)
    maximizers = [cv for cv, w in zip(feas, weights) if w == wmax]
    solutions = [cv for cv in feas if is_solution(cv)]
    return maximizers, solutions
