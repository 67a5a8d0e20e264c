"""Equivalence of ensembles on finite regions, computed exactly.

A canonical expectation E_nu[f] of a local observable f supported on
n_local sites of an n_total-site region is obtained by conditioning
the product measure on the total conserved vector:

  E_nu[f] = sum_xi m(xi) f(xi) P_comp(I_tot - S(xi)) / P_tot(I_tot)

where P_comp is the law of the conserved sum over the complementary
sites, built by exact convolution of the single-site law.  For
integer-valued velocity sets the convolution runs on a dense integer
lattice; otherwise on dictionaries keyed by exact Fractions.

The difference |E_mu[f] - E_nu[f]| decays like 1 / n_total at matched
densities; hs1_scaling measures the decay exponent.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import thermo
from .errors import InfeasibleSectorError

__all__ = [
    "site_state_probs",
    "grand_expectation",
    "canonical_expectation",
    "two_point_difference_closed_form",
    "hs1_scaling",
    "HS1Report",
]

_LOCAL_CAP = 2 ** 20


def site_state_probs(vs, lam):
    """Probability of every single-site state under potential lam.

    Returns a (2^nv,) array indexed by the occupation bitmask.
    """
    th = thermo.theta_v(lam, vs)
    nv = vs.n
    probs = np.ones(1 << nv)
    for v in range(nv):
        bit = ((np.arange(1 << nv) >> v) & 1).astype(bool)
        probs *= np.where(bit, th[v], 1.0 - th[v])
    return probs


def _site_value_table(vs):
    # exact conserved vector of each site state; integer fast path
    from .gaplab import _site_values

    return _site_values(vs)


class _DenseLaw:
    """Distribution of an integer-lattice-valued sum, dense storage."""

    def __init__(self, array, origin):
        self.array = array          # d+1 dimensional float array
        self.origin = origin        # value of index (0, ..., 0)

    def prob(self, value):
        idx = tuple(int(v) - o for v, o in zip(value, self.origin))
        if any(i < 0 or i >= s for i, s in zip(idx, self.array.shape)):
            return 0.0
        return float(self.array[idx])

    def total(self):
        return math.fsum(self.array.ravel().tolist())


def _convolve_sites_dense(values, probs, n_sites):
    """Law of the conserved sum over n_sites i.i.d. sites.

    values: (k, m) int64 distinct site conserved vectors, probs: (k,).
    Sequential shifted-add convolution: exact float arithmetic, no
    transform round-off.
    """
    lo = values.min(axis=0)
    hi = values.max(axis=0)
    if n_sites == 0:
        arr = np.ones((1,) * values.shape[1])
        return _DenseLaw(arr, tuple(int(x) for x in np.zeros_like(lo)))
    shape_final = tuple(int(x) for x in (hi - lo) * n_sites + 1)
    if np.prod(shape_final, dtype=np.int64) > 10 ** 8:
        raise MemoryError("conserved-value lattice too large")
    cur = np.zeros((1,) * values.shape[1])
    cur[(0,) * values.shape[1]] = 1.0
    cur_shape = np.ones(values.shape[1], dtype=np.int64)
    for _ in range(n_sites):
        new_shape = cur_shape + (hi - lo)
        new = np.zeros(tuple(int(x) for x in new_shape))
        for val, p in zip(values, probs):
            off = val - lo
            sl = tuple(slice(int(o), int(o + s))
                       for o, s in zip(off, cur_shape))
            new[sl] += p * cur
        cur = new
        cur_shape = new_shape
    return _DenseLaw(cur, tuple(int(x) for x in lo * n_sites))


class _DictLaw:
    def __init__(self, table):
        self.table = table

    def prob(self, value):
        return self.table.get(tuple(value), 0.0)

    def total(self):
        return math.fsum(self.table.values())


def _convolve_sites_dict(values, probs, n_sites):
    cur = {tuple(0 * v for v in values[0]): 1.0}
    for _ in range(n_sites):
        new = {}
        for key, p in cur.items():
            for val, q in zip(values, probs):
                k2 = tuple(a + b for a, b in zip(key, val))
                new[k2] = new.get(k2, 0.0) + p * q
        cur = new
    return _DictLaw(cur)


def conserved_sum_law(vs, lam, n_sites, norm_tol=1e-13):
    """Exact law of the total conserved vector of n_sites product sites."""
    probs_state = site_state_probs(vs, lam)
    values, integral = _site_value_table(vs)
    if integral:
        uvals, inv = np.unique(values, axis=0, return_inverse=True)
        uprobs = np.zeros(len(uvals))
        np.add.at(uprobs, inv, probs_state)
        law = _convolve_sites_dense(uvals, uprobs, n_sites)
    else:
        agg = {}
        for val, p in zip(values, probs_state):
            agg[val] = agg.get(val, 0.0) + float(p)
        law = _convolve_sites_dict(list(agg.keys()), list(agg.values()),
                                   n_sites)
    drift = abs(law.total() - 1.0)
    if n_sites > 0 and drift > norm_tol:
        raise ArithmeticError(
            f"convolution mass drifted by {drift:.3e} (> {norm_tol:.0e})")
    return law


def _local_states(vs, n_local):
    nv = vs.n
    if 1 << (nv * n_local) > _LOCAL_CAP:
        raise InfeasibleSectorError(
            "local region too large to enumerate exactly")
    return np.arange(1 << (nv * n_local), dtype=np.int64)


def _evaluate_f(f, codes, n_local, nv):
    from .gaplab import decode_state

    if callable(f):
        return np.array([float(f(decode_state(int(c), n_local, nv)))
                         for c in codes])
    f = np.asarray(f, dtype=float)
    if f.shape != (len(codes),):
        raise ValueError("precomputed f must cover every local state")
    return f


def grand_expectation(f, n_local, lam, vs):
    """E_mu[f] under the product measure, by exact local enumeration."""
    nv = vs.n
    codes = _local_states(vs, n_local)
    fvals = _evaluate_f(f, codes, n_local, nv)
    sp = site_state_probs(vs, lam)
    mask = (1 << nv) - 1
    weight = np.ones(len(codes))
    for x in range(n_local):
        weight *= sp[(codes >> (x * nv)) & mask]
    return float(fvals @ weight)


def canonical_expectation(f, n_local, n_total, sector, lam, vs,
                          norm_tol=1e-13):
    """E_nu[f] on the sector of an n_total-site region.

    f is a callable on (n_local, nv) occupancy arrays or an array over
    local state codes.  lam only enters through the conditioning (any
    potential with full support gives the same canonical value; a
    matched potential keeps the arithmetic well-scaled).  The
    complement law is convolved exactly; the denominator is checked
    against the independently convolved total law.
    """
    if n_local > n_total:
        raise ValueError("local region larger than the full region")
    nv = vs.n
    codes = _local_states(vs, n_local)
    fvals = _evaluate_f(f, codes, n_local, nv)
    sp = site_state_probs(vs, lam)
    mask = (1 << nv) - 1
    weight = np.ones(len(codes))
    for x in range(n_local):
        weight *= sp[(codes >> (x * nv)) & mask]

    values, integral = _site_value_table(vs)
    comp = conserved_sum_law(vs, lam, n_total - n_local, norm_tol=norm_tol)
    target = tuple(sector)
    if integral:
        svals = np.zeros((len(codes), values.shape[1]), dtype=np.int64)
        for x in range(n_local):
            svals += values[(codes >> (x * nv)) & mask]
        residual = [tuple(int(t) - int(s) for t, s in zip(target, row))
                    for row in svals]
    else:
        acc = []
        for c in codes:
            tot = None
            for x in range(n_local):
                s = values[(int(c) >> (x * nv)) & mask]
                tot = s if tot is None else tuple(
                    a + b for a, b in zip(tot, s))
            acc.append(tot)
        residual = [tuple(t - s for t, s in zip(target, row)) for row in acc]

    cond = np.array([comp.prob(r) for r in residual])
    terms = weight * cond
    denom = math.fsum(terms.tolist())
    if denom <= 0.0:
        raise InfeasibleSectorError(f"sector {target} has zero probability")
    total_law = conserved_sum_law(vs, lam, n_total, norm_tol=norm_tol)
    if abs(denom - total_law.prob(target)) > norm_tol * 10 + 1e-300:
        rel = abs(denom - total_law.prob(target)) / max(denom, 1e-300)
        if rel > 1e-10:
            raise ArithmeticError(
                "conditioning mass disagrees with the total law")
    return float(math.fsum((terms * fvals).tolist()) / denom)


def two_point_difference_closed_form(n, L):
    """Closed-form canonical-minus-grand two-point difference.

    For a single species with n particles on L sites, the nearest
    neighbour pair expectation satisfies
    E_nu[eta_0 eta_1] - E_mu[eta_0 eta_1] = -n (L - n) / (L^2 (L - 1)).
    """
    return -n * (L - n) / (L ** 2 * (L - 1))


@dataclass
class HS1Report:
    """Decay of |E_mu[f] - E_nu[f]| with the region size."""

    sizes: list
    differences: list = field(default_factory=list)
    slope: float = float("nan")


def hs1_scaling(f, n_local, sizes, sector_for, lam, vs):
    """Measure the equivalence-of-ensembles decay exponent.

    sector_for maps a region size to its conserved vector (kept at
    fixed density so the potential lam matches every size).  Returns an
    HS1Report with the log-log slope of |E_mu[f] - E_nu[f]|; the
    first-order equivalence of ensembles gives slope -1.
    """
    mu = grand_expectation(f, n_local, lam, vs)
    report = HS1Report(sizes=list(sizes))
    for L in sizes:
        nu = canonical_expectation(f, n_local, L, sector_for(L), lam, vs)
        report.differences.append(nu - mu)
    x = np.log(np.asarray(report.sizes, dtype=float))
    y = np.log(np.abs(np.asarray(report.differences)))
    report.slope = float(np.polyfit(x, y, 1)[0])
    return report
