"""Exact finite-volume generator analysis.

On a small region (a handful of sites, geometry irrelevant except for
the bounded-range variant) this module enumerates conserved-vector
sectors, assembles the sparse generator matrices of the uniform
long-jump exclusion, the on-site collision dynamics and the four-site
collision dynamics, and computes spectral gaps and Dirichlet forms
exactly.

State encoding: a configuration on n sites with n_v species is the
integer whose bit (site * n_v + v) is the occupation of (site, v).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, InfeasibleSectorError

__all__ = [
    "decode_state",
    "encode_state",
    "all_sectors",
    "enumerate_sector",
    "build_generators",
    "spectral_gap",
    "dirichlet_form",
    "dirichlet_ex_direct",
    "dirichlet_c_direct",
    "dirichlet_tilde_direct",
    "counts_projection",
    "check_lemma_gs12",
    "GS12Report",
]

_ENUM_CAP = 2 ** 22


def decode_state(code, n_sites, nv):
    """Integer code to a (n_sites, nv) uint8 occupancy array."""
    occ = np.empty((n_sites, nv), dtype=np.uint8)
    for x in range(n_sites):
        for v in range(nv):
            occ[x, v] = (code >> (x * nv + v)) & 1
    return occ


def encode_state(occ):
    """Inverse of decode_state."""
    code = 0
    n_sites, nv = occ.shape
    for x in range(n_sites):
        for v in range(nv):
            if occ[x, v]:
                code |= 1 << (x * nv + v)
    return code


def _nv(vs):
    return 1 if vs is None else vs.n


def _site_values(vs):
    """Conserved vector of every single-site state.

    Returns (values, integral): when every velocity component is an
    integer (Model I, scalar gas), values is an int64 array of shape
    (2^nv, d+1) enabling vectorized sector grouping; otherwise a list
    of exact Fraction tuples.
    """
    if vs is None:
        return np.array([[0], [1]], dtype=np.int64), True
    rows = vs.conserved_matrix_exact()
    integral = all(c.denominator == 1 for row in rows for c in row)
    nv, d = vs.n, vs.dim
    states = 1 << nv
    if integral:
        table = np.zeros((states, d + 1), dtype=np.int64)
        introws = [[int(c) for c in row] for row in rows]
        for s in range(states):
            for v in range(nv):
                if (s >> v) & 1:
                    for a in range(d + 1):
                        table[s, a] += introws[v][a]
        return table, True
    table = []
    for s in range(states):
        acc = [0] * (d + 1)
        for v in range(nv):
            if (s >> v) & 1:
                for a in range(d + 1):
                    acc[a] += rows[v][a]
        table.append(tuple(acc))
    return table, False


def _normalize_key(values):
    out = []
    for x in values:
        if hasattr(x, "denominator") and x.denominator == 1:
            out.append(int(x))
        elif isinstance(x, (int, np.integer)):
            out.append(int(x))
        else:
            out.append(x)
    return tuple(out)


def all_sectors(n_sites, vs, cap=_ENUM_CAP):
    """Group the full state space by exact conserved vector.

    Returns {sector key: sorted int64 array of state codes}.
    """
    nv = _nv(vs)
    total = 1 << (nv * n_sites)
    if total > cap:
        raise InfeasibleSectorError(
            f"state space of {total} configurations exceeds cap {cap}")
    values, integral = _site_values(vs)
    if integral:
        codes = np.arange(total, dtype=np.int64)
        mask = (1 << nv) - 1
        tot = np.zeros((total, values.shape[1]), dtype=np.int64)
        for x in range(n_sites):
            tot += values[(codes >> (x * nv)) & mask]
        order = np.lexsort(tot.T[::-1])
        sectors = {}
        sorted_tot = tot[order]
        breaks = np.nonzero(np.any(np.diff(sorted_tot, axis=0) != 0,
                                   axis=1))[0] + 1
        for chunk in np.split(order, breaks):
            key = _normalize_key(tot[chunk[0]])
            sectors[key] = np.sort(codes[chunk])
        return sectors
    sectors = {}
    mask = (1 << nv) - 1
    for code in range(total):
        acc = None
        for x in range(n_sites):
            s = (code >> (x * nv)) & mask
            acc = values[s] if acc is None else tuple(
                a + b for a, b in zip(acc, values[s]))
        sectors.setdefault(_normalize_key(acc), []).append(code)
    return {k: np.asarray(v, dtype=np.int64) for k, v in sectors.items()}


def enumerate_sector(n_sites, vs, sector, cap=_ENUM_CAP):
    """Sorted codes of every configuration with the given conserved vector."""
    sectors = all_sectors(n_sites, vs, cap=cap)
    return sectors.get(_normalize_key(tuple(sector)),
                       np.empty(0, dtype=np.int64))


def _lookup(codes, targets):
    pos = np.searchsorted(codes, targets)
    pos = np.clip(pos, 0, len(codes) - 1)
    if not np.all(codes[pos] == targets):
        raise InfeasibleSectorError(
            "a transition left the sector: state list is not closed")
    return pos


class _Builder:
    def __init__(self, codes):
        self.codes = np.asarray(codes, dtype=np.int64)
        self.rows, self.cols, self.vals = [], [], []

    def add_moves(self, set_bits, clear_bits, rate):
        """Vectorized transition: states with clear_bits empty and
        set_bits occupied move to the state with all listed bits
        flipped, at the given rate."""
        c = self.codes
        ok = np.ones(len(c), dtype=bool)
        flip = np.int64(0)
        for b in set_bits:
            ok &= (c >> b) & 1 == 1
            flip |= np.int64(1) << b
        for b in clear_bits:
            ok &= (c >> b) & 1 == 0
            flip |= np.int64(1) << b
        src = np.nonzero(ok)[0]
        if len(src) == 0:
            return
        dst = _lookup(c, c[src] ^ flip)
        self.rows.append(src)
        self.cols.append(dst)
        self.vals.append(np.full(len(src), rate))

    def matrix(self):
        n = len(self.codes)
        if not self.rows:
            return sp.csr_matrix((n, n))
        rows = np.concatenate(self.rows)
        cols = np.concatenate(self.cols)
        vals = np.concatenate(self.vals)
        gen = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        gen -= sp.diags(np.asarray(gen.sum(axis=1)).ravel())
        return gen


def build_generators(codes, vs, M, n_sites, d=None, which=("ex", "c"),
                     bounded=False, coords=None):
    """Assemble generator matrices restricted to a sector.

    which selects among:
      "ex":      exclusion where each particle jumps to any other site
                 of the region at rate M^-(d+2) (ordered pairs),
      "c":       on-site collisions at rate 1 per eligible quadruple,
      "c_tilde": four-site collisions, each (x1..x4, q) at weight
                 n_sites^-3.
    bounded replaces "ex" by the finite-range variant: ordered pairs at
    distance |x - y|_inf <= M (coords required), rate 2 A_M / M^(d+2).
    Matrices are exactly symmetric, with zero row sums.
    """
    nv = _nv(vs)
    if d is None:
        d = 1 if vs is None else vs.dim
    quads = (np.empty((0, 4), dtype=np.int64) if vs is None
             else _collision_quadruples(vs))
    out = {}
    if "ex" in which:
        b = _Builder(codes)
        if bounded:
            from .kernels import compute_AM

            if coords is None:
                raise ValueError("bounded exclusion requires site coords")
            coords = np.asarray(coords)
            rate = 2.0 * compute_AM(M, d) / float(M) ** (d + 2)
            for x in range(n_sites):
                for y in range(n_sites):
                    if x != y and np.max(np.abs(coords[x] - coords[y])) <= M:
                        for v in range(nv):
                            b.add_moves([x * nv + v], [y * nv + v], rate)
        else:
            rate = float(M) ** -(d + 2)
            for x in range(n_sites):
                for y in range(n_sites):
                    if x != y:
                        for v in range(nv):
                            b.add_moves([x * nv + v], [y * nv + v], rate)
        out["ex"] = b.matrix()
    if "c" in which:
        b = _Builder(codes)
        for y in range(n_sites):
            for q in quads:
                b.add_moves([y * nv + q[0], y * nv + q[1]],
                            [y * nv + q[2], y * nv + q[3]], 1.0)
        out["c"] = b.matrix()
    if "c_tilde" in which:
        b = _Builder(codes)
        w = float(n_sites) ** -3
        for q in quads:
            for x1 in range(n_sites):
                for x2 in range(n_sites):
                    for x3 in range(n_sites):
                        for x4 in range(n_sites):
                            b.add_moves([x1 * nv + q[0], x2 * nv + q[1]],
                                        [x3 * nv + q[2], x4 * nv + q[3]], w)
        out["c_tilde"] = b.matrix()
    return out


def _collision_quadruples(vs):
    from .velocity import collision_quadruples

    return collision_quadruples(vs)


def spectral_gap(gen, dense_cutoff=4000):
    """Lowest two eigenvalues of -L on the sector.

    Returns (lambda0, gap).  lambda0 should vanish to round-off; gap is
    the second-smallest eigenvalue, strictly positive exactly when the
    dynamics is ergodic on the sector.  Dense diagonalization below
    dense_cutoff states, shift-inverted Lanczos above.
    """
    a = (-gen).tocsr()
    n = a.shape[0]
    if n == 1:
        return 0.0, 0.0
    if n <= dense_cutoff:
        vals = np.linalg.eigvalsh(a.toarray())
        return float(vals[0]), float(vals[1])
    try:
        vals = spla.eigsh(a.tocsc(), k=2, sigma=-1e-9,
                          return_eigenvectors=False)
    except Exception as exc:
        raise ConvergenceError(f"sparse eigensolver failed: {exc}") from exc
    vals = np.sort(vals)
    return float(vals[0]), float(vals[1])


def dirichlet_form(gen, f):
    """<f, -L f> under the uniform sector measure."""
    f = np.asarray(f, dtype=float)
    return float(f @ (-(gen @ f))) / len(f)


def dirichlet_ex_direct(codes, f, M, nv, n_sites, d):
    """Explicit swap-sum Dirichlet form of the uniform exclusion.

    (1 / (4 M^(d+2))) sum_v sum_{x,y} E[(f(xi^{x,y,v}) - f(xi))^2]
    under the uniform measure on the sector; an independent route to
    the quadratic form of the "ex" matrix.
    """
    codes = np.asarray(codes, dtype=np.int64)
    f = np.asarray(f, dtype=float)
    total = 0.0
    for v in range(nv):
        for x in range(n_sites):
            for y in range(n_sites):
                if x == y:
                    continue
                bx, by = x * nv + v, y * nv + v
                occ_x = (codes >> bx) & 1
                occ_y = (codes >> by) & 1
                differ = occ_x != occ_y
                if not np.any(differ):
                    continue
                flip = (np.int64(1) << bx) | (np.int64(1) << by)
                dst = _lookup(codes, codes[differ] ^ flip)
                df = f[dst] - f[differ]
                total += float(df @ df)
    return total / (4.0 * float(M) ** (d + 2)) / len(codes)


def dirichlet_c_direct(codes, f, quads, nv, n_sites):
    """Explicit collision-sum Dirichlet form, (1/2) sum_q sum_x E[p (df)^2]."""
    codes = np.asarray(codes, dtype=np.int64)
    f = np.asarray(f, dtype=float)
    total = 0.0
    for q in quads:
        for x in range(n_sites):
            bits = [x * nv + int(qq) for qq in q]
            ok = (((codes >> bits[0]) & 1 == 1)
                  & ((codes >> bits[1]) & 1 == 1)
                  & ((codes >> bits[2]) & 1 == 0)
                  & ((codes >> bits[3]) & 1 == 0))
            if not np.any(ok):
                continue
            flip = np.int64(0)
            for b in bits:
                flip |= np.int64(1) << b
            dst = _lookup(codes, codes[ok] ^ flip)
            df = f[dst] - f[ok]
            total += float(df @ df)
    return 0.5 * total / len(codes)


def dirichlet_tilde_direct(codes, f, quads, nv, n_sites):
    """Explicit four-site collision Dirichlet form at weight n^-3 / 2."""
    codes = np.asarray(codes, dtype=np.int64)
    f = np.asarray(f, dtype=float)
    total = 0.0
    for q in quads:
        for x1 in range(n_sites):
            for x2 in range(n_sites):
                for x3 in range(n_sites):
                    for x4 in range(n_sites):
                        bits = [x1 * nv + int(q[0]), x2 * nv + int(q[1]),
                                x3 * nv + int(q[2]), x4 * nv + int(q[3])]
                        ok = (((codes >> bits[0]) & 1 == 1)
                              & ((codes >> bits[1]) & 1 == 1)
                              & ((codes >> bits[2]) & 1 == 0)
                              & ((codes >> bits[3]) & 1 == 0))
                        if not np.any(ok):
                            continue
                        flip = np.int64(0)
                        for b in bits:
                            flip |= np.int64(1) << b
                        dst = _lookup(codes, codes[ok] ^ flip)
                        df = f[dst] - f[ok]
                        total += float(df @ df)
    return 0.5 * total / float(n_sites) ** 3 / len(codes)


def counts_projection(codes, nv, n_sites):
    """Sparse projector onto functions of the per-species counts.

    (P f)(xi) is the uniform-sector conditional expectation of f given
    the vector (K_v).
    """
    codes = np.asarray(codes, dtype=np.int64)
    counts = np.zeros((len(codes), nv), dtype=np.int64)
    for v in range(nv):
        for x in range(n_sites):
            counts[:, v] += ((codes >> (x * nv + v)) & 1).astype(np.int64)
    order = np.lexsort(counts.T[::-1])
    sorted_counts = counts[order]
    breaks = np.nonzero(np.any(np.diff(sorted_counts, axis=0) != 0,
                               axis=1))[0] + 1
    rows, cols, vals = [], [], []
    for grp in np.split(order, breaks):
        w = 1.0 / len(grp)
        for i in grp:
            rows.extend([i] * len(grp))
            cols.extend(grp.tolist())
            vals.extend([w] * len(grp))
    return sp.csr_matrix((vals, (rows, cols)),
                         shape=(len(codes), len(codes)))


@dataclass
class GS12Report:
    """Measured constants for the two Dirichlet form comparisons."""

    n_funcs: int
    max_ratio_i: float       # D_tilde(f) / (M^2 D_ex(f) + D_c(f))
    max_ratio_ii: float      # D_c(Pf) / D_tilde(f)
    max_excess_ii: float     # D_c(Pf) - D_tilde(f), should be <= 0


def check_lemma_gs12(n_sites, vs, sector, M, rng, n_funcs=100, d=None):
    """Measure both Dirichlet-form comparison constants on random f.

    Part (i): the four-site collision form is controlled by
    M^2 D_ex + D_c with a constant depending only on the velocity set;
    the report carries the largest observed ratio.  Part (ii): for the
    counts-conditional expectation F = E[f | K_v], D_c(F) never exceeds
    D_tilde(f); the report carries the largest ratio and excess.
    """
    codes = enumerate_sector(n_sites, vs, sector)
    if len(codes) < 2:
        raise InfeasibleSectorError("sector too small for a meaningful check")
    if d is None:
        d = vs.dim
    gens = build_generators(codes, vs, M, n_sites, d=d,
                            which=("ex", "c", "c_tilde"))
    proj = counts_projection(codes, _nv(vs), n_sites)
    ratio_i = 0.0
    ratio_ii = 0.0
    excess_ii = -np.inf
    for _ in range(n_funcs):
        f = rng.standard_normal(len(codes))
        d_ex = dirichlet_form(gens["ex"], f)
        d_c = dirichlet_form(gens["c"], f)
        d_t = dirichlet_form(gens["c_tilde"], f)
        denom = M ** 2 * d_ex + d_c
        if denom > 0:
            ratio_i = max(ratio_i, d_t / denom)
        cf = proj @ f
        d_c_proj = dirichlet_form(gens["c"], cf)
        excess_ii = max(excess_ii, d_c_proj - d_t)
        if d_t > 0:
            ratio_ii = max(ratio_ii, d_c_proj / d_t)
    return GS12Report(n_funcs=n_funcs, max_ratio_i=ratio_i,
                      max_ratio_ii=ratio_ii, max_excess_ii=excess_ii)
