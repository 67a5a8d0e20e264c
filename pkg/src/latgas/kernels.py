"""Mesoscopic jump kernels on the cube Lambda_M = {-M, ..., M}^d.

The translation-invariant single-particle rate is a symmetric part,
normalized so that the induced diffusion matrix is the identity, plus a
weak O(N^-a) drift part whose angular dependence q(z, v) carries the
velocity.  Two drift shapes are provided: the linear form
q_M(z, v) = (z . v) / M used by the multi-velocity gas, and the sign
form q(z) = sign(z . v) used by the single-species gas.
"""

import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import NegativeRateError

__all__ = [
    "JumpKernel",
    "compute_AM",
    "offsets_lattice",
    "build_velocity_kernel",
    "build_sign_kernel",
    "M_from_N",
    "verify_drift_identity",
]


def M_from_N(N, a, b):
    """Default mesoscopic range M = max(1, round(N^(1-a-b)))."""
    return max(1, int(round(float(N) ** (1.0 - a - b))))


def offsets_lattice(M, d, drop_zero=True):
    """All offsets of Lambda_M in lexicographic order, shape (K, d).

    The zero offset contributes no motion and is dropped from event
    tables by default.
    """
    r = np.arange(-M, M + 1, dtype=np.int64)
    grids = np.meshgrid(*([r] * d), indexing="ij")
    z = np.stack([g.ravel() for g in grids], axis=1)
    if drop_zero:
        z = z[np.any(z != 0, axis=1)]
    return np.ascontiguousarray(z)


def compute_AM(M, d, check=True, tol=1e-12):
    """Normalization A_M = M^(d+2) / sum_{z in Lambda_M} z_1^2.

    With this choice (A_M / M^(d+2)) sum_z z_i z_j = delta_{ij}; when
    check is set the full d x d identity is verified from the exact
    integer sums.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    s2 = M * (M + 1) * (2 * M + 1) // 3  # sum of z^2 over one axis
    col = s2 * (2 * M + 1) ** (d - 1)
    am = float(M) ** (d + 2) / float(col)
    if check:
        z = offsets_lattice(M, d, drop_zero=False)
        mat = (z.T @ z).astype(float) * (am / float(M) ** (d + 2))
        if np.max(np.abs(mat - np.eye(d))) > tol:
            raise ArithmeticError("second moment identity failed")
    return am


@dataclass(frozen=True)
class JumpKernel:
    """Tabulated jump rates over the non-zero offsets of Lambda_M.

    kind is "velocity" (rates has shape (K, n_velocities)) or "sign"
    (single species, rates has shape (K,)).  gamma_M is the exact
    finite-M drift summary of the sign kernel, None for velocity
    kernels.
    """

    kind: str
    M: int
    N: int
    a: float
    d: int
    A_M: float
    offsets: np.ndarray
    rates: np.ndarray
    gamma_M: np.ndarray = None

    @property
    def n_offsets(self):
        return self.offsets.shape[0]

    def rate_table(self):
        """Rates as a 2d (K, n_species) array regardless of kind."""
        r = self.rates
        return r[:, None] if r.ndim == 1 else r

    def totals(self):
        """Total outgoing rate per species, sum over offsets."""
        return self.rate_table().sum(axis=0)

    def cumulative(self):
        """Per-species cumulative rate tables for event sampling.

        Returns a C-contiguous (n_species, K) array; the last column is
        the exact total used as the sampling normalization, so searches
        against it can never fall off the end.
        """
        return np.ascontiguousarray(np.cumsum(self.rate_table(), axis=0).T)

    def to_csv(self, path):
        """Dump offsets, species index and rate; round-trips exactly."""
        meta = {"kind": self.kind, "M": self.M, "N": self.N, "a": self.a,
                "d": self.d, "A_M": self.A_M,
                "gamma_M": None if self.gamma_M is None
                else [repr(float(g)) for g in self.gamma_M]}
        buf = io.StringIO()
        buf.write("#" + json.dumps(meta) + "\n")
        cols = ",".join(f"z{i + 1}" for i in range(self.d))
        buf.write(cols + ",species,rate\n")
        table = self.rate_table()
        for k in range(self.n_offsets):
            zs = ",".join(str(int(c)) for c in self.offsets[k])
            for s in range(table.shape[1]):
                buf.write(f"{zs},{s},{table[k, s]!r}\n")
        with open(path, "w") as fh:
            fh.write(buf.getvalue())

    @staticmethod
    def from_csv(path):
        with open(path) as fh:
            meta = json.loads(fh.readline().lstrip("#"))
            fh.readline()  # column header
            rows = [line.strip().split(",") for line in fh if line.strip()]
        d = meta["d"]
        offs, seen = [], {}
        nspecies = 1 + max(int(r[d]) for r in rows)
        for r in rows:
            z = tuple(int(c) for c in r[:d])
            if z not in seen:
                seen[z] = len(offs)
                offs.append(z)
        offsets = np.array(offs, dtype=np.int64)
        rates = np.empty((len(offs), nspecies))
        for r in rows:
            z = tuple(int(c) for c in r[:d])
            rates[seen[z], int(r[d])] = float(r[d + 1])
        if meta["kind"] == "sign":
            rates = rates[:, 0]
        gm = meta["gamma_M"]
        return JumpKernel(
            kind=meta["kind"], M=meta["M"], N=meta["N"], a=meta["a"], d=d,
            A_M=meta["A_M"], offsets=offsets, rates=rates,
            gamma_M=None if gm is None else np.array([float(g) for g in gm]))


def build_velocity_kernel(vs, M, N, a):
    """Rates p_N(z, v) = (A_M / M^(d+2)) (2 + N^-a (z . v) / M).

    Raises NegativeRateError when the drift term overwhelms the
    symmetric part for some (z, v), which happens for small N when the
    velocity set contains long vectors.
    """
    d = vs.dim
    am = compute_AM(M, d)
    z = offsets_lattice(M, d)
    q = (z.astype(float) @ vs.vectors.T) / M
    rates = (am / float(M) ** (d + 2)) * (2.0 + float(N) ** -a * q)
    if rates.min() < 0.0:
        k, v = np.unravel_index(int(np.argmin(rates)), rates.shape)
        raise NegativeRateError(
            f"negative rate at z={z[k].tolist()}, velocity index {v}: "
            f"N^-a |q_M| exceeds 2; increase N or M")
    return JumpKernel(kind="velocity", M=M, N=N, a=a, d=d, A_M=am,
                      offsets=z, rates=rates)


def build_sign_kernel(M, N, a, d=1, v=None):
    """Rates p_N(z) = M^-(d+2) (2 A_M + N^-a sign(z . v)).

    v defaults to the first coordinate vector.  Also computes the exact
    finite-M drift summary gamma_M[j] = M^-(d+1) sum_z z_j sign(z . v),
    which converges to the continuum value as M grows; callers choose
    between the finite-M and limiting normalizations.
    """
    if v is None:
        v = np.zeros(d)
        v[0] = 1.0
    v = np.asarray(v, dtype=float)
    am = compute_AM(M, d)
    z = offsets_lattice(M, d)
    q = np.sign(z.astype(float) @ v)
    rates = float(M) ** -(d + 2) * (2.0 * am + float(N) ** -a * q)
    if rates.min() < 0.0:
        raise NegativeRateError(
            f"negative rate: N^-a = {float(N)**-a:.3e} exceeds "
            f"2 A_M = {2 * am:.3e}")
    gamma = float(M) ** -(d + 1) * (z.astype(float).T @ q)
    return JumpKernel(kind="sign", M=M, N=N, a=a, d=d, A_M=am,
                      offsets=z, rates=rates, gamma_M=gamma)


def verify_drift_identity(vs, M, tol=1e-10):
    """Check (A_M / M^(d+1)) sum_z q_M(z, v) z = v for every velocity.

    Works at large M without materializing the full rate table; returns
    the maximum absolute deviation.
    """
    d = vs.dim
    am = compute_AM(M, d)
    z = offsets_lattice(M, d, drop_zero=False).astype(float)
    worst = 0.0
    for v in vs.vectors:
        q = (z @ v) / M
        drift = (am / float(M) ** (d + 1)) * (z.T @ q)
        worst = max(worst, float(np.max(np.abs(drift - v))))
    if worst > tol:
        raise ArithmeticError(f"drift identity violated: {worst:.3e}")
    return worst
