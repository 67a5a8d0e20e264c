"""Velocity sets for the lattice gas.

A velocity set is a finite family of vectors in R^d, closed under
reflection of any single coordinate and under permutation of
coordinates.  Those closure properties make mass and momentum the only
conserved quantities of the collision dynamics and give the moment
identities used by the hydrodynamic limit.

Two built-in models are provided: Model I (the 2d unit coordinate
vectors) and Model II (the 24 vectors obtained from (1, 1, w) in d = 3
by sign changes and coordinate permutations, with w the positive root
of w^4 - 6 w^2 - 1 = 0).
"""

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import SymmetryError

__all__ = [
    "VelocitySet",
    "MomentTable",
    "NSCoefficients",
    "W_MODEL_II",
    "build_model_I",
    "build_model_II",
    "from_vectors",
    "moments",
    "ns_coefficients",
    "collision_quadruples",
]

# positive root of w^4 - 6 w^2 - 1 = 0, so that the quartic moment
# combination D - 3C vanishes for Model II
W_MODEL_II = float(np.sqrt(3.0 + np.sqrt(10.0)))


@dataclass(frozen=True)
class VelocitySet:
    """An ordered, validated family of velocity vectors.

    vectors has shape (n, dim) and rows sorted lexicographically, so
    that velocity indices are reproducible across runs and platforms.
    """

    dim: int
    vectors: np.ndarray
    name: str = "custom"

    @property
    def n(self):
        return self.vectors.shape[0]

    @property
    def a0(self):
        """Density of the symmetric reference state, |V| / 2."""
        return self.n / 2.0

    def conserved_matrix(self):
        """Return the (n, d+1) matrix of site conserved quantities.

        Column 0 is identically 1 (mass), column k is the k-th velocity
        component (momentum).  occupancy @ matrix gives (I_0, ..., I_d).
        """
        m = np.empty((self.n, self.dim + 1))
        m[:, 0] = 1.0
        m[:, 1:] = self.vectors
        return m

    def conserved_matrix_exact(self):
        """Exact counterpart of conserved_matrix as Fraction rows.

        Floats are dyadic rationals, so Fraction(v) is exact and sums of
        these Fractions never round.  Sector labels built from them are
        therefore exact even for irrational-looking components such as
        the Model II constant w.
        """
        rows = []
        for v in self.vectors:
            rows.append((Fraction(1),) + tuple(Fraction(float(c)) for c in v))
        return rows

    def to_json(self):
        return json.dumps(
            {"dim": self.dim, "name": self.name,
             "vectors": [[float(c) for c in v] for v in self.vectors]}
        )

    @staticmethod
    def from_json(text):
        obj = json.loads(text)
        return from_vectors(np.asarray(obj["vectors"], dtype=float),
                            name=obj.get("name", "custom"))


@dataclass(frozen=True)
class MomentTable:
    """Scalar moments of a velocity set.

    B = sum v_1^2, C = sum v_1^2 v_2^2 (0 when d = 1), D = sum v_1^4,
    a0 = |V| / 2.  Construction verifies the full second and fourth
    moment identities, not just the three scalars.
    """

    B: float
    C: float
    D: float
    a0: float


@dataclass(frozen=True)
class NSCoefficients:
    """Coefficients of the limiting momentum equation.

    d_t phi_l = A0 d_l phi_l^2 + A1 (phi . grad) phi_l
              + A2 d_l |phi|^2 + Delta phi_l.
    """

    A0: float
    A1: float
    A2: float


def _row_key(v):
    # adding 0.0 maps -0.0 to +0.0 so reflected rows hash consistently
    return tuple(float(c) + 0.0 for c in v)


def _canonical(vectors):
    vectors = np.asarray(vectors, dtype=float) + 0.0
    order = np.lexsort(vectors.T[::-1])
    return np.ascontiguousarray(vectors[order])


def _check_closure(vectors, dim):
    keys = {_row_key(v) for v in vectors}
    if len(keys) != len(vectors):
        raise SymmetryError("duplicate velocity vectors")
    # closure under reflection of each single coordinate
    for k in range(dim):
        for v in vectors:
            w = np.array(v, dtype=float)
            w[k] = -w[k]
            if _row_key(w) not in keys:
                raise SymmetryError(
                    f"set not closed under sign flip of coordinate {k}")
    # transpositions generate the full permutation group
    for i in range(dim):
        for j in range(i + 1, dim):
            for v in vectors:
                w = np.array(v, dtype=float)
                w[i], w[j] = w[j], w[i]
                if _row_key(w) not in keys:
                    raise SymmetryError(
                        f"set not closed under swapping coordinates {i},{j}")


def from_vectors(vectors, name="custom"):
    """Build a VelocitySet from raw vectors, validating symmetry."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim != 2 or vectors.shape[0] == 0:
        raise SymmetryError("vectors must be a non-empty (n, d) array")
    if not np.all(np.isfinite(vectors)):
        raise SymmetryError("vectors must be finite")
    dim = vectors.shape[1]
    vectors = _canonical(vectors)
    _check_closure(vectors, dim)
    vs = VelocitySet(dim=dim, vectors=vectors, name=name)
    moments(vs)  # raises SymmetryError if the moment identities fail
    return vs


def build_model_I(d):
    """The 2d unit coordinate vectors, for d >= 1."""
    if d < 1:
        raise ValueError("d must be >= 1")
    eye = np.eye(d)
    return from_vectors(np.vstack([eye, -eye]), name="model-I")


def build_model_II():
    """The 24 signed permutations of (1, 1, w) in d = 3."""
    w = W_MODEL_II
    base = (1.0, 1.0, w)
    rows = set()
    for perm in itertools.permutations(base):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            rows.add(tuple(s * c for s, c in zip(signs, perm)))
    vecs = np.array(sorted(rows))
    if vecs.shape[0] != 24:
        raise SymmetryError("Model II construction must yield 24 vectors")
    return from_vectors(vecs, name="model-II")


def moments(vs, tol=1e-12):
    """Compute the moment table and verify the isotropy identities.

    Checks, for every index combination:
      sum_v v_k v_j                    = B delta_{kj}
      sum_v v_k v_l v_m v_n (k != l)   = (delta_{mk} delta_{nl}
                                          + delta_{ml} delta_{nk}) C
      sum_v v_k^2 v_m v_n              = delta_{mk} delta_{nk} D
                                          + delta_{mn} (1 - delta_{mk}) C
    and that total momentum vanishes.  Raises SymmetryError on failure.
    """
    v = vs.vectors
    d = vs.dim
    scale = max(1.0, float(np.max(np.abs(v))) ** 4 * vs.n)
    if np.max(np.abs(v.sum(axis=0))) > tol * scale:
        raise SymmetryError("total momentum of the velocity set is nonzero")

    B = float(np.sum(v[:, 0] ** 2))
    D = float(np.sum(v[:, 0] ** 4))
    C = float(np.sum(v[:, 0] ** 2 * v[:, 1] ** 2)) if d >= 2 else 0.0

    second = v.T @ v
    if np.max(np.abs(second - B * np.eye(d))) > tol * scale:
        raise SymmetryError("second moment matrix is not B * identity")

    for k, l, m, n in itertools.product(range(d), repeat=4):
        s = float(np.sum(v[:, k] * v[:, l] * v[:, m] * v[:, n]))
        if k != l:
            want = ((k == m and l == n) + (l == m and k == n)) * C
        else:
            want = D if (m == k and n == k) else (C if (m == n) else 0.0)
        if abs(s - want) > tol * scale:
            raise SymmetryError(
                f"fourth moment identity fails at indices {(k, l, m, n)}")

    return MomentTable(B=B, C=C, D=D, a0=vs.a0)


def ns_coefficients(mt):
    """Map a moment table to the limiting equation coefficients.

    A0 = (D - 3C) / B^2, A1 = 2C / B^2, A2 = C / B^2.  Computed from
    the moments; no model-specific values are hard-coded.
    """
    b2 = mt.B ** 2
    return NSCoefficients(A0=(mt.D - 3.0 * mt.C) / b2,
                          A1=2.0 * mt.C / b2,
                          A2=mt.C / b2)


def collision_quadruples(vs, tol=1e-12):
    """Enumerate non-degenerate momentum-conserving collision quadruples.

    Returns an (m, 4) int array of velocity indices (i, j, k, l) meaning
    (v, w) -> (v', w'), with v + w = v' + w', v != w, v' != w', and
    {v, w} disjoint from {v', w'}.  Degenerate quadruples act as the
    identity and are dropped.  Rows are sorted lexicographically; the
    list is closed under (i, j, k, l) -> (j, i, l, k) and under
    reversal (k, l, i, j).
    """
    v = vs.vectors
    n = vs.n
    out = []
    scale = max(1.0, float(np.max(np.abs(v))))
    for i, j in itertools.permutations(range(n), 2):
        s = v[i] + v[j]
        for k, l in itertools.permutations(range(n), 2):
            if k in (i, j) or l in (i, j):
                continue
            if np.max(np.abs(v[k] + v[l] - s)) <= tol * scale:
                out.append((i, j, k, l))
    if not out:
        return np.empty((0, 4), dtype=np.int64)
    return np.array(sorted(out), dtype=np.int64)
