"""Lattice configurations and Gibbs sampling.

A configuration assigns to every site of the discrete torus a set of
occupied species (velocities, or a single species for the scalar gas).
Occupancy is stored as a C-ordered (n_sites, n_species) uint8 array;
site index is the C-order raveling of the coordinate tuple.

Product states are sampled directly from their marginals; canonical
(fixed conserved vector) states either by exhaustive enumeration on
small regions or by a uniform-target Markov chain built from pair
swaps and collisions.
"""

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import thermo
from .errors import InfeasibleSectorError

__all__ = [
    "LatticeConfig",
    "sample_product",
    "sample_scalar_product",
    "sample_profile",
    "sample_scalar_profile",
    "sample_canonical",
    "block_average",
    "save_snapshot",
    "load_snapshot",
]

_SNAP_MAGIC = b"LGSNAP1\n"


@dataclass
class LatticeConfig:
    """Occupancy field on the torus of side N in dimension d.

    vs is None for the single-species gas, in which case occupancy has
    one column.
    """

    N: int
    d: int
    occupancy: np.ndarray
    vs: object = None

    @property
    def n_sites(self):
        return self.N ** self.d

    @property
    def n_species(self):
        return self.occupancy.shape[1]

    def grid(self):
        """Occupancy reshaped to (N, ..., N, n_species)."""
        return self.occupancy.reshape((self.N,) * self.d + (self.n_species,))

    def species_counts(self):
        """Total particle count per species, exact integers."""
        return self.occupancy.sum(axis=0, dtype=np.int64)

    def conserved(self):
        """Exact total conserved vector (I_0, ..., I_d).

        Mass is an int; momentum components are Fractions built from
        the exact dyadic values of the velocity components, so equality
        comparisons between sectors are exact.
        """
        counts = self.species_counts()
        if self.vs is None:
            return (int(counts[0]),)
        rows = self.vs.conserved_matrix_exact()
        out = [Fraction(0)] * (self.d + 1)
        for k, row in zip(counts, rows):
            k = int(k)
            for a in range(self.d + 1):
                out[a] += row[a] * k
        return (int(out[0]),) + tuple(out[1:])

    def copy(self):
        return LatticeConfig(N=self.N, d=self.d,
                             occupancy=self.occupancy.copy(), vs=self.vs)


def _site_coords(N, d):
    r = np.arange(N)
    grids = np.meshgrid(*([r] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def sample_product(lam, N, vs, rng):
    """Sample the product measure with chemical potential field lam.

    lam is a (d+1,) constant vector, an (n_sites, d+1) array, or a
    callable mapping macroscopic coordinates u in [0,1)^d (shape
    (n_sites, d)) to an (n_sites, d+1) array.
    """
    n_sites = N ** vs.dim
    if callable(lam):
        lam = lam(_site_coords(N, vs.dim) / N)
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 1:
        theta = np.broadcast_to(thermo.theta_v(lam, vs), (n_sites, vs.n))
    else:
        theta = np.asarray(
            [thermo.theta_v(l, vs) for l in lam])
    occ = (rng.random((n_sites, vs.n)) < theta).astype(np.uint8)
    return LatticeConfig(N=N, d=vs.dim, occupancy=occ, vs=vs)


def sample_scalar_product(density, N, d, rng):
    """Sample independent Bernoulli sites at the given density field.

    density is a scalar, an (n_sites,) array, or a callable on
    macroscopic coordinates.
    """
    n_sites = N ** d
    if callable(density):
        density = density(_site_coords(N, d) / N)
    theta = np.broadcast_to(np.asarray(density, dtype=float), (n_sites,))
    if theta.min() < 0.0 or theta.max() > 1.0:
        raise ValueError("density field leaves [0, 1]")
    occ = (rng.random(n_sites) < theta).astype(np.uint8)[:, None]
    return LatticeConfig(N=N, d=d, occupancy=np.ascontiguousarray(occ))


def sample_profile(N, vs, b, phi, rng, t=0.0, phi0=0.0):
    """Sample the slowly varying product state of a perturbed profile.

    Site targets are rho = a0 + N^-b phi0 (constant) and
    p(u) = N^-b phi(t, u) with phi returning (n_sites, d).  Chemical
    potentials are found per site by Newton inversion, warm-started
    along the lattice sweep since the profile varies slowly.
    """
    d = vs.dim
    u = _site_coords(N, d) / N
    eps = float(N) ** -b
    mom = np.asarray(phi(t, u), dtype=float).reshape(len(u), d)
    lam = np.zeros(d + 1)
    occ = np.empty((len(u), vs.n), dtype=np.uint8)
    rand = rng.random((len(u), vs.n))
    for i in range(len(u)):
        target = np.concatenate(([vs.a0 + eps * phi0], eps * mom[i]))
        lam = thermo.lambda_of_hydro(target, vs) if i == 0 else _warm_newton(
            target, vs, lam)
        occ[i] = rand[i] < thermo.theta_v(lam, vs)
    return LatticeConfig(N=N, d=d, occupancy=occ, vs=vs)


def _warm_newton(target, vs, lam0):
    # plain Newton from the neighbouring site's potential; falls back to
    # the damped cold start if it wanders
    lam = lam0.copy()
    for _ in range(50):
        res = thermo.hydro_of_lambda(lam, vs) - target
        if np.max(np.abs(res)) <= 1e-12:
            return lam
        try:
            lam = lam + np.linalg.solve(thermo._jacobian(lam, vs), -res)
        except np.linalg.LinAlgError:
            break
    return thermo.lambda_of_hydro(target, vs)


def sample_scalar_profile(N, d, b, phi, rng, t=0.0):
    """Scalar analogue of sample_profile: density 1/2 + N^-b phi(t, u)."""
    u = _site_coords(N, d) / N
    dens = 0.5 + float(N) ** -b * np.asarray(phi(t, u), dtype=float)
    return sample_scalar_product(dens, N, d, rng)


def sample_canonical(n_sites, vs, sector, rng, initial=None,
                     burn_moves=None, state_cap=2 ** 18):
    """Sample (approximately) uniformly from a conserved-vector sector.

    On regions where the full state space has at most state_cap
    configurations the sector is enumerated and a state drawn exactly
    uniformly.  Larger regions use a Markov chain whose moves are
    uniform pair swaps within a species and uniform collision attempts;
    both are symmetric proposals, so the chain targets the uniform
    measure on the sector of the initial configuration (which must then
    be supplied).  Default burn-in is 50 * n_sites * n_species moves.
    """
    nv = vs.n if vs is not None else 1
    if 2 ** (nv * n_sites) <= state_cap:
        from . import gaplab

        states = gaplab.enumerate_sector(n_sites, vs, sector)
        if not len(states):
            raise InfeasibleSectorError(f"empty sector {sector}")
        code = states[int(rng.integers(len(states)))]
        occ = gaplab.decode_state(code, n_sites, nv)
        return LatticeConfig(N=n_sites, d=1, occupancy=occ, vs=vs)

    if initial is None:
        raise InfeasibleSectorError(
            "region too large to enumerate; supply an initial "
            "configuration in the target sector")
    if sector is not None and initial.conserved() != tuple(sector):
        raise InfeasibleSectorError(
            "initial configuration lies in a different sector")
    cfg = initial.copy()
    occ = cfg.occupancy
    quads = (np.empty((0, 4), dtype=np.int64) if vs is None
             else _quadruples(vs))
    if burn_moves is None:
        burn_moves = 50 * n_sites * nv
    n_swap = rng.integers(0, 2, size=burn_moves)
    for step in range(burn_moves):
        if n_swap[step] or len(quads) == 0:
            x, y = rng.integers(0, n_sites, size=2)
            v = int(rng.integers(0, nv))
            occ[x, v], occ[y, v] = occ[y, v], occ[x, v]
        else:
            y = int(rng.integers(0, n_sites))
            q = quads[int(rng.integers(0, len(quads)))]
            if (occ[y, q[0]] and occ[y, q[1]]
                    and not occ[y, q[2]] and not occ[y, q[3]]):
                occ[y, q[0]] = occ[y, q[1]] = 0
                occ[y, q[2]] = occ[y, q[3]] = 1
    return cfg


def _quadruples(vs):
    from .velocity import collision_quadruples

    return collision_quadruples(vs)


def block_average(cfg, center, L):
    """Mean conserved vector over the cube center + {-L, ..., L}^d.

    Periodic boundary; returns a float (d+1,) array.
    """
    center = np.asarray(center, dtype=np.int64).reshape(cfg.d)
    r = np.arange(-L, L + 1, dtype=np.int64)
    grids = np.meshgrid(*([r] * cfg.d), indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=1)
    coords = (center[None, :] + offs) % cfg.N
    idx = np.ravel_multi_index(coords.T, (cfg.N,) * cfg.d)
    block = cfg.occupancy[idx].astype(float)
    if cfg.vs is None:
        return block.mean(axis=0)
    return block.mean(axis=0) @ cfg.vs.conserved_matrix()


def save_snapshot(cfg, path, meta=None):
    """Write a configuration as a packed bitmap with a JSON header."""
    header = {
        "N": cfg.N, "d": cfg.d, "n_species": cfg.n_species,
        "model": None if cfg.vs is None else json.loads(cfg.vs.to_json()),
        "meta": meta or {},
    }
    with open(path, "wb") as fh:
        fh.write(_SNAP_MAGIC)
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(np.packbits(cfg.occupancy.ravel()).tobytes())


def load_snapshot(path):
    """Read back a snapshot written by save_snapshot."""
    from .velocity import from_vectors

    with open(path, "rb") as fh:
        if fh.read(len(_SNAP_MAGIC)) != _SNAP_MAGIC:
            raise ValueError("not a snapshot file")
        header = json.loads(fh.readline().decode())
        bits = np.frombuffer(fh.read(), dtype=np.uint8)
    n = header["N"] ** header["d"] * header["n_species"]
    occ = np.unpackbits(bits, count=n).reshape(
        header["N"] ** header["d"], header["n_species"]).copy()
    vs = None
    if header["model"] is not None:
        vs = from_vectors(np.asarray(header["model"]["vectors"]),
                          name=header["model"]["name"])
    cfg = LatticeConfig(N=header["N"], d=header["d"], occupancy=occ, vs=vs)
    return cfg, header["meta"]
