"""Event-loop state and core selection.

The hot loop exists twice: a compiled Cython extension and a pure
Python twin (_engine_py).  The compiled core is used when importable;
set LATGAS_PURE_PYTHON=1 to force the fallback.  Both consume the
random stream identically, so a trajectory is bit-for-bit reproducible
across cores; tests rely on this.
"""

import os

import numpy as np

from . import _engine_py
from .errors import ConsistencyError

try:
    from . import _engine_cy as _compiled
except ImportError:  # extension not built; pure core carries the load
    _compiled = None

HAVE_COMPILED = _compiled is not None

REACHED = _engine_py.REACHED
MAXEVENTS = _engine_py.MAXEVENTS
ABSORBING = _engine_py.ABSORBING

_COUNTER_NAMES = ("eligible_collisions", "events", "moves",
                  "rejections", "collisions")


def _force_pure():
    return os.environ.get("LATGAS_PURE_PYTHON", "") not in ("", "0")


def active_core_name(pure=None):
    if pure is None:
        pure = _force_pure() or not HAVE_COMPILED
    return "python" if pure else "compiled"


class EngineState:
    """All mutable arrays of one running simulation.

    Built from a configuration and a jump kernel (plus the collision
    quadruples of the velocity set, if any).  The arrays are shared
    with whichever core runs the loop.
    """

    def __init__(self, cfg, kernel, quads=None, speed=None):
        if kernel.N != cfg.N:
            raise ValueError("kernel was built for a different lattice size")
        occ = np.ascontiguousarray(cfg.occupancy, dtype=np.uint8)
        n_sites, nv = occ.shape
        table = kernel.cumulative()
        if table.shape[0] != nv:
            raise ValueError("kernel species count does not match config")
        self.N = cfg.N
        self.d = cfg.d
        self.vs = cfg.vs
        self.occ = occ
        self.zcum = table
        self.S = np.ascontiguousarray(table[:, -1])
        self.zoff = np.ascontiguousarray(kernel.offsets, dtype=np.int64)
        self.quads = (np.zeros((0, 4), dtype=np.int64) if quads is None
                      else np.ascontiguousarray(quads, dtype=np.int64))
        self.K = occ.sum(axis=0, dtype=np.int64)
        self.plist = np.zeros((nv, n_sites), dtype=np.int64)
        self.pslot = np.full((n_sites, nv), -1, dtype=np.int64)
        fill = np.zeros(nv, dtype=np.int64)
        for x in range(n_sites):
            for v in range(nv):
                if occ[x, v]:
                    self.plist[v, fill[v]] = x
                    self.pslot[x, v] = fill[v]
                    fill[v] += 1
        self.c = np.zeros(n_sites, dtype=np.int64)
        if len(self.quads):
            for y in range(n_sites):
                self.c[y] = _engine_py.eligible_count(occ, y, self.quads)
        self.tree = np.zeros(n_sites + 1, dtype=np.int64)
        _engine_py.fenwick_build(self.c, self.tree)
        self.ints = np.zeros(8, dtype=np.int64)
        self.ints[_engine_py.I_TC] = self.c.sum()
        self.t = np.zeros(1)
        self.speed = float(cfg.N) ** 2 if speed is None else float(speed)

    @property
    def time(self):
        return float(self.t[0])

    def counters(self):
        return dict(zip(_COUNTER_NAMES, self.ints[:5].tolist()))

    def config(self):
        from .gibbs import LatticeConfig

        return LatticeConfig(N=self.N, d=self.d,
                             occupancy=self.occ.copy(), vs=self.vs)

    def audit(self):
        """Recompute every derived structure and compare exactly.

        Raises ConsistencyError on the first mismatch; meant to run
        periodically during long trajectories.
        """
        occ = self.occ
        n_sites, nv = occ.shape
        if occ.max(initial=0) > 1:
            raise ConsistencyError("occupancy left {0, 1}")
        k = occ.sum(axis=0, dtype=np.int64)
        if not np.array_equal(k, self.K):
            raise ConsistencyError("species counts out of sync")
        for v in range(nv):
            sites = self.plist[v, :self.K[v]]
            if len(np.unique(sites)) != self.K[v]:
                raise ConsistencyError("duplicate entries in particle list")
            if not np.all(occ[sites, v] == 1):
                raise ConsistencyError("particle list points at empty site")
            slots = self.pslot[sites, v]
            if not np.array_equal(np.sort(slots),
                                  np.arange(self.K[v], dtype=np.int64)):
                raise ConsistencyError("slot index is not a bijection")
        if len(self.quads):
            c = np.array([_engine_py.eligible_count(occ, y, self.quads)
                          for y in range(n_sites)], dtype=np.int64)
        else:
            c = np.zeros(n_sites, dtype=np.int64)
        if not np.array_equal(c, self.c):
            raise ConsistencyError("eligible-collision counts out of sync")
        tree = np.zeros(n_sites + 1, dtype=np.int64)
        _engine_py.fenwick_build(c, tree)
        if not np.array_equal(tree, self.tree):
            raise ConsistencyError("Fenwick tree out of sync")
        if self.ints[_engine_py.I_TC] != c.sum():
            raise ConsistencyError("total collision rate out of sync")


def advance(state, rng, t_target, max_events=2 ** 62, pure=None):
    """Drive the selected core; returns (status, events_run)."""
    use_pure = pure if pure is not None else (_force_pure()
                                              or not HAVE_COMPILED)
    core = _engine_py if use_pure else _compiled
    return core.advance(
        state.occ, state.K, state.plist, state.pslot, state.S,
        state.zcum, state.zoff, state.quads, state.c, state.tree,
        state.ints, state.t, state.N, state.d, state.speed,
        rng, t_target, max_events)
