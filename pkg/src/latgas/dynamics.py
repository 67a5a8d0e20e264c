"""Simulation parameters and trajectory drivers.

The dynamics couples a mesoscopic exclusion walk (range M, weak drift
N^-a) with on-site momentum-conserving collisions, run at the diffusive
speed N^2.  Admissible scaling exponents (a, b) are checked against
the inequality groups required by the two hydrodynamic regimes: the
multi-velocity gas (whose constraint set involves the spectral-gap
growth exponent kappa) and the single-species gas.
"""

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import streams
from .engine import (ABSORBING, MAXEVENTS, REACHED, EngineState,
                     active_core_name, advance)
from .errors import ExponentError, InvalidParamsError
from .gibbs import LatticeConfig
from .kernels import M_from_N, build_sign_kernel, build_velocity_kernel
from .velocity import build_model_I, build_model_II, collision_quadruples

__all__ = [
    "SimParams",
    "ExponentCheck",
    "ExponentReport",
    "default_kappa",
    "validate_exponents",
    "resolve_model",
    "Simulation",
    "Trajectory",
    "run_trajectory",
    "run_exclusion_trajectory",
    "save_trajectory",
    "load_trajectory",
]


def default_kappa(d):
    """Spectral-gap growth exponent matching the finite-volume bound."""
    return 2 + 3 * d + 2 * d * d


@dataclass
class SimParams:
    """Knobs of one simulation run."""

    N: int
    d: int
    a: float
    b: float
    model: object = "scalar"   # "scalar", "model-I", "model-II", VelocitySet
    M: int = None              # defaults to max(1, round(N^(1-a-b)))
    T: float = 0.0
    seed: int = 0
    kappa: float = None        # defaults to default_kappa(d)
    strict_exponents: bool = False
    audit_interval: int = 100000

    def mesoscopic_range(self):
        return self.M if self.M is not None else M_from_N(self.N, self.a,
                                                          self.b)


@dataclass(frozen=True)
class ExponentCheck:
    group: str
    name: str
    lhs: float
    op: str
    rhs: float

    @property
    def ok(self):
        return self.lhs < self.rhs if self.op == "<" else self.lhs > self.rhs


@dataclass
class ExponentReport:
    checks: list
    binding_group: str

    @property
    def ok(self):
        return all(c.ok for c in self.checks if c.group == self.binding_group)

    def failures(self):
        return [c for c in self.checks
                if c.group == self.binding_group and not c.ok]


def validate_exponents(params, kappa=None, strict=None):
    """Evaluate every admissibility inequality for (a, b).

    Group "gas" applies to the multi-velocity dynamics:
      b < a,
      a + b > 1 - 2/(d + kappa),
      a + ((kappa - 2)/kappa) b > 1 - 2/kappa,
      a + (1 + 2/d) b < 1.
    Group "scalar" applies to the single-species dynamics:
      a + b > d/(d + 2),
      a + max(2, 1 + 2/d) b < 1,
      2 (1 + 2/d) b < 1.
    The binding group follows the model; with strict set, a failing
    binding inequality raises ExponentError.
    """
    d, a, b = params.d, params.a, params.b
    if kappa is None:
        kappa = params.kappa if params.kappa is not None else default_kappa(d)
    if strict is None:
        strict = params.strict_exponents
    checks = [
        ExponentCheck("gas", "b < a", b, "<", a),
        ExponentCheck("gas", "a + b > 1 - 2/(d+kappa)",
                      a + b, ">", 1.0 - 2.0 / (d + kappa)),
        ExponentCheck("gas", "a + ((kappa-2)/kappa) b > 1 - 2/kappa",
                      a + (kappa - 2.0) / kappa * b, ">", 1.0 - 2.0 / kappa),
        ExponentCheck("gas", "a + (1 + 2/d) b < 1",
                      a + (1.0 + 2.0 / d) * b, "<", 1.0),
        ExponentCheck("scalar", "a + b > d/(d+2)",
                      a + b, ">", d / (d + 2.0)),
        ExponentCheck("scalar", "a + max(2, 1 + 2/d) b < 1",
                      a + max(2.0, 1.0 + 2.0 / d) * b, "<", 1.0),
        ExponentCheck("scalar", "2 (1 + 2/d) b < 1",
                      2.0 * (1.0 + 2.0 / d) * b, "<", 1.0),
    ]
    binding = "scalar" if params.model == "scalar" else "gas"
    report = ExponentReport(checks=checks, binding_group=binding)
    if strict and not report.ok:
        bad = "; ".join(c.name for c in report.failures())
        raise ExponentError(f"exponents (a={a}, b={b}) fail: {bad}")
    return report


def resolve_model(model, d):
    """Map a model spec to a VelocitySet, or None for the scalar gas."""
    if model == "scalar" or model is None:
        return None
    if model == "model-I":
        return build_model_I(d)
    if model == "model-II":
        if d != 3:
            raise InvalidParamsError("model-II is three-dimensional")
        return build_model_II()
    if hasattr(model, "vectors"):
        if model.dim != d:
            raise InvalidParamsError("velocity set dimension mismatch")
        return model
    raise InvalidParamsError(f"unknown model {model!r}")


class Simulation:
    """One running realization: engine state plus its random stream."""

    def __init__(self, params, initial=None, rng=None, replica=0, pure=None):
        validate_exponents(params)
        self.params = params
        self.vs = resolve_model(params.model, params.d)
        m = params.mesoscopic_range()
        if self.vs is None:
            kernel = build_sign_kernel(m, params.N, params.a, d=params.d)
            quads = None
        else:
            kernel = build_velocity_kernel(self.vs, m, params.N, params.a)
            quads = collision_quadruples(self.vs)
        self.kernel = kernel
        if initial is None:
            raise InvalidParamsError("an initial configuration is required")
        if initial.vs is None and self.vs is not None:
            raise InvalidParamsError("scalar configuration for a gas model")
        self.rng = rng if rng is not None else streams.derive(
            params.seed, "dynamics", replica)
        self.state = EngineState(initial, kernel, quads=quads)
        self.pure = pure
        self._since_audit = 0

    @property
    def time(self):
        return self.state.time

    def step(self):
        """Apply one event (moves, rejections and collisions all count).

        Returns the engine status; counters record what happened.
        """
        status, _ = advance(self.state, self.rng, math.inf, max_events=1,
                            pure=self.pure)
        return status

    def run_until(self, t_target):
        """Advance to the exact macroscopic time t_target.

        Runs in audit-sized chunks; every params.audit_interval events
        the incremental bookkeeping is recomputed from scratch and
        compared exactly.
        """
        interval = max(1, int(self.params.audit_interval))
        while True:
            status, done = advance(self.state, self.rng, t_target,
                                   max_events=interval - self._since_audit,
                                   pure=self.pure)
            self._since_audit += done
            if self._since_audit >= interval:
                self.state.audit()
                self._since_audit = 0
            if status == REACHED:
                return status
            if status == ABSORBING:
                self.state.t[0] = t_target
                return status

    def config(self):
        return self.state.config()

    def conserved(self):
        return self.config().conserved()


@dataclass
class Trajectory:
    """Snapshots of one realization at requested macroscopic times."""

    params: SimParams
    times: list
    conserved: list
    counters: list
    configs: list = None
    core: str = ""


def run_trajectory(params, initial, snapshot_times, rng=None, replica=0,
                   keep_configs=True, pure=None):
    """Run one realization, recording at each snapshot time.

    Snapshot times must be nondecreasing.  Conserved vectors are the
    exact values; the audit cadence is params.audit_interval.
    """
    times = [float(t) for t in snapshot_times]
    if sorted(times) != times:
        raise InvalidParamsError("snapshot times must be nondecreasing")
    sim = Simulation(params, initial=initial, rng=rng, replica=replica,
                     pure=pure)
    traj = Trajectory(params=params, times=[], conserved=[], counters=[],
                      configs=[] if keep_configs else None,
                      core=active_core_name(pure))
    for t in times:
        sim.run_until(t)
        traj.times.append(sim.time)
        traj.conserved.append(sim.conserved())
        traj.counters.append(sim.state.counters())
        if keep_configs:
            traj.configs.append(sim.config())
    return traj


def run_exclusion_trajectory(params, initial, snapshot_times, **kw):
    """Single-species front end of run_trajectory."""
    if params.model != "scalar":
        raise InvalidParamsError("exclusion trajectory expects model=scalar")
    return run_trajectory(params, initial, snapshot_times, **kw)


def _conserved_to_json(values):
    return [str(x) for x in values]


def save_trajectory(traj, path):
    """Write a trajectory as JSON lines: one header, one line per snapshot."""
    p = traj.params
    head = {"kind": "trajectory", "N": p.N, "d": p.d, "a": p.a, "b": p.b,
            "M": p.mesoscopic_range(), "T": p.T, "seed": p.seed,
            "model": p.model if isinstance(p.model, str) else "custom",
            "core": traj.core}
    with open(path, "w") as fh:
        fh.write(json.dumps(head, sort_keys=True) + "\n")
        for i, t in enumerate(traj.times):
            rec = {"t": t,
                   "conserved": _conserved_to_json(traj.conserved[i]),
                   "counters": traj.counters[i]}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_trajectory(path):
    """Read back the header and records written by save_trajectory."""
    with open(path) as fh:
        head = json.loads(fh.readline())
        recs = [json.loads(line) for line in fh if line.strip()]
    return head, recs
