"""Declarative experiment configs and the scenarios they drive.

A config is a flat JSON object.  Family parameters use dotted keys, e.g.

    {"schema": "rfpi-config/1", "scenario": "convergence",
     "potential": "harmonic", "potential.omega": 1.0,
     "weight": "quadratic", "weight.delta_a": 1.0, "weight.horizon": 1.0,
     "grid.points": 1024, "grid.half_width": 12.0, "t": 1.0,
     "nu": [16, 32, 64], "oracle": "cn", "tol.final_error": 1e-2}

Every scenario returns a :class:`ScenarioResult` holding CSV-ready tables and
pass/fail clauses with the tolerance that was applied.
"""
from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from . import model as M
from .action import StraightLine, damping_factor
from .errors import ConfigError, InvalidParameter
from .grid import Grid, SpinorWaveFunction, Subdivision, gaussian_packet, l2_distance
from .multiparticle import (MultiParticleModel, MultiParticleState, channel_tensor, exchange_commutator,
                            harmonic_pair, multi_time_sliced, relative_distance, symmetrized,
                            symmetry_check, zero_pair)
from .oracle import (GaussianAnsatz, HamiltonianOperator, cn_solve, free_gaussian, gaussian_solve,
                     trajectory_rows)
from .propagator import (KernelCache, PropagatorConfig, convergence_study, gauge_check,
                         iter_time_sliced, stability_estimate, time_sliced)
from .spin import (channel_compose_check, clamped_spin_system, integrate_channel,
                   random_spin_system, rk4_order, spin_time_sliced)

SCHEMA = "rfpi-config/1"


# ---------------------------------------------------------------------------
# results


@dataclass
class Clause:
    name: str
    statistic: float
    tolerance: float
    passed: bool
    relation: str = "<"

    def as_dict(self):
        return {"name": self.name, "statistic": self.statistic, "tolerance": self.tolerance,
                "relation": self.relation, "passed": self.passed}


@dataclass
class ScenarioResult:
    scenario: str
    tables: Dict[str, List[dict]] = field(default_factory=dict)
    clauses: List[Clause] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.clauses)

    def clause(self, name):
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    def below(self, name, stat, tol):
        self.clauses.append(Clause(name, float(stat), float(tol), bool(stat < tol), "<"))

    def at_most(self, name, stat, tol):
        self.clauses.append(Clause(name, float(stat), float(tol), bool(stat <= tol), "<="))

    def holds(self, name, ok, detail=float("nan")):
        self.clauses.append(Clause(name, float(detail), float("nan"), bool(ok), "holds"))


# ---------------------------------------------------------------------------
# config handling

COMMON_KEYS = {
    "schema", "scenario", "description", "seed", "threads", "output_dir", "dim", "mass",
    "potential", "weight", "grid.points", "grid.half_width", "t", "nu", "oracle", "oracle.steps",
    "initial.center", "initial.momentum", "initial.width", "quadrature", "boundary_mass_tol",
    "spin_substeps",
}
PREFIXES = ("potential.", "weight.", "tol.", "initial2.")
SCENARIO_KEYS = {
    "convergence": set(),
    "stability": {"stability.points", "stability.rho", "stability.trials"},
    "damping": {"damping.samples", "damping.box"},
    "gauge": {"gauges"},
    "channels": {"channels.count", "channels.levels", "channels.substeps", "compose.count",
                 "compose.rho", "compose.substeps", "order.count"},
    "spin": {"spin.paths", "spin.delta_a", "spin.horizon", "spin.ceiling", "spin.coupling",
             "spin.mix"},
    "tensor": {"tensor.count", "tensor.substeps", "tensor.levels"},
    "multiparticle": {"pair", "pair.kappa"},
    "oracle": {"trajectory.every"},
    "validate": {"validate.box", "validate.samples"},
}

CATALOG = {
    "convergence": "time-sliced propagator against a closed form or Crank-Nicolson reference as the mesh shrinks",
    "stability": "fitted one-step growth constant across grid refinements and per-step norm ratios",
    "damping": "damping factor of the measurement weight stays inside [0, 1] on random segments",
    "gauge": "covariance of the time-sliced propagator under gauge transformations of the potentials",
    "channels": "spin channel contraction, slice composition and Runge-Kutta order",
    "spin": "spinor time-sliced propagator with clamped matrix weights against Crank-Nicolson",
    "tensor": "joint two-particle spin channel against the Kronecker product of single channels",
    "multiparticle": "two-particle propagator: separable reduction and boson/fermion exchange symmetry",
    "oracle": "Crank-Nicolson against the Gaussian-ansatz solution for the measured oscillator",
    "validate": "sampled checks of the regularity hypotheses on the potentials and the weight",
}


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def validate_config(cfg) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("schema") != SCHEMA:
        raise ConfigError(f"schema must be {SCHEMA!r}, got {cfg.get('schema')!r}")
    sc = cfg.get("scenario")
    if sc not in SCENARIOS:
        raise ConfigError(f"unknown scenario {sc!r}; choose from {sorted(SCENARIOS)}")
    allowed = COMMON_KEYS | SCENARIO_KEYS[sc]
    for k, v in cfg.items():
        if k not in allowed and not k.startswith(PREFIXES):
            raise ConfigError(f"unknown key {k!r} for scenario {sc!r}")
        if isinstance(v, dict):
            raise ConfigError(f"key {k!r}: nested objects are not allowed (use dotted keys)")
    if "potential" in cfg and cfg["potential"] not in M.POTENTIAL_FAMILIES:
        raise ConfigError(f"unknown potential family {cfg['potential']!r}")
    if "weight" in cfg and cfg["weight"] not in WEIGHT_BUILDERS:
        raise ConfigError(f"unknown weight family {cfg['weight']!r}")
    for k in [k for k in cfg if k.startswith("tol.")]:
        if not isinstance(cfg[k], (int, float)) or isinstance(cfg[k], bool):
            raise ConfigError(f"tolerance {k!r} must be numeric")
    try:
        build_potential(cfg)
        build_weight(cfg)
    except (InvalidParameter, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return validate_config(cfg)


def _params(cfg, prefix):
    return {k[len(prefix):]: v for k, v in cfg.items() if k.startswith(prefix)}


POTENTIAL_ARGS = {
    "free": lambda d, m, P: M.free_potential(d),
    "uniform-field": lambda d, m, P: M.uniform_field(np.broadcast_to(P.get("E0", 1.0), (d,))),
    "harmonic": lambda d, m, P: M.harmonic(P.get("omega", 1.0), m, d, P.get("center")),
    "quartic": lambda d, m, P: M.quartic(P.get("coeff", 1.0), d),
    "symmetric-gauge-magnetic": lambda d, m, P: M.symmetric_gauge_magnetic(
        P.get("B0", 1.0), P.get("omega", 0.0), m),
}
POTENTIAL_PARAMS = {"free": set(), "uniform-field": {"E0"}, "harmonic": {"omega", "center"},
                    "quartic": {"coeff"}, "symmetric-gauge-magnetic": {"B0", "omega"}}

WEIGHT_BUILDERS = {
    "zero": lambda d, P: M.zero_weight(d),
    "constant": lambda d, P: M.constant_weight(P.get("value", 0.0), d),
    "quadratic": lambda d, P: M.quadratic_weight(
        np.broadcast_to(np.asarray(P.get("center", 0.0), float), (d,)).copy(),
        P.get("delta_a", 1.0), P.get("horizon", 1.0), d),
}
WEIGHT_PARAMS = {"zero": set(), "constant": {"value"}, "quadratic": {"center", "delta_a", "horizon"}}


def build_potential(cfg):
    fam = cfg.get("potential", "free")
    P = _params(cfg, "potential.")
    extra = set(P) - POTENTIAL_PARAMS[fam]
    if extra:
        raise ConfigError(f"potential {fam!r} has no parameters {sorted(extra)}")
    d = int(cfg.get("dim", 1))
    if fam == "symmetric-gauge-magnetic" and d != 2:
        raise ConfigError("symmetric-gauge-magnetic needs dim = 2")
    return POTENTIAL_ARGS[fam](d, float(cfg.get("mass", 1.0)), P)


def build_weight(cfg):
    fam = cfg.get("weight", "zero")
    P = _params(cfg, "weight.")
    extra = set(P) - WEIGHT_PARAMS[fam]
    if extra:
        raise ConfigError(f"weight {fam!r} has no parameters {sorted(extra)}")
    try:
        return WEIGHT_BUILDERS[fam](int(cfg.get("dim", 1)), P)
    except InvalidParameter as exc:
        raise ConfigError(f"weight {fam!r}: {exc}") from exc


def build_grid(cfg, points=None):
    return Grid(int(cfg.get("dim", 1)), float(cfg.get("grid.half_width", 12.0)),
                int(points or cfg.get("grid.points", 1024)))


def build_propagator_config(cfg, threads=None):
    kw = {}
    if "quadrature" in cfg:
        kw["quadrature"] = cfg["quadrature"]
    if "boundary_mass_tol" in cfg:
        kw["boundary_mass_tol"] = float(cfg["boundary_mass_tol"])
    if "spin_substeps" in cfg:
        kw["spin_substeps"] = int(cfg["spin_substeps"])
    return PropagatorConfig(constants=M.PhysicalConstants(float(cfg.get("mass", 1.0))),
                            threads=int(threads or cfg.get("threads", 1)), **kw)


def _packet(cfg, grid, prefix="initial."):
    return gaussian_packet(grid, cfg.get(prefix + "center", 0.0), cfg.get(prefix + "momentum", 0.0),
                           cfg.get(prefix + "width", 1.0))


def _tol(cfg, name, default):
    return float(cfg.get("tol." + name, default))


def quadratic_model(cfg):
    """Gaussian-ansatz parameters ``(stiffness, weight_strength, weight_center)``."""
    fam = cfg.get("potential", "free")
    m = float(cfg.get("mass", 1.0))
    if fam == "free":
        k = 0.0
    elif fam == "harmonic" and cfg.get("potential.center") in (None, 0, 0.0):
        k = m * float(cfg.get("potential.omega", 1.0)) ** 2
    else:
        raise ConfigError("the Gaussian oracle needs a free or centred harmonic potential")
    wf = cfg.get("weight", "zero")
    if wf == "zero":
        return k, 0.0, 0.0
    if wf != "quadratic":
        raise ConfigError("the Gaussian oracle needs a zero or quadratic weight")
    da = float(cfg.get("weight.delta_a", 1.0))
    T = float(cfg.get("weight.horizon", 1.0))
    return k, 2.0 / (T * da**2), cfg.get("weight.center", 0.0)


def _initial_ansatz(cfg):
    d = int(cfg.get("dim", 1))
    return GaussianAnsatz.normalized(cfg.get("initial.width", 1.0), cfg.get("initial.center", 0.0),
                                     cfg.get("initial.momentum", 0.0), d)


def reference_state(cfg, p, w, f, t):
    """Oracle state at time ``t`` selected by the ``oracle`` key."""
    kind = cfg.get("oracle", "none")
    grid = f.grid
    if kind == "none":
        return None
    if kind == "free-closed-form":
        if cfg.get("potential", "free") != "free" or cfg.get("weight", "zero") != "zero":
            raise ConfigError("free-closed-form oracle needs V = W = 0")
        return free_gaussian(grid, t, cfg.get("initial.center", 0.0), cfg.get("initial.momentum", 0.0),
                             cfg.get("initial.width", 1.0), float(cfg.get("mass", 1.0)))
    if kind == "cn":
        H = HamiltonianOperator(grid, p, w, float(cfg.get("mass", 1.0)))
        return cn_solve(H, f, t, int(cfg.get("oracle.steps", 4096)))
    if kind == "gaussian":
        k, kappa, a = quadratic_model(cfg)
        g = gaussian_solve(_initial_ansatz(cfg), t, float(cfg.get("mass", 1.0)), stiffness=k,
                           weight_strength=kappa, weight_center=a)
        return g.evaluate(grid, t)
    raise ConfigError(f"unknown oracle {kind!r}")


# ---------------------------------------------------------------------------
# scenarios


def run_convergence(cfg, threads=None):
    res = ScenarioResult("convergence")
    t0 = time.perf_counter()
    p, w, grid = build_potential(cfg), build_weight(cfg), build_grid(cfg)
    pc = build_propagator_config(cfg, threads)
    f = _packet(cfg, grid)
    t = float(cfg.get("t", 1.0))
    ref = reference_state(cfg, p, w, f, t)
    rows = convergence_study(p, w, f, t, cfg.get("nu", [4, 16]), pc, ref)
    res.tables["convergence"] = rows
    errs = [r["l2_error"] for r in rows]
    wall = time.perf_counter() - t0
    if ref is not None:
        if "tol.max_error" in cfg:
            res.below("max_error", max(errs), _tol(cfg, "max_error", 0))
        if "tol.final_error" in cfg:
            res.below("final_error", errs[-1], _tol(cfg, "final_error", 0))
        if cfg.get("tol.monotone", 0):
            ok = all(b < a for a, b in zip(errs, errs[1:]))
            res.holds("strictly_decreasing", ok)
    if "tol.runtime" in cfg:
        res.below("runtime", wall, _tol(cfg, "runtime", 0))
    res.info["wall_time"] = wall
    return res


def run_stability(cfg, threads=None):
    res = ScenarioResult("stability")
    p, w = build_potential(cfg), build_weight(cfg)
    pc = build_propagator_config(cfg, threads)
    pts = list(cfg.get("stability.points", [512, 1024, 2048]))
    rho = float(cfg.get("stability.rho", 0.05))
    rep = stability_estimate(p, w, rho, pc, build_grid(cfg, pts[0]), int(cfg.get("stability.trials", 8)),
                             int(cfg.get("seed", 0)), refine=pts)
    res.tables["stability"] = [{"points": n, "rho": rho, "fitted_K0": k} for n, k in rep.refinement.items()]
    res.below("k0_spread", rep.spread, _tol(cfg, "k0_spread", 2.0))
    # per-step norm ratios with V = A = 0 and the configured weight
    grid = build_grid(cfg)
    free = M.free_potential(grid.dim)
    f = _packet(cfg, grid)
    nu = int(max(cfg.get("nu", [64])))
    states = list(iter_time_sliced(free, w, f, Subdivision.uniform(float(cfg.get("t", 1.0)), nu), pc))
    ratios = [b.norm() / a.norm() for a, b in zip(states, states[1:])]
    res.tables["step_ratios"] = [{"step": k + 1, "t": states[k + 1].t, "norm_ratio": r}
                                 for k, r in enumerate(ratios)]
    res.at_most("free_step_ratio", max(ratios), _tol(cfg, "free_step_ratio", 1 + 1e-3))
    return res


def run_damping(cfg, threads=None):
    res = ScenarioResult("damping")
    w = build_weight(cfg)
    d = w.dim
    rng = np.random.default_rng(int(cfg.get("seed", 0)))
    n = int(cfg.get("damping.samples", 10000))
    box = float(cfg.get("damping.box", 10.0))
    s = rng.uniform(0.0, 1.0, n)
    rho = rng.exponential(0.5, n) + 1e-6
    x = rng.uniform(-box, box, (n, d))
    y = rng.uniform(-box, box, (n, d))
    c = np.empty(n)
    for i in range(n):
        c[i] = float(damping_factor(w, StraightLine(y=y[i], x=x[i], s=s[i], t=s[i] + rho[i])))
    excess = np.maximum(np.maximum(c - 1.0, -c), 0.0)
    tol = _tol(cfg, "violation", 1e-14)
    res.tables["damping"] = [{"samples": n, "min": float(c.min()), "max": float(c.max()),
                              "violations": int(np.sum(excess > tol))}]
    res.at_most("violations", int(np.sum(excess > tol)), 0)
    return res


GAUGE_DEFAULTS = {
    "constant": lambda d: M.constant_gauge(1.0),
    "linear": lambda d: M.linear_gauge(np.full(d, 0.5)),
    "time-linear": lambda d: M.time_gauge(1.0),
    "bump": lambda d: M.bump_gauge(1.0, 1.0, 0.5, 2.0),
}


def run_gauge(cfg, threads=None):
    res = ScenarioResult("gauge")
    p, w, grid = build_potential(cfg), build_weight(cfg), build_grid(cfg)
    pc = build_propagator_config(cfg, threads)
    f = _packet(cfg, grid)
    sub = Subdivision.uniform(float(cfg.get("t", 1.0)), int(max(cfg.get("nu", [64]))))
    tol = _tol(cfg, "gauge_defect", 1e-6)
    rows = []
    for name in cfg.get("gauges", list(GAUGE_DEFAULTS)):
        if name not in GAUGE_DEFAULTS:
            raise ConfigError(f"unknown gauge {name!r}")
        defect = gauge_check(p, GAUGE_DEFAULTS[name](grid.dim), w, f, sub, pc)
        rows.append({"gauge": name, "defect": defect})
        res.below(f"gauge_defect[{name}]", defect, tol)
    res.tables["gauge"] = rows
    return res


def _random_line(rng, d, rho_range=(0.01, 1.0), box=2.0):
    rho = rng.uniform(*rho_range)
    s = rng.uniform(0.0, 1.0)
    return StraightLine(y=rng.uniform(-box, box, d), x=rng.uniform(-box, box, d), s=s, t=s + rho)


def run_channels(cfg, threads=None):
    res = ScenarioResult("channels")
    rng = np.random.default_rng(int(cfg.get("seed", 0)))
    l = int(cfg.get("channels.levels", 2))
    d = int(cfg.get("dim", 1))
    sub = int(cfg.get("channels.substeps", 16))
    worst = 0.0
    for _ in range(int(cfg.get("channels.count", 1000))):
        ch = integrate_channel(random_spin_system(rng, l, d), _random_line(rng, d), sub)
        worst = max(worst, float(ch.singular_values.max()))
    comp = 0.0
    rho = float(cfg.get("compose.rho", 0.1))
    csub = int(cfg.get("compose.substeps", 64))
    for _ in range(int(cfg.get("compose.count", 100))):
        sys = random_spin_system(rng, l, d)
        s = rng.uniform(0, 1)
        u = s + rng.uniform(0, rho)
        pts = [rng.uniform(-2, 2, d) for _ in range(3)]
        comp = max(comp, channel_compose_check(sys, *pts, s, u, s + rho, csub))
    orders = []
    for _ in range(int(cfg.get("order.count", 20))):
        orders.append(rk4_order(random_spin_system(rng, l, d), _random_line(rng, d, (0.1, 1.0)))[0])
    order = float(np.median(orders))
    res.tables["channels"] = [{"max_singular_value": worst, "compose_defect": comp,
                               "rk4_order_median": order, "rk4_order_min": min(orders),
                               "rk4_order_max": max(orders)}]
    res.at_most("max_singular_value", worst, _tol(cfg, "singular_value", 1 + 1e-10))
    res.below("compose_defect", comp, _tol(cfg, "compose_defect", 1e-7))
    res.holds("rk4_order_in_range", 3.5 <= order <= 4.5, order)
    return res


def _spin_setup(cfg):
    d = int(cfg.get("dim", 1))
    paths = [np.full(d, float(a)) for a in cfg.get("spin.paths", [-1.0, 1.0])]
    l = len(paths)
    Hs = float(cfg.get("spin.coupling", 0.5)) * (np.ones((l, l)) - np.eye(l))
    sys = clamped_spin_system(paths, float(cfg.get("spin.delta_a", 2.0)), float(cfg.get("spin.horizon", 1.0)),
                              M.ClampProfile(float(cfg.get("spin.ceiling", 4.0))), Hs, d)
    return sys


def run_spin(cfg, threads=None):
    res = ScenarioResult("spin")
    t0 = time.perf_counter()
    p, w, grid = build_potential(cfg), build_weight(cfg), build_grid(cfg)
    pc = build_propagator_config(cfg, threads)
    sys = _spin_setup(cfg)
    comps = [_packet(cfg, grid).values]
    mix = float(cfg.get("spin.mix", 0.5))
    second = _packet(cfg, grid, "initial2.").values if "initial2.center" in cfg else comps[0]
    for _ in range(1, sys.levels):
        comps.append(mix * second)
    f = SpinorWaveFunction(grid, np.stack(comps))
    f = f.with_values(f.values / f.norm())
    t = float(cfg.get("t", 1.0))
    ref = cn_solve(HamiltonianOperator(grid, p, w, pc.mass, spin=sys), f, t, int(cfg.get("oracle.steps", 4096)))
    rows, prev = [], None
    for nu in cfg.get("nu", [16, 32, 64, 128]):
        u = spin_time_sliced(p, w, sys, f, Subdivision.uniform(t, nu), pc)
        err = l2_distance(u, ref)
        order = math.log(prev[1] / err) / math.log(nu / prev[0]) if prev else float("nan")
        rows.append({"nu": nu, "mesh": t / nu, "l2_error": err, "order": order,
                     "norm_ratio": u.norm() / f.norm(), "fitted_K0": math.log(u.norm() / f.norm()) / t})
        prev = (nu, err)
    res.tables["convergence"] = rows
    errs = [r["l2_error"] for r in rows]
    res.holds("strictly_decreasing", all(b < a for a, b in zip(errs, errs[1:])))
    res.below("final_error", errs[-1], _tol(cfg, "final_error", 3e-2))
    res.info["wall_time"] = time.perf_counter() - t0
    return res


def run_tensor(cfg, threads=None):
    res = ScenarioResult("tensor")
    rng = np.random.default_rng(int(cfg.get("seed", 0)))
    l = int(cfg.get("tensor.levels", 2))
    d = int(cfg.get("dim", 1))
    sub = int(cfg.get("tensor.substeps", 128))
    worst, rows = 0.0, []
    for k in range(int(cfg.get("tensor.count", 100))):
        systems = [random_spin_system(rng, l, d) for _ in range(2)]
        base = _random_line(rng, d, (0.01, 0.5))
        lines = [base, StraightLine(y=rng.uniform(-2, 2, d), x=rng.uniform(-2, 2, d), s=base.s, t=base.t)]
        direct = channel_tensor(systems, lines, sub, "direct")
        kron = channel_tensor(systems, lines, sub, "kron")
        defect = float(np.linalg.norm(direct - kron))
        worst = max(worst, defect)
        rows.append({"path": k, "rho": base.rho, "defect": defect})
    res.tables["tensor"] = rows
    res.below("tensor_defect", worst, _tol(cfg, "tensor_defect", 1e-8))
    return res


def run_multiparticle(cfg, threads=None):
    res = ScenarioResult("multiparticle")
    t0 = time.perf_counter()
    p, w = build_potential(cfg), build_weight(cfg)
    grid = build_grid(cfg, int(cfg.get("grid.points", 96)))
    if grid.dim != 1:
        raise ConfigError("multiparticle scenario runs in one dimension per particle")
    pc = build_propagator_config(cfg, threads)
    sub = Subdivision.uniform(float(cfg.get("t", 1.0)), int(max(cfg.get("nu", [32]))))
    f = _packet(cfg, grid)
    g = _packet(cfg, grid, "initial2.")
    cache = KernelCache()
    # separable reduction through the joint kernel (explicit zero coupling)
    sep_model = MultiParticleModel.identical_particles(p, w, zero_pair())
    joint = multi_time_sliced(sep_model, MultiParticleState.product([f, g]), sub, pc, cache)
    prod = MultiParticleState.product([time_sliced(p, w, f, sub, pc), time_sliced(p, w, g, sub, pc)])
    sep = relative_distance(joint, prod)
    fam = cfg.get("pair", "zero")
    if fam == "zero":
        pair = zero_pair()
    elif fam == "harmonic":
        pair = harmonic_pair(float(cfg.get("pair.kappa", 0.05)))
    else:
        raise ConfigError(f"unknown pair family {fam!r}")
    sym_model = MultiParticleModel.identical_particles(p, w, pair)
    cache = KernelCache()
    s_def, _ = symmetry_check(sym_model, symmetrized(f, g, +1), sub, pc, cache)
    _, a_def = symmetry_check(sym_model, symmetrized(f, g, -1), sub, pc, cache)
    comm = exchange_commutator(sym_model, MultiParticleState.product([f, g]), sub, pc, cache)
    wall = time.perf_counter() - t0
    res.tables["multiparticle"] = [{"separable_defect": sep, "symmetric_defect": s_def,
                                    "antisymmetric_defect": a_def, "exchange_commutator": comm,
                                    "wall_time": wall}]
    res.below("separable_defect", sep, _tol(cfg, "separable_defect", 1e-8))
    res.below("symmetric_defect", s_def, _tol(cfg, "symmetry_defect", 1e-10))
    res.below("antisymmetric_defect", a_def, _tol(cfg, "symmetry_defect", 1e-10))
    res.below("exchange_commutator", comm, _tol(cfg, "symmetry_defect", 1e-10))
    if "tol.runtime" in cfg:
        res.below("runtime", wall, _tol(cfg, "runtime", 0))
    return res


def run_oracle(cfg, threads=None):
    res = ScenarioResult("oracle")
    p, w, grid = build_potential(cfg), build_weight(cfg), build_grid(cfg)
    f = _packet(cfg, grid)
    t = float(cfg.get("t", 1.0))
    steps = int(cfg.get("oracle.steps", 2048))
    H = HamiltonianOperator(grid, p, w, float(cfg.get("mass", 1.0)))
    u, path = cn_solve(H, f, t, steps, return_path=True)
    k, kappa, a = quadratic_model(cfg)
    g = gaussian_solve(_initial_ansatz(cfg), t, float(cfg.get("mass", 1.0)), stiffness=k,
                       weight_strength=kappa, weight_center=a)
    dist = l2_distance(u, g.evaluate(grid, t))
    every = int(cfg.get("trajectory.every", max(1, steps // 64)))
    sel = path[::every]
    res.tables["trajectory"] = trajectory_rows(sel, [s.t for s in sel])
    res.tables["oracle"] = [{"t": t, "cn_norm": u.norm(), "gaussian_norm": g.norm(), "distance": dist}]
    res.below("cn_vs_gaussian", dist, _tol(cfg, "distance", 1e-3))
    return res


def run_validate(cfg, threads=None):
    res = ScenarioResult("validate")
    p, w = build_potential(cfg), build_weight(cfg)
    rep = M.validate_assumptions(p, w, float(cfg.get("validate.box", 10.0)),
                                 int(cfg.get("validate.samples", 2000)), int(cfg.get("seed", 0)))
    res.tables["validate"] = [{"clause": c.name, "statistic": c.statistic, "verdict": c.verdict}
                              for c in rep.clauses]
    res.info["notes"] = rep.notes
    fails = sum(c.verdict == "fail" for c in rep.clauses)
    res.at_most("failed_clauses", fails, _tol(cfg, "failed_clauses", 0))
    return res


SCENARIOS: Dict[str, Callable] = {
    "convergence": run_convergence,
    "stability": run_stability,
    "damping": run_damping,
    "gauge": run_gauge,
    "channels": run_channels,
    "spin": run_spin,
    "tensor": run_tensor,
    "multiparticle": run_multiparticle,
    "oracle": run_oracle,
    "validate": run_validate,
}


def run_scenario(cfg, threads=None) -> ScenarioResult:
    cfg = validate_config(cfg)
    return SCENARIOS[cfg["scenario"]](cfg, threads)
