"""Acceptance criteria, each run at its stated tolerance on the bundled configs.

Every test prints one ``PASS``/``FAIL`` line; the lines are repeated in the
terminal summary.  Run with ``pytest tests/test_acceptance.py -s -v``.
"""
import time

import pytest

from rfpi.cli import resolve_config
from rfpi.scenarios import load_config, run_scenario


def _run(name):
    cfg = load_config(resolve_config(name))
    start = time.perf_counter()
    res = run_scenario(cfg)
    return cfg, res, time.perf_counter() - start


def _check(log, number, title, checks):
    """``checks``: list of ``(label, statistic, relation, tolerance)``."""
    ops = {"<": lambda a, b: a < b, "<=": lambda a, b: a <= b, "==": lambda a, b: a == b,
           "in": lambda a, b: b[0] <= a <= b[1], "holds": lambda a, b: bool(a)}
    parts, ok = [], True
    for label, stat, rel, tol in checks:
        good = ops[rel](stat, tol)
        ok &= good
        if rel == "holds":
            parts.append(f"{label}={'yes' if stat else 'no'}")
        else:
            parts.append(f"{label}={stat:.3g} {rel} {tol}")
    line = f"{'PASS' if ok else 'FAIL'} [{number:>2}] {title}: " + "; ".join(parts)
    print(line)
    log.append(line)
    assert ok, line


def _decreasing(vals):
    return all(b < a for a, b in zip(vals, vals[1:]))


def test_free_particle_exactness(acceptance_log):
    cfg, res, wall = _run("free_particle.cfg")
    assert (cfg["grid.points"], cfg["grid.half_width"], cfg["t"], cfg["nu"]) == (1024, 12.0, 1.0, [4, 16])
    errs = [r["l2_error"] for r in res.tables["convergence"]]
    _check(acceptance_log, 1, "free-particle exactness",
           [("max_l2_error", max(errs), "<", 1e-6), ("runtime_s", wall, "<", 30.0)])


def test_measured_oscillator_convergence(acceptance_log):
    cfg, res, wall = _run("measured_ho.cfg")
    assert cfg["nu"] == [16, 32, 64, 128, 256] and cfg["weight.delta_a"] == 1.0
    errs = [r["l2_error"] for r in res.tables["convergence"]]
    _check(acceptance_log, 2, "measured oscillator convergence",
           [("strictly_decreasing", _decreasing(errs), "holds", None),
            ("final_error", errs[-1], "<", 1e-2), ("runtime_s", wall, "<", 600.0)])


def test_stability(acceptance_log):
    cfg, res, _ = _run("stability.cfg")
    assert cfg["stability.points"] == [512, 1024, 2048]
    k0 = [r["fitted_K0"] for r in res.tables["stability"]]
    same_sign = all(k > 0 for k in k0) or all(k < 0 for k in k0)
    spread = max(abs(k) for k in k0) / min(abs(k) for k in k0) if same_sign else float("inf")
    ratios = [r["norm_ratio"] for r in res.tables["step_ratios"]]
    _check(acceptance_log, 3, "stability",
           [("K0_spread", spread, "<", 2.0), ("max_damped_free_step_ratio", max(ratios), "<=", 1 + 1e-3)])


def test_damping_bounds(acceptance_log):
    cfg, res, _ = _run("damping.cfg")
    row = res.tables["damping"][0]
    assert row["samples"] == 10_000 and cfg["tol.violation"] == 1e-14
    _check(acceptance_log, 4, "damping factor in [0, 1]",
           [("violations", row["violations"], "==", 0)])


def test_gauge_covariance(acceptance_log):
    cfg, res, _ = _run("gauge.cfg")
    assert cfg["nu"] == [64] and cfg["potential"] == "harmonic"
    rows = {r["gauge"]: r["defect"] for r in res.tables["gauge"]}
    assert set(rows) == {"constant", "linear", "time-linear", "bump"}
    _check(acceptance_log, 5, "gauge covariance",
           [(f"defect[{k}]", v, "<", 1e-6) for k, v in rows.items()])


def test_spin_contraction_and_composition(acceptance_log):
    cfg, res, _ = _run("spin_channels.cfg")
    assert cfg["channels.count"] == 1000
    row = res.tables["channels"][0]
    _check(acceptance_log, 6, "spin contraction and composition",
           [("max_singular_value", row["max_singular_value"], "<=", 1 + 1e-10),
            ("compose_defect", row["compose_defect"], "<", 1e-7),
            ("rk4_order", row["rk4_order_median"], "in", (3.5, 4.5))])


def test_spin_convergence(acceptance_log):
    cfg, res, _ = _run("spin_convergence.cfg")
    assert cfg["nu"] == [16, 32, 64, 128] and len(cfg["spin.paths"]) == 2
    errs = [r["l2_error"] for r in res.tables["convergence"]]
    _check(acceptance_log, 7, "spin convergence",
           [("strictly_decreasing", _decreasing(errs), "holds", None),
            ("final_error", errs[-1], "<", 3e-2)])


def test_tensor_factorization(acceptance_log):
    cfg, res, _ = _run("tensor.cfg")
    assert cfg["tensor.count"] == 100 and cfg["tensor.levels"] == 2
    worst = max(r["defect"] for r in res.tables["tensor"])
    _check(acceptance_log, 8, "tensor factorization", [("max_defect", worst, "<", 1e-8)])


@pytest.mark.slow
def test_separable_reduction_and_symmetry(acceptance_log):
    cfg, res, wall = _run("multiparticle.cfg")
    assert cfg["grid.points"] == 96 and cfg["nu"] == [32]
    row = res.tables["multiparticle"][0]
    _check(acceptance_log, 9, "separable reduction and exchange symmetry",
           [("separable_defect", row["separable_defect"], "<", 1e-8),
            ("symmetric_defect", row["symmetric_defect"], "<", 1e-10),
            ("antisymmetric_defect", row["antisymmetric_defect"], "<", 1e-10),
            ("runtime_s", wall, "<", 1200.0)])


def test_oracle_cross_validation(acceptance_log):
    cfg, res, _ = _run("oracle_agreement.cfg")
    assert cfg["t"] == 1.0
    dist = res.tables["oracle"][0]["distance"]
    _check(acceptance_log, 10, "Crank-Nicolson vs Gaussian ansatz", [("l2_distance", dist, "<", 1e-3)])
