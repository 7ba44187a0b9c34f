"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from crimeblowup.cli import main
from crimeblowup.config import config_from_dict, load_config
from crimeblowup.coupled import CoupledControl, quasi_steady_target, run_coupled
from crimeblowup.grid import make_grid
from crimeblowup.initial_data import (
    InitialDataParams,
    construct_w0,
    matching_defects,
    verify_w0,
)
from crimeblowup.scalar import ScalarMode, ScalarState, StepControl, reaction_term, run
from crimeblowup.scenarios import run_scenario

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def report(capsys):
    def emit(label, passed, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if passed else 'FAIL'}] {label}: {detail}")
        assert passed, detail

    return emit


@pytest.fixture(scope="module")
def ladder():
    start = time.perf_counter()
    res = run_scenario(load_config(CONFIG_DIR / "singular_limit_ladder.toml"))
    return res, time.perf_counter() - start


@pytest.fixture(scope="module")
def blowup_coupled_run():
    grid = make_grid(3, 1.0, 256)
    v0, _ = construct_w0(grid, InitialDataParams(2.0, 3, 1.0, 4.0))
    u0 = quasi_steady_target(v0, 20.0, 2.0)
    return run_coupled(u0, v0, 0.1, 2.0, CoupledControl(StepControl(0.2, W_max_factor=1e4)))


def test_01_exact_ode_blowup_time(report):
    start = time.perf_counter()
    grid = make_grid(3, 1.0, 512)
    rep = run(ScalarState(grid.profile(1.0), 0.0, ScalarMode.local_power(24.0, 2.0)), StepControl(0.05))
    wall = time.perf_counter() - start
    rel = abs(rep.extrapolated_T - 1 / 48) * 48
    report(
        "exact ODE blow-up oracle",
        rep.blew_up and rel <= 0.02 and wall < 10,
        f"extrapolated T = {rep.extrapolated_T:.8f} vs 1/48, rel err {rel:.2e}, {wall:.2f} s",
    )


def test_02_exponential_oracle(report):
    start = time.perf_counter()
    rel_tol = 1e-6
    grid = make_grid(3, 1.0, 512)
    rep = run(ScalarState(grid.profile(1.0), 0.0, ScalarMode.nonlocal_(1.0, 2.0)), StepControl(1.0, rel_tol=rel_tol))
    wall = time.perf_counter() - start
    expect = math.exp(3 / (4 * math.pi))
    err = float(np.max(np.abs(rep.final_state.w.values - expect))) / expect
    report(
        "exponential oracle",
        rep.outcome == "reached_T_end" and err <= 10 * rel_tol and wall < 10,
        f"max rel err {err:.2e} (allowed {10 * rel_tol:g}), {wall:.2f} s",
    )


def test_03_initial_data_verifier(report):
    grid = make_grid(3, 1.0, 2048)
    failures, worst_match = [], 0.0
    for chi in (1.0, 2.0, 4.0):
        consts = set()
        for M in (4.0, 16.0, 64.0):
            params = InitialDataParams(chi, 3, 1.0, M)
            # chi = 4, M = 64 puts the cap radius inside the first cell at this N
            w0, c = construct_w0(grid, params, min_cap_cells=0)
            rep = verify_w0(w0, params, c)
            if not rep.passed:
                failures.append(f"chi={chi}, M={M}: " + rep.summary().replace("\n", "; "))
            worst_match = max(worst_match, *matching_defects(params))
            consts.add((c.A, c.lam, c.mu))
        if len(consts) != 1:
            failures.append(f"chi={chi}: constants vary with M")
    report(
        "initial-data verifier",
        not failures and worst_match <= 1e-10,
        f"9 profiles, worst matching defect {worst_match:.1e}" + ("; " + "; ".join(failures) if failures else ""),
    )


def test_04_comparison_principle(report):
    start = time.perf_counter()
    res = run_scenario(load_config(CONFIG_DIR / "comparison_check.toml"))
    wall = time.perf_counter() - start
    check = res.check("nonlocal_dominates_local_comparison")
    report("comparison principle", check.passed and wall < 120, f"{check.detail}, {wall:.1f} s")


def test_05_ode_minorant_bound(report):
    M_values = [8.0, 16.0, 32.0, 64.0]
    highs = []
    for M in M_values:
        cfg = config_from_dict(
            {"scenario": "mass_threshold_scan", "grid": {"N": 1024}, "scan": {"M": M, "iterations": 6}}
        )
        highs.append(run_scenario(cfg).bracket[1])
    m = 2.0 * max(highs)
    cfg = config_from_dict(
        {"scenario": "limit_blowup_sweep", "grid": {"N": 1024}, "sweep": {"M": M_values, "m": [m], "bound_slack": 0.1}}
    )
    res = run_scenario(cfg)
    held = all(r["T1_status"] == "held" for r in res.rows)
    ratios = [r["T_detect"] / r["ode_bound"] for r in res.rows if r["T_detect"] is not None]
    report(
        "ODE-minorant bound",
        held and res.passed and len(ratios) == len(M_values),
        f"m = {m:.1f}, window held for all M: {held}, T_detect/bound = "
        + ", ".join(f"{x:.4f}" for x in ratios)
        + "; "
        + res.check(f"earlier_blowup_for_larger_peak[m={m!r}]").detail,
    )


def test_06_mass_conservation(report, ladder, blowup_coupled_run):
    res, _ = ladder
    drift = blowup_coupled_run.max_mass_drift
    ok = res.check("mass_conservation").passed and drift <= 1e-9
    report("mass conservation", ok, f"ladder {res.check('mass_conservation').detail}; blow-up run {drift:.2e}")


def test_07_v_lower_bound(report, ladder, blowup_coupled_run):
    res, _ = ladder
    margin = blowup_coupled_run.v_bound_margin
    ok = res.check("v_lower_bound").passed and margin >= -1e-6
    report("v lower bound", ok, f"ladder {res.check('v_lower_bound').detail}; blow-up run margin {margin:.2e}")


def test_08_singular_limit_trend(report, ladder):
    res, wall = ladder
    sup = res.check("sup_norm_nondecreasing_as_eps_decreases")
    resid = res.check("quasi_steady_residual_decreasing")
    report(
        "singular-limit trend",
        sup.passed and resid.passed and wall < 900,
        f"{sup.detail}; {resid.detail}; {wall:.0f} s",
    )


def test_09_scheme_convergence(report):
    res = run_scenario(load_config(CONFIG_DIR / "convergence_study.toml"))
    p_space, p_time = res.orders
    report(
        "scheme convergence",
        abs(p_space - 2.0) <= 0.3 and p_time >= 1.7,
        f"spatial order {p_space:.4f}, temporal order {p_time:.4f}",
    )


def test_10_homogeneity(report):
    rng = np.random.default_rng(20240611)
    worst = 0.0
    for _ in range(100):
        N = int(rng.integers(16, 512))
        grid = make_grid(int(rng.integers(3, 7)), float(rng.uniform(0.5, 3.0)), N)
        w = grid.profile(rng.uniform(0.1, 10.0, N))
        c = float(10.0 ** rng.uniform(-3, 3))
        mode = ScalarMode.nonlocal_(float(rng.uniform(0.1, 1e3)), float(rng.uniform(0.5, 4.0)))
        lhs = reaction_term(w * c, mode).values
        rhs = c * reaction_term(w, mode).values
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.abs(rhs))))
    report("homogeneity", worst <= 1e-12, f"worst relative defect over 100 pairs {worst:.2e}")


def test_11_determinism(report, tmp_path):
    cfg = str(CONFIG_DIR / "limit_blowup_sweep.toml")
    dirs = [tmp_path / "a", tmp_path / "b"]
    codes = [main(["--quiet", "run", cfg, "--output-dir", str(d)]) for d in dirs]
    names = sorted(p.relative_to(dirs[0]).as_posix() for p in dirs[0].rglob("*.csv"))
    same = all((dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes() for n in names)
    same = same and names == sorted(p.relative_to(dirs[1]).as_posix() for p in dirs[1].rglob("*.csv"))
    report("determinism", codes == [0, 0] and same and names, f"{len(names)} CSV files byte-identical: {same}")
