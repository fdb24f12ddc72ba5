"""Acceptance gate: eleven pinned criteria for the pumping simulator.

Each test covers one criterion, prints a single pass/fail line, and
asserts with the criterion's stated tolerance.  Reference numbers come
from tests/reference_values.py, which was frozen from an independent
brute-force integrator before this package was written.
"""

import time

import numpy as np
import pytest

import nvpump as nv
from nvpump import experiments as ex
from reference_values import (CROSSOVER_GAMMA, DOMINANCE_RATIO,
                              DOMINANCE_THRESHOLD, CRIT10_NESS_TOL,
                              CRIT10_FIRST_TOFF, CRIT10_W_AT_FIRST)


def _report(num, name, ok, detail):
    line = f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'} {name}: {detail}"
    print(line)
    assert ok, line


def _diag(p):
    return np.diag(np.asarray(p, dtype=complex))


def test_criterion_01_diagonal_states_stay_diagonal(uniform_G):
    t0 = time.perf_counter()
    worst = 0.0
    for gp in (0.5, 2.0):
        model = nv.build_model(nv.ModelParams(Gamma_p=gp))
        traj = nv.evolve_full(_diag(uniform_G), model, True,
                              np.linspace(0.0, 20.0, 201), tol=1e-11)
        for rho in traj.densities:
            off = rho - np.diag(np.diag(rho))
            worst = max(worst, np.abs(off).max())
    dt = time.perf_counter() - t0
    ok = worst < 1e-10 and dt < 10.0
    _report(1, "incoherence", ok,
            f"max off-diagonal {worst:.3e} (< 1e-10), {dt:.1f}s (< 10s)")


def test_criterion_02_full_lindblad_reduces_to_rate_equation(model,
                                                            uniform_G):
    t0 = time.perf_counter()
    t = np.linspace(0.0, 20.0, 200)
    full = nv.evolve_full(_diag(uniform_G), model, True, t, tol=1e-11)
    W = nv.build_rate_matrix(model, True)
    rate = nv.evolve_populations(W, uniform_G, t)
    diff = np.abs(full.populations - rate.populations).max()
    dt = time.perf_counter() - t0
    ok = diff < 1e-8 and dt < 10.0
    _report(2, "reduction equivalence", ok,
            f"max-abs {diff:.3e} (< 1e-8) on 200 points, {dt:.1f}s (< 10s)")


def test_criterion_03_first_law_and_entropy_closure():
    t0 = time.perf_counter()
    res = nv.run_protocol(nv.ProtocolConfig())
    tot = res.totals
    dt = time.perf_counter() - t0
    tol_e = 1e-6 * max(abs(tot.W), abs(tot.Q))
    tol_s = 1e-6 * max(abs(tot.dS), abs(tot.S_W), abs(tot.S_Q))
    ok = (tot.first_law_residual <= tol_e
          and tot.closure_residual <= tol_s and dt < 5.0)
    _report(3, "first law + closure", ok,
            f"|dU-(W+Q)| {tot.first_law_residual:.3e} <= {tol_e:.3e}, "
            f"|dS-(S_W+S_Q)| {tot.closure_residual:.3e} <= {tol_s:.3e}, "
            f"{dt:.1f}s (< 5s)")


def test_criterion_04_ness_flux_balance():
    worst = 0.0
    for gp in (0.1, 1.0, 5.0):
        m = nv.build_model(nv.ModelParams(Gamma_p=gp))
        p = nv.steady_state(nv.build_rate_matrix(m, True))
        wdot = nv.power_exact(p, m)
        qdot = sum(nv.heat_current(p, m, ch) for ch in ("sc", "isc", "nsc"))
        worst = max(worst, abs(wdot + qdot) / wdot)
    ok = worst < 1e-8
    _report(4, "NESS flux balance", ok,
            f"max |Wdot+Qdot|/Wdot {worst:.3e} (< 1e-8) "
            "for pump rates 0.1, 1, 5")


def test_criterion_05_entropy_maximum_location():
    t0 = time.perf_counter()
    sweep = ex.sweep_entropy(np.linspace(0.0, 5.0, 101))
    dt = time.perf_counter() - t0
    ok = abs(sweep.gamma_max - 1.13) <= 0.05 and dt < 30.0
    _report(5, "entropy maximum", ok,
            f"argmax {sweep.gamma_max:.4f} in 1.13 +- 0.05, "
            f"{dt:.1f}s (< 30s)")


def test_criterion_06_monotonicity_suite():
    grid = np.linspace(0.0, 5.0, 101)
    ns = ex.sweep_ness1(grid)
    es = ex.sweep_entropy(grid)
    p1_down = bool(np.all(np.diff(ns.populations[:, 0]) < 0.0))
    pol_down = bool(np.all(np.diff(es.polarization) < 0.0))
    s2_up = bool(np.all(np.diff(es.S_ness2) > 0.0))
    p_g = ns.populations[:, :3].sum(axis=1)
    p_e = ns.populations[:, 3:6].sum(axis=1)
    excited_wins = bool(np.all(p_e[grid >= 1.2] > p_g[grid >= 1.2]))

    def gap(gamma):
        m = nv.build_model(nv.ModelParams(Gamma_p=gamma))
        p = nv.steady_state(nv.build_rate_matrix(m, True))
        return p[3:6].sum() - p[:3].sum()

    lo, hi = 0.9, 1.1
    assert gap(lo) < 0.0 < gap(hi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if gap(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    crossover = 0.5 * (lo + hi)
    cross_ok = 0.9 < crossover < 1.1 and \
        abs(crossover - CROSSOVER_GAMMA) < 1e-9
    ok = p1_down and pol_down and s2_up and excited_wins and cross_ok
    _report(6, "monotonicity suite", ok,
            f"P1 down {p1_down}, polarization down {pol_down}, "
            f"S(rho2) up {s2_up}, P_E>P_G past 1.2 {excited_wins}, "
            f"crossover {crossover:.6f} in (0.9, 1.1)")


def test_criterion_07_branching_ratios(model):
    W = nv.build_rate_matrix(model, False)
    p7 = nv.asymptotic_state(W, np.eye(8)[6])
    p4 = nv.asymptotic_state(W, np.eye(8)[3])
    p5 = nv.asymptotic_state(W, np.eye(8)[4])
    d7 = np.abs(p7[:3] - 1.0 / 3.0).max()
    d4 = abs(p4[0] - 77.0 / 77.5)
    d5 = abs(p5[1] - (77.0 / 92.25 + (15.0 / 92.25) / 3.0))
    ok = max(d7, d4, d5) < 1e-10
    _report(7, "branching ratios", ok,
            f"shelf {d7:.2e}, excited ms0 {d4:.2e}, "
            f"excited ms1 {d5:.2e} (all < 1e-10)")


def test_criterion_08_closed_form_flux_identities(default_run, model):
    traj = default_run.trajectory
    worst_w = worst_q = 0.0
    for p, flag in zip(traj.populations, traj.laser_on):
        if flag:
            exact = nv.power_exact(p, model, True)
            approx = nv.power_approx(p, model)
            worst_w = max(worst_w, abs(exact - approx) / exact)
        exact_q = nv.heat_current(p, model, "sc")
        closed_q = nv.heat_current_sc_closed_form(p, model)
        if closed_q == 0.0:
            assert exact_q == 0.0
        else:
            worst_q = max(worst_q, abs(exact_q - closed_q) / abs(closed_q))
    ok = worst_w < 1e-4 and worst_q < 1e-4
    _report(8, "closed-form flux identities", ok,
            f"power rel dev {worst_w:.3e}, sc-heat rel dev "
            f"{worst_q:.3e} (both < 1e-4)")


def test_criterion_09_spin_conserving_heat_dominance(default_run):
    tot = default_run.totals
    ratio = abs(tot.Q_sc) / abs(tot.Q)
    ok = ratio >= DOMINANCE_THRESHOLD >= 0.95 and \
        abs(ratio - DOMINANCE_RATIO) < 1e-4
    _report(9, "sc heat dominance", ok,
            f"|Q_sc|/|Q_total| {ratio:.6f} >= {DOMINANCE_THRESHOLD} "
            f"(frozen pre-build; hard floor 0.95)")


def test_criterion_10_polarization_work_saturation(model, uniform_G):
    grid = np.linspace(0.1, 10.0, 100)
    sweep = ex.sweep_polarization_vs_toff(grid, Gamma_p=1.0,
                                          ness_tol=CRIT10_NESS_TOL)
    W = nv.build_rate_matrix(model, True)
    from nvpump.lindblad import Propagator
    prop = Propagator(W, uniform_G)
    resid = np.abs(W.matrix @ prop(grid).T).max(axis=0) / W.max_rate
    qualify = np.flatnonzero(resid <= CRIT10_NESS_TOL)
    assert qualify.size, "NESS tolerance never met on the grid"
    k = int(qualify[0])
    nondecreasing = bool(np.all(np.diff(sweep.polarization) >= -1e-12))
    flatness = float(np.abs(sweep.polarization[k:]
                            - sweep.polarization[k]).max())
    anchor_ok = (grid[k] == pytest.approx(CRIT10_FIRST_TOFF, abs=1e-9)
                 and sweep.work[k] == pytest.approx(CRIT10_W_AT_FIRST,
                                                    rel=1e-6))
    ok = nondecreasing and flatness <= 1e-4 and anchor_ok
    _report(10, "polarization-work saturation", ok,
            f"non-decreasing {nondecreasing}, flat to {flatness:.3e} "
            f"(< 1e-4) beyond W({grid[k]:.1f} us) = {sweep.work[k]:.4e}")


def test_criterion_11_sweep_entropy_determinism(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("command: sweep-entropy\n", encoding="utf-8")
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = nv.main(["--config", str(cfg), "--out", str(out)])
        assert code == 0
        outs.append(out)
    same = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
               for f in ("sweep_entropy.csv", "entropy_max.csv"))
    ok = same
    _report(11, "sweep-entropy determinism", ok,
            "two identical runs, byte-identical CSVs" if same
            else "outputs differ between runs")
