"""Brute-force reference oracle for the eight-level optical-pumping model.

Everything here is computed independently of the nvpump package: the rate
matrix is typed out by hand from the transition table, steady states come
from a dense least-squares null-space solve, and time evolution uses a
fine-grid explicit Runge-Kutta integration of the 8x8 rate equation with
cumulative trapezoids for the fluxes.  Selected outputs are frozen into
``tests/reference_values.py`` and must never be regenerated from the
package code paths they are meant to check.

Run:  python scripts/brute_force_reference.py
"""

import numpy as np
from scipy.integrate import solve_ivp, cumulative_trapezoid
from scipy.optimize import brentq, minimize_scalar

# Level map (0-based index -> physical level):
#   0 = |1>  ground, m_s = 0
#   1 = |2>  ground, m_s = +1
#   2 = |3>  ground, m_s = -1
#   3 = |4>  excited, m_s = 0
#   4 = |5>  excited, m_s = +1
#   5 = |6>  excited, m_s = -1
#   6 = |7>  singlet, lower
#   7 = |8>  singlet, upper

# Energies in MHz at zero magnetic field.
D_G = 2.87e3
D_E = 1.40e3
DELTA_EG = 4.7e8
DELTA_IG = 1.69e8
D_I = 2.88e8
ENERGIES = np.array([
    0.0, D_G, D_G,
    DELTA_EG, DELTA_EG + D_E, DELTA_EG + D_E,
    DELTA_IG, DELTA_IG + D_I,
])

# Decay rates in MHz.
GAMMA = 77.0
G42 = G43 = G51 = G61 = 0.25
K_EI4, K_EI5, K_EI6 = 0.0, 15.0, 15.0
K_I = 1.0e3
K_IG = 1.0

# (from, to, rate) per channel; pump rates are GAMMA_P * GAMMA.
PUMP = [(0, 3, None), (1, 4, None), (2, 5, None)]
SC = [(3, 0, GAMMA), (4, 1, GAMMA), (5, 2, GAMMA)]
ISC = [(3, 7, K_EI4), (4, 7, K_EI5), (5, 7, K_EI6), (7, 6, K_I),
       (6, 0, K_IG), (6, 1, K_IG), (6, 2, K_IG)]
NSC = [(3, 1, G42), (3, 2, G43), (4, 0, G51), (5, 0, G61)]


def transitions(gamma_p, laser_on=True):
    out = []
    if laser_on:
        out += [(n, m, gamma_p * GAMMA) for (n, m, _) in PUMP]
    out += SC + ISC + NSC
    return out


def rate_matrix(gamma_p, laser_on=True):
    W = np.zeros((8, 8))
    for n, m, k in transitions(gamma_p, laser_on):
        W[m, n] += k
        W[n, n] -= k
    return W


def ness(gamma_p):
    """Dense null-space solve of W p = 0 with sum(p) = 1."""
    W = rate_matrix(gamma_p)
    A = np.vstack([W, np.ones(8)])
    b = np.zeros(9)
    b[-1] = 1.0
    p, *_ = np.linalg.lstsq(A, b, rcond=None)
    return p


def relax_to_ground(p):
    """Where the laser-off dynamics sends p as t -> infinity.

    Hand-computed branching: |4>,|5>,|6> split between the direct decays
    and the singlet route, the singlet spreads evenly over the ground
    triplet.  Only the ground populations survive.
    """
    out4 = GAMMA + G42 + G43 + K_EI4
    out5 = GAMMA + G51 + K_EI5
    out6 = GAMMA + G61 + K_EI6
    b = np.zeros((3, 8))
    b[:, 0] = [1.0, 0.0, 0.0]
    b[:, 1] = [0.0, 1.0, 0.0]
    b[:, 2] = [0.0, 0.0, 1.0]
    third = np.array([1.0, 1.0, 1.0]) / 3.0
    b[:, 3] = np.array([GAMMA, G42, G43]) / out4 + (K_EI4 / out4) * third
    b[:, 4] = np.array([G51, GAMMA, 0.0]) / out5 + (K_EI5 / out5) * third
    b[:, 5] = np.array([G61, 0.0, GAMMA]) / out6 + (K_EI6 / out6) * third
    b[:, 6] = third
    b[:, 7] = third  # |8> drains through |7>
    out = np.zeros(8)
    out[:3] = b @ p
    return out


def zero_pump_limit():
    """Limit of the laser-on NESS as the pump rate goes to zero.

    All population sits in the ground triplet; the stationary weights are
    those of the embedded ground-to-ground chain with transition
    probabilities given by the laser-off branching out of the paired
    excited level.
    """
    M = np.zeros((3, 3))
    for n, e in ((0, 3), (1, 4), (2, 5)):
        M[:, n] = relax_to_ground(np.eye(8)[e])[:3]
    A = np.vstack([M - np.eye(3), np.ones(3)])
    b = np.zeros(4)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    out = np.zeros(8)
    out[:3] = pi
    return out


def shannon(p):
    q = p[p > 0]
    return float(-(q * np.log(q)).sum())


def fluxes(p, gamma_p, laser_on=True):
    """Pointwise (wdot, qdot_sc, qdot_isc, qdot_nsc, sdot_w, sdot_q)."""
    logp = np.log(np.maximum(p, 1e-300))
    wdot = sdot_w = 0.0
    if laser_on:
        for n, m, _ in PUMP:
            k = gamma_p * GAMMA
            wdot += k * p[n] * (ENERGIES[m] - ENERGIES[n])
            sdot_w += -k * p[n] * (logp[m] - logp[n])
    qdot = {}
    sdot_q = 0.0
    for name, ch in (("sc", SC), ("isc", ISC), ("nsc", NSC)):
        q = 0.0
        for n, m, k in ch:
            q += k * p[n] * (ENERGIES[m] - ENERGIES[n])
            sdot_q += -k * p[n] * (logp[m] - logp[n])
        qdot[name] = q
    return wdot, qdot["sc"], qdot["isc"], qdot["nsc"], sdot_w, sdot_q


def integrate_phase(p0, gamma_p, laser_on, t_span, n_lin=40001, n_log=4000):
    """Fine-grid explicit integration of one constant-generator phase.

    Returns the time grid, populations, and cumulative integrals of the
    six flux components on that grid.  The grid is a union of a uniform
    grid and a geometric one packed toward t=0 where the entropy rates
    have an integrable log singularity when levels start empty.
    """
    t0, t1 = t_span
    span = t1 - t0
    grid = np.union1d(np.linspace(0.0, span, n_lin),
                      np.geomspace(1e-13 * span, span, n_log))
    grid = np.union1d(grid, [0.0])
    W = rate_matrix(gamma_p, laser_on)
    sol = solve_ivp(lambda t, p: W @ p, (0.0, span), p0, t_eval=grid,
                    method="DOP853", rtol=1e-12, atol=1e-14)
    assert sol.success
    P = sol.y.T
    F = np.array([fluxes(p, gamma_p, laser_on) for p in P])
    cum = cumulative_trapezoid(F, grid, axis=0, initial=0.0)
    return grid + t0, P, cum


def run_protocol(gamma_p, t_off=10.0, t_end=30.0):
    p0 = np.zeros(8)
    p0[:3] = 1.0 / 3.0
    t1, P1, C1 = integrate_phase(p0, gamma_p, True, (0.0, t_off))
    t2, P2, C2 = integrate_phase(P1[-1], gamma_p, False, (t_off, t_end))
    return (t1, P1, C1), (t2, P2, C2)


def ness_residual_time(gamma_p, tol=1e-8, t_max=40.0):
    """First time the scaled NESS residual drops below tol (fine grid)."""
    W = rate_matrix(gamma_p)
    max_rate = np.abs(np.diag(W)).max()
    p0 = np.zeros(8)
    p0[:3] = 1.0 / 3.0
    grid = np.linspace(0.0, t_max, 400001)
    sol = solve_ivp(lambda t, p: W @ p, (0.0, t_max), p0, t_eval=grid,
                    method="DOP853", rtol=1e-12, atol=1e-14)
    res = np.abs(W @ sol.y).max(axis=0) / max_rate
    idx = np.nonzero(res < tol)[0]
    return grid[idx[0]] if idx.size else None


def main():
    np.set_printoptions(precision=12, suppress=False, linewidth=120)
    print("# zero-pump limit of the laser-on NESS")
    p_limit = zero_pump_limit()
    print("p_limit =", p_limit[:3])

    print("\n# NESS populations (dense lstsq null-space)")
    for g in (0.1, 0.5, 1.0, 1.13, 2.0, 5.0):
        p = ness(g)
        print(f"gamma_p={g}: p={p}")
        print(f"  P_G={p[:3].sum():.12f} P_E={p[3:6].sum():.12f} "
              f"P_I={p[6:8].sum():.12f} S={shannon(p):.12f}")

    print("\n# crossover P_E = P_G")
    gc = brentq(lambda g: ness(g)[3:6].sum() - ness(g)[:3].sum(), 0.5, 1.5,
                xtol=1e-12)
    print(f"gamma_c = {gc:.12f}")

    print("\n# entropy of NESS: maximum over gamma_p")
    res = minimize_scalar(lambda g: -shannon(ness(g)), bounds=(0.2, 3.0),
                          method="bounded", options={"xatol": 1e-8})
    print(f"argmax gamma_p = {res.x:.12f}  S_max = {-res.fun:.12f}")

    print("\n# entropy rates at NESS (signs)")
    for g in (0.5, 1.0, 2.0):
        p = ness(g)
        w, qsc, qisc, qnsc, sw, sq = fluxes(p, g)
        print(f"gamma_p={g}: sdot_w={sw:+.9e} sdot_q={sq:+.9e} "
              f"sum={sw + sq:+.3e}")

    print("\n# default protocol gamma_p=1, t_off=10, t_end=30")
    (t1, P1, C1), (t2, P2, C2) = run_protocol(1.0)
    p_toff = P1[-1]
    p_end = P2[-1]
    W_tot = C1[-1, 0] + C2[-1, 0]
    Q_sc = C1[-1, 1] + C2[-1, 1]
    Q_isc = C1[-1, 2] + C2[-1, 2]
    Q_nsc = C1[-1, 3] + C2[-1, 3]
    S_W = C1[-1, 4] + C2[-1, 4]
    S_Q = C1[-1, 5] + C2[-1, 5]
    Q_tot = Q_sc + Q_isc + Q_nsc
    p0 = np.zeros(8)
    p0[:3] = 1 / 3
    dU = ENERGIES @ (p_end - p0)
    dS = shannon(p_end) - shannon(p0)
    print(f"p(t_off) = {p_toff}")
    print(f"rho2_ss  = {relax_to_ground(p_toff)}")
    print(f"W        = {W_tot:.12e}")
    print(f"Q_sc     = {Q_sc:.12e}")
    print(f"Q_isc    = {Q_isc:.12e}")
    print(f"Q_nsc    = {Q_nsc:.12e}")
    print(f"Q_total  = {Q_tot:.12e}")
    print(f"dU       = {dU:.12e}   first-law resid = "
          f"{abs(dU - (W_tot + Q_tot)) / max(abs(W_tot), abs(Q_tot)):.3e}")
    print(f"|Q_sc|/|Q_total| = {abs(Q_sc) / abs(Q_tot):.12f}")
    print(f"S_W      = {S_W:.12f}")
    print(f"S_Q      = {S_Q:.12f}")
    print(f"dS       = {dS:.12f}   closure resid = "
          f"{abs(dS - (S_W + S_Q)):.3e}")

    print("\n# NESS flux balance |Wdot+Qdot_total|/Wdot")
    for g in (0.1, 1.0, 5.0):
        p = ness(g)
        w, qsc, qisc, qnsc, *_ = fluxes(p, g)
        print(f"gamma_p={g}: ratio = {abs(w + qsc + qisc + qnsc) / w:.3e}")

    print("\n# polarization and work vs t_off at gamma_p=1")
    toffs = np.linspace(0.1, 10.0, 100)
    W_on = rate_matrix(1.0)
    max_rate = np.abs(np.diag(W_on)).max()
    grid = np.linspace(0.0, 10.0, 200001)
    sol = solve_ivp(lambda t, p: W_on @ p, (0.0, 10.0), p0, t_eval=grid,
                    method="DOP853", rtol=1e-12, atol=1e-14)
    P = sol.y.T
    wdot = np.array([fluxes(p, 1.0)[0] for p in P])
    wcum = cumulative_trapezoid(wdot, grid, initial=0.0)
    pols, works, resids = [], [], []
    for toff in toffs:
        i = np.searchsorted(grid, toff)
        pols.append(relax_to_ground(P[i])[0])
        works.append(wcum[i])
        resids.append(np.abs(W_on @ P[i]).max() / max_rate)
    pols = np.array(pols)
    works = np.array(works)
    resids = np.array(resids)
    print("non-decreasing:", bool((np.diff(pols) >= -1e-12).all()))
    for tol in (1e-7, 1e-8):
        conv = np.nonzero(resids < tol)[0]
        if conv.size:
            i0 = conv[0]
            print(f"tol={tol}: first t_off with resid<tol: {toffs[i0]:.6f} "
                  f"W there = {works[i0]:.12e}")
            print(f"  flatness beyond: max|pol-pol_end| = "
                  f"{np.abs(pols[i0:] - pols[-1]).max():.3e}")
        else:
            print(f"tol={tol}: never met on the (0,10] grid")
    fine = np.abs(W_on @ sol.y).max(axis=0) / max_rate
    for tol in (1e-7, 1e-8):
        idx = np.nonzero(fine < tol)[0]
        print(f"fine-grid crossing of resid={tol}: "
              f"{grid[idx[0]] if idx.size else None}")
    print(f"resid at t=10: {fine[-1]:.6e}")
    print(f"pol(t_off=10) = {pols[-1]:.12f}")
    print(f"W(t_off=10)   = {wcum[-1]:.12e}")

    print("\n# sweep gamma_p in [0,5], 101 points (0 -> limit)")
    gs = np.linspace(0.0, 5.0, 101)
    tab = np.array([zero_pump_limit() if g == 0 else ness(g) for g in gs])
    pols2 = np.array([relax_to_ground(p)[0] for p in tab])
    s2 = np.array([shannon(relax_to_ground(p)) for p in tab])
    s1 = np.array([shannon(p) for p in tab])
    p1 = tab[:, 0]
    print("P1(rho1ss) strictly decreasing:", bool((np.diff(p1) < 0).all()))
    print("pol strictly decreasing:", bool((np.diff(pols2) < 0).all()))
    print("S(rho2ss) strictly increasing:", bool((np.diff(s2) > 0).all()))
    pe_gt_pg = tab[:, 3:6].sum(axis=1) > tab[:, :3].sum(axis=1)
    print("P_E>P_G for gamma>=1.2:", bool(pe_gt_pg[gs >= 1.2].all()))
    dp = np.abs(np.diff(tab, axis=0)).max(axis=1) / np.diff(gs)
    sat = None
    for i in range(len(dp)):
        if (dp[i:] < 1e-3).all():
            sat = gs[i]
            break
    print("saturation gamma (all |dp/dg|<1e-3 beyond):", sat)
    print("max |dp/dg| on last panel:", f"{dp[-1]:.6e}")
    print("pol at gamma=0 (limit):", f"{pols2[0]:.12f}",
          " at 0.05:", f"{pols2[1]:.12f}")
    print("S1 max on grid at gamma =", gs[np.argmax(s1)])
    print("S2 at gamma=0 (limit):", f"{s2[0]:.12f}",
          " at 5:", f"{s2[-1]:.12f}")

    print("\n# saturation detector on the wide grid [0,40], 401 points")
    gw = np.linspace(0.0, 40.0, 401)
    tabw = np.array([zero_pump_limit() if g == 0 else ness(g) for g in gw])
    dpw = np.abs(np.diff(tabw, axis=0)).max(axis=1) / np.diff(gw)
    satw = None
    for i in range(len(dpw)):
        if (dpw[i:] < 1e-3).all():
            satw = gw[i]
            break
    print("saturation gamma on [0,40]:", satw)

    print("\n# time to NESS vs gamma_p (grid residual < 1e-8*max_rate)")
    for g in (0.25, 0.5, 1.0, 2.0, 4.0):
        print(f"gamma_p={g}: t_ness = {ness_residual_time(g)}")

    print("\n# laser-off branching sanity (closed forms)")
    print("from |7>:", relax_to_ground(np.eye(8)[6])[:3], "expect 1/3 each")
    print("from |4>:", relax_to_ground(np.eye(8)[3])[:3],
          "expect P1 =", GAMMA / (GAMMA + G42 + G43))
    out5 = GAMMA + G51 + K_EI5
    print("from |5>:", relax_to_ground(np.eye(8)[4])[:3],
          "expect P2 =", GAMMA / out5 + (K_EI5 / out5) / 3)


if __name__ == "__main__":
    main()
