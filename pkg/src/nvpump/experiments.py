"""Two-step polarization protocol and the parameter sweeps.

The protocol: start from the uniform ground-triplet mixture, pump with
the laser on over [0, t_off] toward the driven steady state, then switch
the laser off and let the decay channels funnel the population back to
the ground triplet, where it stays.  Polarization is the population of
|1> in the final relaxed state.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.optimize import minimize_scalar

from .model import ModelParams, build_model, InvalidParameterError
from .lindblad import (build_rate_matrix, evolve_populations, steady_state,
                       asymptotic_state, Trajectory, NumericalFailureError)
from .thermo import integrate_ledger, entropy

__all__ = [
    "ConvergenceWarning",
    "ProtocolConfig",
    "ProtocolResult",
    "run_protocol",
    "zero_pump_limit",
    "NessSweep",
    "PolarizationSweep",
    "ToffSweep",
    "EntropySweep",
    "EntropyDecomposition",
    "sweep_ness1",
    "sweep_polarization_vs_gamma",
    "sweep_polarization_vs_toff",
    "sweep_entropy",
    "entropy_decomposition_run",
]

# Default sweep grids: pump power on [0, 5] with 101 points, laser-on
# time on (0, 10] us with 100 points.
DEFAULT_GAMMA_GRID = (0.0, 5.0, 101)
DEFAULT_TOFF_GRID = (0.1, 10.0, 100)

# All populations must move less than this per unit pump power for the
# sweep saturation detector to fire.
_SATURATION_SLOPE = 1e-3


class ConvergenceWarning(UserWarning):
    """A relaxation horizon ended before its residual target."""


@dataclass(frozen=True)
class ProtocolConfig:
    """Knobs of one protocol run.

    t_end defaults to t_off + 20 us: the slowest laser-off rate is the
    1 MHz shelf drain, three of which act in parallel, so 20 us is far
    past the last transient.  ness_tol is the scaled residual
    max|W p| / max-rate below which the state counts as stationary.
    """

    Gamma_p: float = 1.0
    t_off: float = 10.0
    t_end: float | None = None
    sample_count: int = 2001
    B_z: float = 0.0
    ness_tol: float = 1e-8
    initial_state: object = "uniform_G"

    def __post_init__(self):
        if self.t_end is None:
            object.__setattr__(self, "t_end", self.t_off + 20.0)
        if not 0.0 < self.t_off < self.t_end:
            raise InvalidParameterError(
                f"need 0 < t_off < t_end, got {self.t_off}, {self.t_end}")
        if self.sample_count < 2:
            raise InvalidParameterError("sample_count must be at least 2")
        if not self.ness_tol > 0.0:
            raise InvalidParameterError("ness_tol must be positive")
        if not self.Gamma_p >= 0.0:
            raise InvalidParameterError("Gamma_p must be >= 0")
        if isinstance(self.initial_state, str):
            if self.initial_state != "uniform_G":
                raise InvalidParameterError(
                    f"unknown initial state {self.initial_state!r}")
        else:
            p = np.asarray(self.initial_state, dtype=float)
            if p.shape != (8,) or p.min() < -1e-12 or \
                    abs(p.sum() - 1.0) > 1e-10:
                raise InvalidParameterError(
                    "explicit initial state must be 8 probabilities")
            object.__setattr__(self, "initial_state", p)

    def initial_populations(self) -> np.ndarray:
        if isinstance(self.initial_state, str):
            p = np.zeros(8)
            p[:3] = 1.0 / 3.0
            return p
        return np.array(self.initial_state, dtype=float)


@dataclass(frozen=True, eq=False)
class ProtocolResult:
    trajectory: Trajectory
    samples: list                  # ThermoSample rows
    totals: object                 # LedgerTotals, with per-phase parts
    rho1_ss: np.ndarray            # state at t_off
    rho2_ss: np.ndarray            # relaxed state, ground support only
    polarization: float            # rho2_ss population of |1>
    ness1_reached_at: float | None # first sample meeting ness_tol, us
    config: ProtocolConfig

    @property
    def phase_totals(self) -> tuple:
        return self.totals.phases


def _phase_grids(cfg: ProtocolConfig):
    n1 = int(round(cfg.sample_count * cfg.t_off / cfg.t_end))
    n1 = min(max(n1, 2), cfg.sample_count - 1)
    n2 = cfg.sample_count - n1 + 1
    g1 = np.linspace(0.0, cfg.t_off, n1)
    g2 = np.linspace(cfg.t_off, cfg.t_end, n2)
    return g1, g2


def run_protocol(cfg: ProtocolConfig,
                 model_params: ModelParams = ModelParams()) -> ProtocolResult:
    """Run both phases, detect the steady states, integrate the ledger."""
    params = model_params.with_updates(Gamma_p=cfg.Gamma_p, B_z=cfg.B_z)
    model = build_model(params)
    W_on = build_rate_matrix(model, laser_on=True)
    W_off = build_rate_matrix(model, laser_on=False)
    p0 = cfg.initial_populations()
    g1, g2 = _phase_grids(cfg)

    traj1 = evolve_populations(W_on, p0, g1, laser_on=True)
    P1 = traj1.populations
    traj2 = evolve_populations(W_off, P1[-1], g2, laser_on=False)

    times = np.concatenate([g1, g2[1:]])
    pops = np.concatenate([P1, traj2.populations[1:]])
    flags = np.concatenate([np.ones(g1.size - 1, dtype=bool),
                            np.zeros(g2.size, dtype=bool)])
    traj = Trajectory(times=times, populations=pops, laser_on=flags)

    resid1 = np.abs(W_on.matrix @ P1.T).max(axis=0) / W_on.max_rate
    hit = np.nonzero(resid1 <= cfg.ness_tol)[0]
    ness1_at = float(g1[hit[0]]) if hit.size else None

    resid2 = np.abs(W_off.matrix @ traj2.populations[-1]).max() \
        / W_off.max_rate
    if resid2 > cfg.ness_tol:
        warnings.warn(
            f"laser-off phase ended at scaled residual {resid2:.3e} "
            f"(target {cfg.ness_tol:.1e}); consider a larger t_end",
            ConvergenceWarning)

    rho2 = asymptotic_state(W_off, P1[-1])
    if np.abs(rho2[3:]).max() > 1e-9:
        raise NumericalFailureError(
            "relaxed state leaks outside the ground triplet: "
            f"max residual population {np.abs(rho2[3:]).max():.3e}")

    samples, totals = integrate_ledger(traj, model)
    return ProtocolResult(
        trajectory=traj, samples=samples, totals=totals,
        rho1_ss=P1[-1], rho2_ss=rho2,
        polarization=float(rho2[0]),
        ness1_reached_at=ness1_at, config=cfg)


def zero_pump_limit(model_params: ModelParams = ModelParams()) -> np.ndarray:
    """Limit of the driven steady state as Gamma_p goes to 0+.

    Vanishing pumping means the chain 'ground level -> paired excited
    level -> branching back to the ground triplet' runs infinitely
    rarely but still shapes the stationary weights: they solve T pi =
    pi with T the laser-off branching out of each excited level.  The
    steady state at Gamma_p = 0 itself is degenerate; this limit is
    what the sweeps report at 0 so their curves stay continuous.
    """
    model = build_model(model_params.with_updates(Gamma_p=1.0))
    W_off = build_rate_matrix(model, laser_on=False)
    T = np.zeros((3, 3))
    for g in range(3):
        e = np.zeros(8)
        e[3 + g] = 1.0
        T[:, g] = asymptotic_state(W_off, e)[:3]
    _, s, Vh = np.linalg.svd(T - np.eye(3))
    pi = Vh[-1]
    pi = pi / pi.sum()
    if s[-1] > 1e-10 * s[0] or pi.min() < -1e-12:
        raise NumericalFailureError("embedded chain has no clean kernel")
    out = np.zeros(8)
    out[:3] = np.clip(pi, 0.0, None)
    out /= out.sum()
    return out


def _ness_point(gamma: float, model_params: ModelParams) -> np.ndarray:
    if gamma == 0.0:
        return zero_pump_limit(model_params)
    model = build_model(model_params.with_updates(Gamma_p=gamma))
    return steady_state(build_rate_matrix(model, laser_on=True))


def _relaxed_point(gamma: float, model_params: ModelParams) -> np.ndarray:
    # the laser-off generator does not depend on Gamma_p
    p1 = _ness_point(gamma, model_params)
    W_off = build_rate_matrix(build_model(model_params), laser_on=False)
    return asymptotic_state(W_off, p1)


def _map(func, grid, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, grid, chunksize=8))
    return [func(g) for g in grid]


@dataclass(frozen=True, eq=False)
class NessSweep:
    gamma: np.ndarray
    populations: np.ndarray        # (n, 8), driven steady states
    saturation_gamma: float | None # first grid point past which all
                                   # populations move < 1e-3 per unit


@dataclass(frozen=True, eq=False)
class PolarizationSweep:
    gamma: np.ndarray
    polarization: np.ndarray


@dataclass(frozen=True, eq=False)
class ToffSweep:
    t_off: np.ndarray
    polarization: np.ndarray
    work: np.ndarray               # integrated pump work over [0, t_off]


@dataclass(frozen=True, eq=False)
class EntropySweep:
    gamma: np.ndarray
    S_ness1: np.ndarray
    S_ness2: np.ndarray
    polarization: np.ndarray
    gamma_max: float               # refined maximizer of S_ness1
    S_max: float


@dataclass(frozen=True, eq=False)
class EntropyDecomposition:
    gamma_p: float
    times: np.ndarray
    dS: np.ndarray
    S_W_cum: np.ndarray
    S_Q_cum: np.ndarray


def _saturation(gamma: np.ndarray, pops: np.ndarray) -> float | None:
    slope = np.abs(np.diff(pops, axis=0)).max(axis=1) / np.diff(gamma)
    for i in range(slope.size):
        if (slope[i:] < _SATURATION_SLOPE).all():
            return float(gamma[i])
    return None


def sweep_ness1(gamma_grid, model_params: ModelParams = ModelParams(),
                workers: int = 1) -> NessSweep:
    """Driven steady state per pump power (null-space solve per point)."""
    gamma = np.asarray(gamma_grid, dtype=float)
    pops = np.array(_map(partial(_ness_point, model_params=model_params),
                         gamma, workers))
    return NessSweep(gamma=gamma, populations=pops,
                     saturation_gamma=_saturation(gamma, pops))


def sweep_polarization_vs_gamma(
        gamma_grid, model_params: ModelParams = ModelParams(),
        workers: int = 1) -> PolarizationSweep:
    gamma = np.asarray(gamma_grid, dtype=float)
    relaxed = np.array(_map(
        partial(_relaxed_point, model_params=model_params), gamma, workers))
    return PolarizationSweep(gamma=gamma, polarization=relaxed[:, 0])


def _toff_point(toff: float, Gamma_p: float, model_params: ModelParams,
                sample_count: int, ness_tol: float) -> tuple:
    cfg = ProtocolConfig(Gamma_p=Gamma_p, t_off=toff,
                         sample_count=sample_count, ness_tol=ness_tol)
    res = run_protocol(cfg, model_params)
    return res.polarization, res.phase_totals[0].W


def sweep_polarization_vs_toff(
        toff_grid, Gamma_p: float = 1.0,
        model_params: ModelParams = ModelParams(),
        workers: int = 1, sample_count: int = 1201,
        ness_tol: float = 1e-8) -> ToffSweep:
    """Polarization against the work spent pumping, one protocol per
    laser-on time."""
    toffs = np.asarray(toff_grid, dtype=float)
    rows = _map(partial(_toff_point, Gamma_p=Gamma_p,
                        model_params=model_params,
                        sample_count=sample_count, ness_tol=ness_tol),
                toffs, workers)
    pol = np.array([r[0] for r in rows])
    work = np.array([r[1] for r in rows])
    return ToffSweep(t_off=toffs, polarization=pol, work=work)


def _entropy_point(gamma: float, model_params: ModelParams) -> tuple:
    p1 = _ness_point(gamma, model_params)
    W_off = build_rate_matrix(build_model(model_params), laser_on=False)
    p2 = asymptotic_state(W_off, p1)
    return entropy(p1), entropy(p2), float(p2[0])


def sweep_entropy(gamma_grid, model_params: ModelParams = ModelParams(),
                  workers: int = 1) -> EntropySweep:
    """Entropy of both steady states per pump power.

    The interior maximum of S(driven state) is refined off-grid by
    golden-section search between the argmax's grid neighbors, to
    about +-0.01.
    """
    gamma = np.asarray(gamma_grid, dtype=float)
    rows = _map(partial(_entropy_point, model_params=model_params),
                gamma, workers)
    s1 = np.array([r[0] for r in rows])
    s2 = np.array([r[1] for r in rows])
    pol = np.array([r[2] for r in rows])
    i = int(np.argmax(s1))
    if 0 < i < gamma.size - 1:
        f = lambda g: -entropy(_ness_point(float(g), model_params))
        res = minimize_scalar(
            f, bracket=(gamma[i - 1], gamma[i], gamma[i + 1]),
            method="golden", options={"xtol": 1e-4})
        gamma_max, s_max = float(res.x), float(-res.fun)
    else:
        gamma_max, s_max = float(gamma[i]), float(s1[i])
    return EntropySweep(gamma=gamma, S_ness1=s1, S_ness2=s2,
                        polarization=pol, gamma_max=gamma_max, S_max=s_max)


def entropy_decomposition_run(
        cfgs, model_params: ModelParams = ModelParams()) -> list:
    """Time series of (dS, S_W, S_Q) for each protocol config."""
    out = []
    for cfg in cfgs:
        res = run_protocol(cfg, model_params)
        s0 = res.samples[0].S
        out.append(EntropyDecomposition(
            gamma_p=cfg.Gamma_p,
            times=np.array([s.t for s in res.samples]),
            dS=np.array([s.S - s0 for s in res.samples]),
            S_W_cum=np.array([s.SW_cum for s in res.samples]),
            S_Q_cum=np.array([s.SQ_cum for s in res.samples])))
    return out
