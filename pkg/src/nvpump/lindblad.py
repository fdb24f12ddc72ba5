"""Master-equation propagation and steady-state extraction.

Two routes are implemented.  The default is the classical one: because
the Hamiltonian is diagonal in the jump basis, a diagonal state stays
diagonal and the populations follow an 8x8 rate equation, which we
propagate exactly through the eigendecomposition of the rate matrix (no
step-size limit, so the 1 GHz shelf decay costs nothing).  The full
Lindblad integrator exists as a correctness oracle for that reduction
and is not the production engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .model import NVModel

__all__ = [
    "DegenerateKernelError",
    "InvalidGeneratorError",
    "NumericalFailureError",
    "StiffnessError",
    "RateMatrix",
    "Trajectory",
    "apply_dissipator",
    "apply_adjoint_dissipator",
    "rhs",
    "active_jumps",
    "build_rate_matrix",
    "evolve_populations",
    "evolve_full",
    "steady_state",
    "asymptotic_state",
    "Propagator",
]

N = 8

# Eigenvector condition number beyond which eigendecomposition
# propagation is abandoned for scaling-and-squaring exponentials.
_EIG_COND_LIMIT = 1e8


class DegenerateKernelError(ValueError):
    """The generator kernel is more than one-dimensional."""


class InvalidGeneratorError(ValueError):
    """The matrix is not a valid generator (growing mode present)."""


class NumericalFailureError(RuntimeError):
    """A numerical routine produced an unusable result."""


class StiffnessError(NumericalFailureError):
    """The adaptive integrator collapsed its step size."""


def _jump_arrays(jumps):
    """0-based (from, to, rate) arrays for a jump collection."""
    fr = np.array([j.from_level - 1 for j in jumps], dtype=int)
    to = np.array([j.to_level - 1 for j in jumps], dtype=int)
    k = np.array([j.rate for j in jumps], dtype=float)
    return fr, to, k


def active_jumps(model: NVModel, laser_on: bool = True) -> tuple:
    """All decay jumps, plus the pump channel when the laser is on."""
    if laser_on:
        return model.jumps
    return tuple(j for j in model.jumps if j.channel != "pump")


def apply_dissipator(rho: np.ndarray, jumps) -> np.ndarray:
    """Sum of L rho L+ - (1/2){L+L, rho} over the given jumps.

    Each L = sqrt(k)|m><n| feeds k*rho_nn into (m,m) and damps row and
    column n at rate k/2.  Traceless by construction.
    """
    rho = np.asarray(rho)
    fr, to, k = _jump_arrays(jumps)
    out_rate = np.zeros(N)
    np.add.at(out_rate, fr, k)
    out = -0.5 * (out_rate[:, None] + out_rate[None, :]) * rho
    gain = np.zeros(N, dtype=rho.dtype)
    np.add.at(gain, to, k * rho[fr, fr])
    out[np.arange(N), np.arange(N)] += gain
    return out


def apply_adjoint_dissipator(A: np.ndarray, jumps) -> np.ndarray:
    """Heisenberg-picture dual: sum of L+ A L - (1/2){L+L, A}.

    Satisfies tr{A D(rho)} = tr{rho D*(A)} for every state.
    """
    A = np.asarray(A)
    fr, to, k = _jump_arrays(jumps)
    out_rate = np.zeros(N)
    np.add.at(out_rate, fr, k)
    out = -0.5 * (out_rate[:, None] + out_rate[None, :]) * A
    gain = np.zeros(N, dtype=A.dtype)
    np.add.at(gain, fr, k * A[to, to])
    out[np.arange(N), np.arange(N)] += gain
    return out


def rhs(rho: np.ndarray, model: NVModel, laser_on: bool = True) -> np.ndarray:
    """Full right-hand side -i[H, rho] + D(rho).

    H is diagonal, so the commutator is the elementwise phase matrix
    -i(E_m - E_n) rho_mn; diagonal states have exactly zero coherent
    part.
    """
    e = model.energies
    comm = -1j * (e[:, None] - e[None, :]) * np.asarray(rho, dtype=complex)
    return comm + apply_dissipator(np.asarray(rho, dtype=complex),
                                   active_jumps(model, laser_on))


@dataclass(frozen=True, eq=False)
class RateMatrix:
    """Classical generator W: dp/dt = W p for diagonal states.

    Off-diagonal W[m, n] is the total rate of jumps n -> m; columns sum
    to zero.
    """

    matrix: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", W)
        if W.shape != (N, N):
            raise InvalidGeneratorError(f"expected {N}x{N}, got {W.shape}")
        off = W - np.diag(np.diag(W))
        if off.min() < 0.0:
            raise InvalidGeneratorError("negative off-diagonal rate")
        scale = max(np.abs(W).max(), 1.0)
        col = np.abs(W.sum(axis=0)).max()
        if col > 1e-12 * scale:
            raise InvalidGeneratorError(
                f"columns must sum to zero, worst {col:.3e}")

    @property
    def max_rate(self) -> float:
        """Largest total outflow rate, used to scale residual tests."""
        return float(np.abs(np.diag(self.matrix)).max())


def build_rate_matrix(model: NVModel, laser_on: bool = True) -> RateMatrix:
    fr, to, k = _jump_arrays(active_jumps(model, laser_on))
    W = np.zeros((N, N))
    np.add.at(W, (to, fr), k)
    W[np.arange(N), np.arange(N)] -= W.sum(axis=0)
    return RateMatrix(W)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled evolution.

    ``laser_on[i]`` describes the generator acting on the interval
    [t_i, t_{i+1}); the last flag repeats the final interval's value.
    ``densities`` is filled only by the full Lindblad route.
    """

    times: np.ndarray          # (n,), microseconds, strictly increasing
    populations: np.ndarray    # (n, 8), diagonal of the state
    laser_on: np.ndarray       # (n,), bool
    densities: np.ndarray | None = None   # (n, 8, 8) complex

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.populations, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "populations", p)
        object.__setattr__(self, "laser_on",
                           np.asarray(self.laser_on, dtype=bool))
        if t.ndim != 1 or (np.diff(t) <= 0).any():
            raise ValueError("times must be strictly increasing")
        if p.shape != (t.size, N):
            raise ValueError(f"populations shape {p.shape} does not match")
        if self.laser_on.shape != t.shape:
            raise ValueError("one laser flag per sample required")
        if p.min() < -1e-12 or np.abs(p.sum(axis=1) - 1.0).max() > 1e-10:
            raise NumericalFailureError(
                "population invariants violated: "
                f"min {p.min():.3e}, worst trace drift "
                f"{np.abs(p.sum(axis=1) - 1.0).max():.3e}")

    @property
    def n_samples(self) -> int:
        return int(self.times.size)

    def phase_slices(self):
        """Maximal runs of constant laser flag, as (slice, flag) pairs.

        Consecutive slices share their boundary sample, so each phase is
        a closed interval and integrals over phases add up exactly.
        """
        flags = self.laser_on
        edges = [0]
        edges += [i for i in range(1, flags.size)
                  if flags[i] != flags[i - 1]]
        edges.append(flags.size - 1)
        out = []
        for a, b in zip(edges[:-1], edges[1:]):
            if b > a:
                out.append((slice(a, b + 1), bool(flags[a])))
        return out


class Propagator:
    """Exact action of exp(W t) on a fixed initial vector.

    Eigendecomposition is prepared once; evaluation at arbitrary times
    is then a dense 8xN product.  When the eigenvector matrix is too
    ill-conditioned (defective generators), falls back to
    scaling-and-squaring matrix exponentials per time point.
    """

    def __init__(self, W: RateMatrix, p0: np.ndarray):
        self.W = W
        self.p0 = np.asarray(p0, dtype=float)
        lam, V = np.linalg.eig(W.matrix)
        cond = np.linalg.cond(V) if np.isfinite(V).all() else np.inf
        self.exact_eig = bool(np.isfinite(cond) and cond < _EIG_COND_LIMIT)
        if self.exact_eig:
            self._lam = lam
            self._V = V
            self._coeff = np.linalg.solve(V, self.p0.astype(complex))

    def __call__(self, times) -> np.ndarray:
        """Populations at the given times (shape (n, 8))."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        if self.exact_eig:
            phases = np.exp(np.outer(self._lam, t))
            P = (self._V @ (phases * self._coeff[:, None])).T.real
        else:
            P = np.empty((t.size, N))
            for i, ti in enumerate(t):
                P[i] = scipy.linalg.expm(self.W.matrix * ti) @ self.p0
        if not np.isfinite(P).all():
            raise NumericalFailureError(
                "non-finite populations from propagator "
                f"(eig path: {self.exact_eig}, t range "
                f"[{t.min():.3g}, {t.max():.3g}])")
        drift = np.abs(P.sum(axis=1) - 1.0).max()
        if drift > 1e-10 and self.exact_eig:
            # ill-conditioned after all; redo with the robust path
            self.exact_eig = False
            return self(times)
        if drift > 1e-10:
            raise NumericalFailureError(
                f"probability drift {drift:.3e} exceeds 1e-10")
        return P


def evolve_populations(W: RateMatrix, p0: np.ndarray, times,
                       laser_on: bool = True) -> Trajectory:
    """Propagate dp/dt = W p exactly on the given time grid.

    Times are offsets from the state p0 (the grid may start anywhere;
    evaluation uses t - times[0]).
    """
    t = np.asarray(times, dtype=float)
    prop = Propagator(W, p0)
    P = prop(t - t[0])
    P[0] = p0          # the t=0 row is exact, not reconstructed
    P = np.where((P < 0) & (P > -1e-12), 0.0, P)
    return Trajectory(times=t, populations=P,
                      laser_on=np.full(t.size, laser_on))


def evolve_full(rho0: np.ndarray, model: NVModel, laser_on: bool, times,
                tol: float = 1e-10) -> Trajectory:
    """Adaptive integration of the full master equation.

    Validation route only: an explicit high-order method with relative
    tolerance ``tol``.  The 1 GHz shelf decay caps the stable step near
    5e-3 us, which is acceptable for the horizons used in checks; for
    production work use the rate-matrix route.
    """
    t = np.asarray(times, dtype=float)
    rho0 = np.asarray(rho0, dtype=complex)
    e = model.energies
    phase = -1j * (e[:, None] - e[None, :])
    fr, to, k = _jump_arrays(active_jumps(model, laser_on))
    out_rate = np.zeros(N)
    np.add.at(out_rate, fr, k)
    damp = -0.5 * (out_rate[:, None] + out_rate[None, :])
    idx = np.arange(N)

    def f(_t, y):
        rho = y.reshape(N, N)
        d = (phase + damp) * rho
        gain = np.zeros(N, dtype=complex)
        np.add.at(gain, to, k * rho[fr, fr])
        d[idx, idx] += gain
        return d.ravel()

    sol = solve_ivp(f, (t[0], t[-1]), rho0.ravel(), t_eval=t,
                    method="DOP853", rtol=tol, atol=tol * 1e-2)
    if not sol.success:
        raise StiffnessError(
            f"integrator failed ({sol.message}); the rate-matrix route "
            "evolve_populations handles stiff rates exactly")
    rhos = sol.y.T.reshape(-1, N, N)
    pops = rhos[:, idx, idx].real
    return Trajectory(times=t, populations=pops,
                      laser_on=np.full(t.size, laser_on),
                      densities=rhos)


def steady_state(W: RateMatrix, degeneracy_tol: float = 1e-10) -> np.ndarray:
    """Unique stationary probability vector of W, via SVD null space.

    Raises DegenerateKernelError when the kernel is multi-dimensional
    (the laser-off generator: the whole ground triplet is stationary);
    use asymptotic_state with an initial condition in that case.
    """
    M = W.matrix
    _, s, Vh = np.linalg.svd(M)
    null_dim = int((s < degeneracy_tol * s[0]).sum())
    if null_dim > 1:
        raise DegenerateKernelError(
            f"kernel dimension {null_dim}: the stationary state is not "
            "unique (laser off leaves the ground triplet invariant); "
            "use asymptotic_state(W, p0)")
    if null_dim == 0:
        raise NumericalFailureError(
            f"no kernel found (smallest sv ratio {s[-1] / s[0]:.3e})")
    p = Vh[-1].real
    p = p / p.sum()
    resid = np.abs(M @ p).max()
    if resid > 1e-10 * W.max_rate:
        raise NumericalFailureError(
            f"stationary residual {resid:.3e} exceeds "
            f"{1e-10 * W.max_rate:.3e}")
    return p


def asymptotic_state(W: RateMatrix, p0: np.ndarray) -> np.ndarray:
    """Limit of exp(W t) p0 as t grows, by spectral projection.

    Projects p0 onto the zero-eigenvalue group; decaying modes are
    discarded.  A growing mode means the input is not a generator.
    """
    p0 = np.asarray(p0, dtype=float)
    M = W.matrix
    lam, V = np.linalg.eig(M)
    scale = max(W.max_rate, 1.0)
    if (lam.real > 1e-10 * scale).any():
        worst = lam.real.max()
        raise InvalidGeneratorError(
            f"eigenvalue with positive real part {worst:.3e}")
    zero = np.abs(lam) <= 1e-10 * scale
    decaying = ~zero
    try:
        c = np.linalg.solve(V, p0.astype(complex))
        p = (V[:, zero] @ c[zero]).real
        ok = (np.abs(M @ p).max() <= 1e-8 * scale
              and abs(p.sum() - 1.0) <= 1e-8 and p.min() >= -1e-10)
    except np.linalg.LinAlgError:
        ok = False
    if not ok:
        # defective eigenvector basis: step far past the slowest decay
        slowest = np.abs(lam.real[decaying]).min() if decaying.any() else 1.0
        p = scipy.linalg.expm(M * (1e3 / slowest)) @ p0
    p = np.where((p < 0) & (p > -1e-10), 0.0, p)
    p = p / p.sum()
    resid = np.abs(M @ p).max()
    if resid > 1e-8 * scale or not np.isfinite(p).all():
        raise NumericalFailureError(
            f"asymptotic projection failed (residual {resid:.3e})")
    return p
