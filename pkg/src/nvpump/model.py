"""Eight-level model of the optically pumped NV-center electron spin.

Level map (1-based, fixed):

    |1>  ground triplet,  m_s = 0
    |2>  ground triplet,  m_s = +1
    |3>  ground triplet,  m_s = -1
    |4>  excited triplet, m_s = 0
    |5>  excited triplet, m_s = +1
    |6>  excited triplet, m_s = -1
    |7>  singlet shelf, lower
    |8>  singlet shelf, upper

The Hamiltonian is diagonal in this basis, so the model is fully
described by eight energies plus seventeen jump operators grouped into
four channels: laser pumping, spin-conserving radiative decay, the
intersystem crossing through the singlet shelf, and the weak
non-spin-conserving decays.  Units: frequencies and rates in MHz, time
in microseconds, hbar = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "GROUND",
    "EXCITED",
    "SINGLET",
    "CHANNELS",
    "InvalidParameterError",
    "ModelParams",
    "JumpOperator",
    "NVModel",
    "build_model",
    "energy_gap",
]

# Subspace partition, 1-based level indices.
GROUND = (1, 2, 3)
EXCITED = (4, 5, 6)
SINGLET = (7, 8)

CHANNELS = ("pump", "spin_conserving", "isc", "non_spin_conserving")

# Default non-spin-conserving rates, MHz; keys are (from, to) levels.
_DEFAULT_NSC = {(4, 2): 0.25, (4, 3): 0.25, (5, 1): 0.25, (6, 1): 0.25}


class InvalidParameterError(ValueError):
    """A physical parameter violates its constraint (named in message)."""


def _default_nsc() -> dict:
    return dict(_DEFAULT_NSC)


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the model.

    Defaults are the standard NV values: zero-field splittings D_G and
    D_E, optical gap Delta_EG, singlet-shelf energies Delta_IG and D_I,
    electronic gyromagnetic ratio, radiative rate gamma, the four weak
    non-spin-conserving rates, and the shelf rates kappa.  Gamma_p is
    the dimensionless laser-power knob: pump rates are Gamma_p * gamma.
    """

    D_G: float = 2.87e3          # MHz, ground zero-field splitting
    D_E: float = 1.40e3          # MHz, excited zero-field splitting
    Delta_EG: float = 4.7e8      # MHz, ground-excited optical gap
    Delta_IG: float = 1.69e8     # MHz, ground-singlet gap
    D_I: float = 2.88e8          # MHz, |7>-|8> gap
    gyro: float = 2.80e4         # MHz/T
    B_z: float = 0.0             # T, axial magnetic field
    gamma: float = 77.0          # MHz, radiative decay / pump base rate
    Gamma_p: float = 1.0         # dimensionless laser power
    gamma_nsc: dict = field(default_factory=_default_nsc)
    kappa_EI: tuple = (0.0, 15.0, 15.0)   # MHz, |4>,|5>,|6> -> |8>
    kappa_I: float = 1.0e3                # MHz, |8> -> |7>
    kappa_IG: tuple = (1.0, 1.0, 1.0)     # MHz, |7> -> |1>,|2>,|3>
    excited_zeeman: str = "physical_sz"   # or "literal_sz2"

    def __post_init__(self):
        for name in ("D_G", "D_E", "Delta_EG", "Delta_IG", "D_I",
                     "gamma", "Gamma_p", "kappa_I"):
            if not getattr(self, name) >= 0.0:
                raise InvalidParameterError(
                    f"{name} must be >= 0, got {getattr(self, name)}")
        if set(self.gamma_nsc) != set(_DEFAULT_NSC):
            raise InvalidParameterError(
                "gamma_nsc must map exactly the four transitions "
                f"{sorted(_DEFAULT_NSC)}, got {sorted(self.gamma_nsc)}")
        for key, rate in self.gamma_nsc.items():
            if not rate >= 0.0:
                raise InvalidParameterError(
                    f"gamma_nsc[{key}] must be >= 0, got {rate}")
        for name, n in (("kappa_EI", 3), ("kappa_IG", 3)):
            vals = getattr(self, name)
            if len(vals) != n:
                raise InvalidParameterError(
                    f"{name} must have {n} entries, got {len(vals)}")
            for v in vals:
                if not v >= 0.0:
                    raise InvalidParameterError(
                        f"{name} entries must be >= 0, got {v}")
        if self.excited_zeeman not in ("physical_sz", "literal_sz2"):
            raise InvalidParameterError(
                "excited_zeeman must be 'physical_sz' or 'literal_sz2', "
                f"got {self.excited_zeeman!r}")

    def with_updates(self, **kw) -> "ModelParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class JumpOperator:
    """One incoherent transition L = sqrt(rate) |to><from|."""

    from_level: int    # 1..8
    to_level: int      # 1..8
    rate: float        # MHz, the squared amplitude
    channel: str       # one of CHANNELS

    def __post_init__(self):
        if not 1 <= self.from_level <= 8 or not 1 <= self.to_level <= 8:
            raise InvalidParameterError(
                f"levels must be in 1..8, got "
                f"{self.from_level}->{self.to_level}")
        if self.from_level == self.to_level:
            raise InvalidParameterError("jump must change the level")
        if not self.rate >= 0.0:
            raise InvalidParameterError(
                f"rate must be >= 0, got {self.rate}")
        if self.channel not in CHANNELS:
            raise InvalidParameterError(
                f"unknown channel {self.channel!r}")


@dataclass(frozen=True, eq=False)
class NVModel:
    """Diagonal Hamiltonian plus the seventeen jump operators."""

    energies: np.ndarray          # shape (8,), MHz, E_1 = 0 reference
    jumps: tuple                  # 17 JumpOperator instances
    params: ModelParams

    def channel(self, name: str) -> tuple:
        if name not in CHANNELS:
            raise InvalidParameterError(f"unknown channel {name!r}")
        return tuple(j for j in self.jumps if j.channel == name)


def _energies(p: ModelParams) -> np.ndarray:
    zee = p.gyro * p.B_z
    e = np.empty(8)
    e[0] = 0.0
    e[1] = p.D_G + zee
    e[2] = p.D_G - zee
    e[3] = p.Delta_EG
    if p.excited_zeeman == "physical_sz":
        e[4] = p.Delta_EG + p.D_E + zee
        e[5] = p.Delta_EG + p.D_E - zee
    else:
        # Zeeman term entering through S_z^2: both m_s = +-1 shift up.
        e[4] = p.Delta_EG + p.D_E + zee
        e[5] = p.Delta_EG + p.D_E + zee
    e[6] = p.Delta_IG
    e[7] = p.Delta_IG + p.D_I
    return e


def build_model(params: ModelParams) -> NVModel:
    """Assemble energies and the seventeen jump operators.

    Pump rates are Gamma_p * gamma on the three spin-conserving
    ground-to-excited lines; rate-zero operators (e.g. the |4> -> |8>
    crossing with the default kappa_EI[0] = 0) are kept in the list so
    the channel structure is always the same.
    """
    jumps = []
    pg = params.Gamma_p * params.gamma
    for g, e in zip(GROUND, EXCITED):
        jumps.append(JumpOperator(g, e, pg, "pump"))
    for g, e in zip(GROUND, EXCITED):
        jumps.append(JumpOperator(e, g, params.gamma, "spin_conserving"))
    for e, k in zip(EXCITED, params.kappa_EI):
        jumps.append(JumpOperator(e, 8, k, "isc"))
    jumps.append(JumpOperator(8, 7, params.kappa_I, "isc"))
    for g, k in zip(GROUND, params.kappa_IG):
        jumps.append(JumpOperator(7, g, k, "isc"))
    for (m, n), k in sorted(params.gamma_nsc.items()):
        jumps.append(JumpOperator(m, n, k, "non_spin_conserving"))
    return NVModel(energies=_energies(params), jumps=tuple(jumps),
                   params=params)


def energy_gap(model: NVModel, i: int, j: int) -> float:
    """E_i - E_j in MHz; antisymmetric in (i, j)."""
    if not 1 <= i <= 8 or not 1 <= j <= 8:
        raise InvalidParameterError(f"levels must be in 1..8, got {i},{j}")
    return float(model.energies[i - 1] - model.energies[j - 1])
