"""Simulator and thermodynamic ledger for NV-center optical pumping.

An eight-level incoherent model: diagonal Hamiltonian, seventeen jump
operators in four channels, exact rate-matrix propagation with a full
Lindblad integrator kept as a cross-check, and a work/heat/entropy
ledger integrated along trajectories.
"""

from .model import (GROUND, EXCITED, SINGLET, CHANNELS,
                    InvalidParameterError, ModelParams, JumpOperator,
                    NVModel, build_model, energy_gap)
from .lindblad import (DegenerateKernelError, InvalidGeneratorError,
                       NumericalFailureError, StiffnessError, RateMatrix,
                       Trajectory, Propagator, apply_dissipator,
                       apply_adjoint_dissipator, rhs, active_jumps,
                       build_rate_matrix, evolve_populations, evolve_full,
                       steady_state, asymptotic_state)
from .thermo import (LOG_FLOOR, AccuracyWarning, ThermoSample,
                     LedgerTotals, internal_energy, power_exact,
                     power_approx, heat_current,
                     heat_current_sc_closed_form, fluorescence, entropy,
                     entropy_rates, uses_log_floor, integrate_ledger)
from .experiments import (ConvergenceWarning, ProtocolConfig,
                          ProtocolResult, run_protocol, zero_pump_limit,
                          NessSweep, PolarizationSweep, ToffSweep,
                          EntropySweep, EntropyDecomposition, sweep_ness1,
                          sweep_polarization_vs_gamma,
                          sweep_polarization_vs_toff, sweep_entropy,
                          entropy_decomposition_run)
from .cli import (ConfigError, RunConfig, parse_config, emit_csv,
                  resolved_config, emit_sidecar, main)

__version__ = "0.1.0"

__all__ = [
    "GROUND", "EXCITED", "SINGLET", "CHANNELS",
    "InvalidParameterError", "ModelParams", "JumpOperator", "NVModel",
    "build_model", "energy_gap",
    "DegenerateKernelError", "InvalidGeneratorError",
    "NumericalFailureError", "StiffnessError", "RateMatrix", "Trajectory",
    "Propagator", "apply_dissipator", "apply_adjoint_dissipator", "rhs",
    "active_jumps", "build_rate_matrix", "evolve_populations",
    "evolve_full", "steady_state", "asymptotic_state",
    "LOG_FLOOR", "AccuracyWarning", "ThermoSample", "LedgerTotals",
    "internal_energy", "power_exact", "power_approx", "heat_current",
    "heat_current_sc_closed_form", "fluorescence", "entropy",
    "entropy_rates", "uses_log_floor", "integrate_ledger",
    "ConvergenceWarning", "ProtocolConfig", "ProtocolResult",
    "run_protocol", "zero_pump_limit", "NessSweep", "PolarizationSweep",
    "ToffSweep", "EntropySweep", "EntropyDecomposition", "sweep_ness1",
    "sweep_polarization_vs_gamma", "sweep_polarization_vs_toff",
    "sweep_entropy", "entropy_decomposition_run",
    "ConfigError", "RunConfig", "parse_config", "emit_csv",
    "resolved_config", "emit_sidecar", "main",
    "__version__",
]
