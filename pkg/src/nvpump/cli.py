"""Configuration parsing, command dispatch, CSV/SVG emission.

The config file is flat YAML with a fixed key vocabulary (defaults in
_KEYS below); every run echoes its fully resolved configuration to a
sidecar file next to the outputs, and that sidecar parses back to the
identical configuration.  CSV output is deterministic: 17 significant
digits, fixed row order, LF endings.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from dataclasses import dataclass, replace

import numpy as np
import yaml

from .model import ModelParams, build_model, InvalidParameterError
from .lindblad import (build_rate_matrix, steady_state,
                       DegenerateKernelError, InvalidGeneratorError,
                       NumericalFailureError)
from .thermo import AccuracyWarning, entropy
from .experiments import (ProtocolConfig, ConvergenceWarning, run_protocol,
                          sweep_ness1, sweep_polarization_vs_gamma,
                          sweep_polarization_vs_toff, sweep_entropy,
                          entropy_decomposition_run,
                          DEFAULT_GAMMA_GRID, DEFAULT_TOFF_GRID)

__all__ = ["ConfigError", "RunConfig", "parse_config", "emit_csv",
           "resolved_config", "emit_sidecar", "main",
           "SIMULATE_SCHEMA", "COMMANDS"]

COMMANDS = ("simulate", "ness", "sweep-gamma", "sweep-toff",
            "sweep-entropy", "ledger")

SIMULATE_SCHEMA = (
    "t_us", "p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8",
    "U", "Wdot", "Qdot_sc", "Qdot_isc", "Qdot_nsc", "Qdot_total",
    "fluorescence", "S", "Sdot_W", "Sdot_Q",
    "W_cum", "Q_cum", "SW_cum", "SQ_cum", "laser_on")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_NUMERICAL = 4


class ConfigError(ValueError):
    """Bad configuration input; message names the key (and line)."""


def _nonneg(x):
    return x >= 0


def _positive(x):
    return x > 0


def _at_least_2(x):
    return x >= 2


def _any(_x):
    return True


# key -> (python type, default, constraint, constraint description)
_KEYS = {
    "command": (str, None, lambda v: v in COMMANDS,
                f"one of {', '.join(COMMANDS)}"),
    "d_g_mhz": (float, 2.87e3, _nonneg, ">= 0"),
    "d_e_mhz": (float, 1.40e3, _nonneg, ">= 0"),
    "delta_eg_mhz": (float, 4.7e8, _nonneg, ">= 0"),
    "delta_ig_mhz": (float, 1.69e8, _nonneg, ">= 0"),
    "d_i_mhz": (float, 2.88e8, _nonneg, ">= 0"),
    "gyro_mhz_per_t": (float, 2.80e4, _nonneg, ">= 0"),
    "b_z_tesla": (float, 0.0, _any, "any"),
    "gamma_mhz": (float, 77.0, _nonneg, ">= 0"),
    "gamma_p": (float, 1.0, _nonneg, ">= 0"),
    "gamma_42_mhz": (float, 0.25, _nonneg, ">= 0"),
    "gamma_43_mhz": (float, 0.25, _nonneg, ">= 0"),
    "gamma_51_mhz": (float, 0.25, _nonneg, ">= 0"),
    "gamma_61_mhz": (float, 0.25, _nonneg, ">= 0"),
    "kappa_ei4_mhz": (float, 0.0, _nonneg, ">= 0"),
    "kappa_ei5_mhz": (float, 15.0, _nonneg, ">= 0"),
    "kappa_ei6_mhz": (float, 15.0, _nonneg, ">= 0"),
    "kappa_i_mhz": (float, 1.0e3, _nonneg, ">= 0"),
    "kappa_ig1_mhz": (float, 1.0, _nonneg, ">= 0"),
    "kappa_ig2_mhz": (float, 1.0, _nonneg, ">= 0"),
    "kappa_ig3_mhz": (float, 1.0, _nonneg, ">= 0"),
    "excited_zeeman": (str, "physical_sz",
                       lambda v: v in ("physical_sz", "literal_sz2"),
                       "physical_sz or literal_sz2"),
    "t_off_us": (float, 10.0, _positive, "> 0"),
    "t_end_us": (float, None, _positive, "> 0"),
    "sample_count": (int, 2001, _at_least_2, ">= 2"),
    "ness_tol": (float, 1e-8, _positive, "> 0"),
    "initial_state": (str, "uniform_G", lambda v: v == "uniform_G",
                      "uniform_G"),
    "gamma_p_min": (float, DEFAULT_GAMMA_GRID[0], _nonneg, ">= 0"),
    "gamma_p_max": (float, DEFAULT_GAMMA_GRID[1], _positive, "> 0"),
    "gamma_p_points": (int, DEFAULT_GAMMA_GRID[2], _at_least_2, ">= 2"),
    "t_off_min_us": (float, DEFAULT_TOFF_GRID[0], _positive, "> 0"),
    "t_off_max_us": (float, DEFAULT_TOFF_GRID[1], _positive, "> 0"),
    "t_off_points": (int, DEFAULT_TOFF_GRID[2], _at_least_2, ">= 2"),
    "gamma_p_values": (list, [0.5, 1.0, 2.0],
                       lambda v: all(x >= 0 for x in v), "floats >= 0"),
    "workers": (int, 1, lambda v: v >= 1, ">= 1"),
}


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    protocol: ProtocolConfig
    command: str | None
    gamma_grid: tuple          # (min, max, points)
    toff_grid: tuple           # (min, max, points)
    gamma_p_values: tuple
    workers: int


def _key_lines(text: str) -> dict:
    lines = {}
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if ":" in stripped:
            key = stripped.split(":", 1)[0].strip()
            if key and key not in lines:
                lines[key] = i
    return lines


def _coerce(key: str, value, line):
    typ, _default, check, desc = _KEYS[key]
    where = f" (line {line})" if line else ""
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(
                f"key '{key}'{where}: expected a number, got "
                f"{value!r} (note: YAML floats need a decimal point, "
                "e.g. 1.0e3)")
        value = float(value)
    elif typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(
                f"key '{key}'{where}: expected an integer, got {value!r}")
    elif typ is str:
        if not isinstance(value, str):
            raise ConfigError(
                f"key '{key}'{where}: expected a string, got {value!r}")
    elif typ is list:
        if not isinstance(value, (list, tuple)) or \
                any(isinstance(x, bool) or not isinstance(x, (int, float))
                    for x in value):
            raise ConfigError(
                f"key '{key}'{where}: expected a list of numbers, "
                f"got {value!r}")
        value = [float(x) for x in value]
    if not check(value):
        raise ConfigError(f"key '{key}'{where}: must be {desc}, "
                          f"got {value!r}")
    return value


def parse_config(path: str | None = None) -> RunConfig:
    """Load a flat YAML config; missing keys take their defaults."""
    raw, lines = {}, {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}")
        lines = _key_lines(text)
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config file {path}: {exc}")
        if not isinstance(raw, dict):
            raise ConfigError(
                f"config file {path} must be a flat key: value mapping")

    values = {}
    for key, value in raw.items():
        if key not in _KEYS:
            raise ConfigError(
                f"unknown key '{key}' (line {lines.get(key, '?')})")
        values[key] = _coerce(key, value, lines.get(key))
    for key, (_t, default, _c, _d) in _KEYS.items():
        values.setdefault(key, default)

    try:
        model = ModelParams(
            D_G=values["d_g_mhz"], D_E=values["d_e_mhz"],
            Delta_EG=values["delta_eg_mhz"],
            Delta_IG=values["delta_ig_mhz"], D_I=values["d_i_mhz"],
            gyro=values["gyro_mhz_per_t"], B_z=values["b_z_tesla"],
            gamma=values["gamma_mhz"], Gamma_p=values["gamma_p"],
            gamma_nsc={(4, 2): values["gamma_42_mhz"],
                       (4, 3): values["gamma_43_mhz"],
                       (5, 1): values["gamma_51_mhz"],
                       (6, 1): values["gamma_61_mhz"]},
            kappa_EI=(values["kappa_ei4_mhz"], values["kappa_ei5_mhz"],
                      values["kappa_ei6_mhz"]),
            kappa_I=values["kappa_i_mhz"],
            kappa_IG=(values["kappa_ig1_mhz"], values["kappa_ig2_mhz"],
                      values["kappa_ig3_mhz"]),
            excited_zeeman=values["excited_zeeman"])
        protocol = ProtocolConfig(
            Gamma_p=values["gamma_p"], t_off=values["t_off_us"],
            t_end=values["t_end_us"],
            sample_count=values["sample_count"],
            B_z=values["b_z_tesla"], ness_tol=values["ness_tol"],
            initial_state=values["initial_state"])
    except InvalidParameterError as exc:
        raise ConfigError(str(exc))

    return RunConfig(
        model=model, protocol=protocol, command=values["command"],
        gamma_grid=(values["gamma_p_min"], values["gamma_p_max"],
                    values["gamma_p_points"]),
        toff_grid=(values["t_off_min_us"], values["t_off_max_us"],
                   values["t_off_points"]),
        gamma_p_values=tuple(values["gamma_p_values"]),
        workers=values["workers"])


def resolved_config(cfg: RunConfig) -> dict:
    """Config as a flat dict in the fixed key order, fully resolved."""
    m, p = cfg.model, cfg.protocol
    out = {
        "command": cfg.command,
        "d_g_mhz": m.D_G, "d_e_mhz": m.D_E, "delta_eg_mhz": m.Delta_EG,
        "delta_ig_mhz": m.Delta_IG, "d_i_mhz": m.D_I,
        "gyro_mhz_per_t": m.gyro, "b_z_tesla": m.B_z,
        "gamma_mhz": m.gamma, "gamma_p": m.Gamma_p,
        "gamma_42_mhz": m.gamma_nsc[(4, 2)],
        "gamma_43_mhz": m.gamma_nsc[(4, 3)],
        "gamma_51_mhz": m.gamma_nsc[(5, 1)],
        "gamma_61_mhz": m.gamma_nsc[(6, 1)],
        "kappa_ei4_mhz": m.kappa_EI[0], "kappa_ei5_mhz": m.kappa_EI[1],
        "kappa_ei6_mhz": m.kappa_EI[2], "kappa_i_mhz": m.kappa_I,
        "kappa_ig1_mhz": m.kappa_IG[0], "kappa_ig2_mhz": m.kappa_IG[1],
        "kappa_ig3_mhz": m.kappa_IG[2],
        "excited_zeeman": m.excited_zeeman,
        "t_off_us": p.t_off, "t_end_us": p.t_end,
        "sample_count": p.sample_count, "ness_tol": p.ness_tol,
        "initial_state": p.initial_state,
        "gamma_p_min": cfg.gamma_grid[0], "gamma_p_max": cfg.gamma_grid[1],
        "gamma_p_points": cfg.gamma_grid[2],
        "t_off_min_us": cfg.toff_grid[0], "t_off_max_us": cfg.toff_grid[1],
        "t_off_points": cfg.toff_grid[2],
        "gamma_p_values": list(cfg.gamma_p_values),
        "workers": cfg.workers,
    }
    if out["command"] is None:
        del out["command"]
    return out


def _yaml_scalar(v) -> str:
    if isinstance(v, float):
        s = repr(v)
        # a dotless mantissa would read back as a string under YAML 1.1
        if "e" in s and "." not in s.split("e", 1)[0]:
            mant, exp = s.split("e", 1)
            s = f"{mant}.0e{exp}"
        return s
    if isinstance(v, (int, str)):
        return str(v)
    if isinstance(v, list):
        return "[" + ", ".join(_yaml_scalar(x) for x in v) + "]"
    raise TypeError(f"cannot emit {type(v)}")


def emit_sidecar(cfg: RunConfig, path) -> None:
    """Echo the resolved configuration; parses back to the same config."""
    items = resolved_config(cfg)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in items.items():
            fh.write(f"{key}: {_yaml_scalar(value)}\n")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def emit_csv(rows, schema, path) -> None:
    """Header plus formatted rows, 17 significant digits, LF endings."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(schema) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _cmd_simulate(cfg: RunConfig, out, plot: bool):
    res = run_protocol(cfg.protocol, cfg.model)
    t = res.trajectory.times
    P = res.trajectory.populations
    rows = []
    for i, s in enumerate(res.samples):
        rows.append((s.t, *P[i], s.U, s.Wdot, s.Qdot_sc, s.Qdot_isc,
                     s.Qdot_nsc, s.Qdot_total, s.fluorescence, s.S,
                     s.Sdot_W, s.Sdot_Q, s.W_cum, s.Q_cum, s.SW_cum,
                     s.SQ_cum, bool(res.trajectory.laser_on[i])))
    emit_csv(rows, SIMULATE_SCHEMA, out / "simulate.csv")
    if res.ness1_reached_at is not None:
        status = f"reached at {res.ness1_reached_at:.4f} us"
    else:
        status = "not reached"
    print(f"polarization {res.polarization:.6f}, steady state {status}")
    if plot:
        from .plots import line_plot
        line_plot(out / "populations.svg", t,
                  [(f"p{n}", P[:, n - 1]) for n in range(1, 9)],
                  "t (us)", "population")
        line_plot(out / "entropy.svg", t,
                  [("S", [s.S for s in res.samples]),
                   ("SW_cum", [s.SW_cum for s in res.samples]),
                   ("SQ_cum", [s.SQ_cum for s in res.samples])],
                  "t (us)", "nats")
    return ["simulate.csv"]


def _cmd_ness(cfg: RunConfig, out, plot: bool):
    model = build_model(cfg.model)
    p = steady_state(build_rate_matrix(model, laser_on=True))
    emit_csv([(cfg.model.Gamma_p, *p, entropy(p))],
             ("gamma_p", "p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8",
              "S"), out / "ness.csv")
    return ["ness.csv"]


def _cmd_sweep_gamma(cfg: RunConfig, out, plot: bool):
    grid = np.linspace(*cfg.gamma_grid)
    ns = sweep_ness1(grid, cfg.model, workers=cfg.workers)
    ps = sweep_polarization_vs_gamma(grid, cfg.model, workers=cfg.workers)
    emit_csv([(g, *row) for g, row in zip(ns.gamma, ns.populations)],
             ("gamma_p", "p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8"),
             out / "sweep_gamma_ness1.csv")
    emit_csv(list(zip(ps.gamma, ps.polarization)),
             ("gamma_p", "polarization"),
             out / "sweep_gamma_polarization.csv")
    sat = ("%.17g" % ns.saturation_gamma
           if ns.saturation_gamma is not None else "not reached")
    print(f"saturation gamma_p: {sat}")
    if plot:
        from .plots import line_plot
        line_plot(out / "sweep_gamma_ness1.svg", ns.gamma,
                  [(f"p{n}", ns.populations[:, n - 1])
                   for n in range(1, 9)], "Gamma_p", "population")
        line_plot(out / "sweep_gamma_polarization.svg", ps.gamma,
                  [("polarization", ps.polarization)],
                  "Gamma_p", "polarization")
    return ["sweep_gamma_ness1.csv", "sweep_gamma_polarization.csv"]


def _cmd_sweep_toff(cfg: RunConfig, out, plot: bool):
    grid = np.linspace(*cfg.toff_grid)
    res = sweep_polarization_vs_toff(
        grid, cfg.protocol.Gamma_p, cfg.model, workers=cfg.workers,
        ness_tol=cfg.protocol.ness_tol)
    emit_csv(list(zip(res.t_off, res.polarization, res.work)),
             ("t_off_us", "polarization", "W"), out / "sweep_toff.csv")
    if plot:
        from .plots import line_plot
        line_plot(out / "sweep_toff.svg", res.work,
                  [("polarization", res.polarization)],
                  "W (MHz^2)", "polarization")
    return ["sweep_toff.csv"]


def _cmd_sweep_entropy(cfg: RunConfig, out, plot: bool):
    grid = np.linspace(*cfg.gamma_grid)
    res = sweep_entropy(grid, cfg.model, workers=cfg.workers)
    emit_csv(list(zip(res.gamma, res.S_ness1, res.S_ness2,
                      res.polarization)),
             ("gamma_p", "S_ness1", "S_ness2", "polarization"),
             out / "sweep_entropy.csv")
    emit_csv([(res.gamma_max, res.S_max)], ("gamma_p_max", "S_max"),
             out / "entropy_max.csv")
    print(f"S(ness1) maximal at gamma_p = {res.gamma_max:.4f} "
          f"(S = {res.S_max:.6f})")
    if plot:
        from .plots import line_plot
        line_plot(out / "sweep_entropy.svg", res.gamma,
                  [("S_ness1", res.S_ness1), ("S_ness2", res.S_ness2)],
                  "Gamma_p", "S (nats)")
    return ["sweep_entropy.csv", "entropy_max.csv"]


def _cmd_ledger(cfg: RunConfig, out, plot: bool):
    res = run_protocol(cfg.protocol, cfg.model)
    schema = ("segment", "t_start_us", "t_end_us", "W", "Q_sc", "Q_isc",
              "Q_nsc", "Q", "dU", "S_W", "S_Q", "dS",
              "first_law_residual", "closure_residual")
    rows = []
    parts = list(res.totals.phases) + [res.totals]
    names = [f"phase{i + 1}" for i in range(len(res.totals.phases))]
    names.append("total")
    for name, tot in zip(names, parts):
        rows.append((name, tot.t_start, tot.t_end, tot.W, tot.Q_sc,
                     tot.Q_isc, tot.Q_nsc, tot.Q, tot.dU, tot.S_W,
                     tot.S_Q, tot.dS, tot.first_law_residual,
                     tot.closure_residual))
    emit_csv(rows, schema, out / "ledger_totals.csv")

    decorows = []
    cfgs = [replace(cfg.protocol, Gamma_p=g) for g in cfg.gamma_p_values]
    series_list = entropy_decomposition_run(cfgs, cfg.model)
    for series in series_list:
        for i in range(series.times.size):
            decorows.append((series.gamma_p, series.times[i],
                             series.dS[i], series.S_W_cum[i],
                             series.S_Q_cum[i]))
    emit_csv(decorows, ("gamma_p", "t_us", "dS", "SW_cum", "SQ_cum"),
             out / "entropy_decomposition.csv")
    if plot and series_list:
        from .plots import line_plot
        series = series_list[0]
        line_plot(out / "entropy_decomposition.svg", series.times,
                  [("dS", series.dS), ("S_W", series.S_W_cum),
                   ("S_Q", series.S_Q_cum)], "t (us)", "nats")
    return ["ledger_totals.csv", "entropy_decomposition.csv"]


_DISPATCH = {
    "simulate": _cmd_simulate,
    "ness": _cmd_ness,
    "sweep-gamma": _cmd_sweep_gamma,
    "sweep-toff": _cmd_sweep_toff,
    "sweep-entropy": _cmd_sweep_entropy,
    "ledger": _cmd_ledger,
}


def main(argv=None) -> int:
    from pathlib import Path

    parser = argparse.ArgumentParser(
        prog="nvpump",
        description="Eight-level optical-pumping simulator with a "
                    "thermodynamic ledger")
    parser.add_argument("--config", metavar="PATH",
                        help="flat YAML configuration file")
    parser.add_argument("--command", metavar="NAME", choices=COMMANDS,
                        help="overrides the config file's command")
    parser.add_argument("--out", metavar="DIR", default="out",
                        help="output directory (default: ./out)")
    parser.add_argument("--plot", action="store_true",
                        help="emit SVG figures next to the CSVs")
    parser.add_argument("--seedless", action="store_true",
                        help="reserved; all runs are deterministic")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
        if args.command:
            cfg = replace(cfg, command=args.command)
        if cfg.command is None:
            raise ConfigError(
                "no command given (use --command or the 'command' key)")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_sidecar(cfg, out / "resolved_config.yaml")

    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            files = _DISPATCH[cfg.command](cfg, out, args.plot)
    except (NumericalFailureError, DegenerateKernelError,
            InvalidGeneratorError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for f in files:
        print(f"wrote {out / f}")
    escalate = [w for w in caught
                if issubclass(w.category, (ConvergenceWarning,
                                           AccuracyWarning))]
    for w in escalate:
        print(f"warning: {w.message}", file=sys.stderr)
    return EXIT_CONVERGENCE if escalate else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
