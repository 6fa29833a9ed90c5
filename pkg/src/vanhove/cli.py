"""Scenario-driven command line front end.

Scenarios are flat key=value files with [section] headers and
JSON-literal values.  ``vanhove list`` prints the bundled catalog;
``vanhove run FILE...`` executes scenarios, writes CSV/JSON artifacts into
an isolated directory per scenario, prints one PASS/FAIL line per declared
check, and exits 0 only if every check passed.

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration/parse
error, 3 module precondition violated, 4 numerical runtime failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import dynamics, fieldio, hybrid, operators, phasespace, states, timeop

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_NUMERICAL = 4

ENV_OUT_ROOT = "VANHOVE_OUT"

KINDS = ("algebra_audit", "classical_evolution", "time_operator", "eigenstate",
         "superposition", "hybrid_continuous", "qubit_measurement")


class ConfigError(ValueError):
    """Scenario file failed to parse or validate."""


# ---------------------------------------------------------------------------
# Configuration parsing
# ---------------------------------------------------------------------------

def parse_config(text: str) -> dict:
    """Sections of key = JSON-value pairs; '#' starts a comment."""
    out: dict[str, dict] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not section:
                raise ConfigError(f"line {lineno}: empty section name")
            out.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, _, value = line.partition("=")
        key = key.strip()
        try:
            out[section][key] = json.loads(value.strip())
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"line {lineno}: value for {key!r} is not a JSON literal: {exc}"
            ) from None
    if not out:
        raise ConfigError("empty configuration")
    return out


def _require(cfg: dict, section: str, keys: tuple[str, ...] = ()) -> dict:
    if section not in cfg:
        raise ConfigError(f"missing [{section}] section")
    for key in keys:
        if key not in cfg[section]:
            raise ConfigError(f"missing key {key!r} in [{section}]")
    return cfg[section]


def _scaled(n: int, factor: float) -> int:
    if n < 8:
        raise ValueError(f"grid axis with {n} nodes violates the n >= 8 "
                         "precondition")
    # --grid-scale may downscale, but never below the module minimum.
    return max(8, int(round((n - 1) * factor)) + 1)


def build_grid(cfg: dict, grid_scale: float = 1.0) -> phasespace.PhaseSpaceGrid:
    g = _require(cfg, "grid", ("q_min", "q_max", "n_q", "p_min", "p_max", "n_p"))
    kw = {}
    if "n_x" in g:
        kw = dict(x_min=g["x_min"], x_max=g["x_max"],
                  n_x=_scaled(g["n_x"], grid_scale))
    return phasespace.PhaseSpaceGrid(
        g["q_min"], g["q_max"], _scaled(g["n_q"], grid_scale),
        g["p_min"], g["p_max"], _scaled(g["n_p"], grid_scale), **kw)


def named_function(name: str, grid, constants: dict) -> phasespace.PhaseFunction:
    mass = constants.get("mass", 1.0)
    omega = constants.get("omega", 1.0)
    catalog = {
        "q": lambda: phasespace.coordinate_q(grid),
        "p": lambda: phasespace.coordinate_p(grid),
        "q2": lambda: phasespace.monomial(grid, 2, 0),
        "p2": lambda: phasespace.monomial(grid, 0, 2),
        "qp": lambda: phasespace.monomial(grid, 1, 1),
        "q2p": lambda: phasespace.monomial(grid, 2, 1),
        "H": lambda: phasespace.harmonic_hamiltonian(grid, mass, omega),
    }
    if name not in catalog:
        raise ConfigError(f"unknown function name {name!r}; choose from "
                          f"{sorted(catalog)}")
    return catalog[name]()


@dataclass
class Check:
    name: str
    value: float
    limit: float
    op: str  # "<" or ">"

    def __post_init__(self):
        self.value = float(self.value)
        self.limit = float(self.limit)

    @property
    def passed(self) -> bool:
        return bool(self.value < self.limit if self.op == "<"
                    else self.value > self.limit)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"{tag} {self.name}: value={fieldio.fmt_float(self.value)} "
                f"(required {self.op} {fieldio.fmt_float(self.limit)})")

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "limit": self.limit,
                "op": self.op, "pass": self.passed}


def _gaussian_phi(grid, center, widths):
    Q, P = grid.mesh()
    amp = np.exp(-(Q - center[0]) ** 2 / (4 * widths[0] ** 2)
                 - (P - center[1]) ** 2 / (4 * widths[1] ** 2))
    return amp / phasespace.norm_l2(grid, amp)


# ---------------------------------------------------------------------------
# Scenario runners (one per kind)
# ---------------------------------------------------------------------------

def _run_algebra_audit(cfg, out, fmt, rng, grid_scale):
    grid = build_grid(cfg, grid_scale)
    constants = cfg.get("constants", {})
    hbar = constants.get("hbar", 1.0)
    params = _require(cfg, "params", ("pairs",))
    checks_cfg = cfg.get("checks", {})
    phi = _gaussian_phi(grid, params.get("phi_center", (0.0, 0.0)),
                        params.get("phi_widths", (1.0, 1.0)))
    tol = checks_cfg.get("bracket_max_relative", 1e-2)

    reports = []
    checks = []
    for fname, gname in params["pairs"]:
        F = named_function(fname, grid, constants)
        G = named_function(gname, grid, constants)
        report = operators.dirac_rule_audit(
            F, G, phi, a=params.get("a", 2.0), b=params.get("b", -1.0),
            hbar=hbar, bracket_tol=tol)
        reports.append({"pair": [fname, gname],
                        "bracket_path": report.bracket_path,
                        "rules": [r.to_dict() for r in report.rules]})
        checks.append(Check(f"bracket_residual[{fname},{gname}]",
                            report.bracket.relative, tol, "<"))
        checks.append(Check(f"power_rule_fails[{fname}]",
                            report.power.relative,
                            checks_cfg.get("power_min_relative", 1e-2), ">"))
        checks.append(Check(f"linearity[{fname},{gname}]",
                            report.linearity.relative, 1e-10, "<"))
    artifacts = [fieldio.write_json(out / "audit.json", reports)]
    if fmt in ("csv", "both"):
        rows = [(r["pair"][0], r["pair"][1], rule["rule"], rule["relative"])
                for r in reports for rule in r["rules"]]
        artifacts.append(fieldio.write_csv_rows(
            out / "audit.csv", ["F", "G", "rule", "relative"], rows))
    return checks, artifacts


def _run_classical_evolution(cfg, out, fmt, rng, grid_scale):
    grid = build_grid(cfg, grid_scale)
    constants = cfg.get("constants", {})
    hbar = constants.get("hbar", 1.0)
    params = _require(cfg, "params", ("center", "widths", "n_steps"))
    checks_cfg = cfg.get("checks", {})
    H = phasespace.harmonic_hamiltonian(grid, constants.get("mass", 1.0),
                                        constants.get("omega", 1.0))
    spec = states.SigmaSpec(H=H, eta=states.ho_eta(grid), tau=states.ho_tau(grid),
                            reference=tuple(params["center"]))
    state = states.trajectory_bundle_state(spec, tuple(params["center"]),
                                           tuple(params["widths"]), hbar=hbar)
    T = 2 * np.pi / constants.get("omega", 1.0)
    config = dynamics.EvolutionConfig(
        dt=T / params["n_steps"], t_final=T,
        interpolation=params.get("interpolation", "cubic"))
    e0 = dynamics.expectation(H, state).operator_value
    result = dynamics.evolve(state, H, config,
                             record_every=params.get("record_every", 0))
    final = result.state
    l1 = float(phasespace.integrate_values(
        grid, np.abs(final.rho.values - state.rho.values)))
    eT = dynamics.expectation(H, final).operator_value

    checks = [
        Check("l1_period_return", l1, checks_cfg.get("l1_max", 1e-2), "<"),
        Check("norm_drift", abs(result.net_deficit),
              checks_cfg.get("norm_drift_max", 1e-4), "<"),
        Check("energy_drift_rel", abs(eT - e0) / abs(e0),
              checks_cfg.get("energy_drift_max", 1e-3), "<"),
    ]
    artifacts = []
    if result.history and fmt in ("csv", "both"):
        artifacts.append(fieldio.write_timeseries_csv(out / "timeseries.csv",
                                                      result.history))
    if fmt in ("csv", "both"):
        artifacts.append(fieldio.write_field_csv(out / "rho_final.csv", grid,
                                                 final.rho.values, "rho"))
    if fmt in ("json", "both"):
        artifacts.append(fieldio.save_state(out, "final", final,
                                            provenance={"scenario": "classical_evolution"}))
    return checks, artifacts


def _run_time_operator(cfg, out, fmt, rng, grid_scale):
    params = _require(cfg, "params", ("q0", "p0", "dlam_fraction"))
    checks_cfg = cfg.get("checks", {})
    q0, p0 = params["q0"], params["p0"]
    E0 = 0.5 * (p0 ** 2 + q0 ** 2)
    dlam = E0 * params["dlam_fraction"]
    flow = timeop.tau_flow(q0, p0, lambda_target=0.9 * E0, dlam=dlam)
    h_err = float(np.max(np.abs(flow.H - (E0 - flow.lambdas))))
    scale = np.sqrt((E0 - flow.lambdas) / E0)
    q_err = float(np.max(np.abs(flow.q - q0 * scale)))
    beyond = timeop.tau_flow(q0, p0, lambda_target=2 * E0, dlam=dlam)

    checks = [
        Check("energy_linearity", h_err, checks_cfg.get("h_max", 1e-4), "<"),
        Check("coordinate_scaling", q_err, checks_cfg.get("q_max", 1e-4), "<"),
        Check("incompleteness_stop",
              1.0 if beyond.termination_reason == timeop.INCOMPLETENESS_BOUNDARY
              else 0.0, 0.5, ">"),
        Check("energy_stays_positive", float(beyond.H[-1]), 0.0, ">"),
    ]
    artifacts = []
    if fmt in ("csv", "both"):
        artifacts.append(fieldio.write_flow_csv(out / "flow.csv", flow))
        artifacts.append(fieldio.write_flow_csv(out / "flow_past_E0.csv", beyond))
    artifacts.append(fieldio.write_json(out / "flow_summary.json", {
        "E0": E0, "termination_lambda": flow.termination_lambda,
        "termination_reason": flow.termination_reason,
        "past_E0_reason": beyond.termination_reason,
        "past_E0_H_final": float(beyond.H[-1]),
    }))
    return checks, artifacts


def _run_eigenstate(cfg, out, fmt, rng, grid_scale):
    grid = build_grid(cfg, grid_scale)
    constants = cfg.get("constants", {})
    params = _require(cfg, "params", ("energy", "eps"))
    checks_cfg = cfg.get("checks", {})
    H = phasespace.harmonic_hamiltonian(grid, constants.get("mass", 1.0),
                                        constants.get("omega", 1.0))
    reference = tuple(params.get("reference", (0.0, np.sqrt(2.0))))
    spec = states.SigmaSpec(H=H, eta=states.ho_eta(grid),
                            tau=states.ho_tau(grid), reference=reference)
    pi = phasespace.PhaseFunction(grid, np.ones(grid.qp_shape))
    import warnings as _w
    with _w.catch_warnings():
        _w.simplefilter("ignore", RuntimeWarning)
        state = states.energy_eigenstate(spec, params["energy"], pi,
                                         eps=params["eps"],
                                         hbar=constants.get("hbar", 1.0))
    E, eps = params["energy"], params["eps"]
    off = np.abs(H.values - E) > 4 * eps
    off_mass = float(phasespace.integrate_values(
        grid, np.where(off, state.rho.values, 0.0)))
    Q, P = grid.mesh()
    r = np.sqrt(Q ** 2 + P ** 2)
    mean_r = float(phasespace.integrate_values(grid, state.rho.values * r))
    radius_exact = np.sqrt(2 * E / constants.get("mass", 1.0)) / constants.get("omega", 1.0)

    checks = [
        Check("normalization_error", abs(state.norm() - 1.0), 1e-10, "<"),
        Check("off_shell_mass", off_mass, checks_cfg.get("off_shell_max", 1e-6), "<"),
        Check("shell_radius_error", abs(mean_r - radius_exact),
              checks_cfg.get("radius_max", eps), "<"),
    ]
    artifacts = []
    if fmt in ("csv", "both"):
        artifacts.append(fieldio.write_field_csv(out / "rho.csv", grid,
                                                 state.rho.values, "rho"))
    if fmt in ("json", "both"):
        artifacts.append(fieldio.save_state(out, "shell", state,
                                            provenance={"scenario": "eigenstate",
                                                        "energy": E, "eps": eps}))
    return checks, artifacts


def _run_superposition(cfg, out, fmt, rng, grid_scale):
    grid = build_grid(cfg, grid_scale)
    constants = cfg.get("constants", {})
    hbar = constants.get("hbar", 1.0)
    params = _require(cfg, "params", ("p0", "width"))
    checks_cfg = cfg.get("checks", {})
    w = params["width"]
    p0 = params["p0"]
    H = phasespace.harmonic_hamiltonian(grid, constants.get("mass", 1.0),
                                        constants.get("omega", 1.0))
    spec = states.SigmaSpec(H=H, eta=states.ho_eta(grid),
                            tau=states.ho_tau(grid), reference=(0.0, p0))
    s1 = states.trajectory_bundle_state(spec, (-2 * w, p0), (w, w), hbar=hbar)
    s2 = states.trajectory_bundle_state(spec, (+2 * w, p0), (w, w), hbar=hbar)
    base = max(states.verify_constraints(s1, H, -H.values).r1,
               states.verify_constraints(s2, H, -H.values).r1)
    sup, report, fringe = states.superposition_diagnostic(s1, s2, (1.0, 1.0), H)

    checks = [
        Check("fringe_contrast", fringe.contrast,
              checks_cfg.get("contrast_min", 0.5), ">"),
        Check("residual_blowup", report.r1 / base,
              checks_cfg.get("blowup_min", 10.0), ">"),
    ]
    artifacts = [fieldio.write_json(out / "superposition.json", {
        "fringe_contrast": fringe.contrast,
        "baseline_r1": base,
        "superposed_r1": report.r1,
        "centroids": [list(fringe.centroid_1), list(fringe.centroid_2)],
    })]
    if fmt in ("csv", "both"):
        artifacts.append(fieldio.write_field_csv(out / "rho_superposed.csv",
                                                 grid, sup.rho.values, "rho"))
    return checks, artifacts


def _run_hybrid_continuous(cfg, out, fmt, rng, grid_scale):
    grid = build_grid(cfg, grid_scale)
    if not grid.has_x:
        raise ConfigError("hybrid_continuous needs an x axis in [grid]")
    constants = cfg.get("constants", {})
    params = _require(cfg, "params", ("coupling_k", "n_steps", "dt"))
    checks_cfg = cfg.get("checks", {})
    k_c = params["coupling_k"]
    m_C = constants.get("m_C", 1.0)
    m_Q = constants.get("m_Q", 1.0)

    Q = grid.q[:, None, None]
    P = grid.p[None, :, None]
    X = grid.x[None, None, :]
    q0, x0 = params.get("q0", 0.2), params.get("x0", -0.2)
    wq, wx = params.get("wq", 0.5), params.get("wx", 0.6)
    psi = (np.exp(-(Q - q0) ** 2 / (4 * wq ** 2) - P ** 2 / (4 * wq ** 2))
           * np.exp(-(X - x0) ** 2 / (4 * wx ** 2))).astype(complex)
    state = hybrid.HybridStateContinuous(
        grid, psi, m_C=m_C, m_Q=m_Q,
        potential=(lambda q, x: 0.5 * k_c * (q - x) ** 2),
        dV_dq=(lambda q, x: k_c * (q - x))).normalized()

    e0 = hybrid.hybrid_energy(state).real
    final, history = hybrid.evolve_hybrid(state, dt=params["dt"],
                                          n_steps=params["n_steps"],
                                          record_every=params.get("record_every", 0))
    eT = hybrid.hybrid_energy(final).real

    g2 = hybrid.grid_2d(grid)
    sep = [
        hybrid.separability_check(phasespace.coordinate_q(g2),
                                  hybrid.QuantumOperator.position(), final),
        hybrid.separability_check(phasespace.coordinate_p(g2),
                                  hybrid.QuantumOperator.momentum(), final),
        hybrid.separability_check(
            phasespace.harmonic_hamiltonian(g2, m_C, constants.get("omega", 1.0)),
            hybrid.QuantumOperator.position(2), final),
    ]
    # a randomized test state exercises state-independence of the residual
    envelope = np.exp(-Q ** 2 - P ** 2 - (X / 2) ** 2)
    a, b = rng.uniform(-1, 1, 2)
    rand_psi = envelope * (1 + 0.3 * np.sin(a + Q) * np.cos(b + P)
                           + 0.2j * np.sin(0.5 * X))
    rand_state = hybrid.HybridStateContinuous(grid, rand_psi.astype(complex),
                                              m_C, m_Q).normalized()
    sep_rand = hybrid.separability_check(phasespace.coordinate_q(g2),
                                         hybrid.QuantumOperator.position(),
                                         rand_state)

    checks = [
        Check("norm_drift", abs(final.norm() - 1.0),
              checks_cfg.get("norm_drift_max", 1e-4), "<"),
        Check("energy_drift_rel", abs(eT - e0) / abs(e0),
              checks_cfg.get("energy_drift_max", 1e-3), "<"),
        Check("separability_residual", max(sep),
              checks_cfg.get("separability_max", 1e-6), "<"),
        Check("separability_random_state", sep_rand,
              checks_cfg.get("separability_max", 1e-6), "<"),
    ]
    rho_C, rho_Q = hybrid.hybrid_marginals(final)
    artifacts = [fieldio.write_json(out / "hybrid_summary.json", {
        "energy_initial": e0, "energy_final": eT,
        "norm_final": final.norm(),
        "separability_residuals": [float(s) for s in sep],
    })]
    if history and fmt in ("csv", "both"):
        artifacts.append(fieldio.write_timeseries_csv(out / "hybrid_timeseries.csv",
                                                      history))
    if fmt in ("csv", "both"):
        artifacts.append(fieldio.write_field_csv(out / "rho_classical.csv", g2,
                                                 rho_C.values, "rho"))
        artifacts.append(fieldio.write_csv_rows(
            out / "rho_quantum.csv", ["x", "rho"], zip(grid.x, rho_Q)))
    return checks, artifacts


def _run_qubit_measurement(cfg, out, fmt, rng, grid_scale):
    grid = build_grid(cfg, grid_scale)
    constants = cfg.get("constants", {})
    params = _require(cfg, "params", ("kappa", "T", "w_plus", "epsilon"))
    checks_cfg = cfg.get("checks", {})
    config = hybrid.MeasurementConfig(
        kappa=params["kappa"], T=params["T"], w_plus=params["w_plus"],
        epsilon=params["epsilon"], B0=params.get("B0", 0.0))
    pre = hybrid.conditional_density(
        hybrid.initial_pointer_state(grid, config, constants.get("hbar", 1.0)))
    result = hybrid.qubit_measurement_run(
        config, grid, hbar=constants.get("hbar", 1.0),
        m_C=constants.get("m_C", 1.0), mode=params.get("mode", "von_neumann"),
        n_series=params.get("n_series", 21))
    post = hybrid.conditional_density(result.state)
    pos, neg = result.pointer_masses()

    checks = [
        Check("pointer_mass_positive_error", abs(pos - config.w_plus),
              checks_cfg.get("mass_tol", 1e-3), "<"),
        Check("offdiag_pre_error",
              abs(pre.offdiag_magnitude
                  - np.sqrt(config.w_plus * config.w_minus)),
              checks_cfg.get("offdiag_pre_tol", 1e-3), "<"),
        Check("offdiag_post", post.offdiag_magnitude,
              checks_cfg.get("offdiag_post_max", 1e-6), "<"),
        Check("diag_error",
              max(abs(post.diagonal[0] - config.w_plus),
                  abs(post.diagonal[1] - config.w_minus)),
              checks_cfg.get("diag_tol", 1e-3), "<"),
    ]
    artifacts = [fieldio.write_json(out / "measurement.json", result.to_report())]
    if fmt in ("csv", "both"):
        artifacts.append(fieldio.write_csv_rows(
            out / "pointer.csv", ["q", "P"], zip(grid.q, result.pointer)))
    return checks, artifacts


_RUNNERS = {
    "algebra_audit": _run_algebra_audit,
    "classical_evolution": _run_classical_evolution,
    "time_operator": _run_time_operator,
    "eigenstate": _run_eigenstate,
    "superposition": _run_superposition,
    "hybrid_continuous": _run_hybrid_continuous,
    "qubit_measurement": _run_qubit_measurement,
}


# ---------------------------------------------------------------------------
# Scenario execution
# ---------------------------------------------------------------------------

def run_scenario(path: str | Path, out_root: str | Path,
                 grid_scale: float = 1.0, fmt: str = "both") -> tuple[int, list[str]]:
    """Execute one scenario file; returns (exit code, printed lines)."""
    lines: list[str] = []
    path = Path(path)
    try:
        cfg = parse_config(path.read_text())
        meta = _require(cfg, "scenario", ("kind", "name"))
        kind = meta["kind"]
        if kind not in KINDS:
            raise ConfigError(f"unknown scenario kind {kind!r}")
        if fmt not in ("csv", "json", "both"):
            raise ConfigError(f"unknown format {fmt!r}")
    except ConfigError as exc:
        return EXIT_PARSE, [f"ERROR parse: {path}: {exc}"]
    except OSError as exc:
        return EXIT_PARSE, [f"ERROR parse: {path}: {exc}"]

    out_dir = Path(out_root) / meta["name"]
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(meta.get("seed", 0))

    old_err = np.seterr(over="raise", invalid="raise")
    try:
        checks, artifacts = _RUNNERS[kind](cfg, out_dir, fmt, rng, grid_scale)
    except ConfigError as exc:
        return EXIT_PARSE, [f"ERROR parse: {path}: {exc}"]
    except (ValueError, KeyError) as exc:
        return EXIT_PRECONDITION, [f"ERROR precondition: {path}: {exc}"]
    except (FloatingPointError, ZeroDivisionError, np.linalg.LinAlgError) as exc:
        return EXIT_NUMERICAL, [f"ERROR numerical: {path}: {exc}"]
    finally:
        np.seterr(**old_err)

    for check in checks:
        lines.append(check.line())
    all_pass = all(c.passed for c in checks)
    summary = {
        "scenario": meta["name"],
        "kind": kind,
        "checks": [c.to_dict() for c in checks],
        "artifacts": sorted(p.name if isinstance(p, Path) else str(p)
                            for p in artifacts),
        "all_pass": all_pass,
    }
    fieldio.write_json(out_dir / "summary.json", summary)
    lines.append(f"{'OK' if all_pass else 'FAILED'} {meta['name']}: "
                 f"{sum(c.passed for c in checks)}/{len(checks)} checks passed "
                 f"-> {out_dir}")
    return EXIT_OK if all_pass else EXIT_CHECK_FAILED, lines


# ---------------------------------------------------------------------------
# Bundled catalog
# ---------------------------------------------------------------------------

def bundled_scenarios() -> list[tuple[str, str, Path]]:
    """(name, one-line description, path) for every bundled .cfg, sorted."""
    root = resources.files("vanhove") / "scenarios"
    entries = []
    for item in sorted(root.iterdir(), key=lambda p: p.name):
        if not item.name.endswith(".cfg"):
            continue
        first = item.read_text().splitlines()[0].strip()
        desc = first.lstrip("# ").strip() if first.startswith("#") else ""
        entries.append((item.name, desc, Path(str(item))))
    return entries


def list_scenarios() -> list[str]:
    lines = []
    for name, desc, _ in bundled_scenarios():
        lines.append(f"{name:24s} {desc}")
    return lines


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _worker(args):
    path, out_root, grid_scale, fmt = args
    return run_scenario(path, out_root, grid_scale, fmt)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="vanhove",
        description="Scenario runner for phase-space operator mechanics")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute scenario files")
    run_p.add_argument("files", nargs="+", help="scenario .cfg files; bundled "
                       "names (e.g. ho_algebra.cfg) are resolved automatically")
    run_p.add_argument("--out", default=None, help="output root directory "
                       f"(default ${ENV_OUT_ROOT} or ./vanhove_out)")
    run_p.add_argument("--grid-scale", type=float, default=1.0,
                       help="multiply node counts per axis")
    run_p.add_argument("--jobs", type=int, default=1,
                       help="run independent scenarios concurrently")
    run_p.add_argument("--format", choices=("csv", "json", "both"),
                       default="both")

    sub.add_parser("list", help="list bundled scenarios")

    args = parser.parse_args(argv)

    if args.command == "list":
        for line in list_scenarios():
            print(line)
        return EXIT_OK

    out_root = args.out or os.environ.get(ENV_OUT_ROOT, "vanhove_out")
    paths = []
    bundled = {name: path for name, _, path in bundled_scenarios()}
    for f in args.files:
        if Path(f).exists():
            paths.append(Path(f))
        elif f in bundled:
            paths.append(bundled[f])
        else:
            print(f"ERROR parse: no such scenario file: {f}")
            return EXIT_PARSE
    jobs = [(p, out_root, args.grid_scale, args.format) for p in paths]
    if args.jobs > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_worker, jobs))
    else:
        results = [_worker(j) for j in jobs]

    code = EXIT_OK
    for (rc, lines) in results:
        for line in lines:
            print(line)
        code = max(code, rc)
    return code


if __name__ == "__main__":
    sys.exit(main())
