"""Artifact formats: CSV tables and self-describing JSON + flat binary.

Field snapshots are written either as CSV (axis coordinates first, value
last, rows in row-major order with q slowest, then p, then x) or as a JSON
header next to a flat binary of 64-bit floats in the same row-major order.
States serialize as the two field binaries (rho, sigma) plus a header
carrying hbar, the time and caller-supplied provenance.

All writers format floats with shortest-roundtrip repr and emit keys in
sorted order, so rerunning a deterministic computation reproduces the
artifacts byte for byte.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .phasespace import PhaseFunction, PhaseSpaceGrid
from .states import ClassicalWavefunction

__all__ = [
    "fmt_float",
    "dumps_json",
    "write_json",
    "write_csv_rows",
    "write_field_csv",
    "write_field_binary",
    "read_field_binary",
    "write_timeseries_csv",
    "write_flow_csv",
    "save_state",
    "load_state",
]


def fmt_float(v) -> str:
    """Shortest round-trip decimal form; deterministic across runs."""
    return repr(float(v))


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj))
    return path


def write_csv_rows(path: str | Path, header: list[str], rows) -> Path:
    """Rows of floats/strings; floats formatted with repr."""
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt_float(v)
                              for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def _axes_descriptor(grid: PhaseSpaceGrid) -> list[dict]:
    axes = [{"name": "q", "min": grid.q_min, "max": grid.q_max, "n": grid.n_q},
            {"name": "p", "min": grid.p_min, "max": grid.p_max, "n": grid.n_p}]
    if grid.has_x:
        axes.append({"name": "x", "min": grid.x_min, "max": grid.x_max,
                     "n": grid.n_x})
    return axes


def write_field_csv(path: str | Path, grid: PhaseSpaceGrid, values: np.ndarray,
                    value_name: str = "value") -> Path:
    values = np.asarray(values)
    names = [a["name"] for a in _axes_descriptor(grid)][:values.ndim]
    coords = [grid.q, grid.p] + ([grid.x] if values.ndim == 3 else [])
    mesh = np.meshgrid(*coords, indexing="ij")
    rows = zip(*[m.ravel() for m in mesh], values.ravel())
    return write_csv_rows(path, names + [value_name], rows)


def write_field_binary(path: str | Path, grid: PhaseSpaceGrid,
                       values: np.ndarray, name: str = "field") -> tuple[Path, Path]:
    """JSON header at ``path`` (.json) plus raw little-endian float64 at the
    same stem with .bin; row-major, q slowest."""
    path = Path(path)
    json_path = path.with_suffix(".json")
    bin_path = path.with_suffix(".bin")
    values = np.ascontiguousarray(np.asarray(values, dtype=float))
    bin_path.write_bytes(values.astype("<f8").tobytes())
    header = {
        "name": name,
        "axes": _axes_descriptor(grid)[:values.ndim],
        "dtype": "<f8",
        "order": "row-major (q slowest, then p, then x)",
        "shape": list(values.shape),
        "data_file": bin_path.name,
    }
    write_json(json_path, header)
    return json_path, bin_path


def read_field_binary(json_path: str | Path) -> tuple[PhaseSpaceGrid, np.ndarray]:
    json_path = Path(json_path)
    header = json.loads(json_path.read_text())
    axes = {a["name"]: a for a in header["axes"]}
    kw = {}
    if "x" in axes:
        kw = dict(x_min=axes["x"]["min"], x_max=axes["x"]["max"],
                  n_x=axes["x"]["n"])
    grid = PhaseSpaceGrid(axes["q"]["min"], axes["q"]["max"], axes["q"]["n"],
                          axes["p"]["min"], axes["p"]["max"], axes["p"]["n"],
                          **kw)
    raw = np.frombuffer((json_path.parent / header["data_file"]).read_bytes(),
                        dtype="<f8")
    return grid, raw.reshape(header["shape"]).copy()


def write_timeseries_csv(path: str | Path, rows: list[dict]) -> Path:
    """History rows (t, norm, energy, residuals, discrepancies...) with the
    column order of the first row."""
    if not rows:
        return write_csv_rows(path, ["t"], [])
    header = list(rows[0].keys())
    return write_csv_rows(path, header,
                          ([row[k] for k in header] for row in rows))


def write_flow_csv(path: str | Path, flow) -> Path:
    """Time-operator flow samples: lambda, q, p, H, reason."""
    rows = [(l, q, p, H, flow.termination_reason)
            for l, q, p, H in zip(flow.lambdas, flow.q, flow.p, flow.H)]
    return write_csv_rows(path, ["lambda", "q", "p", "H", "reason"], rows)


def save_state(directory: str | Path, name: str, state: ClassicalWavefunction,
               provenance: dict | None = None) -> Path:
    """Two field binaries (rho, sigma) plus a JSON header with hbar, t and
    provenance."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_field_binary(directory / f"{name}_rho", state.grid,
                       state.rho.values, name="rho")
    write_field_binary(directory / f"{name}_sigma", state.grid,
                       state.sigma.values, name="sigma")
    header = {
        "hbar": state.hbar,
        "t": state.t,
        "rho": f"{name}_rho.json",
        "sigma": f"{name}_sigma.json",
        "masked_nodes": int(state.sigma_mask.sum()) if state.sigma_mask is not None else 0,
        "provenance": provenance or {},
    }
    return write_json(directory / f"{name}_state.json", header)


def load_state(header_path: str | Path) -> ClassicalWavefunction:
    header_path = Path(header_path)
    header = json.loads(header_path.read_text())
    grid, rho = read_field_binary(header_path.parent / header["rho"])
    _, sigma = read_field_binary(header_path.parent / header["sigma"])
    return ClassicalWavefunction(PhaseFunction(grid, rho),
                                 PhaseFunction(grid, sigma),
                                 hbar=header["hbar"], t=header["t"])
