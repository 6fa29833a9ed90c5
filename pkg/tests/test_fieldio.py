import json

import numpy as np
import pytest

from vanhove.phasespace import PhaseFunction, PhaseSpaceGrid
from vanhove.states import ClassicalWavefunction, gaussian_density
from vanhove.fieldio import (
    read_field_binary,
    save_state,
    load_state,
    write_field_binary,
    write_field_csv,
    write_flow_csv,
    write_timeseries_csv,
)
from vanhove.timeop import tau_flow


@pytest.fixture
def grid():
    return PhaseSpaceGrid(-1.0, 1.0, 9, -2.0, 2.0, 11)


def test_field_csv_layout(tmp_path, grid):
    values = np.arange(9 * 11, dtype=float).reshape(9, 11)
    path = write_field_csv(tmp_path / "f.csv", grid, values, "val")
    lines = path.read_text().splitlines()
    assert lines[0] == "q,p,val"
    # row-major, q slowest: the second row is (q_min, second p node)
    first = lines[1].split(",")
    second = lines[2].split(",")
    assert float(first[0]) == grid.q_min and float(first[1]) == grid.p_min
    assert float(second[0]) == grid.q_min
    assert float(second[1]) == pytest.approx(grid.p_min + grid.h_p)
    assert float(second[2]) == 1.0
    assert len(lines) == 1 + 9 * 11


def test_field_binary_roundtrip(tmp_path, grid):
    values = np.random.default_rng(0).standard_normal(grid.qp_shape)
    jp, bp = write_field_binary(tmp_path / "field", grid, values)
    header = json.loads(jp.read_text())
    assert header["dtype"] == "<f8"
    assert [a["name"] for a in header["axes"]] == ["q", "p"]
    grid2, back = read_field_binary(jp)
    assert grid2 == grid
    assert np.array_equal(back, values)


def test_field_binary_3d_axis_order(tmp_path):
    grid = PhaseSpaceGrid(-1, 1, 8, -1, 1, 9, x_min=-2.0, x_max=2.0, n_x=10)
    values = np.random.default_rng(1).standard_normal(grid.shape)
    jp, bp = write_field_binary(tmp_path / "field3", grid, values)
    raw = np.frombuffer(bp.read_bytes(), dtype="<f8")
    # row-major with q slowest, then p, then x
    assert raw[0] == values[0, 0, 0]
    assert raw[1] == values[0, 0, 1]
    assert raw[10] == values[0, 1, 0]
    grid2, back = read_field_binary(jp)
    assert grid2.has_x and np.array_equal(back, values)


def test_state_roundtrip(tmp_path, grid):
    rho = gaussian_density(grid, (0.0, 0.0), (0.4, 0.8))
    sigma = PhaseFunction(grid, np.linspace(0, 1, 9 * 11).reshape(9, 11))
    state = ClassicalWavefunction(rho, sigma, hbar=0.5, t=1.25)
    header = save_state(tmp_path, "s", state, provenance={"origin": "test"})
    back = load_state(header)
    assert back.hbar == 0.5 and back.t == 1.25
    assert np.array_equal(back.rho.values, state.rho.values)
    assert np.array_equal(back.sigma.values, state.sigma.values)
    assert json.loads(header.read_text())["provenance"] == {"origin": "test"}


def test_timeseries_csv_columns(tmp_path):
    rows = [{"t": 0.0, "norm": 1.0, "energy": 2.0, "r1": 0.1, "r2": 0.2},
            {"t": 0.5, "norm": 0.999, "energy": 2.001, "r1": 0.11, "r2": 0.19}]
    path = write_timeseries_csv(tmp_path / "ts.csv", rows)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,norm,energy,r1,r2"
    assert len(lines) == 3


def test_flow_csv(tmp_path):
    flow = tau_flow(1.0, 0.5, lambda_target=0.3, dlam=0.05)
    path = write_flow_csv(tmp_path / "flow.csv", flow)
    lines = path.read_text().splitlines()
    assert lines[0] == "lambda,q,p,H,reason"
    assert lines[1].endswith("reached_request")
    assert len(lines) == 1 + len(flow.lambdas)


def test_csv_is_byte_deterministic(tmp_path, grid):
    values = np.random.default_rng(3).standard_normal(grid.qp_shape)
    a = write_field_csv(tmp_path / "a.csv", grid, values)
    b = write_field_csv(tmp_path / "b.csv", grid, values)
    assert a.read_bytes() == b.read_bytes()
