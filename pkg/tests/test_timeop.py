import numpy as np
import pytest

from vanhove.phasespace import (
    PhaseFunction,
    PhaseSpaceGrid,
    harmonic_hamiltonian,
    integrate_values,
    poisson_bracket,
)
from vanhove.states import SigmaSpec, energy_eigenstate, ho_eta, ho_tau
from vanhove.operators import build_vanhove
from vanhove.timeop import (
    INCOMPLETENESS_BOUNDARY,
    REACHED_REQUEST,
    apply_time_operator,
    tau_flow,
)

pytestmark = pytest.mark.filterwarnings(
    "ignore:sigma construction:RuntimeWarning")


# ---------------------------------------------------------------------------
# tau-generated flow
# ---------------------------------------------------------------------------

def test_zero_lambda_leaves_point_unchanged():
    res = tau_flow(1.0, 0.8, lambda_target=0.0, dlam=1e-3)
    assert res.q[-1] == 1.0 and res.p[-1] == 0.8
    assert res.H[-1] == res.E0
    assert res.termination_reason == REACHED_REQUEST


def test_energy_decreases_linearly_along_flow():
    q0, p0 = 1.0, 0.8
    E0 = 0.5 * (q0 ** 2 + p0 ** 2)
    res = tau_flow(q0, p0, lambda_target=0.9 * E0, dlam=E0 / 2000)
    assert np.max(np.abs(res.H - (E0 - res.lambdas))) < 1e-4
    assert np.all(np.diff(res.H) < 0)


def test_coordinates_shrink_with_square_root_scaling():
    q0, p0 = 1.0, 0.8
    E0 = 0.5 * (q0 ** 2 + p0 ** 2)
    res = tau_flow(q0, p0, lambda_target=0.9 * E0, dlam=E0 / 2000)
    scale = np.sqrt((E0 - res.lambdas) / E0)
    assert np.max(np.abs(res.q - q0 * scale)) < 1e-4
    assert np.max(np.abs(res.p - p0 * scale)) < 1e-4


def test_momentum_position_ratio_constant_along_flow():
    res = tau_flow(0.7, -1.1, lambda_target=0.8 * 0.5 * (0.7 ** 2 + 1.1 ** 2),
                   dlam=1e-4)
    ratios = res.p / res.q
    assert np.max(np.abs(ratios - ratios[0])) < 1e-8


@pytest.mark.parametrize("target_factor", [1.0, 1.5, 10.0])
def test_flow_past_E0_hits_incompleteness_boundary(target_factor):
    q0, p0 = 0.6, 0.9
    E0 = 0.5 * (q0 ** 2 + p0 ** 2)
    eps = 1e-3 * E0
    res = tau_flow(q0, p0, lambda_target=target_factor * E0, dlam=E0 / 500,
                   eps_H=eps)
    assert res.termination_reason == INCOMPLETENESS_BOUNDARY
    assert res.H[-1] >= eps > 0.0
    assert res.termination_lambda <= E0 - eps + 1e-12


def test_flow_from_origin_is_an_error():
    with pytest.raises(ValueError, match="H = 0"):
        tau_flow(0.0, 0.0, lambda_target=0.1, dlam=1e-3)


# ---------------------------------------------------------------------------
# numeric bracket of tau with H
# ---------------------------------------------------------------------------

def test_tau_H_bracket_is_one_on_annulus():
    grid = PhaseSpaceGrid(-3.2, 3.2, 257, -3.2, 3.2, 257)
    H = harmonic_hamiltonian(grid)
    tau = ho_tau(grid)
    tau_vals = PhaseFunction(grid, np.where(np.isfinite(tau.values),
                                            tau.values, 0.0))
    pb = poisson_bracket(tau_vals, H).values
    Q, P = grid.mesh()
    annulus = (H.values >= 0.2) & (H.values <= 4.0)
    # Exclude a strip around the branch cut (q = 0, p < 0), where stencils
    # straddle the 2 pi / omega jump.
    strip = (np.abs(Q) < 6 * grid.h_q) & (P < 6 * grid.h_p)
    mask = annulus & ~strip
    assert np.max(np.abs(pb[mask] - 1.0)) < 1e-3


# ---------------------------------------------------------------------------
# the time operator itself
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def shell_setup():
    grid = PhaseSpaceGrid(-2.5, 2.5, 201, -2.5, 2.5, 201)
    H = harmonic_hamiltonian(grid)
    spec = SigmaSpec(H=H, eta=ho_eta(grid), tau=ho_tau(grid),
                     reference=(0.0, np.sqrt(2.0)))
    return grid, H, spec


def test_mask_is_exactly_the_low_energy_set(shell_setup):
    grid, H, spec = shell_setup
    phi = np.ones(grid.qp_shape, dtype=complex)
    eps = 0.17
    out, mask = apply_time_operator(grid, phi, hbar=1.0, eps_H=eps)
    assert np.array_equal(mask, np.abs(H.values) < eps)
    assert np.all(out[mask] == 0.0)


def test_shell_state_has_no_masked_support(shell_setup):
    grid, H, spec = shell_setup
    pi = PhaseFunction(grid, np.ones(grid.qp_shape))
    state = energy_eigenstate(spec, E=1.0, pi=pi, eps=0.2)
    _, mask = apply_time_operator(grid, state.phi(), hbar=1.0, eps_H=0.1)
    support = state.rho.values > 1e-12 * np.max(state.rho.values)
    assert not np.any(mask & support)


def test_all_masked_is_an_error():
    grid = PhaseSpaceGrid(-0.1, 0.1, 16, -0.1, 0.1, 16)
    phi = np.ones(grid.qp_shape, dtype=complex)
    with pytest.raises(ValueError, match="cutoff"):
        apply_time_operator(grid, phi, hbar=1.0, eps_H=10.0)


def test_euler_step_shifts_energy_by_minus_dlambda(shell_setup):
    # Shell density localized in angle, away from the tau branch cut: for
    # such states a single Euler step of the tau generator lowers <O_H> by
    # dlambda.  (On the full rotation-invariant shell the first-order shift
    # cancels: the probability flux through the cut exactly offsets the
    # canonical commutator, the phase-space version of the Pauli argument.)
    grid, H, spec = shell_setup
    Q, P = grid.mesh()
    angle = np.arctan2(Q, P)
    pi = PhaseFunction(grid, np.exp(-angle ** 2 / (2 * 0.5 ** 2)))
    state = energy_eigenstate(spec, E=1.0, pi=pi, eps=0.2)
    phi = state.phi()
    op_H = build_vanhove(H, hbar=1.0)

    def mean_energy(f):
        num = complex(integrate_values(grid, np.conjugate(f) * op_H(f)))
        den = complex(integrate_values(grid, np.abs(f) ** 2))
        return (num / den).real

    dlam = 1e-2 * 1.0  # 1e-2 * E0
    out, _ = apply_time_operator(grid, phi, hbar=1.0, eps_H=0.1)
    shifted = phi - 1j * dlam * out
    shift = mean_energy(shifted) - mean_energy(phi)
    assert abs(shift + dlam) / dlam < 0.1


def test_full_shell_first_order_shift_cancels(shell_setup):
    # The companion null result: rotation-invariant shell, no net shift.
    grid, H, spec = shell_setup
    pi = PhaseFunction(grid, np.ones(grid.qp_shape))
    state = energy_eigenstate(spec, E=1.0, pi=pi, eps=0.2)
    phi = state.phi()
    op_H = build_vanhove(H, hbar=1.0)

    def mean_energy(f):
        num = complex(integrate_values(grid, np.conjugate(f) * op_H(f)))
        den = complex(integrate_values(grid, np.abs(f) ** 2))
        return (num / den).real

    dlam = 1e-2
    out, _ = apply_time_operator(grid, phi, hbar=1.0, eps_H=0.1)
    shift = mean_energy(phi - 1j * dlam * out) - mean_energy(phi)
    assert abs(shift) < 0.05 * dlam
