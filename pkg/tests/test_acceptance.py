"""Acceptance criteria, one test per criterion, at the stated tolerances.

Each test prints a single PASS/FAIL line with the measured figures (visible
with pytest -rA / -s), then asserts.  Tolerances are pinned here and never
loosened at runtime.
"""

import itertools
import time

import numpy as np
import pytest

from conftest import gaussian_phi

from vanhove.phasespace import (
    PhaseFunction,
    PhaseSpaceGrid,
    coordinate_p,
    coordinate_q,
    harmonic_hamiltonian,
    integrate_values,
    monomial,
    norm_l2,
)
from vanhove import cli
from vanhove.operators import build_vanhove, commutator_residual
from vanhove.states import (
    SigmaSpec,
    construct_sigma,
    ho_eta,
    ho_tau,
    superposition_diagnostic,
    trajectory_bundle_state,
    verify_constraints,
)
from vanhove.dynamics import EvolutionConfig, evolve, expectation, propagator_apply
from vanhove.hybrid import (
    HybridStateContinuous,
    MeasurementConfig,
    QuantumOperator,
    conditional_density,
    evolve_hybrid,
    factorization_defect,
    grid_2d,
    hybrid_energy,
    initial_pointer_state,
    qubit_measurement_run,
    separability_check,
)
from vanhove.timeop import INCOMPLETENESS_BOUNDARY, tau_flow

pytestmark = pytest.mark.filterwarnings(
    "ignore:sigma construction:RuntimeWarning")

T_HO = 2 * np.pi


def report(name, passed, detail):
    print(f"ACCEPTANCE {name}: {'PASS' if passed else 'FAIL'} ({detail})")
    assert passed, f"{name}: {detail}"


def _function_set(grid):
    return {
        "q": coordinate_q(grid),
        "p": coordinate_p(grid),
        "q2": monomial(grid, 2, 0),
        "p2": monomial(grid, 0, 2),
        "qp": monomial(grid, 1, 1),
        "q2p": monomial(grid, 2, 1),
        "H": harmonic_hamiltonian(grid),
    }


def test_c1_algebra_isomorphism():
    # All pairs on 256^2: relative commutator residual < 1e-2 at 4th order,
    # measured convergence order >= 3.5 under one refinement, runtime < 30 s.
    start = time.monotonic()
    grids = {n: PhaseSpaceGrid(-8, 8, n, -8, 8, n) for n in (128, 256)}
    residuals = {n: {} for n in grids}
    for n, grid in grids.items():
        funcs = _function_set(grid)
        phi = gaussian_phi(grid)
        for (fa, F), (fb, G) in itertools.combinations(funcs.items(), 2):
            res = commutator_residual(F, G, phi, hbar=1.0, stencil_order=4)
            residuals[n][(fa, fb)] = res.relative_norm
    runtime = time.monotonic() - start

    worst = max(residuals[256].values())
    orders = []
    for pair, r256 in residuals[256].items():
        r128 = residuals[128][pair]
        if r128 > 1e-13 and r256 > 1e-15:
            orders.append(np.log2(r128 / r256))
    min_order = min(orders)
    ok = worst < 1e-2 and min_order >= 3.5 and runtime < 30.0
    report("C1 algebra-isomorphism", ok,
           f"21 pairs, worst residual {worst:.3e} < 1e-2, "
           f"min order {min_order:.2f} >= 3.5, runtime {runtime:.1f}s < 30s")


def test_c2_canonical_pair():
    grid = PhaseSpaceGrid(-8, 8, 256, -8, 8, 256)
    hbar = 1.0
    phi = gaussian_phi(grid)
    q_op = build_vanhove(coordinate_q(grid), hbar)
    p_op = build_vanhove(coordinate_p(grid), hbar)
    comm = q_op(p_op(phi)) - p_op(q_op(phi))
    rel = norm_l2(grid, comm - 1j * hbar * phi) / norm_l2(grid, phi)
    report("C2 canonical-pair", rel < 1e-3,
           f"|([O_q,O_p] - i hbar) phi| relative {rel:.3e} < 1e-3")


def test_c3_power_rule_failure():
    grid = PhaseSpaceGrid(-8, 8, 256, -8, 8, 256)
    hbar, wp = 1.0, 1.0
    phi = gaussian_phi(grid, widths=(1.0, wp))
    q_op = build_vanhove(coordinate_q(grid), hbar)
    q2_op = build_vanhove(monomial(grid, 2, 0), hbar)
    gap = q_op(q_op(phi)) - q2_op(phi)
    _, P = grid.mesh()
    d2phi_dp2 = phi * ((P / (2 * wp ** 2)) ** 2 - 1 / (2 * wp ** 2))
    nphi = norm_l2(grid, phi)
    closed_form = norm_l2(grid, gap + hbar ** 2 * d2phi_dp2) / nphi
    magnitude = norm_l2(grid, gap) / nphi
    ok = closed_form < 1e-3 and magnitude > 1e-2
    report("C3 power-rule-failure", ok,
           f"closed-form residual {closed_form:.3e} < 1e-3, "
           f"failure size {magnitude:.3e} > 1e-2")


@pytest.fixture(scope="module")
def constrained_bundle():
    grid = PhaseSpaceGrid(-1.0, 1.0, 161, 4.0, 6.0, 161)
    H = harmonic_hamiltonian(grid)
    spec = SigmaSpec(H=H, eta=ho_eta(grid), tau=ho_tau(grid),
                     reference=(0.0, 5.0))
    state = trajectory_bundle_state(spec, center=(0.0, 5.0), widths=(0.1, 0.1))
    return grid, H, spec, state


def test_c4_constraint_machinery(constrained_bundle):
    grid, H, spec, state = constrained_bundle
    rep = verify_constraints(state, H, dsigma_dt=-H.values)
    # analytic time derivative of the constructed sigma
    dt = 0.37
    s0 = construct_sigma(spec)
    s1 = construct_sigma(spec.at_time(dt))
    dsdt_err = float(np.max(np.abs((s1.values - s0.values) / dt + H.values)))
    from dataclasses import replace
    Q, P = grid.mesh()
    defect = replace(state, sigma=PhaseFunction(
        grid, state.sigma.values + 0.5 * Q * P))
    rep_defect = verify_constraints(defect, H, dsigma_dt=-H.values)
    ok = (rep.r1 < 1e-3 and rep.r2 < 1e-3 and rep.r3 == 0.0
          and dsdt_err < 1e-10 and rep_defect.r1 > 1e-1)
    report("C4 constraint-machinery", ok,
           f"r1 {rep.r1:.3e} < 1e-3, r2 {rep.r2:.3e} < 1e-3, "
           f"|dsigma/dt + H| {dsdt_err:.2e}, defect r1 {rep_defect.r1:.3f} > 0.1")


def test_c5_expectation_identity(constrained_bundle):
    grid, H, spec, state = constrained_bundle
    res = expectation(H, state)
    Q, P = grid.mesh()
    from dataclasses import replace
    sweep = []
    for lam in (0.0, 0.1, 0.2):
        s = replace(state, sigma=PhaseFunction(
            grid, state.sigma.values + lam * Q * P))
        sweep.append(expectation(H, s).rel_discrepancy)
    ok = res.rel_discrepancy < 1e-3 and sweep[0] < sweep[1] < sweep[2]
    report("C5 expectation-identity", ok,
           f"relative discrepancy {res.rel_discrepancy:.3e} < 1e-3, "
           f"defect sweep {[f'{v:.3e}' for v in sweep]} increasing")


def test_c6_dynamics():
    grid = PhaseSpaceGrid(-5, 5, 256, -5, 5, 256)
    H = harmonic_hamiltonian(grid)
    spec = SigmaSpec(H=H, eta=ho_eta(grid), tau=ho_tau(grid), reference=(0.0, 2.0))
    state = trajectory_bundle_state(spec, center=(0.0, 2.0), widths=(0.5, 0.5))
    config = EvolutionConfig(dt=T_HO / 2000, t_final=T_HO)
    e0 = expectation(H, state).operator_value
    result = evolve(state, H, config)
    final = result.state
    l1 = float(integrate_values(grid, np.abs(final.rho.values - state.rho.values)))
    norm_drift = abs(result.net_deficit)
    energy_drift = abs(expectation(H, final).operator_value - e0) / abs(e0)

    quarter = T_HO / 4
    stepped = evolve(state, H, EvolutionConfig(dt=T_HO / 2000, t_final=quarter)).state
    direct = propagator_apply(state, H, spec, t=quarter, dt=T_HO / 2000)
    prop_l1 = float(integrate_values(grid, np.abs(direct.rho.values
                                                  - stepped.rho.values)))
    d = direct.sigma.values - stepped.sigma.values
    period = 2 * np.pi * state.hbar
    d -= period * np.round(d / period)
    mask = np.zeros(grid.qp_shape, bool)
    for s in (direct, stepped):
        if s.sigma_mask is not None:
            mask |= s.sigma_mask
    w = np.where(mask, 0.0, stepped.rho.values)
    prop_sigma = float(np.sqrt(integrate_values(grid, w * d ** 2)))

    ok = (l1 < 1e-2 and norm_drift < 1e-4 and energy_drift < 1e-3
          and prop_l1 < 1e-2 and prop_sigma < 1e-2)
    report("C6 dynamics", ok,
           f"period L1 {l1:.3e} < 1e-2, norm drift {norm_drift:.3e} < 1e-4, "
           f"energy drift {energy_drift:.3e} < 1e-3, propagator L1 "
           f"{prop_l1:.3e} / sigma {prop_sigma:.3e} < 1e-2")


def test_c7_time_operator():
    q0, p0 = 1.0, 0.8
    E0 = 0.5 * (q0 ** 2 + p0 ** 2)
    flow = tau_flow(q0, p0, lambda_target=0.9 * E0, dlam=E0 / 2000)
    h_err = float(np.max(np.abs(flow.H - (E0 - flow.lambdas))))
    scale = np.sqrt((E0 - flow.lambdas) / E0)
    q_err = float(np.max(np.abs(flow.q - q0 * scale)))
    p_err = float(np.max(np.abs(flow.p - p0 * scale)))
    stopped = []
    for target in (1.001 * E0, 2 * E0, 50 * E0):
        res = tau_flow(q0, p0, lambda_target=target, dlam=E0 / 500)
        stopped.append(res.termination_reason == INCOMPLETENESS_BOUNDARY
                       and res.H[-1] > 0)
    ok = h_err < 1e-4 and q_err < 1e-4 and p_err < 1e-4 and all(stopped)
    report("C7 time-operator", ok,
           f"H error {h_err:.2e} < 1e-4, q/p scaling errors {q_err:.2e}/"
           f"{p_err:.2e} < 1e-4, {len(stopped)}/3 over-requests hit the "
           "incompleteness boundary")


def test_c8_superposition_diagnostic():
    hbar, w, p0 = 0.01, 0.25, 2.0
    grid = PhaseSpaceGrid(-1.5, 1.5, 401, 1.0, 3.0, 301)
    H = harmonic_hamiltonian(grid)
    spec = SigmaSpec(H=H, eta=ho_eta(grid), tau=ho_tau(grid), reference=(0.0, p0))
    s1 = trajectory_bundle_state(spec, center=(-2 * w, p0), widths=(w, w), hbar=hbar)
    s2 = trajectory_bundle_state(spec, center=(+2 * w, p0), widths=(w, w), hbar=hbar)
    base = max(verify_constraints(s1, H, -H.values).r1,
               verify_constraints(s2, H, -H.values).r1)
    _, rep, fringe = superposition_diagnostic(s1, s2, (1.0, 1.0), H)
    ok = fringe.contrast > 0.5 and rep.r1 > 10 * base
    report("C8 superposition", ok,
           f"fringe contrast {fringe.contrast:.3f} > 0.5, residual blowup "
           f"{rep.r1 / base:.0f}x > 10x")


def test_c9_qubit_measurement():
    config = MeasurementConfig(kappa=2.0, T=1.0, w_plus=0.7, epsilon=0.05)
    grid = PhaseSpaceGrid(-3.0, 3.0, 241, -0.35, 0.35, 57)
    pre = conditional_density(initial_pointer_state(grid, config))
    res = qubit_measurement_run(config, grid)
    post = conditional_density(res.state)
    pos, _ = res.pointer_masses()
    d = post.diagonal
    ok = (abs(pos - 0.700) < 1e-3
          and abs(pre.offdiag_magnitude - np.sqrt(0.21)) < 1e-3
          and post.offdiag_magnitude < 1e-6
          and abs(d[0] - 0.7) < 1e-3 and abs(d[1] - 0.3) < 1e-3)
    report("C9 qubit-measurement", ok,
           f"positive mass {pos:.6f} = 0.700 +- 1e-3, pre offdiag "
           f"{pre.offdiag_magnitude:.6f} = sqrt(0.21) +- 1e-3, post offdiag "
           f"{post.offdiag_magnitude:.2e} < 1e-6, diag ({d[0]:.4f}, {d[1]:.4f})")


def test_c10_continuous_hybrid():
    # 64^3, 1000 steps, harmonic coupling 0.5 k (q - x)^2.
    k_c = 0.5
    grid = PhaseSpaceGrid(-2.5, 2.5, 64, -2.5, 2.5, 64,
                          x_min=-6.0, x_max=6.0, n_x=64)
    Q = grid.q[:, None, None]
    P = grid.p[None, :, None]
    X = grid.x[None, None, :]
    psi = (np.exp(-(Q - 0.2) ** 2 / (4 * 0.5 ** 2) - P ** 2 / (4 * 0.5 ** 2))
           * np.exp(-(X + 0.2) ** 2 / (4 * 0.6 ** 2))).astype(complex)
    state = HybridStateContinuous(
        grid, psi, m_C=1.0, m_Q=1.0,
        potential=lambda q, x: 0.5 * k_c * (q - x) ** 2,
        dV_dq=lambda q, x: k_c * (q - x)).normalized()
    e0 = hybrid_energy(state).real
    final, _ = evolve_hybrid(state, dt=1e-3, n_steps=1000)
    norm_drift = abs(final.norm() - 1.0)
    energy_drift = abs(hybrid_energy(final).real - e0) / abs(e0)

    free = HybridStateContinuous(grid, psi, m_C=1.0, m_Q=1.0).normalized()
    free_T, _ = evolve_hybrid(free, dt=1e-3, n_steps=200)
    fact = factorization_defect(free_T)

    g2 = grid_2d(grid)
    seps = [
        separability_check(coordinate_q(g2), QuantumOperator.position(), final),
        separability_check(coordinate_p(g2), QuantumOperator.momentum(), final),
        separability_check(harmonic_hamiltonian(g2), QuantumOperator.position(2),
                           final),
    ]
    ok = (norm_drift < 1e-4 and energy_drift < 1e-3 and fact < 1e-6
          and max(seps) < 1e-6)
    report("C10 continuous-hybrid", ok,
           f"norm drift {norm_drift:.3e} < 1e-4, energy drift "
           f"{energy_drift:.3e} < 1e-3 over 1000 steps at 64^3, V=0 "
           f"factorization {fact:.2e} < 1e-6, separability {max(seps):.2e} < 1e-6")


def test_c11_determinism(tmp_path):
    mismatched = []
    for name, _, path in cli.bundled_scenarios():
        roots = (tmp_path / "run_a", tmp_path / "run_b")
        for root in roots:
            code, lines = cli.run_scenario(path, root)
            assert code == cli.EXIT_OK, (name, lines)
        stem = name[:-4]
        a_dir, b_dir = roots[0] / stem, roots[1] / stem
        a_files = sorted(p.name for p in a_dir.iterdir())
        b_files = sorted(p.name for p in b_dir.iterdir())
        if a_files != b_files:
            mismatched.append((name, "file sets differ"))
            continue
        for fn in a_files:
            if (a_dir / fn).read_bytes() != (b_dir / fn).read_bytes():
                mismatched.append((name, fn))
    ok = not mismatched
    report("C11 determinism", ok,
           "all bundled scenarios byte-identical across two runs"
           if ok else f"mismatches: {mismatched}")
