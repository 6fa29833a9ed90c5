"""Transport of classical wavefunctions and expectation values.

The density obeys the Liouville equation and the action obeys
d sigma / dt = L along Hamiltonian characteristics, so a step is
semi-Lagrangian: every node is traced one step backward along the flow,
both fields are interpolated there, and sigma picks up the Lagrangian
increment (midpoint rule).  Pure transport with backward characteristics
is unconditionally stable; interpolation is the only error source and is
selectable (linear or cubic).

The classical propagator does the same in one shot over a finite time,
with the phase increment taken from the admissible sigma evaluated at the
two trajectory endpoints.

Nodes whose backward characteristic leaves the grid never receive a value
from the initial support: their density is zeroed (mass deficit logged)
and their sigma is marked untrusted and excluded from residuals.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .operators import build_vanhove, operator_expectation
from .phasespace import (
    PhaseFunction,
    PhaseSpaceGrid,
    _rk4_steps,
    _verlet_steps,
    integrate_values,
)
from .states import ClassicalWavefunction, SigmaSpec, verify_constraints
from ._resample import GridResampler

__all__ = [
    "EvolutionConfig",
    "EvolutionResult",
    "ExpectationResult",
    "liouville_step",
    "evolve",
    "propagator_apply",
    "expectation",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvolutionConfig:
    """Numerical choices for Liouville transport."""

    dt: float
    t_final: float = 0.0
    integrator: str = "verlet"           # or "rk4"
    interpolation: str = "cubic"         # or "linear"
    renormalize: bool = True
    deficit_threshold: float = 1e-8
    cfl_warn_cells: float = 5.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_final < 0:
            raise ValueError("t_final must be non-negative")
        if self.integrator not in ("verlet", "rk4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.interpolation not in ("linear", "cubic"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")

    @property
    def interp_order(self) -> int:
        return 3 if self.interpolation == "cubic" else 1


def _backtrace(grid: PhaseSpaceGrid, H: PhaseFunction, dt: float,
               integrator: str) -> tuple[np.ndarray, np.ndarray]:
    """One backward step of the characteristics from every node."""
    Q, P = grid.mesh()
    q = Q.ravel().copy()
    p = P.ravel().copy()
    if integrator == "verlet":
        if not H.meta.get("separable"):
            raise ValueError("verlet transport requires a separable Hamiltonian")
        q, p = _verlet_steps(q, p, 1, -dt, H.meta["mass"], H.meta["dVdq"])
    else:
        if not H.has_analytic_gradient:
            raise ValueError("rk4 transport requires analytic dH/dq and dH/dp")
        q, p = _rk4_steps(q, p, 1, -dt, H.d_dq, H.d_dp)
    return q.reshape(grid.qp_shape), p.reshape(grid.qp_shape)


def _index_coords(grid: PhaseSpaceGrid, q: np.ndarray, p: np.ndarray):
    iq = (q - grid.q_min) / grid.h_q
    ip = (p - grid.p_min) / grid.h_p
    inside = ((iq >= 0) & (iq <= grid.n_q - 1) & (ip >= 0) & (ip <= grid.n_p - 1))
    return np.vstack([iq.ravel(), ip.ravel()]), inside


def _interp(values: np.ndarray, coords: np.ndarray, order: int,
            mode: str = "mirror") -> np.ndarray:
    return ndimage.map_coordinates(values, coords, order=order, mode=mode,
                                   cval=0.0).reshape(values.shape)


def _lagrangian(H: PhaseFunction, q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """L = p^2/2m - V(q); needs the separable split carried by H."""
    if not H.meta.get("separable"):
        raise ValueError("action transport requires a separable Hamiltonian "
                         "(L = T - V split)")
    return p ** 2 / (2 * H.meta["mass"]) - H.meta["V"](q)


class _TransportKernel:
    """Precomputed backward-characteristic data for a time-independent H.

    The backtraced node coordinates, the inside mask and the Lagrangian
    increment do not change from step to step, so an evolution builds one
    kernel and reuses it.
    """

    def __init__(self, grid: PhaseSpaceGrid, H: PhaseFunction,
                 config: EvolutionConfig):
        self.grid = grid
        self.config = config
        dt = config.dt
        qb, pb = _backtrace(grid, H, dt, config.integrator)
        qh, ph = _backtrace(grid, H, 0.5 * dt, config.integrator)
        Q, P = grid.mesh()
        self.max_cells = max(float(np.max(np.abs(qb - Q))) / grid.h_q,
                             float(np.max(np.abs(pb - P))) / grid.h_p)
        if self.max_cells > config.cfl_warn_cells:
            warnings.warn(
                f"backtraced displacement of {self.max_cells:.1f} cells exceeds "
                f"{config.cfl_warn_cells:.0f}; interpolation quality degrades",
                RuntimeWarning, stacklevel=3)
        iq = (qb - grid.q_min) / grid.h_q
        ip = (pb - grid.p_min) / grid.h_p
        self.resample = GridResampler(grid.qp_shape, iq, ip, config.interp_order)
        self.inside = self.resample.inside
        # Nearest-node pullback indices for transporting the sigma mask
        # without diffusion.
        self.near_q = np.clip(np.rint(iq).astype(int), 0, grid.n_q - 1)
        self.near_p = np.clip(np.rint(ip).astype(int), 0, grid.n_p - 1)
        self.sigma_source = np.where(self.inside, dt * _lagrangian(H, qh, ph), 0.0)

    def step(self, state: ClassicalWavefunction) -> tuple[ClassicalWavefunction, float]:
        config = self.config
        rho_new = np.maximum(self.resample(state.rho.values), 0.0)
        sigma_new = self.resample(state.sigma.values) + self.sigma_source

        mask = ~self.inside
        if state.sigma_mask is not None and state.sigma_mask.any():
            mask = mask | state.sigma_mask[self.near_q, self.near_p]

        deficit = 1.0 - float(integrate_values(self.grid, rho_new))
        if config.renormalize and abs(deficit) > config.deficit_threshold:
            rho_new = rho_new / (1.0 - deficit)
        log.debug("liouville step t=%.6g -> %.6g deficit=%.3e", state.t,
                  state.t + config.dt, deficit)

        new = ClassicalWavefunction(
            PhaseFunction(self.grid, rho_new), PhaseFunction(self.grid, sigma_new),
            hbar=state.hbar, t=state.t + config.dt,
            sigma_mask=mask if mask.any() else None)
        return new, deficit


def liouville_step(state: ClassicalWavefunction, H: PhaseFunction,
                   config: EvolutionConfig) -> ClassicalWavefunction:
    """Advance the state by one dt of Liouville transport.

    rho is carried along backward characteristics; sigma is carried the
    same way and sourced by the Lagrangian integrated along the
    characteristic (midpoint rule).  Mass lost through the open boundary
    is renormalized away when above the configured threshold, and always
    logged.
    """
    new, _ = _TransportKernel(state.grid, H, config).step(state)
    return new


@dataclass
class EvolutionResult:
    state: ClassicalWavefunction
    times: np.ndarray
    history: list[dict]
    net_deficit: float
    max_abs_deficit: float


def evolve(state: ClassicalWavefunction, H: PhaseFunction,
           config: EvolutionConfig, observables: dict[str, PhaseFunction] | None = None,
           record_every: int = 0) -> EvolutionResult:
    """Run transport to ``config.t_final``, optionally recording a time
    series of norm, energy, constraint residuals and expectation
    discrepancies for the given observables."""
    n_steps = int(round(config.t_final / config.dt))
    observables = observables or {}
    history: list[dict] = []
    times = []

    def record(s: ClassicalWavefunction):
        row = {"t": s.t, "norm": s.norm()}
        res = expectation(H, s)
        row["energy"] = res.operator_value
        rep = verify_constraints(s, H, dsigma_dt=-H.values)
        row["r1"], row["r2"] = rep.r1, rep.r2
        for name, F in observables.items():
            row[f"discrepancy_{name}"] = expectation(F, s).abs_discrepancy
        history.append(row)
        times.append(s.t)

    if record_every:
        record(state)
    kernel = _TransportKernel(state.grid, H, config)
    net = 0.0
    worst = 0.0
    for k in range(n_steps):
        state, deficit = kernel.step(state)
        net += deficit
        worst = max(worst, abs(net))
        if record_every and ((k + 1) % record_every == 0 or k == n_steps - 1):
            record(state)
    return EvolutionResult(state, np.asarray(times), history, net, worst)


def propagator_apply(state0: ClassicalWavefunction, H: PhaseFunction,
                     spec: SigmaSpec, t: float, dt: float | None = None,
                     interpolation: str = "cubic",
                     integrator: str = "verlet",
                     renormalize: bool = True) -> ClassicalWavefunction:
    """Finite-time transport in one shot via the classical flow map.

    The density is evaluated at the backward image of each node (the
    kernel's delta functions select exactly the trajectory through it);
    the phase is the transported initial phase plus the increment of the
    admissible sigma between the trajectory endpoints, which is the action
    integral along the characteristic.
    """
    if t == 0.0:
        return replace(state0)
    grid = state0.grid
    if dt is None:
        dt = abs(t) / 1024
    Q, P = grid.mesh()
    q, p = Q.ravel().copy(), P.ravel().copy()
    n_steps = max(int(round(abs(t) / dt)), 1)
    step = -t / n_steps
    if integrator == "verlet":
        if not H.meta.get("separable"):
            raise ValueError("verlet transport requires a separable Hamiltonian")
        q, p = _verlet_steps(q, p, n_steps, step, H.meta["mass"], H.meta["dVdq"])
    else:
        if not H.has_analytic_gradient:
            raise ValueError("rk4 transport requires analytic dH/dq and dH/dp")
        q, p = _rk4_steps(q, p, n_steps, step, H.d_dq, H.d_dp)
    qb = q.reshape(grid.qp_shape)
    pb = p.reshape(grid.qp_shape)

    coords, inside = _index_coords(grid, qb, pb)
    inside = inside.reshape(grid.qp_shape)
    order = 3 if interpolation == "cubic" else 1

    rho_new = np.maximum(_interp(state0.rho.values, coords, order), 0.0)
    rho_new = np.where(inside, rho_new, 0.0)

    increment = spec.sigma_at(Q, P, t=spec.t + t) - spec.sigma_at(qb, pb, t=spec.t)
    sigma_new = _interp(state0.sigma.values, coords, order, mode="nearest") + increment
    sigma_new = np.where(inside, sigma_new, 0.0)

    mask = ~inside
    if state0.sigma_mask is not None and state0.sigma_mask.any():
        mask |= _interp(state0.sigma_mask.astype(float), coords, 0) > 0.5

    deficit = 1.0 - float(integrate_values(grid, rho_new))
    if renormalize and abs(deficit) > 1e-8:
        rho_new = rho_new / (1.0 - deficit)
    log.debug("propagator t=%.6g deficit=%.3e", t, deficit)

    return ClassicalWavefunction(
        PhaseFunction(grid, rho_new), PhaseFunction(grid, sigma_new),
        hbar=state0.hbar, t=state0.t + t,
        sigma_mask=mask if mask.any() else None)


@dataclass(frozen=True)
class ExpectationResult:
    """Operator expectation against the classical phase-space average.

    The two coincide exactly when the phase constraints hold; the
    discrepancy is therefore a physical diagnostic, not only a numerical
    one.  ``imag_leakage`` reports |Im <phi|O_F|phi>|, which measures
    residual asymmetry of the discretized operator.
    """

    operator_value: float
    classical_average: float
    abs_discrepancy: float
    rel_discrepancy: float
    imag_leakage: float


def expectation(F: PhaseFunction, state: ClassicalWavefunction,
                stencil_order: int = 4) -> ExpectationResult:
    """Re<phi|O_F|phi> versus integral of rho F."""
    op = build_vanhove(F, hbar=state.hbar, stencil_order=stencil_order)
    val = operator_expectation(op, state.phi())
    classical = float(integrate_values(state.grid, state.rho.values * F.values))
    abs_disc = abs(val.real - classical)
    denom = max(abs(classical), 1e-300)
    return ExpectationResult(val.real, classical, abs_disc, abs_disc / denom,
                             abs(val.imag))
