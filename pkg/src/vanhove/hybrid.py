"""Hybrid classical-quantum dynamics on a joint wavefunction.

A classical particle (phase-space coordinates q, p; operators of the
van Hove type) couples to a quantum particle (position x; Schrodinger
operators) through a potential V(|q - x|), acting on psi(q, p, x):

    i hbar dpsi/dt = [ -hbar^2 d_x^2 / 2 m_Q - p^2/2 m_C + V
                       + i hbar (d_q V d_p - (p/m_C) d_q) ] psi.

The step is Strang-split: half a spectral step of the quantum kinetic
term, a full phase rotation of the multiplicative part, a full
semi-Lagrangian step of the classical advection (characteristics depend
on x through V), and the closing quantum half step.

The same module carries the qubit-measurement model: a two-component
pointer state (psi_plus, psi_minus) on (q, p), displaced rigidly by
+-K = kappa T under the impulsive-coupling approximation, with the
pointer density and the 2x2 conditional density operator as outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .phasespace import (
    PhaseFunction,
    PhaseSpaceGrid,
    diff_values,
    integrate_values,
)
from .operators import build_vanhove
from ._resample import GridResampler

__all__ = [
    "HybridStateContinuous",
    "QuantumOperator",
    "hybrid_step",
    "evolve_hybrid",
    "hybrid_norm",
    "hybrid_energy",
    "hybrid_marginals",
    "separability_check",
    "factorization_defect",
    "QubitHybridState",
    "MeasurementConfig",
    "MeasurementResult",
    "qubit_measurement_run",
    "conditional_density",
    "ConditionalDensityOperator",
    "pointer_density",
    "mollified_delta",
]


# ---------------------------------------------------------------------------
# Continuous hybrid system
# ---------------------------------------------------------------------------

@dataclass
class HybridStateContinuous:
    """psi(q, p, x) plus masses and the interaction potential.

    ``potential``/``dV_dq`` take (q, x) arrays; for the Galilean-invariant
    case they depend only on q - x.  States are immutable values: stepping
    returns a new instance sharing the static pieces.
    """

    grid: PhaseSpaceGrid
    psi: np.ndarray
    m_C: float
    m_Q: float
    hbar: float = 1.0
    potential: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    dV_dq: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    t: float = 0.0

    def __post_init__(self):
        if not self.grid.has_x:
            raise ValueError("hybrid states need a grid with an x axis")
        self.psi = np.asarray(self.psi, dtype=complex)
        if self.psi.shape != self.grid.shape:
            raise ValueError("psi shape does not match grid")
        if (self.potential is None) != (self.dV_dq is None):
            raise ValueError("potential and dV_dq must be supplied together")

    def norm(self) -> float:
        return hybrid_norm(self)

    def normalized(self) -> "HybridStateContinuous":
        return replace(self, psi=self.psi / math.sqrt(self.norm()))


def hybrid_norm(state: HybridStateContinuous) -> float:
    return float(integrate_values(state.grid, np.abs(state.psi) ** 2))


def _coupling_fields(state: HybridStateContinuous):
    """V(q, x) and dV/dq(q, x) broadcast to the full grid."""
    grid = state.grid
    Q = grid.q[:, None, None]
    X = grid.x[None, None, :]
    if state.potential is None:
        zero = np.zeros((grid.n_q, 1, grid.n_x))
        return zero, zero
    V = np.broadcast_to(state.potential(Q, X), (grid.n_q, 1, grid.n_x)).copy()
    dV = np.broadcast_to(state.dV_dq(Q, X), (grid.n_q, 1, grid.n_x)).copy()
    return V, dV


class _HybridKernel:
    """Precomputed per-step data: spectral phases, multiplicative phase and
    the compiled backward-characteristic resampler (time-independent
    Hamiltonian)."""

    def __init__(self, state: HybridStateContinuous, dt: float,
                 interpolation: str = "cubic"):
        grid = state.grid
        self.grid = grid
        self.dt = dt
        hbar, m_C, m_Q = state.hbar, state.m_C, state.m_Q

        k = 2 * np.pi * np.fft.fftfreq(grid.n_x, d=grid.h_x)
        self.kin_half = np.exp(-1j * hbar * k ** 2 * dt / (4 * m_Q))[None, None, :]

        V, dV = _coupling_fields(state)
        P = grid.p[None, :, None]
        theta = V - P ** 2 / (2 * m_C)
        self.phase = np.exp(-1j * theta * dt / hbar)

        # Backward Verlet step of the classical characteristics, per x slice.
        Q = grid.q[:, None, None]
        X = grid.x[None, None, :]
        q = np.broadcast_to(Q, grid.shape).astype(float).copy()
        p = np.broadcast_to(P, grid.shape).astype(float).copy()
        if state.potential is None:
            force = lambda qq: np.zeros_like(qq)
        else:
            force = lambda qq: state.dV_dq(qq, np.broadcast_to(X, qq.shape))
        p_half = p + 0.5 * dt * force(q)
        q_b = q - dt * p_half / m_C
        p_b = p_half + 0.5 * dt * force(q_b)

        order = 3 if interpolation == "cubic" else 1
        self.resample = GridResampler(grid.shape, (q_b - grid.q_min) / grid.h_q,
                                      (p_b - grid.p_min) / grid.h_p, order)

    def step(self, psi: np.ndarray) -> np.ndarray:
        out = np.fft.ifft(self.kin_half * np.fft.fft(psi, axis=2), axis=2)
        out *= self.phase
        out = self.resample(out)
        out = np.fft.ifft(self.kin_half * np.fft.fft(out, axis=2), axis=2)
        return out


def hybrid_step(state: HybridStateContinuous, dt: float,
                interpolation: str = "cubic") -> HybridStateContinuous:
    """One Strang-split step of the hybrid equation of motion."""
    kernel = _HybridKernel(state, dt, interpolation)
    return replace(state, psi=kernel.step(state.psi), t=state.t + dt)


def evolve_hybrid(state: HybridStateContinuous, dt: float, n_steps: int,
                  interpolation: str = "cubic",
                  record_every: int = 0) -> tuple[HybridStateContinuous, list[dict]]:
    """Run n_steps with a cached kernel; optionally record norm and energy."""
    kernel = _HybridKernel(state, dt, interpolation)
    history: list[dict] = []

    def record(s):
        e = hybrid_energy(s)
        history.append({"t": s.t, "norm": s.norm(), "energy": e.real,
                        "energy_imag": e.imag})

    if record_every:
        record(state)
    psi = state.psi
    for k in range(n_steps):
        psi = kernel.step(psi)
        state = replace(state, psi=psi, t=state.t + dt)
        if record_every and ((k + 1) % record_every == 0 or k == n_steps - 1):
            record(state)
    return state, history


def hybrid_energy(state: HybridStateContinuous) -> complex:
    """<psi | O_H psi> for the hybrid Hamiltonian (4th-order stencils for
    the classical advection, twice-applied first derivative for d_x^2)."""
    grid = state.grid
    psi = state.psi
    hbar, m_C, m_Q = state.hbar, state.m_C, state.m_Q
    V, dV = _coupling_fields(state)
    P = grid.p[None, :, None]

    dx = diff_values(psi, grid.h_x, 2, 4)
    dxx = diff_values(dx, grid.h_x, 2, 4)
    dq = diff_values(psi, grid.h_q, 0, 4)
    dp = diff_values(psi, grid.h_p, 1, 4)
    H_psi = (-hbar ** 2 / (2 * m_Q) * dxx
             + (V - P ** 2 / (2 * m_C)) * psi
             + 1j * hbar * (dV * dp - (P / m_C) * dq))
    return complex(integrate_values(grid, np.conjugate(psi) * H_psi))


def hybrid_marginals(state: HybridStateContinuous) -> tuple[PhaseFunction, np.ndarray]:
    """Classical density on (q, p) and quantum density on x, each the
    integral of |psi|^2 over the other sector's coordinates."""
    grid = state.grid
    rho = np.abs(state.psi) ** 2
    rho_C = np.trapezoid(rho, dx=grid.h_x, axis=2)
    rho_Q = np.trapezoid(np.trapezoid(rho, dx=grid.h_p, axis=1), dx=grid.h_q,
                         axis=0)
    return PhaseFunction(grid_2d(grid), rho_C), rho_Q


def grid_2d(grid: PhaseSpaceGrid) -> PhaseSpaceGrid:
    """The (q, p) restriction of a hybrid grid."""
    return PhaseSpaceGrid(grid.q_min, grid.q_max, grid.n_q,
                          grid.p_min, grid.p_max, grid.n_p)


@dataclass(frozen=True)
class QuantumOperator:
    """Operator acting on the x axis only: multiplicative g(x) or the
    momentum -i hbar d_x."""

    kind: str                      # "multiplicative" or "momentum"
    fun: Callable[[np.ndarray], np.ndarray] | None = None

    @classmethod
    def position(cls, power: int = 1) -> "QuantumOperator":
        return cls("multiplicative", lambda x: x ** power)

    @classmethod
    def function(cls, fun) -> "QuantumOperator":
        return cls("multiplicative", fun)

    @classmethod
    def momentum(cls) -> "QuantumOperator":
        return cls("momentum")

    def apply(self, psi: np.ndarray, grid: PhaseSpaceGrid,
              hbar: float) -> np.ndarray:
        if self.kind == "multiplicative":
            return self.fun(grid.x)[None, None, :] * psi
        if self.kind == "momentum":
            return -1j * hbar * diff_values(psi, grid.h_x, 2, 4)
        raise ValueError(f"unknown quantum operator kind {self.kind!r}")


def separability_check(F: PhaseFunction, G: QuantumOperator,
                       state: HybridStateContinuous,
                       stencil_order: int = 4) -> float:
    """|| [O_F, G] psi || / || psi ||.

    F lives on (q, p), G on x, so the commutator vanishes identically;
    what remains measures discretization roundoff.  This is the strong
    separability of the hybrid theory: classical van Hove operators
    commute with every quantum observable.
    """
    grid = state.grid
    op = build_vanhove(F, hbar=state.hbar, stencil_order=stencil_order)
    a = op.apply(G.apply(state.psi, grid, state.hbar))
    b = G.apply(op.apply(state.psi), grid, state.hbar)
    num = math.sqrt(float(integrate_values(grid, np.abs(a - b) ** 2)))
    den = math.sqrt(float(integrate_values(grid, np.abs(state.psi) ** 2)))
    return num / den


def factorization_defect(state: HybridStateContinuous) -> float:
    """Second singular value over the first for psi reshaped to
    (classical nodes) x (quantum nodes); zero for product states."""
    grid = state.grid
    mat = state.psi.reshape(grid.n_q * grid.n_p, grid.n_x)
    s = np.linalg.svd(mat, compute_uv=False)
    return float(s[1] / s[0]) if s[0] > 0 else 0.0


# ---------------------------------------------------------------------------
# Qubit measurement by a classical pointer
# ---------------------------------------------------------------------------

def mollified_delta(values: np.ndarray, eps: float) -> np.ndarray:
    """Normalized Gaussian standing in for a delta function."""
    return np.exp(-0.5 * (values / eps) ** 2) / (eps * math.sqrt(2 * math.pi))


@dataclass
class QubitHybridState:
    """Two-component pointer wavefunction psi = (psi_plus, psi_minus) on
    the classical (q, p) grid; the component index is the qubit."""

    grid: PhaseSpaceGrid
    psi_plus: np.ndarray
    psi_minus: np.ndarray
    hbar: float = 1.0
    t: float = 0.0

    def __post_init__(self):
        self.psi_plus = np.asarray(self.psi_plus, dtype=complex)
        self.psi_minus = np.asarray(self.psi_minus, dtype=complex)
        for c in (self.psi_plus, self.psi_minus):
            if c.shape != self.grid.qp_shape:
                raise ValueError("component shape does not match grid")

    def component_masses(self) -> tuple[float, float]:
        return (float(integrate_values(self.grid, np.abs(self.psi_plus) ** 2)),
                float(integrate_values(self.grid, np.abs(self.psi_minus) ** 2)))

    def total_mass(self) -> float:
        return sum(self.component_masses())


@dataclass(frozen=True)
class MeasurementConfig:
    """von Neumann pointer measurement of a qubit.

    ``kappa`` is the pointer velocity per sigma_3 eigenvalue; K = kappa*T
    is the total displacement.  ``B0`` is the qubit splitting (a pure
    relative phase, dropped entirely in the impulsive approximation);
    V_C is an optional classical pointer potential used only by the
    full-Hamiltonian run.
    """

    kappa: float
    T: float
    w_plus: float
    epsilon: float
    B0: float = 0.0
    V_C: Callable[[np.ndarray], np.ndarray] | None = None
    dV_C: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not (0.0 <= self.w_plus <= 1.0):
            raise ValueError("w_plus must lie in [0, 1]")
        if self.T <= 0 or self.epsilon <= 0:
            raise ValueError("T and epsilon must be positive")
        if self.K <= 0:
            raise ValueError("total displacement K must be positive")
        if (self.V_C is None) != (self.dV_C is None):
            raise ValueError("V_C and dV_C must be supplied together")

    @property
    def K(self) -> float:
        return self.kappa * self.T

    @property
    def w_minus(self) -> float:
        return 1.0 - self.w_plus


@dataclass
class ConditionalDensityOperator:
    """2x2 quantum state of the qubit conditioned on the classical sector:
    entries are phase-space integrals of rho_+, rho_-, and
    sqrt(rho_+ rho_-) exp(+-i (sigma_+ - sigma_-)/hbar)."""

    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (2, 2):
            raise ValueError("conditional density operator must be 2x2")

    @property
    def offdiag_magnitude(self) -> float:
        return float(abs(self.matrix[0, 1]))

    @property
    def diagonal(self) -> tuple[float, float]:
        return float(self.matrix[0, 0].real), float(self.matrix[1, 1].real)

    def validate(self) -> dict:
        m = self.matrix
        herm = float(np.max(np.abs(m - m.conj().T)))
        trace = float(abs(m.trace() - 1.0))
        eigs = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        return {"hermiticity_defect": herm, "trace_defect": trace,
                "min_eigenvalue": float(eigs.min())}

    def is_physical(self, herm_tol: float = 1e-10, trace_tol: float = 1e-4,
                    positivity_tol: float = 1e-8) -> bool:
        v = self.validate()
        return (v["hermiticity_defect"] < herm_tol
                and v["trace_defect"] < trace_tol
                and v["min_eigenvalue"] > -positivity_tol)


def conditional_density(state: QubitHybridState) -> ConditionalDensityOperator:
    """Integrate the 2x2 sector densities over the classical variables.

    The off-diagonal integrand psi_+ conj(psi_-) equals
    sqrt(rho_+ rho_-) exp(i (sigma_+ - sigma_-)/hbar) nodewise.
    """
    grid = state.grid
    r11 = float(integrate_values(grid, np.abs(state.psi_plus) ** 2))
    r22 = float(integrate_values(grid, np.abs(state.psi_minus) ** 2))
    r12 = complex(integrate_values(grid, state.psi_plus
                                   * np.conjugate(state.psi_minus)))
    return ConditionalDensityOperator(np.array([[r11, r12],
                                                [np.conjugate(r12), r22]]))


def pointer_density(state: QubitHybridState) -> np.ndarray:
    """P(q) = sum over components of the p-integrated density."""
    rho = np.abs(state.psi_plus) ** 2 + np.abs(state.psi_minus) ** 2
    return np.trapezoid(rho, dx=state.grid.h_p, axis=1)


@dataclass
class MeasurementResult:
    state: QubitHybridState
    pointer: np.ndarray                  # P(q, T) on grid.q
    series: list[tuple[float, float]]    # (t, |rho_12|)
    config: MeasurementConfig
    mode: str

    def pointer_masses(self) -> tuple[float, float]:
        grid = self.state.grid
        q = grid.q
        pos = np.where(q > 0, self.pointer, 0.0)
        neg = np.where(q < 0, self.pointer, 0.0)
        return (float(np.trapezoid(pos, dx=grid.h_q)),
                float(np.trapezoid(neg, dx=grid.h_q)))

    def to_report(self) -> dict:
        rho = conditional_density(self.state)
        pos, neg = self.pointer_masses()
        return {
            "w_plus": self.config.w_plus,
            "w_minus": self.config.w_minus,
            "K": self.config.K,
            "epsilon": self.config.epsilon,
            "mode": self.mode,
            "pointer_mass_positive": pos,
            "pointer_mass_negative": neg,
            "rho_QC": [[[float(v.real), float(v.imag)] for v in row]
                       for row in rho.matrix],
            "offdiag_magnitude_series": [[float(t), float(v)]
                                         for t, v in self.series],
        }


def _pointer_component(grid: PhaseSpaceGrid, weight: float, shift: float,
                       eps: float) -> np.ndarray:
    Q, P = grid.mesh()
    rho = weight * mollified_delta(Q - shift, eps) * mollified_delta(P, eps)
    return np.sqrt(rho).astype(complex)


def initial_pointer_state(grid: PhaseSpaceGrid, config: MeasurementConfig,
                          hbar: float = 1.0) -> QubitHybridState:
    """Both components localized at the origin with weights w_plus/w_minus."""
    return QubitHybridState(
        grid,
        _pointer_component(grid, config.w_plus, 0.0, config.epsilon),
        _pointer_component(grid, config.w_minus, 0.0, config.epsilon),
        hbar=hbar)


def qubit_measurement_run(config: MeasurementConfig, grid: PhaseSpaceGrid,
                          hbar: float = 1.0, m_C: float = 1.0,
                          mode: str = "von_neumann", n_series: int = 21,
                          n_steps: int = 200) -> MeasurementResult:
    """Measure the qubit: displace the pointer components to +-K.

    mode "von_neumann" keeps only the impulsive coupling term, under which
    the components displace rigidly: psi_pm(q, ., t) = psi_pm(q -+ kappa t, ., 0),
    evaluated analytically.  mode "full" retains the classical kinetic
    term, V_C and B0, and integrates the two decoupled component equations
    by phase rotation plus semi-Lagrangian advection with velocities
    (p/m_C +- kappa, -V_C').
    """
    K, eps = config.K, config.epsilon
    if grid.q_max - K < 4 * eps or -grid.q_min - K < 4 * eps:
        raise ValueError("displacement K lands within 4*epsilon of the grid "
                         "boundary; widen the q extent")
    times = np.linspace(0.0, config.T, n_series)
    series = []

    if mode == "von_neumann":
        for t in times:
            st = QubitHybridState(
                grid,
                _pointer_component(grid, config.w_plus, +config.kappa * t, eps),
                _pointer_component(grid, config.w_minus, -config.kappa * t, eps),
                hbar=hbar, t=float(t))
            series.append((float(t), conditional_density(st).offdiag_magnitude))
        final = st
    elif mode == "full":
        final, series = _full_measurement_run(config, grid, hbar, m_C,
                                              n_series, n_steps)
    else:
        raise ValueError(f"unknown measurement mode {mode!r}")

    return MeasurementResult(final, pointer_density(final), series, config,
                             mode)


def _full_measurement_run(config: MeasurementConfig, grid: PhaseSpaceGrid,
                          hbar: float, m_C: float, n_series: int,
                          n_steps: int):
    dt = config.T / n_steps
    Q, P = grid.mesh()
    V = config.V_C(Q) if config.V_C is not None else np.zeros(grid.qp_shape)
    dV = config.dV_C if config.dV_C is not None else (lambda q: np.zeros_like(q))

    comps = {}
    resample = {}
    for sign in (+1, -1):
        theta = -P ** 2 / (2 * m_C) + V + sign * config.B0
        comps[sign] = np.exp(-1j * theta * dt / hbar)
        # backward Verlet with drift velocity p/m_C + sign*kappa
        p_half = P + 0.5 * dt * dV(Q)
        q_b = Q - dt * (p_half / m_C + sign * config.kappa)
        p_b = p_half + 0.5 * dt * dV(q_b)
        resample[sign] = GridResampler(grid.qp_shape,
                                       (q_b - grid.q_min) / grid.h_q,
                                       (p_b - grid.p_min) / grid.h_p, 3)

    def advect(psi, sign):
        return resample[sign](psi)

    state = initial_pointer_state(grid, config, hbar)
    plus, minus = state.psi_plus, state.psi_minus
    record_at = {int(round(f * n_steps)) for f in np.linspace(0, 1, n_series)}
    series = []
    st = state
    if 0 in record_at:
        series.append((0.0, conditional_density(st).offdiag_magnitude))
    for k in range(1, n_steps + 1):
        plus = advect(comps[+1] * plus, +1)
        minus = advect(comps[-1] * minus, -1)
        if k in record_at:
            st = QubitHybridState(grid, plus, minus, hbar=hbar, t=k * dt)
            series.append((k * dt, conditional_density(st).offdiag_magnitude))
    final = QubitHybridState(grid, plus, minus, hbar=hbar, t=config.T)
    return final, series
