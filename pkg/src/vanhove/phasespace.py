"""Phase-space grids, scalar fields, finite-difference calculus and flow maps.

Everything downstream (operator construction, transport, hybrid dynamics)
is built on the primitives here: a uniform tensor grid over (q, p) with an
optional quantum axis x, real scalar fields on that grid, centered
finite-difference derivatives with order-matched one-sided boundary
stencils, Poisson brackets, Hamiltonian flow maps and trapezoidal
quadrature.

Fields are treated as immutable values: operations return new arrays and
never write into their inputs, so everything here is safe to share across
workers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "PhaseSpaceGrid",
    "PhaseFunction",
    "FlowMap",
    "PhysicalConstants",
    "GridMismatchError",
    "diff_values",
    "partial_derivative",
    "poisson_bracket",
    "poisson_bracket_auto",
    "hamiltonian_flow_map",
    "quadrature",
    "integrate_values",
    "norm_l2",
    "boundary_mass",
    "coordinate_q",
    "coordinate_p",
    "monomial",
    "constant_function",
    "linear_combination",
    "squared",
    "separable_hamiltonian",
    "harmonic_hamiltonian",
    "free_hamiltonian",
    "linear_potential_hamiltonian",
]

BOUNDARY_MASS_WARN = 1e-6


class GridMismatchError(ValueError):
    """Two fields that must share a grid do not."""


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Uniform tensor grid over one (q, p) pair, optionally times an x axis.

    Array layout is row-major with q slowest, then p, then x.  Only a single
    canonical pair is supported (``d == 1``); the x axis exists for hybrid
    classical-quantum states.
    """

    q_min: float
    q_max: float
    n_q: int
    p_min: float
    p_max: float
    n_p: int
    x_min: float | None = None
    x_max: float | None = None
    n_x: int | None = None

    def __post_init__(self):
        axes = [("q", self.q_min, self.q_max, self.n_q),
                ("p", self.p_min, self.p_max, self.n_p)]
        if self.has_x:
            axes.append(("x", self.x_min, self.x_max, self.n_x))
        elif any(v is not None for v in (self.x_min, self.x_max, self.n_x)):
            raise ValueError("x axis requires x_min, x_max and n_x together")
        for name, lo, hi, n in axes:
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError(f"{name} extent must be finite")
            if n < 8:
                raise ValueError(f"n_{name} must be >= 8, got {n}")
            if hi <= lo:
                raise ValueError(f"{name}_max must exceed {name}_min")

    @property
    def has_x(self) -> bool:
        return self.n_x is not None and self.x_min is not None and self.x_max is not None

    @property
    def d(self) -> int:
        """Number of canonical (q, p) pairs."""
        return 1

    @property
    def h_q(self) -> float:
        return (self.q_max - self.q_min) / (self.n_q - 1)

    @property
    def h_p(self) -> float:
        return (self.p_max - self.p_min) / (self.n_p - 1)

    @property
    def h_x(self) -> float:
        if not self.has_x:
            raise ValueError("grid has no x axis")
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def q(self) -> np.ndarray:
        return np.linspace(self.q_min, self.q_max, self.n_q)

    @property
    def p(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.n_p)

    @property
    def x(self) -> np.ndarray:
        if not self.has_x:
            raise ValueError("grid has no x axis")
        return np.linspace(self.x_min, self.x_max, self.n_x)

    @property
    def qp_shape(self) -> tuple[int, int]:
        return (self.n_q, self.n_p)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_q, self.n_p, self.n_x) if self.has_x else (self.n_q, self.n_p)

    def axis_index(self, axis: int | str) -> int:
        if isinstance(axis, str):
            try:
                return {"q": 0, "p": 1, "x": 2}[axis]
            except KeyError:
                raise ValueError(f"unknown axis name {axis!r}") from None
        return int(axis)

    def spacing(self, axis: int | str) -> float:
        idx = self.axis_index(axis)
        if idx == 0:
            return self.h_q
        if idx == 1:
            return self.h_p
        if idx == 2:
            return self.h_x
        raise ValueError(f"axis {axis!r} out of range")

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Full 2D coordinate arrays Q, P with ij indexing."""
        return np.meshgrid(self.q, self.p, indexing="ij")

    def mesh3(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Full 3D coordinate arrays Q, P, X with ij indexing."""
        return np.meshgrid(self.q, self.p, self.x, indexing="ij")

    def contains(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the (q, p) extents."""
        q = np.asarray(q)
        p = np.asarray(p)
        return ((q >= self.q_min) & (q <= self.q_max)
                & (p >= self.p_min) & (p <= self.p_max))

    def refine(self, factor: int = 2) -> "PhaseSpaceGrid":
        """Same extents with (n - 1) * factor + 1 nodes per axis."""
        kw = {}
        if self.has_x:
            kw = dict(x_min=self.x_min, x_max=self.x_max,
                      n_x=(self.n_x - 1) * factor + 1)
        return PhaseSpaceGrid(self.q_min, self.q_max, (self.n_q - 1) * factor + 1,
                              self.p_min, self.p_max, (self.n_p - 1) * factor + 1,
                              **kw)


@dataclass
class PhaseFunction:
    """Real scalar field F(q, p) on a grid, optionally backed by an analytic rule.

    ``rule`` evaluates F at off-grid points; ``d_dq``/``d_dp`` are analytic
    partial derivatives used by flow integrators and the analytic Poisson
    bracket path.  ``meta`` carries structural hints (e.g. a separable
    Hamiltonian's mass and potential).
    """

    grid: PhaseSpaceGrid
    values: np.ndarray
    rule: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    d_dq: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    d_dp: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    meta: dict = field(default_factory=dict)
    allow_nonfinite: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.qp_shape:
            raise ValueError(
                f"values shape {self.values.shape} != grid shape {self.grid.qp_shape}")
        if not self.allow_nonfinite and not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    @classmethod
    def from_rule(cls, grid: PhaseSpaceGrid, rule, d_dq=None, d_dp=None,
                  allow_nonfinite: bool = False, **meta) -> "PhaseFunction":
        Q, P = grid.mesh()
        values = np.broadcast_to(np.asarray(rule(Q, P), dtype=float), grid.qp_shape).copy()
        return cls(grid, values, rule=rule, d_dq=d_dq, d_dp=d_dp,
                   meta=dict(meta), allow_nonfinite=allow_nonfinite)

    @property
    def has_analytic_gradient(self) -> bool:
        return self.d_dq is not None and self.d_dp is not None

    def same_grid(self, other: "PhaseFunction") -> bool:
        return self.grid == other.grid


@dataclass
class FlowMap:
    """Endpoints at time t of Hamiltonian trajectories started from (q0, p0).

    ``escaped`` flags trajectories that left the grid extents at any step;
    they are kept (the integration continues) but downstream density
    deposition drops them with an accounted mass deficit.
    """

    q0: np.ndarray
    p0: np.ndarray
    q: np.ndarray
    p: np.ndarray
    t: float
    escaped: np.ndarray


@dataclass(frozen=True)
class PhysicalConstants:
    """Scenario constants; hbar enters operator construction only."""

    hbar: float = 1.0
    mass: float = 1.0
    m_C: float = 1.0
    m_Q: float = 1.0
    omega: float = 1.0
    couplings: tuple = ()

    def __post_init__(self):
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        for name in ("mass", "m_C", "m_Q"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def diff_values(values: np.ndarray, spacing: float, axis: int = 0,
                order: int = 4) -> np.ndarray:
    """First derivative along ``axis``: central interior stencil, one-sided
    stencils of the same order at the boundary rows.

    Works on real or complex arrays of any dimensionality.
    """
    if order not in (2, 4):
        raise ValueError(f"stencil_order must be 2 or 4, got {order}")
    v = np.asarray(values)
    if axis >= v.ndim or axis < -v.ndim:
        raise ValueError(f"axis {axis} out of range for {v.ndim}-d field")
    v = np.moveaxis(v, axis, 0)
    n = v.shape[0]
    if (order == 2 and n < 3) or (order == 4 and n < 5):
        raise ValueError(f"axis too short ({n}) for order-{order} stencil")
    out = np.empty_like(v, dtype=np.result_type(v.dtype, float))
    h = float(spacing)
    if order == 2:
        out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
        out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
        out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    else:
        out[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
        out[0] = (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12 * h)
        out[1] = (-3 * v[0] - 10 * v[1] + 18 * v[2] - 6 * v[3] + v[4]) / (12 * h)
        out[-2] = (3 * v[-1] + 10 * v[-2] - 18 * v[-3] + 6 * v[-4] - v[-5]) / (12 * h)
        out[-1] = (25 * v[-1] - 48 * v[-2] + 36 * v[-3] - 16 * v[-4] + 3 * v[-5]) / (12 * h)
    return np.moveaxis(out, 0, axis)


def partial_derivative(f: PhaseFunction, axis: int | str,
                       stencil_order: int = 4) -> PhaseFunction:
    """Derivative field of F along a grid axis ('q' or 'p')."""
    ax = f.grid.axis_index(axis)
    if ax > 1:
        raise ValueError("phase functions live on (q, p); axis must be q or p")
    spacing = f.grid.h_q if ax == 0 else f.grid.h_p
    out = diff_values(f.values, spacing, axis=ax, order=stencil_order)
    return PhaseFunction(f.grid, out)


def poisson_bracket(f: PhaseFunction, g: PhaseFunction,
                    stencil_order: int = 4) -> PhaseFunction:
    """{f, g} = df/dq dg/dp - df/dp dg/dq, nodewise."""
    if not f.same_grid(g):
        raise GridMismatchError("poisson_bracket operands on different grids")
    fq = diff_values(f.values, f.grid.h_q, 0, stencil_order)
    fp = diff_values(f.values, f.grid.h_p, 1, stencil_order)
    gq = diff_values(g.values, g.grid.h_q, 0, stencil_order)
    gp = diff_values(g.values, g.grid.h_p, 1, stencil_order)
    return PhaseFunction(f.grid, fq * gp - fp * gq)


def poisson_bracket_auto(f: PhaseFunction, g: PhaseFunction,
                         stencil_order: int = 4) -> tuple[PhaseFunction, str]:
    """{f, g} via analytic partials when both operands carry them, else
    numerically.  Returns (bracket, path) with path in {'analytic', 'numeric'}
    so callers can record which route ran.
    """
    if f.has_analytic_gradient and g.has_analytic_gradient:
        Q, P = f.grid.mesh()
        vals = (np.asarray(f.d_dq(Q, P), float) * np.asarray(g.d_dp(Q, P), float)
                - np.asarray(f.d_dp(Q, P), float) * np.asarray(g.d_dq(Q, P), float))
        vals = np.broadcast_to(vals, f.grid.qp_shape).copy()
        return PhaseFunction(f.grid, vals), "analytic"
    return poisson_bracket(f, g, stencil_order), "numeric"


# ---------------------------------------------------------------------------
# Quadrature and norms
# ---------------------------------------------------------------------------

def integrate_values(grid: PhaseSpaceGrid, values: np.ndarray) -> complex | float:
    """Trapezoidal integral of raw (real or complex) node values over the
    full grid, all axes."""
    v = np.asarray(values)
    if v.ndim == 3:
        v = np.trapezoid(v, dx=grid.h_x, axis=2)
    v = np.trapezoid(v, dx=grid.h_p, axis=1)
    v = np.trapezoid(v, dx=grid.h_q, axis=0)
    return complex(v) if np.iscomplexobj(values) else float(v)


def quadrature(f: PhaseFunction) -> float:
    """Trapezoidal integral of a phase function over the whole grid."""
    return float(integrate_values(f.grid, f.values))


def norm_l2(grid: PhaseSpaceGrid, values: np.ndarray) -> float:
    """L2 norm sqrt(integral |v|^2) under the grid quadrature."""
    return math.sqrt(float(integrate_values(grid, np.abs(np.asarray(values)) ** 2)))


def boundary_mass(grid: PhaseSpaceGrid, values: np.ndarray, width: int = 3,
                  warn: bool = False, label: str = "field") -> float:
    """Fraction of sum|values| within ``width`` nodes of any (q, p) edge.

    The grid is a truncation of unbounded phase space; fields are assumed
    negligible near the edges and operations warn when that fails.
    """
    v = np.abs(np.asarray(values))
    total = float(v.sum())
    if total == 0.0:
        return 0.0
    interior = v[width:-width, width:-width, ...]
    frac = 1.0 - float(interior.sum()) / total
    if warn and frac > BOUNDARY_MASS_WARN:
        warnings.warn(
            f"{label}: boundary mass {frac:.3e} exceeds {BOUNDARY_MASS_WARN:.0e}; "
            "grid extents may be too tight", RuntimeWarning, stacklevel=2)
    return frac


# ---------------------------------------------------------------------------
# Hamiltonian flow maps
# ---------------------------------------------------------------------------

def _verlet_steps(q, p, n, dt, mass, dVdq):
    """Stormer-Verlet kick-drift-kick; symplectic for separable H."""
    for _ in range(n):
        p_half = p - 0.5 * dt * dVdq(q)
        q = q + dt * p_half / mass
        p = p_half - 0.5 * dt * dVdq(q)
    return q, p


def _rk4_steps(q, p, n, dt, dHdq, dHdp):
    for _ in range(n):
        k1q, k1p = dHdp(q, p), -dHdq(q, p)
        k2q, k2p = dHdp(q + 0.5 * dt * k1q, p + 0.5 * dt * k1p), -dHdq(q + 0.5 * dt * k1q, p + 0.5 * dt * k1p)
        k3q, k3p = dHdp(q + 0.5 * dt * k2q, p + 0.5 * dt * k2p), -dHdq(q + 0.5 * dt * k2q, p + 0.5 * dt * k2p)
        k4q, k4p = dHdp(q + dt * k3q, p + dt * k3p), -dHdq(q + dt * k3q, p + dt * k3p)
        q = q + dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
        p = p + dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
    return q, p


def hamiltonian_flow_map(H: PhaseFunction, q0, p0, t: float, dt: float,
                         integrator: str | None = None) -> FlowMap:
    """Integrate Hamilton's equations from (q0, p0) for time t.

    Separable Hamiltonians (built by :func:`separable_hamiltonian`) use
    Stormer-Verlet; anything else falls back to RK4 on the analytic
    gradient, which must then be present.  Negative t integrates backward.
    Points leaving the grid extents are flagged, not fatal.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    q = np.array(q0, dtype=float, copy=True)
    p = np.array(p0, dtype=float, copy=True)
    if integrator is None:
        integrator = "verlet" if H.meta.get("separable") else "rk4"

    n_steps = max(int(round(abs(t) / dt)), 0)
    sgn = 1.0 if t >= 0 else -1.0
    # Uniform steps, then one remainder step to land exactly on t.
    rem = abs(t) - n_steps * dt
    plan = [(n_steps, sgn * dt)]
    if rem > 1e-15 * max(abs(t), 1.0):
        plan.append((1, sgn * rem))

    escaped = ~H.grid.contains(q, p)
    if integrator == "verlet":
        if not H.meta.get("separable"):
            raise ValueError("verlet integrator requires a separable Hamiltonian")
        mass, dVdq = H.meta["mass"], H.meta["dVdq"]
        for n, step in plan:
            q, p = _verlet_steps(q, p, n, step, mass, dVdq)
            escaped |= ~H.grid.contains(q, p)
    elif integrator == "rk4":
        if not H.has_analytic_gradient:
            raise ValueError("rk4 integrator requires analytic dH/dq and dH/dp")
        for n, step in plan:
            q, p = _rk4_steps(q, p, n, step, H.d_dq, H.d_dp)
            escaped |= ~H.grid.contains(q, p)
    else:
        raise ValueError(f"unknown integrator {integrator!r}")
    return FlowMap(np.asarray(q0, float), np.asarray(p0, float), q, p, t, escaped)


# ---------------------------------------------------------------------------
# Field builders
# ---------------------------------------------------------------------------

def coordinate_q(grid: PhaseSpaceGrid) -> PhaseFunction:
    return PhaseFunction.from_rule(grid, lambda q, p: q + 0.0 * p,
                                   d_dq=lambda q, p: np.ones_like(q + p),
                                   d_dp=lambda q, p: np.zeros_like(q + p),
                                   name="q")


def coordinate_p(grid: PhaseSpaceGrid) -> PhaseFunction:
    return PhaseFunction.from_rule(grid, lambda q, p: p + 0.0 * q,
                                   d_dq=lambda q, p: np.zeros_like(q + p),
                                   d_dp=lambda q, p: np.ones_like(q + p),
                                   name="p")


def constant_function(grid: PhaseSpaceGrid, c: float) -> PhaseFunction:
    return PhaseFunction.from_rule(grid, lambda q, p: c + 0.0 * (q + p),
                                   d_dq=lambda q, p: np.zeros_like(q + p),
                                   d_dp=lambda q, p: np.zeros_like(q + p),
                                   name=f"const({c})")


def monomial(grid: PhaseSpaceGrid, i: int, j: int, coeff: float = 1.0) -> PhaseFunction:
    """coeff * q^i p^j with analytic partials."""
    def rule(q, p):
        return coeff * q ** i * p ** j

    def d_dq(q, p):
        return coeff * i * q ** (i - 1) * p ** j if i else np.zeros_like(q + p)

    def d_dp(q, p):
        return coeff * j * q ** i * p ** (j - 1) if j else np.zeros_like(q + p)

    return PhaseFunction.from_rule(grid, rule, d_dq=d_dq, d_dp=d_dp,
                                   name=f"q^{i} p^{j}")


def linear_combination(a: float, f: PhaseFunction, b: float,
                       g: PhaseFunction) -> PhaseFunction:
    """a*f + b*g, composing rules and partials when both operands have them."""
    if not f.same_grid(g):
        raise GridMismatchError("linear_combination operands on different grids")
    rule = dq = dp = None
    if f.rule is not None and g.rule is not None:
        rule = lambda q, p: a * f.rule(q, p) + b * g.rule(q, p)
    if f.has_analytic_gradient and g.has_analytic_gradient:
        dq = lambda q, p: a * f.d_dq(q, p) + b * g.d_dq(q, p)
        dp = lambda q, p: a * f.d_dp(q, p) + b * g.d_dp(q, p)
    return PhaseFunction(f.grid, a * f.values + b * g.values,
                         rule=rule, d_dq=dq, d_dp=dp)


def squared(f: PhaseFunction) -> PhaseFunction:
    """f^2 with rule and partials composed by the product rule."""
    rule = dq = dp = None
    if f.rule is not None:
        rule = lambda q, p: f.rule(q, p) ** 2
    if f.rule is not None and f.has_analytic_gradient:
        dq = lambda q, p: 2.0 * f.rule(q, p) * f.d_dq(q, p)
        dp = lambda q, p: 2.0 * f.rule(q, p) * f.d_dp(q, p)
    return PhaseFunction(f.grid, f.values ** 2, rule=rule, d_dq=dq, d_dp=dp)


def separable_hamiltonian(grid: PhaseSpaceGrid, mass: float,
                          V: Callable[[np.ndarray], np.ndarray],
                          dVdq: Callable[[np.ndarray], np.ndarray],
                          name: str = "H") -> PhaseFunction:
    """H = p^2/2m + V(q); carries enough structure for symplectic stepping
    and for the Lagrangian source term of the action transport."""
    def rule(q, p):
        return p ** 2 / (2 * mass) + V(q)

    f = PhaseFunction.from_rule(
        grid, rule,
        d_dq=lambda q, p: dVdq(q) + 0.0 * p,
        d_dp=lambda q, p: p / mass + 0.0 * q,
    )
    f.meta.update(separable=True, mass=mass, V=V, dVdq=dVdq, name=name)
    return f


def harmonic_hamiltonian(grid: PhaseSpaceGrid, mass: float = 1.0,
                         omega: float = 1.0) -> PhaseFunction:
    f = separable_hamiltonian(grid, mass,
                              V=lambda q: 0.5 * mass * omega ** 2 * q ** 2,
                              dVdq=lambda q: mass * omega ** 2 * q,
                              name="harmonic")
    f.meta.update(omega=omega)
    return f


def free_hamiltonian(grid: PhaseSpaceGrid, mass: float = 1.0) -> PhaseFunction:
    return separable_hamiltonian(grid, mass,
                                 V=lambda q: np.zeros_like(q),
                                 dVdq=lambda q: np.zeros_like(q),
                                 name="free")


def linear_potential_hamiltonian(grid: PhaseSpaceGrid, mass: float = 1.0,
                                 g: float = 1.0) -> PhaseFunction:
    """Free fall: V = m g q."""
    f = separable_hamiltonian(grid, mass,
                              V=lambda q: mass * g * q,
                              dVdq=lambda q: mass * g * np.ones_like(q),
                              name="free_fall")
    f.meta.update(g=g)
    return f
