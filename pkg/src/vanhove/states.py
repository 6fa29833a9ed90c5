"""Constrained classical wavefunctions in Madelung form.

A classical state is phi = sqrt(rho) exp(i sigma / hbar) where rho is a
Liouville density and sigma is the classical action.  Consistency requires

    d sigma/dq = p,   d sigma/dp = 0,   d sigma/dt = -H

along classical trajectories; the admissible functional form is

    sigma(q, p, t) = eta(q, p) + H(q, p) [tau(q, p) - tau(q', p') - t]

with {eta, H} = L and {tau, H} = 1.  This module builds such phases,
measures the constraint residuals of arbitrary states, constructs
mollified level-set eigenstates, and runs the superposition diagnostic
that shows why a sum of two acceptable states is not acceptable.

sigma is physically meaningful only on the support of rho; all residuals
are rho-weighted, and nodes where tau is singular (or where transport
never delivered a value) are masked and excluded.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .phasespace import (
    PhaseFunction,
    PhaseSpaceGrid,
    boundary_mass,
    diff_values,
    integrate_values,
    quadrature,
)

__all__ = [
    "ClassicalWavefunction",
    "SigmaSpec",
    "ConstraintReport",
    "FringeReport",
    "construct_sigma",
    "sigma_singular_mask",
    "verify_constraints",
    "energy_eigenstate",
    "observable_eigenstate",
    "superposition_diagnostic",
    "gaussian_density",
    "trajectory_bundle_state",
    "ho_eta",
    "ho_tau",
    "free_eta",
    "free_tau",
    "unwrap_phase",
]


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

@dataclass
class ClassicalWavefunction:
    """Density rho, action sigma and hbar; phi is derived on demand.

    ``sigma_mask`` flags nodes where sigma is undefined or untrusted
    (singular tau, regions never reached by transport); such nodes carry
    sigma = 0 and are excluded from residual integrals.  States are treated
    as immutable; evolution returns new instances.
    """

    rho: PhaseFunction
    sigma: PhaseFunction
    hbar: float
    t: float = 0.0
    sigma_mask: np.ndarray | None = None

    def __post_init__(self):
        if self.rho.grid != self.sigma.grid:
            raise ValueError("rho and sigma must share a grid")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        if np.min(self.rho.values) < -1e-12 * max(np.max(self.rho.values), 1.0):
            raise ValueError("rho must be non-negative")

    @property
    def grid(self) -> PhaseSpaceGrid:
        return self.rho.grid

    def phi(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.rho.values, 0.0)) * np.exp(
            1j * self.sigma.values / self.hbar)

    def norm(self) -> float:
        return quadrature(self.rho)

    def normalized(self) -> "ClassicalWavefunction":
        n = self.norm()
        if n <= 0:
            raise ValueError("cannot normalize a state with zero mass")
        rho = PhaseFunction(self.grid, self.rho.values / n)
        return replace(self, rho=rho)

    @classmethod
    def from_phi(cls, grid: PhaseSpaceGrid, phi: np.ndarray, hbar: float,
                 t: float = 0.0,
                 support_floor: float = 1e-13) -> "ClassicalWavefunction":
        """Madelung split of a complex field.

        The phase is recovered with the two-argument arctangent and
        unwrapped along grid lines; nodes with negligible density keep a
        masked, meaningless sigma.
        """
        phi = np.asarray(phi, dtype=complex)
        rho = np.abs(phi) ** 2
        sigma = hbar * unwrap_phase(np.angle(phi))
        mask = rho < support_floor * max(float(rho.max()), 1e-300)
        sigma = np.where(mask, 0.0, sigma)
        return cls(PhaseFunction(grid, rho), PhaseFunction(grid, sigma),
                   hbar=hbar, t=t, sigma_mask=mask)


def unwrap_phase(theta: np.ndarray) -> np.ndarray:
    """Line-by-line 2D unwrap: along p within each q row, rows stitched
    through the first column.  Exact for smooth phase fields without
    vortices; jumps greater than pi are corrected by 2*pi multiples."""
    out = np.unwrap(theta, axis=1)
    col = np.unwrap(out[:, 0])
    return out + (col - out[:, 0])[:, None]


# ---------------------------------------------------------------------------
# The admissible phase
# ---------------------------------------------------------------------------

@dataclass
class SigmaSpec:
    """Ingredients of the admissible action phase.

    ``reference`` is the phase-space point whose tau value anchors the
    time parametrization; for trajectory bundles the bundle centroid is
    the conventional choice (the reference for extended densities is a
    modeling input, not something the constraints fix).
    """

    H: PhaseFunction
    eta: PhaseFunction
    tau: PhaseFunction
    reference: tuple[float, float]
    t: float = 0.0

    def tau_reference(self) -> float:
        qr, pr = self.reference
        if self.tau.rule is not None:
            val = float(self.tau.rule(np.asarray(qr), np.asarray(pr)))
        else:
            val = _bilinear_at(self.tau, qr, pr)
        if not math.isfinite(val):
            raise ValueError("tau is singular at the reference point")
        return val

    def at_time(self, t: float) -> "SigmaSpec":
        return replace(self, t=t)

    def has_rules(self) -> bool:
        return all(f.rule is not None for f in (self.H, self.eta, self.tau))

    def sigma_at(self, q: np.ndarray, p: np.ndarray, t: float | None = None) -> np.ndarray:
        """Evaluate the phase at arbitrary points (analytic rules required)."""
        if not self.has_rules():
            raise ValueError("sigma_at requires analytic rules on H, eta, tau")
        t = self.t if t is None else t
        tau_ref = self.tau_reference()
        return (np.asarray(self.eta.rule(q, p), float)
                + np.asarray(self.H.rule(q, p), float)
                * (np.asarray(self.tau.rule(q, p), float) - tau_ref - t))


def _bilinear_at(f: PhaseFunction, q: float, p: float) -> float:
    g = f.grid
    iq = np.clip((q - g.q_min) / g.h_q, 0, g.n_q - 1)
    ip = np.clip((p - g.p_min) / g.h_p, 0, g.n_p - 1)
    return float(ndimage.map_coordinates(f.values, [[iq], [ip]], order=1)[0])


def sigma_singular_mask(spec: SigmaSpec) -> np.ndarray:
    """Nodes where the phase ingredients are singular (non-finite)."""
    return ~(np.isfinite(spec.tau.values) & np.isfinite(spec.eta.values)
             & np.isfinite(spec.H.values))


def construct_sigma(spec: SigmaSpec) -> PhaseFunction:
    """sigma = eta + H (tau - tau_ref - t) nodewise.

    Singular nodes (e.g. the arctangent center for the oscillator tau) are
    masked to zero and reported with a warning; use
    :func:`sigma_singular_mask` to recover the mask.
    """
    tau_ref = spec.tau_reference()
    mask = sigma_singular_mask(spec)
    vals = spec.eta.values + spec.H.values * (spec.tau.values - tau_ref - spec.t)
    if mask.any():
        warnings.warn(f"sigma construction: {int(mask.sum())} singular node(s) "
                      "masked", RuntimeWarning, stacklevel=2)
        vals = np.where(mask, 0.0, vals)
    return PhaseFunction(spec.H.grid, vals)


# ---------------------------------------------------------------------------
# Constraint verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintReport:
    """rho-weighted residuals of the three phase constraints.

    r1: |d sigma/dq - p|^2 against |p|^2.
    r2: |d sigma/dp|^2 against |p * timescale / mass|^2 (the timescale
        normalization is a convention; the constraint itself is unitful).
    r3: sup over the support of |d sigma/dt + H| / (|H| + eps).
    """

    r1: float
    r2: float
    r3: float
    boundary_mass: float
    pass_r1: bool
    pass_r2: bool
    pass_r3: bool
    thresholds: tuple[float, float, float]

    @property
    def passed(self) -> bool:
        return self.pass_r1 and self.pass_r2 and self.pass_r3


def verify_constraints(state: ClassicalWavefunction, H: PhaseFunction,
                       dsigma_dt: PhaseFunction | np.ndarray,
                       stencil_order: int = 4,
                       timescale: float | None = None,
                       mass: float | None = None,
                       thresholds: tuple[float, float, float] = (1e-3, 1e-3, 1e-6),
                       support_floor: float = 1e-10) -> ConstraintReport:
    """Measure how well sigma behaves as the classical action for H.

    ``dsigma_dt`` is supplied by the caller: the analytic -H for phases
    built by :func:`construct_sigma`, a transported estimate otherwise.
    Masked sigma nodes are excluded (with a stencil-radius dilation, since
    derivatives next to a masked node are polluted).
    """
    grid = state.grid
    rho = state.rho.values
    sig = state.sigma.values
    Q, P = grid.mesh()

    weight = rho.copy()
    if state.sigma_mask is not None and state.sigma_mask.any():
        dilated = ndimage.binary_dilation(state.sigma_mask,
                                          iterations=stencil_order // 2)
        weight = np.where(dilated, 0.0, weight)

    sig_q = diff_values(sig, grid.h_q, 0, stencil_order)
    sig_p = diff_values(sig, grid.h_p, 1, stencil_order)

    if mass is None:
        mass = float(H.meta.get("mass", 1.0))
    if timescale is None:
        timescale = 1.0 / float(H.meta.get("omega", 1.0))

    p_sq = float(integrate_values(grid, weight * P ** 2))
    if p_sq <= 0:
        raise ValueError("state has no momentum-squared weight; r1/r2 undefined")
    r1 = float(integrate_values(grid, weight * (sig_q - P) ** 2)) / p_sq
    r2 = float(integrate_values(grid, weight * sig_p ** 2)) / (
        p_sq * (timescale / mass) ** 2)

    ds = dsigma_dt.values if isinstance(dsigma_dt, PhaseFunction) else np.asarray(dsigma_dt)
    support = weight > support_floor * max(float(rho.max()), 1e-300)
    eps = 1e-12 * max(float(np.max(np.abs(H.values))), 1.0)
    if support.any():
        r3 = float(np.max(np.abs(ds + H.values)[support]
                          / (np.abs(H.values)[support] + eps)))
    else:
        r3 = 0.0

    bm = boundary_mass(grid, rho)
    t1, t2, t3 = thresholds
    return ConstraintReport(r1, r2, r3, bm, r1 < t1, r2 < t2, r3 < t3,
                            thresholds)


# ---------------------------------------------------------------------------
# State builders
# ---------------------------------------------------------------------------

def gaussian_density(grid: PhaseSpaceGrid, center: tuple[float, float],
                     widths: tuple[float, float]) -> PhaseFunction:
    """Quadrature-normalized Gaussian density."""
    Q, P = grid.mesh()
    q0, p0 = center
    wq, wp = widths
    vals = np.exp(-(Q - q0) ** 2 / (2 * wq ** 2) - (P - p0) ** 2 / (2 * wp ** 2))
    f = PhaseFunction(grid, vals)
    return PhaseFunction(grid, vals / quadrature(f))


def trajectory_bundle_state(spec: SigmaSpec, center: tuple[float, float],
                            widths: tuple[float, float],
                            hbar: float = 1.0) -> ClassicalWavefunction:
    """Gaussian bundle centered on a classical trajectory point, carrying
    the admissible phase anchored at the bundle centroid."""
    spec = replace(spec, reference=center)
    rho = gaussian_density(spec.H.grid, center, widths)
    sigma = construct_sigma(spec)
    return ClassicalWavefunction(rho, sigma, hbar=hbar, t=spec.t,
                                 sigma_mask=_mask_or_none(sigma_singular_mask(spec)))


def _mask_or_none(mask: np.ndarray) -> np.ndarray | None:
    return mask if mask.any() else None


def _mollifier(values: np.ndarray, eps: float) -> np.ndarray:
    """Normalized Gaussian bump, truncated at 4*eps so that no weight at
    all sits farther than 4 widths off the level set."""
    out = np.exp(-0.5 * (values / eps) ** 2) / (eps * math.sqrt(2 * math.pi))
    return np.where(np.abs(values) <= 4 * eps, out, 0.0)


def _default_mollifier_width(F: PhaseFunction, stencil_order: int = 4) -> float:
    """Four grid spacings measured in the value metric of F."""
    if F.has_analytic_gradient:
        Q, P = F.grid.mesh()
        Fq = np.abs(np.asarray(F.d_dq(Q, P), float))
        Fp = np.abs(np.asarray(F.d_dp(Q, P), float))
    else:
        Fq = np.abs(diff_values(F.values, F.grid.h_q, 0, stencil_order))
        Fp = np.abs(diff_values(F.values, F.grid.h_p, 1, stencil_order))
    cell = Fq * F.grid.h_q + Fp * F.grid.h_p
    return 4.0 * float(np.median(cell))


def observable_eigenstate(F: PhaseFunction, f: float, pi: PhaseFunction,
                          eps: float | None, spec: SigmaSpec,
                          hbar: float = 1.0) -> ClassicalWavefunction:
    """State whose density sits on the level set F = f.

    rho ~ pi * delta_eps(F - f), quadrature-normalized.  The phase is the
    admissible sigma of ``spec``; when F is the Hamiltonian itself the
    density contains only energy-f trajectories, so H is replaced by the
    constant f in the phase (this is what makes the energy eigenstate
    path below bit-identical to this one).
    """
    grid = F.grid
    if np.min(pi.values) < 0:
        raise ValueError("pi must be non-negative")
    if eps is None:
        eps = _default_mollifier_width(F)
    level = F.values - f
    if not np.any(np.abs(level) < 4 * eps):
        raise ValueError(
            f"empty shell: no grid node within 4*eps of the level set F = {f}")
    raw = pi.values * _mollifier(level, eps)
    total = float(integrate_values(grid, raw))
    if total <= 0:
        raise ValueError("level-set density has zero mass")
    rho = PhaseFunction(grid, raw / total)

    sig_spec = spec
    if np.array_equal(F.values, spec.H.values):
        const = PhaseFunction(grid, np.full(grid.qp_shape, float(f)),
                              rule=lambda q, p: f + 0.0 * (q + p))
        sig_spec = replace(spec, H=const)
    sigma = construct_sigma(sig_spec)
    return ClassicalWavefunction(rho, sigma, hbar=hbar, t=spec.t,
                                 sigma_mask=_mask_or_none(sigma_singular_mask(sig_spec)))


def energy_eigenstate(spec: SigmaSpec, E: float, pi: PhaseFunction,
                      eps: float | None = None,
                      hbar: float = 1.0) -> ClassicalWavefunction:
    """Mollified energy-shell state: rho ~ pi * delta_eps(H - E) with phase
    sigma = eta + E (tau - tau_ref - t)."""
    return observable_eigenstate(spec.H, E, pi, eps, spec, hbar=hbar)


# ---------------------------------------------------------------------------
# Superposition diagnostic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FringeReport:
    """Density oscillation along the segment joining the component
    centroids: contrast = (max - min) / (max + min)."""

    contrast: float
    centroid_1: tuple[float, float]
    centroid_2: tuple[float, float]
    rho_min: float
    rho_max: float
    n_samples: int


def _centroid(rho: PhaseFunction) -> tuple[float, float]:
    grid = rho.grid
    Q, P = grid.mesh()
    m = quadrature(rho)
    return (float(integrate_values(grid, rho.values * Q)) / m,
            float(integrate_values(grid, rho.values * P)) / m)


def superposition_diagnostic(s1: ClassicalWavefunction, s2: ClassicalWavefunction,
                             weights: tuple[float, float], H: PhaseFunction,
                             n_samples: int = 512
                             ) -> tuple[ClassicalWavefunction, ConstraintReport, FringeReport]:
    """Form phi = w1 phi1 + w2 phi2, re-extract Madelung variables, and
    measure what the sum does to the phase constraints and to the density.

    The returned state keeps the raw (unnormalized) density of the sum;
    the constraint residuals are ratios and do not depend on the overall
    scale.  dsigma/dt is taken as -H, i.e. the superposed state is scored
    against the behavior an acceptable state would have.
    """
    if s1.grid != s2.grid:
        raise ValueError("superposition components on different grids")
    if s1.hbar != s2.hbar:
        raise ValueError("superposition components disagree on hbar")
    grid = s1.grid
    w1, w2 = weights
    phi = w1 * s1.phi() + w2 * s2.phi()
    state = ClassicalWavefunction.from_phi(grid, phi, hbar=s1.hbar, t=s1.t)

    inherited = np.zeros(grid.qp_shape, dtype=bool)
    for s, w in ((s1, w1), (s2, w2)):
        if w != 0.0 and s.sigma_mask is not None:
            inherited |= s.sigma_mask
    if inherited.any():
        state = replace(state, sigma_mask=state.sigma_mask | inherited)

    report = verify_constraints(state, H, dsigma_dt=-H.values)

    c1, c2 = _centroid(s1.rho), _centroid(s2.rho)
    dist = math.hypot(c2[0] - c1[0], c2[1] - c1[1])
    if dist < max(grid.h_q, grid.h_p):
        rho_line = np.array([float(np.max(state.rho.values))])
        contrast = 0.0
    else:
        ts = np.linspace(0.0, 1.0, n_samples)
        qs = c1[0] + ts * (c2[0] - c1[0])
        ps = c1[1] + ts * (c2[1] - c1[1])
        coords = np.vstack([(qs - grid.q_min) / grid.h_q,
                            (ps - grid.p_min) / grid.h_p])
        rho_line = ndimage.map_coordinates(state.rho.values, coords, order=1)
        lo, hi = float(rho_line.min()), float(rho_line.max())
        contrast = (hi - lo) / (hi + lo) if hi + lo > 0 else 0.0
    fringe = FringeReport(contrast, c1, c2, float(rho_line.min()),
                          float(rho_line.max()), len(rho_line))
    return state, report, fringe


# ---------------------------------------------------------------------------
# Catalog of eta / tau pairs for the desk-scale Hamiltonians
# ---------------------------------------------------------------------------

def ho_eta(grid: PhaseSpaceGrid, mass: float = 1.0, omega: float = 1.0) -> PhaseFunction:
    """eta = q p / 2; satisfies {eta, H} = L for the harmonic oscillator
    (and for the free particle)."""
    return PhaseFunction.from_rule(
        grid, lambda q, p: 0.5 * q * p,
        d_dq=lambda q, p: 0.5 * p + 0.0 * q,
        d_dp=lambda q, p: 0.5 * q + 0.0 * p)


free_eta = ho_eta


def ho_tau(grid: PhaseSpaceGrid, mass: float = 1.0, omega: float = 1.0) -> PhaseFunction:
    """tau = arctan2(m w q, p) / w; {tau, H} = 1 away from the origin.

    The branch cut sits on the ray q = 0, p < 0 with a jump of 2 pi / w;
    the origin node (if the grid has one) is masked as singular.  Place
    supports and bundle trajectories away from the cut.
    """
    def rule(q, p):
        q = np.asarray(q, float)
        p = np.asarray(p, float)
        out = np.arctan2(mass * omega * q, p) / omega
        return np.where((q == 0.0) & (p == 0.0), np.nan, out)

    def d_dq(q, p):
        D = (mass * omega * q) ** 2 + p ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(D > 0, mass * p / D, np.nan)

    def d_dp(q, p):
        D = (mass * omega * q) ** 2 + p ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(D > 0, -mass * q / D, np.nan)

    return PhaseFunction.from_rule(grid, rule, d_dq=d_dq, d_dp=d_dp,
                                   allow_nonfinite=True)


def free_tau(grid: PhaseSpaceGrid, mass: float = 1.0) -> PhaseFunction:
    """tau = m q / p for the free particle; singular on the p = 0 line."""
    def rule(q, p):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(p != 0, mass * q / p, np.nan)

    def d_dq(q, p):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(p != 0, mass / p, np.nan)

    def d_dp(q, p):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(p != 0, -mass * q / p ** 2, np.nan)

    return PhaseFunction.from_rule(grid, rule, d_dq=d_dq, d_dp=d_dp,
                                   allow_nonfinite=True)
