"""Van Hove (prequantum) operators on phase-space wavefunctions.

A phase-space function F is assigned the unique operator

    O_F phi = theta(F) phi + i hbar {F, phi},
    theta(F) = F - p dF/dp,

i.e. a multiplicative part plus first-order advection along the canonical
flow of F.  The commutator algebra of these operators is isomorphic to the
Poisson algebra of the underlying functions, [O_F, O_G] = i hbar O_{F,G},
which is what the residual diagnostics here measure.  They deliberately do
NOT form a product algebra (O_F O_F != O_{F^2}); the audit reports that
failure as a positive classicality signature.

Operators are stored matrix-free as (theta, xi) coefficient fields and
applied by finite differences; a dense-matrix construction lives in the
test suite only, as an independent oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .phasespace import (
    GridMismatchError,
    PhaseFunction,
    PhaseSpaceGrid,
    boundary_mass,
    diff_values,
    integrate_values,
    linear_combination,
    norm_l2,
    poisson_bracket_auto,
    squared,
)

__all__ = [
    "VanHoveOperator",
    "build_vanhove",
    "CommutatorResult",
    "commutator_residual",
    "DiracRuleResult",
    "DiracAuditReport",
    "dirac_rule_audit",
    "operator_expectation",
]


@dataclass
class VanHoveOperator:
    """Matrix-free operator: multiplicative field theta plus advection.

    xi_q = dF/dp and xi_p = -dF/dq are the canonical flow velocities of F
    (qdot, pdot).  Application uses

        O_F phi = theta phi - i hbar (xi_q d_q phi + xi_p d_p phi),

    which is theta + i hbar {F, .}.
    """

    grid: PhaseSpaceGrid
    theta: np.ndarray
    xi_q: np.ndarray
    xi_p: np.ndarray
    hbar: float
    source: PhaseFunction | None = None
    stencil_order: int = 4

    def apply(self, phi: np.ndarray) -> np.ndarray:
        """Apply to a complex field on the same grid; trailing axes (e.g. a
        quantum x axis) are broadcast over."""
        phi = np.asarray(phi)
        if phi.shape[:2] != self.grid.qp_shape:
            raise GridMismatchError(
                f"field shape {phi.shape} does not start with grid shape "
                f"{self.grid.qp_shape}")
        dq = diff_values(phi, self.grid.h_q, 0, self.stencil_order)
        dp = diff_values(phi, self.grid.h_p, 1, self.stencil_order)
        theta, xi_q, xi_p = self.theta, self.xi_q, self.xi_p
        if phi.ndim > 2:
            extra = (np.newaxis,) * (phi.ndim - 2)
            theta = theta[(...,) + extra]
            xi_q = xi_q[(...,) + extra]
            xi_p = xi_p[(...,) + extra]
        return theta * phi - 1j * self.hbar * (xi_q * dq + xi_p * dp)

    __call__ = apply


def build_vanhove(F: PhaseFunction, hbar: float = 1.0,
                  stencil_order: int = 4) -> VanHoveOperator:
    """Construct the operator of F.

    Analytic partials are used for the coefficient fields when F carries
    them; otherwise the partials are taken by finite differences at the
    declared stencil order.
    """
    if F.has_analytic_gradient:
        Q, P = F.grid.mesh()
        Fq = np.broadcast_to(np.asarray(F.d_dq(Q, P), float), F.grid.qp_shape).copy()
        Fp = np.broadcast_to(np.asarray(F.d_dp(Q, P), float), F.grid.qp_shape).copy()
    else:
        Fq = diff_values(F.values, F.grid.h_q, 0, stencil_order)
        Fp = diff_values(F.values, F.grid.h_p, 1, stencil_order)
    _, P = F.grid.mesh()
    theta = F.values - P * Fp
    return VanHoveOperator(F.grid, theta, xi_q=Fp, xi_p=-Fq, hbar=hbar,
                           source=F, stencil_order=stencil_order)


@dataclass(frozen=True)
class CommutatorResult:
    """Residual of [O_F, O_G] phi against i hbar O_{F,G} phi."""

    residual_norm: float
    relative_norm: float
    bracket_path: str  # 'analytic' or 'numeric'


def commutator_residual(F: PhaseFunction, G: PhaseFunction, phi: np.ndarray,
                        hbar: float = 1.0, stencil_order: int = 4) -> CommutatorResult:
    """|| ([O_F, O_G] - i hbar O_{F,G}) phi ||_2 and its ratio to ||phi||_2.

    The bracket {F, G} is evaluated analytically when both operands carry
    analytic partials, numerically otherwise; the result records which.
    Warns when phi carries noticeable boundary mass, since the one-sided
    boundary stencils then pollute the residual.
    """
    if not F.same_grid(G):
        raise GridMismatchError("commutator operands on different grids")
    grid = F.grid
    boundary_mass(grid, phi, warn=True, label="commutator test state")
    op_F = build_vanhove(F, hbar, stencil_order)
    op_G = build_vanhove(G, hbar, stencil_order)
    bracket, path = poisson_bracket_auto(F, G, stencil_order)
    op_B = build_vanhove(bracket, hbar, stencil_order)
    lhs = op_F(op_G(phi)) - op_G(op_F(phi))
    res = lhs - 1j * hbar * op_B(phi)
    rn = norm_l2(grid, res)
    return CommutatorResult(rn, rn / norm_l2(grid, phi), path)


@dataclass(frozen=True)
class DiracRuleResult:
    rule: str
    residual: float
    relative: float
    passed: bool
    tolerance: float

    def to_dict(self) -> dict:
        return {"rule": self.rule, "residual": self.residual,
                "relative": self.relative, "pass": self.passed,
                "tolerance": self.tolerance}


@dataclass
class DiracAuditReport:
    """Outcome of the four operator-assignment rules.

    Rules 1 (linearity), 3 (identity) and 4 (bracket-to-commutator) are
    expected to hold; rule 2 (the power rule) is expected to FAIL for these
    operators - ``classical_signature`` is True exactly when that pattern is
    observed.
    """

    linearity: DiracRuleResult
    power: DiracRuleResult
    identity: DiracRuleResult
    bracket: DiracRuleResult
    bracket_path: str = "numeric"

    @property
    def rules(self) -> Sequence[DiracRuleResult]:
        return (self.linearity, self.power, self.identity, self.bracket)

    @property
    def classical_signature(self) -> bool:
        return (self.linearity.passed and self.identity.passed
                and self.bracket.passed and not self.power.passed)

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps([r.to_dict() for r in self.rules],
                          indent=indent, sort_keys=True)


def dirac_rule_audit(F: PhaseFunction, G: PhaseFunction, phi: np.ndarray,
                     a: float = 1.0, b: float = 1.0, hbar: float = 1.0,
                     stencil_order: int = 4,
                     linear_tol: float = 1e-10,
                     power_tol: float = 1e-2,
                     identity_tol: float = 1e-12,
                     bracket_tol: float = 1e-2) -> DiracAuditReport:
    """Audit the four assignment rules on a test state phi.

    ``power_tol`` is the threshold below which the power rule would be
    declared to hold; a healthy classical audit reports rule 2 with
    ``passed=False`` and a relative residual well above it.
    """
    grid = F.grid
    phi = np.asarray(phi, dtype=complex)
    nphi = norm_l2(grid, phi)

    op_F = build_vanhove(F, hbar, stencil_order)
    op_G = build_vanhove(G, hbar, stencil_order)

    # Rule 1: O_{aF+bG} = a O_F + b O_G.
    op_lin = build_vanhove(linear_combination(a, F, b, G), hbar, stencil_order)
    r1 = norm_l2(grid, op_lin(phi) - (a * op_F(phi) + b * op_G(phi)))
    lin = DiracRuleResult("linearity", r1, r1 / nphi, r1 / nphi < linear_tol,
                          linear_tol)

    # Rule 2: O_F O_F vs O_{F^2}; a nonzero residual is the point.
    op_F2 = build_vanhove(squared(F), hbar, stencil_order)
    r2 = norm_l2(grid, op_F(op_F(phi)) - op_F2(phi))
    pw = DiracRuleResult("power", r2, r2 / nphi, r2 / nphi < power_tol,
                         power_tol)

    # Rule 3: O_1 = identity.
    from .phasespace import constant_function
    op_1 = build_vanhove(constant_function(grid, 1.0), hbar, stencil_order)
    r3 = norm_l2(grid, op_1(phi) - phi)
    ident = DiracRuleResult("identity", r3, r3 / nphi, r3 / nphi < identity_tol,
                            identity_tol)

    # Rule 4: delegated to the commutator residual.
    comm = commutator_residual(F, G, phi, hbar, stencil_order)
    br = DiracRuleResult("bracket", comm.residual_norm, comm.relative_norm,
                         comm.relative_norm < bracket_tol, bracket_tol)

    return DiracAuditReport(lin, pw, ident, br, bracket_path=comm.bracket_path)


def operator_expectation(op: VanHoveOperator, phi: np.ndarray) -> complex:
    """<phi | O | phi> under the grid inner product (no normalization)."""
    return complex(integrate_values(op.grid, np.conjugate(phi) * op.apply(phi)))
