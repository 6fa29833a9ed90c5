"""The classical time operator of the harmonic oscillator.

tau = arctan2(m w q, p) / w satisfies {tau, H} = 1, so its numerical value
advances like the trajectory time.  Used as a generator, tau produces
curves along which the energy decreases linearly, q and p shrink by
sqrt((E0 - lambda)/E0), and the curve cannot be continued past
lambda = E0: the flow is incomplete, energy never becomes negative, and
the associated operator

    O_tau = tau + q p / 2H + i hbar ((p/2H) d_p + (q/2H) d_q)

is ill-defined as H -> 0.  Rather than regularizing, nodes inside an
|H| < eps_H cutoff are masked and reported, which makes the pathology
observable instead of fatal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phasespace import PhaseSpaceGrid, diff_values

__all__ = ["TauFlowResult", "tau_flow", "apply_time_operator"]

REACHED_REQUEST = "reached_request"
INCOMPLETENESS_BOUNDARY = "incompleteness_boundary"


@dataclass
class TauFlowResult:
    """Samples of the tau-generated curve and where/why it stopped."""

    lambdas: np.ndarray
    q: np.ndarray
    p: np.ndarray
    H: np.ndarray
    termination_lambda: float
    termination_reason: str

    @property
    def E0(self) -> float:
        return float(self.H[0])


def _ho_energy(q: float, p: float, mass: float, omega: float) -> float:
    return p * p / (2 * mass) + 0.5 * mass * omega ** 2 * q * q


def tau_flow(q0: float, p0: float, lambda_target: float, dlam: float,
             mass: float = 1.0, omega: float = 1.0,
             eps_H: float | None = None) -> TauFlowResult:
    """Integrate the curve generated by tau from (q0, p0).

    Along the curve dF = {F, tau} dlambda for any phase function F; for
    the oscillator dq/dl = -q/2H and dp/dl = -p/2H, integrated here with
    RK4.  The curve stops at lambda = E0 - eps_H when the request would
    cross the incompleteness boundary.
    """
    if dlam <= 0:
        raise ValueError("dlam must be positive")
    E0 = _ho_energy(q0, p0, mass, omega)
    if E0 <= 0:
        raise ValueError("flow undefined at H = 0 (started at the origin)")
    if eps_H is None:
        eps_H = 1e-3 * E0
    lam_max = E0 - eps_H
    if lambda_target > lam_max:
        target = lam_max
        reason = INCOMPLETENESS_BOUNDARY
    else:
        target = lambda_target
        reason = REACHED_REQUEST

    def rhs(q, p):
        H = _ho_energy(q, p, mass, omega)
        return -q / (2 * H), -p / (2 * H)

    lams = [0.0]
    qs = [float(q0)]
    ps = [float(p0)]
    Hs = [E0]
    lam, q, p = 0.0, float(q0), float(p0)
    while lam < target - 1e-15 * max(abs(target), 1.0):
        step = min(dlam, target - lam)
        k1q, k1p = rhs(q, p)
        k2q, k2p = rhs(q + 0.5 * step * k1q, p + 0.5 * step * k1p)
        k3q, k3p = rhs(q + 0.5 * step * k2q, p + 0.5 * step * k2p)
        k4q, k4p = rhs(q + step * k3q, p + step * k3p)
        q_new = q + step / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
        p_new = p + step / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        H_new = _ho_energy(q_new, p_new, mass, omega)
        if H_new < eps_H:
            # Never step into the cutoff: the flow stops strictly above it.
            reason = INCOMPLETENESS_BOUNDARY
            break
        q, p = q_new, p_new
        lam += step
        lams.append(lam)
        qs.append(q)
        ps.append(p)
        Hs.append(H_new)

    return TauFlowResult(np.asarray(lams), np.asarray(qs), np.asarray(ps),
                         np.asarray(Hs), lam, reason)


def apply_time_operator(grid: PhaseSpaceGrid, phi: np.ndarray, hbar: float,
                        eps_H: float, mass: float = 1.0, omega: float = 1.0,
                        stencil_order: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Apply O_tau nodewise; returns (field, mask).

    Nodes with |H| < eps_H are masked (field zeroed there): the operator
    has no sensible value in that neighborhood.  Raises when every node is
    masked.
    """
    if eps_H <= 0:
        raise ValueError("eps_H must be positive")
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != grid.qp_shape:
        raise ValueError("field shape does not match grid")
    Q, P = grid.mesh()
    H = P ** 2 / (2 * mass) + 0.5 * mass * omega ** 2 * Q ** 2
    mask = np.abs(H) < eps_H
    if mask.all():
        raise ValueError("all nodes lie inside the |H| < eps_H cutoff")

    with np.errstate(divide="ignore", invalid="ignore"):
        tau = np.arctan2(mass * omega * Q, P) / omega
        theta = tau + Q * P / (2 * H)
        coef_p = P / (2 * H)
        coef_q = Q / (2 * H)
    dphi_q = diff_values(phi, grid.h_q, 0, stencil_order)
    dphi_p = diff_values(phi, grid.h_p, 1, stencil_order)
    out = theta * phi + 1j * hbar * (coef_p * dphi_p + coef_q * dphi_q)
    out = np.where(mask, 0.0, out)
    return out, mask
