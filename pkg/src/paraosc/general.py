"""General time-dependent quadratic two-oscillator Hamiltonian

    H(t) = 1/2 sum_i (mu_i p_i^2 + nu_i x_i^2) + gamma(t) x_1 x_2

solved through the 2x2 auxiliary matrices of the ladder operators
a_i = sum_k (A_ik x_k + B_ik p_k), with A_ik = -B'_ik / mu_k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from paraosc.auxiliary import thermal_initial_conditions
from paraosc.integrator import (
    CoupledCoefficients,
    IntegrationError,
    IntegratorConfig,
    propagate_coupled,
    unpack_nodes,
)
from paraosc.scenario import DriveParameters, Mode, coupling_at

INIT_TOL = 1e-10
DRIFT_ABORT = 1e-6


class ConstraintError(ValueError):
    pass


@dataclass
class QuadraticHamiltonian(CoupledCoefficients):
    """Coefficient callables t -> float; ``mu*_dot`` are optional analytic derivatives."""

    @classmethod
    def from_drive(cls, params: DriveParameters) -> "QuadraticHamiltonian":
        """Coefficients reproducing the normal-mode frequencies omega^2 -/+ 2 omega gamma(t).

        The bilinear coefficient is therefore 2 omega gamma(t), not gamma(t).
        """
        om = params.omega
        om2 = om * om

        def one(t):
            return 1.0

        def zero(t):
            return 0.0

        def nu(t):
            return om2

        def gamma(t):
            return 2 * om * float(coupling_at(params, t))

        return cls(one, one, nu, nu, gamma, zero, zero)


@dataclass
class AuxiliaryMatrix:
    B: np.ndarray
    Bdot: np.ndarray
    A: np.ndarray
    t: float

    @classmethod
    def from_b(cls, B, Bdot, t: float, h: QuadraticHamiltonian) -> "AuxiliaryMatrix":
        B = np.asarray(B, dtype=complex)
        Bdot = np.asarray(Bdot, dtype=complex)
        mu = h.mu(t)
        if np.any(mu == 0):
            raise IntegrationError("mass coefficient mu_k vanishes", t)
        return cls(B, Bdot, -Bdot / mu[None, :], float(t))


def constraint_residuals(m: AuxiliaryMatrix, h: QuadraticHamiltonian):
    """Max-abs deviations of the three ladder-operator constraints (targets 0, 0, i delta_mn)."""
    mu = h.mu(m.t).astype(complex)
    B, Bd = m.B, m.Bdot
    w = Bd / mu[None, :]
    wc = np.conj(Bd) / np.conj(mu)[None, :]
    wc1 = w @ B.T - B @ w.T
    wc2 = wc @ np.conj(B).T - np.conj(B) @ wc.T
    wc3 = w @ np.conj(B).T - B @ wc.T
    return (
        float(np.max(np.abs(wc1))),
        float(np.max(np.abs(wc2))),
        float(np.max(np.abs(wc3 - 1j * np.eye(2)))),
    )


def normal_mode_init(params: DriveParameters) -> AuxiliaryMatrix:
    """Rotate the two normal-mode thermal seeds into the (x_1, x_2) frame.

    Row 1 annihilates the soft mode q_- = (x_1 - x_2)/sqrt(2), row 2 the mode
    q_+ = (x_1 + x_2)/sqrt(2).
    """
    sm = thermal_initial_conditions(params, Mode.MINUS)
    sp = thermal_initial_conditions(params, Mode.PLUS)
    r = 1 / math.sqrt(2)
    rot = np.array([[r, -r], [r, r]])
    B = rot * np.array([[sm.b], [sp.b]])
    Bdot = rot * np.array([[sm.bdot], [sp.bdot]])
    h = QuadraticHamiltonian.from_drive(params)
    m = AuxiliaryMatrix.from_b(B, Bdot, params.t0, h)
    res = constraint_residuals(m, h)
    if max(res) > 1e-12:
        raise ConstraintError(f"rotated seed violates the constraints: residuals {res}")
    return m


@dataclass
class GeneralTrajectory:
    hamiltonian: QuadraticHamiltonian
    samples: list
    residuals: np.ndarray  # shape (n, 3)

    @property
    def t(self) -> np.ndarray:
        return np.array([m.t for m in self.samples])

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, i):
        return self.samples[i]


def evolve_general(
    h: QuadraticHamiltonian,
    init: AuxiliaryMatrix,
    t_end: float,
    cfg: Optional[IntegratorConfig] = None,
    times: Optional[Sequence[float]] = None,
) -> GeneralTrajectory:
    res0 = constraint_residuals(init, h)
    if max(res0) > INIT_TOL:
        raise ConstraintError(f"initial auxiliary matrix violates the constraints: residuals {res0}")
    sol = propagate_coupled(h, init.B, init.Bdot, init.t, t_end, cfg, times)
    Bs, Bds = unpack_nodes(sol.y_eval)
    samples, residuals = [], []
    for t, B, Bd in zip(sol.t_eval, Bs, Bds):
        m = AuxiliaryMatrix.from_b(B, Bd, t, h)
        r = constraint_residuals(m, h)
        if max(r) > DRIFT_ABORT:
            raise IntegrationError(f"constraint drift {max(r):.3e} exceeds {DRIFT_ABORT:g}", float(t))
        samples.append(m)
        residuals.append(r)
    return GeneralTrajectory(h, samples, np.array(residuals))


def ground_state_matrix(m: AuxiliaryMatrix) -> np.ndarray:
    """Complex symmetric M with Psi_00 ~ exp(-x^T M x / 2), from a_i Psi_00 = 0."""
    M = 1j * np.linalg.solve(m.B, m.A)
    return (M + M.T) / 2


def joint_ground_density_general(m: AuxiliaryMatrix, x1, x2):
    """|Psi_00(x1, x2)|^2 built from the auxiliary matrix alone."""
    R = ground_state_matrix(m).real
    det = float(np.linalg.det(R))
    if not det > 0:
        raise ConstraintError("ground state is not normalisable (Re M not positive definite)")
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    quad = R[0, 0] * x1**2 + 2 * R[0, 1] * x1 * x2 + R[1, 1] * x2**2
    return math.sqrt(det) / math.pi * np.exp(-quad)
