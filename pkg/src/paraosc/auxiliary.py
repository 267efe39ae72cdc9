"""Auxiliary parameters B(t) of the two normal modes and the quantities built on them.

The Lewis-Riesenfeld phases of the number states are never computed: they are
global phases and drop out of every density, entropy and Wigner function here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from paraosc.integrator import (
    IntegrationError,
    IntegratorConfig,
    OscState,
    Solution,
    integrate_linear2,
    unpack_nodes,
    wronskian,
)
from paraosc.scenario import DriveParameters, Mode, mode_energy

# Absolute Wronskian error |B' B* - B B'* - i| tolerated before a run is aborted.
WRONSKIAN_ABORT = 1e-6
MAX_HERMITE_ORDER = 30


class SingularEvaluation(ArithmeticError):
    pass


def thermal_initial_conditions(params: DriveParameters, mode: Mode) -> OscState:
    """Seed B(t0) = i / sqrt(2 eps*), B'(t0) = -sqrt(eps / 2), principal roots throughout.

    The Wronskian B' B* - B B'* of this seed is exactly i, also when eps is
    purely imaginary (a momentarily inverted soft mode).
    """
    eps = mode_energy(params, mode, params.t0)
    if eps == 0:
        raise ValueError(f"{mode.value} mode is degenerate at t0 (eps = 0)")
    b = 1j / np.sqrt(2 * np.conj(eps))
    bdot = -np.sqrt(eps / 2)
    return OscState(complex(b), complex(bdot), params.t0)


@dataclass
class AuxiliaryTrajectory:
    mode: Mode
    params: DriveParameters
    t: np.ndarray
    b: np.ndarray
    bdot: np.ndarray
    solution: Solution
    column: int = 0

    @property
    def samples(self) -> list:
        return [OscState(complex(b), complex(bd), float(t)) for t, b, bd in zip(self.t, self.b, self.bdot)]

    @property
    def wronskian_error(self) -> np.ndarray:
        return np.abs(wronskian(self.b, self.bdot) - 1j)

    def at(self, t: float):
        """(B, B') at time t: exact at a sample, cubic Hermite between samples."""
        i = int(np.searchsorted(self.t, t))
        for j in (i - 1, i):
            if 0 <= j < len(self.t) and abs(self.t[j] - t) <= 1e-12 * max(1.0, abs(t)):
                return complex(self.b[j]), complex(self.bdot[j])
        y = self.solution(t)
        return complex(y[0][self.column] + 1j * y[1][self.column]), complex(y[2][self.column] + 1j * y[3][self.column])

    def arrays_at(self, times):
        """Vectorised ``at``; returns (B, B') arrays."""
        out = [self.at(float(t)) for t in np.atleast_1d(times)]
        b = np.array([o[0] for o in out])
        bd = np.array([o[1] for o in out])
        return b, bd


def _check_wronskian(label: str, ts, bs, bds):
    err = np.abs(wronskian(bs, bds) - 1j)
    worst = int(np.argmax(err))
    if err[worst] > WRONSKIAN_ABORT:
        raise IntegrationError(
            f"{label} Wronskian drift {err[worst]:.3e} exceeds {WRONSKIAN_ABORT:g}", float(ts[worst])
        )


def evolve_modes(
    params: DriveParameters,
    t_end: float,
    cfg: Optional[IntegratorConfig] = None,
    times: Optional[Sequence[float]] = None,
    modes: Sequence[Mode] = (Mode.MINUS, Mode.PLUS),
) -> dict:
    """Propagate the seeded auxiliary parameters of several modes in one batch.

    Returns a dict mode -> AuxiliaryTrajectory. Without ``times`` the samples
    are the accepted integration steps.
    """
    cfg = cfg or IntegratorConfig()
    modes = tuple(modes)
    seeds = [thermal_initial_conditions(params, m) for m in modes]
    signs = np.array([m.sign for m in modes], dtype=float)
    om, g, dg, Om = params.omega, params.g, params.delta_g, params.Omega

    def freq_sq(t):
        return om * om + signs * (2 * om * (g + dg * math.cos(Om * t)))

    sol = integrate_linear2(
        freq_sq,
        np.array([s.b for s in seeds]),
        np.array([s.bdot for s in seeds]),
        params.t0,
        t_end,
        cfg,
        times,
    )
    b_all, bd_all = unpack_nodes(sol.y_eval)
    nb, nbd = unpack_nodes(sol.y)
    out = {}
    for col, mode in enumerate(modes):
        traj = AuxiliaryTrajectory(mode, params, sol.t_eval, b_all[:, col], bd_all[:, col], sol, col)
        _check_wronskian(f"{mode.value}-mode", sol.t, nb[:, col], nbd[:, col])
        out[mode] = traj
    return out


def evolve_auxiliary(
    params: DriveParameters,
    mode: Mode,
    t_end: float,
    cfg: Optional[IntegratorConfig] = None,
    times: Optional[Sequence[float]] = None,
) -> AuxiliaryTrajectory:
    """Auxiliary parameter of one mode, seeded by the thermal initial conditions."""
    if not t_end > params.t0:
        raise ValueError("t_end must exceed t0")
    return evolve_modes(params, t_end, cfg, times, modes=(mode,))[mode]


@dataclass(frozen=True)
class ModeXiPair:
    xi_minus: complex
    xi_plus: complex
    t: float


def xi_from(b, bdot):
    """xi = -i B' / B."""
    b = np.asarray(b)
    if np.any(np.abs(b) < 1e-300):
        raise SingularEvaluation("|B| vanishes; xi undefined")
    return -1j * np.asarray(bdot) / b


def xi_at(traj_minus: AuxiliaryTrajectory, traj_plus: AuxiliaryTrajectory, t: float) -> ModeXiPair:
    bm, bdm = traj_minus.at(t)
    bp, bdp = traj_plus.at(t)
    return ModeXiPair(complex(xi_from(bm, bdm)), complex(xi_from(bp, bdp)), float(t))


def characteristic_length(traj: AuxiliaryTrajectory, t: float) -> float:
    """l(t) = sqrt(2) |B(t)|."""
    b, _ = traj.at(t)
    return math.sqrt(2) * abs(b)


def hermite(n: int, x):
    """Physicists' Hermite polynomial by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    h0 = np.ones_like(x)
    if n == 0:
        return h0
    h1 = 2 * x
    for k in range(1, n):
        h0, h1 = h1, 2 * x * h1 - 2 * k * h0
    return h1


def wavefunction(b: complex, bdot: complex, n: int, q):
    """Number-state wave function for auxiliary values (B, B'), without the LR phase."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > MAX_HERMITE_ORDER:
        raise ValueError(f"n > {MAX_HERMITE_ORDER} is not supported")
    q = np.asarray(q, dtype=float)
    absb2 = abs(b) ** 2
    norm = (2.0 ** (-2 * n) / (2 * math.pi * absb2 * math.factorial(n) ** 2)) ** 0.25
    phase = (np.conj(b) / b) ** n
    Q = q / math.sqrt(2 * absb2)
    return norm * phase * hermite(n, Q) * np.exp(1j * bdot / (2 * b) * q**2)


def mode_wavefunction(traj: AuxiliaryTrajectory, n: int, q, t: float):
    b, bdot = traj.at(t)
    return wavefunction(b, bdot, n, q)


def joint_ground_density(traj_minus: AuxiliaryTrajectory, traj_plus: AuxiliaryTrajectory, x1, x2, t: float):
    """|Psi_00(x1, x2, t)|^2 from the normal-mode ground states at q_-/+ = (x1 -/+ x2)/sqrt(2)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    qm = (x1 - x2) / math.sqrt(2)
    qp = (x1 + x2) / math.sqrt(2)
    phi_m = mode_wavefunction(traj_minus, 0, qm, t)
    phi_p = mode_wavefunction(traj_plus, 0, qp, t)
    return np.abs(phi_m) ** 2 * np.abs(phi_p) ** 2
