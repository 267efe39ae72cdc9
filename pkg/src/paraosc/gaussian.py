"""Reduced one-oscillator Gaussian state: density matrix, entropies, Wigner function.

The reduced density matrix of either oscillator is

    rho(x', x) = Lambda exp(-Re(alpha) (x'^2 + x^2) + beta x x') exp(i Im(alpha) (x'^2 - x^2))

with (alpha, beta, Lambda) fixed by the pair xi_-/+ = -i B'_-/+ / B_-/+.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from paraosc.auxiliary import AuxiliaryTrajectory, ModeXiPair, xi_at
from paraosc.scenario import DriveParameters, Mode, mode_frequency_squared

ROTATION = 1 / math.sqrt(2)


class GaussianDomainError(ValueError):
    pass


@dataclass(frozen=True)
class ReducedGaussianParams:
    alpha: complex
    beta: float
    lam: float
    c: float = ROTATION
    s: float = ROTATION

    @property
    def width_sum(self) -> float:
        """2 Re(alpha) + beta, the Wigner momentum-width denominator."""
        return 2 * self.alpha.real + self.beta

    @property
    def purity_det(self) -> float:
        """4 Re(alpha)^2 - beta^2."""
        return 4 * self.alpha.real**2 - self.beta**2


def _reduced_params(xi_m: complex, xi_p: complex, c: float, s: float) -> ReducedGaussianParams:
    rm, rp = xi_m.real, xi_p.real
    if rm <= 0 or rp <= 0:
        raise GaussianDomainError(f"Re xi must be positive (got {rm!r}, {rp!r})")
    c2, s2 = c * c, s * s
    den = rm * c2 + rp * s2
    diff_c = np.conj(xi_m - xi_p)
    alpha = (np.conj(xi_m) * s2 + np.conj(xi_p) * c2) / 2 - c2 * s2 * diff_c**2 / (4 * den)
    beta = c2 * s2 * abs(xi_m - xi_p) ** 2 / (2 * den)
    lam = math.sqrt(rm * rp / (math.pi * den))
    return ReducedGaussianParams(complex(alpha), float(beta), lam, c, s)


def reduced_params(xi: ModeXiPair) -> ReducedGaussianParams:
    return _reduced_params(complex(xi.xi_minus), complex(xi.xi_plus), ROTATION, ROTATION)


def reduced_density(p: ReducedGaussianParams, x2p, x2):
    x2p = np.asarray(x2p, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    ra, ia = p.alpha.real, p.alpha.imag
    return p.lam * np.exp(-ra * (x2p**2 + x2**2) + p.beta * x2 * x2p) * np.exp(1j * ia * (x2p**2 - x2**2))


def purity(p: ReducedGaussianParams) -> float:
    det = p.purity_det
    if not det > 0:
        raise GaussianDomainError(f"4 Re(alpha)^2 - beta^2 must be positive (got {det!r})")
    return math.pi * p.lam**2 / math.sqrt(det)


def linear_entropy(p: ReducedGaussianParams) -> float:
    """L = 1 - tr(rho^2)."""
    return 1 - purity(p)


def von_neumann_entropy(purity_value: float) -> float:
    """Entropy of a single-mode Gaussian state with the given purity.

    Uses the symplectic eigenvalue nu = 1 / (2 purity) (vacuum nu = 1/2).
    """
    if not 0 < purity_value <= 1 + 1e-12:
        raise ValueError(f"purity must lie in (0, 1], got {purity_value!r}")
    nu = 1 / (2 * min(purity_value, 1.0))
    hi, lo = nu + 0.5, nu - 0.5
    s = hi * math.log(hi)
    if lo > 0:
        s -= lo * math.log(lo)
    return max(s, 0.0)


@dataclass
class EntropySeries:
    t: np.ndarray
    linear: np.ndarray
    purity: np.ndarray

    def __iter__(self):
        return iter(zip(self.t, self.linear, self.purity))

    def __len__(self):
        return len(self.t)

    @property
    def von_neumann(self) -> np.ndarray:
        return np.array([von_neumann_entropy(float(p)) for p in self.purity])


def entropy_series(traj_minus: AuxiliaryTrajectory, traj_plus: AuxiliaryTrajectory,
                   times: Sequence[float]) -> EntropySeries:
    times = np.asarray(times, dtype=float)
    pur = np.empty(times.size)
    for i, t in enumerate(times):
        pur[i] = purity(reduced_params(xi_at(traj_minus, traj_plus, float(t))))
    return EntropySeries(times, 1 - pur, pur)


def _wigner_parts(p: ReducedGaussianParams):
    d = p.width_sum
    k = 4 * abs(p.alpha) ** 2 - p.beta**2
    if not d > 0:
        raise GaussianDomainError(f"2 Re(alpha) + beta must be positive (got {d!r})")
    if not k > 0:
        raise GaussianDomainError(f"4|alpha|^2 - beta^2 must be positive (got {k!r})")
    return d, k


def wigner(p: ReducedGaussianParams, q, p_mom):
    d, k = _wigner_parts(p)
    q = np.asarray(q, dtype=float)
    p_mom = np.asarray(p_mom, dtype=float)
    pref = p.lam / math.sqrt(math.pi * d)
    # one exponent: separate factors overflow to inf * 0 far from the origin
    return pref * np.exp((4 * p.alpha.imag * q * p_mom - q**2 * k - p_mom**2) / d)


def static_energies(params: DriveParameters):
    """Real mode energies of the undriven problem; requires g < omega / 2."""
    if params.delta_g != 0:
        raise ValueError("delta_g: static forms need delta_g = 0")
    if not params.g < params.critical_coupling:
        raise ValueError("g: static forms need g < omega / 2 (eps_- must be real)")
    em = math.sqrt(mode_frequency_squared(params, Mode.MINUS, 0.0))
    ep = math.sqrt(mode_frequency_squared(params, Mode.PLUS, 0.0))
    return em, ep


def wigner_static(params: DriveParameters, q, p_mom):
    em, ep = static_energies(params)
    q = np.asarray(q, dtype=float)
    p_mom = np.asarray(p_mom, dtype=float)
    ssum = em + ep
    return 2 * math.sqrt(em * ep) / (math.pi * ssum) * np.exp(-2 / ssum * (em * ep * q**2 + p_mom**2))


def static_linear_entropy(params: DriveParameters) -> float:
    """Closed form 1 - 2 sqrt(eps_- eps_+) / (eps_- + eps_+) for the undriven coupling."""
    em, ep = static_energies(params)
    return 1 - 2 * math.sqrt(em * ep) / (em + ep)


def purity_from_wigner(p: ReducedGaussianParams) -> float:
    """2 pi * integral of W^2, evaluated as a Gaussian integral over the Wigner quadratic form."""
    d, k = _wigner_parts(p)
    pref = p.lam / math.sqrt(math.pi * d)
    # W = pref * exp(-v^T Q v), v = (q, p)
    Q = np.array([[k, -2 * p.alpha.imag], [-2 * p.alpha.imag, 1.0]]) / d
    # integral of exp(-v^T (2Q) v) over the plane = pi / sqrt(det 2Q)
    return 2 * math.pi * pref**2 * math.pi / math.sqrt(np.linalg.det(2 * Q))


@dataclass
class WignerGrid:
    t: float
    q: np.ndarray
    p: np.ndarray
    W: np.ndarray  # shape (len(q), len(p)), row-major in q
    params: ReducedGaussianParams

    @property
    def cell_area(self) -> float:
        return float((self.q[1] - self.q[0]) * (self.p[1] - self.p[0]))

    @property
    def total(self) -> float:
        return float(self.W.sum() * self.cell_area)

    def support_area(self) -> float:
        """Phase-space area of cells where W exceeds max(W) / e."""
        return float(np.count_nonzero(self.W > self.W.max() / math.e) * self.cell_area)

    def rows(self):
        for i, qv in enumerate(self.q):
            for j, pv in enumerate(self.p):
                yield qv, pv, self.W[i, j]


def wigner_grid(traj_minus: AuxiliaryTrajectory, traj_plus: AuxiliaryTrajectory, t: float,
                q_range=(-8.0, 8.0), p_range=(-8.0, 8.0), resolution=400) -> WignerGrid:
    if isinstance(resolution, int):
        nq = np_ = resolution
    else:
        nq, np_ = resolution
    if nq < 2 or np_ < 2:
        raise ValueError("resolution: need at least 2 points per axis")
    params = reduced_params(xi_at(traj_minus, traj_plus, t))
    q = np.linspace(q_range[0], q_range[1], nq)
    pm = np.linspace(p_range[0], p_range[1], np_)
    Q, P = np.meshgrid(q, pm, indexing="ij")
    return WignerGrid(float(t), q, pm, wigner(params, Q, P), params)
