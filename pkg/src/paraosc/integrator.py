"""Explicit Runge-Kutta propagation of complex linear second-order ODEs.

Complex amplitudes are split into real and imaginary parts and integrated as
a real first-order system, so a single error controller sees both parts.
States may carry an arbitrary batch shape; the adaptive controller then uses
the max-norm over the whole batch, which keeps every member within tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

RK4 = "rk4"
DOPRI5 = "dopri5"

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
_A_MAT = np.zeros((7, 7))
for _i, _row in enumerate(_A):
    _A_MAT[_i, : len(_row)] = _row


class IntegrationError(RuntimeError):
    """Raised when propagation cannot continue; ``t`` is the time of failure."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (t = {t:.17g})")
        self.t = t


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration settings.

    For ``method="rk4"`` the interval is split into equal steps no longer
    than ``max_step``; tolerances are then unused.
    """

    method: str = DOPRI5
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    max_step: float = 0.25
    initial_step: float = 1e-3

    def __post_init__(self):
        if self.method not in (RK4, DOPRI5):
            raise ValueError(f"method: unknown integration method {self.method!r}")
        for name in ("rel_tol", "abs_tol"):
            value = getattr(self, name)
            if not 0 < value <= 1e-2:
                raise ValueError(f"{name}: must lie in (0, 1e-2], got {value!r}")
        if not self.max_step > 0:
            raise ValueError("max_step: must be > 0")
        if not self.initial_step > 0:
            raise ValueError("initial_step: must be > 0")

    @classmethod
    def fixed(cls, step: float) -> "IntegratorConfig":
        return cls(method=RK4, max_step=step)


@dataclass(frozen=True)
class OscState:
    b: complex
    bdot: complex
    t: float

    @property
    def wronskian(self) -> complex:
        """Bdot B* - B Bdot*; equals i for a valid auxiliary parameter."""
        return wronskian(self.b, self.bdot)


def wronskian(b, bdot):
    return bdot * np.conj(b) - b * np.conj(bdot)


@dataclass
class Solution:
    """Accepted integration nodes with a cubic Hermite dense output.

    ``t``/``y``/``dy`` hold every accepted step; ``t_eval``/``y_eval`` hold
    the requested output times, which the integrator lands on exactly.
    """

    t: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    t_eval: np.ndarray
    y_eval: np.ndarray
    n_rhs: int = 0

    def __call__(self, t: float) -> np.ndarray:
        ts = self.t
        if t < ts[0] - 1e-12 * max(1.0, abs(ts[0])) or t > ts[-1] + 1e-12 * max(1.0, abs(ts[-1])):
            raise ValueError(f"t = {t!r} outside the integrated interval [{ts[0]}, {ts[-1]}]")
        i = int(np.searchsorted(ts, t, side="right")) - 1
        i = min(max(i, 0), len(ts) - 2)
        t0, t1 = ts[i], ts[i + 1]
        h = t1 - t0
        s = (t - t0) / h
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return h00 * self.y[i] + h10 * h * self.dy[i] + h01 * self.y[i + 1] + h11 * h * self.dy[i + 1]


def _check_finite(values: np.ndarray, t: float):
    if not np.all(np.isfinite(values)):
        raise IntegrationError("non-finite value in right-hand side", t)


def solve(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0: np.ndarray,
    t_end: float,
    cfg: IntegratorConfig,
    t_eval: Optional[Sequence[float]] = None,
) -> Solution:
    """Integrate y' = rhs(t, y) from t0 to t_end (t_end > t0)."""
    if not t_end > t0:
        raise ValueError("t_end must be greater than the initial time")
    y0 = np.asarray(y0, dtype=float)
    if t_eval is None:
        targets = np.array([t_end])
    else:
        targets = np.asarray(t_eval, dtype=float)
        if targets.ndim != 1 or np.any(np.diff(targets) < 0):
            raise ValueError("t_eval must be a non-decreasing 1-d sequence")
        if targets.size and (targets[0] < t0 or targets[-1] > t_end):
            raise ValueError("t_eval must lie within [t0, t_end]")
    if cfg.method == RK4:
        sol = _solve_rk4(rhs, t0, y0, t_end, cfg, targets)
    else:
        sol = _solve_dopri5(rhs, t0, y0, t_end, cfg, targets)
    if t_eval is None:
        sol.t_eval = sol.t.copy()
        sol.y_eval = sol.y.copy()
    return sol


def _collect_eval(targets, t, y, out_t, out_y, eps):
    """Append every target equal to t (within eps) to the output lists."""
    hits = 0
    while len(out_t) + hits < len(targets) and abs(targets[len(out_t) + hits] - t) <= eps:
        hits += 1
    for _ in range(hits):
        out_t.append(t)
        out_y.append(y)


def _solve_rk4(rhs, t0, y0, t_end, cfg, targets):
    # uniform steps between consecutive stops (targets plus the end point)
    stops = np.unique(np.concatenate([[t0], targets, [t_end]]))
    ts, ys, dys = [t0], [y0], []
    out_t, out_y = [], []
    eps = 1e-12 * max(1.0, abs(t_end))
    _collect_eval(targets, t0, y0, out_t, out_y, eps)
    y = y0
    k1 = rhs(t0, y)
    _check_finite(k1, t0)
    dys.append(k1)
    n_rhs = 1
    for a, b in zip(stops[:-1], stops[1:]):
        n = max(1, int(math.ceil((b - a) / cfg.max_step - 1e-9)))
        h = (b - a) / n
        for j in range(n):
            t = a + j * h
            k2 = rhs(t + h / 2, y + h / 2 * k1)
            k3 = rhs(t + h / 2, y + h / 2 * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t_new = b if j == n - 1 else a + (j + 1) * h
            k1 = rhs(t_new, y)
            n_rhs += 4
            _check_finite(k1, t_new)
            ts.append(t_new)
            ys.append(y)
            dys.append(k1)
        _collect_eval(targets, b, y, out_t, out_y, eps)
    return Solution(np.array(ts), np.array(ys), np.array(dys), np.array(out_t), np.array(out_y), n_rhs)


def _solve_dopri5(rhs, t0, y0, t_end, cfg, targets):
    shape = y0.shape

    def frhs(t, v):
        return np.reshape(rhs(t, v.reshape(shape)), -1)

    t = t0
    y = y0.reshape(-1).copy()
    K = np.empty((7, y.size))
    K[0] = frhs(t, y)
    _check_finite(K[0], t)
    n_rhs = 1
    ts, ys, dys = [t], [y], [K[0].copy()]
    out_t, out_y = [], []
    eps = 1e-12 * max(1.0, abs(t_end))
    _collect_eval(targets, t, y, out_t, out_y, eps)
    stops = [s for s in np.unique(np.concatenate([targets, [t_end]])) if s > t + eps]
    stop_idx = 0
    h_ctrl = cfg.initial_step
    while stop_idx < len(stops):
        stop = stops[stop_idx]
        h = min(h_ctrl, cfg.max_step)
        hit = False
        if t + h >= stop - eps:
            h = stop - t
            hit = True
        if h <= 1e-14 * max(1.0, abs(t)):
            raise IntegrationError("step size underflow", t)
        for i in range(1, 7):
            K[i] = frhs(t + _C[i] * h, y + h * (_A_MAT[i, :i] @ K[:i]))
        n_rhs += 6
        y_new = y + h * (_B5[:6] @ K[:6])
        # error per unit step: global error then scales linearly with the tolerance
        err_vec = _E @ K
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale))
        if not math.isfinite(err):
            raise IntegrationError("non-finite value in right-hand side", t)
        if err <= 1.0:
            t = stop if hit else t + h
            y = y_new
            K[0] = K[6]
            ts.append(t)
            ys.append(y)
            dys.append(K[0].copy())
            if hit:
                _collect_eval(targets, t, y, out_t, out_y, eps)
                stop_idx += 1
            else:
                # a step clipped to an output time says nothing new about h_ctrl
                h_ctrl = h * (5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.25)))
        else:
            h_ctrl = h * max(0.2, 0.9 * err ** -0.25)

    def stack(rows):
        return np.array(rows).reshape((len(rows),) + shape)

    return Solution(np.array(ts), stack(ys), stack(dys), np.array(out_t), stack(out_y), n_rhs)


# complex <-> real packing: leading axis of length 4 = (Re b, Im b, Re bdot, Im bdot)

def pack(b, bdot) -> np.ndarray:
    b = np.asarray(b, dtype=complex)
    bdot = np.asarray(bdot, dtype=complex)
    return np.stack([b.real, b.imag, bdot.real, bdot.imag])


def unpack_nodes(ys: np.ndarray):
    """Unpack an array of packed states stacked along axis 0."""
    return ys[:, 0] + 1j * ys[:, 1], ys[:, 2] + 1j * ys[:, 3]


def _scalar_rhs(freq_sq):
    def rhs(t, y):
        w = freq_sq(t)
        out = np.empty(y.shape)
        out[0] = y[2]
        out[1] = y[3]
        if np.iscomplexobj(w):
            acc = -w * (y[0] + 1j * y[1])
            out[2] = acc.real
            out[3] = acc.imag
        else:
            out[2] = -w * y[0]
            out[3] = -w * y[1]
        return out

    return rhs


def integrate_linear2(freq_sq, b0, bdot0, t0, t_end, cfg, t_eval=None) -> Solution:
    """Batched propagation of B'' + freq_sq(t) B = 0.

    ``b0``/``bdot0`` may be arrays of any (common) shape; ``freq_sq(t)`` must
    broadcast against it.
    """
    return solve(_scalar_rhs(freq_sq), t0, pack(b0, bdot0), t_end, cfg, t_eval)


class ScalarTrajectory(Sequence):
    """Samples of a single scalar solution, also evaluable between samples."""

    def __init__(self, sol: Solution):
        self.solution = sol
        self.t = sol.t_eval
        self.b, self.bdot = unpack_nodes(sol.y_eval)

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return OscState(complex(self.b[i]), complex(self.bdot[i]), float(self.t[i]))

    def at(self, t: float) -> OscState:
        """Exact sample when t coincides with one, cubic Hermite otherwise."""
        i = int(np.searchsorted(self.t, t))
        for j in (i - 1, i):
            if 0 <= j < len(self.t) and abs(self.t[j] - t) <= 1e-12 * max(1.0, abs(t)):
                return self[j]
        y = self.solution(t)
        return OscState(complex(y[0] + 1j * y[1]), complex(y[2] + 1j * y[3]), float(t))


def propagate_scalar(
    freq_sq: Callable[[float], float],
    state: OscState,
    t_end: float,
    cfg: Optional[IntegratorConfig] = None,
    t_eval: Optional[Sequence[float]] = None,
) -> ScalarTrajectory:
    """Solve B'' + freq_sq(t) B = 0 from ``state`` up to ``t_end``.

    Without ``t_eval`` the samples are the accepted integration steps.
    """
    cfg = cfg or IntegratorConfig()
    sol = integrate_linear2(freq_sq, state.b, state.bdot, state.t, t_end, cfg, t_eval)
    return ScalarTrajectory(sol)


@dataclass
class CoupledCoefficients:
    """Coefficient callables of the general two-mode quadratic Hamiltonian.

    ``mu1_dot``/``mu2_dot`` are optional analytic derivatives of ``mu1``/``mu2``.
    """

    mu1: Callable[[float], float]
    mu2: Callable[[float], float]
    nu1: Callable[[float], float]
    nu2: Callable[[float], float]
    gamma: Callable[[float], float]
    mu1_dot: Optional[Callable[[float], float]] = None
    mu2_dot: Optional[Callable[[float], float]] = None

    def mu(self, t):
        return np.array([self.mu1(t), self.mu2(t)], dtype=float)

    def mu_dot(self, t):
        return np.array(
            [_derivative(self.mu1, self.mu1_dot, t), _derivative(self.mu2, self.mu2_dot, t)],
            dtype=float,
        )

    def nu(self, t):
        return np.array([self.nu1(t), self.nu2(t)], dtype=float)


def _derivative(fn, dfn, t):
    if dfn is not None:
        return dfn(t)
    h = 1e-6 * max(1.0, abs(t))
    return (fn(t + h) - fn(t - h)) / (2 * h)


def _coupled_rhs(coeffs: CoupledCoefficients):
    c = coeffs

    def rhs(t, y):
        m1, m2 = float(c.mu1(t)), float(c.mu2(t))
        if m1 == 0 or m2 == 0:
            raise IntegrationError("mass coefficient mu_k vanishes", t)
        d1 = float(_derivative(c.mu1, c.mu1_dot, t))
        d2 = float(_derivative(c.mu2, c.mu2_dot, t))
        n1, n2, gam = float(c.nu1(t)), float(c.nu2(t)), float(c.gamma(t))
        if not math.isfinite(m1 + m2 + d1 + d2 + n1 + n2 + gam):
            raise IntegrationError("non-finite coefficient value", t)
        damp = np.array([d1 / m1, d2 / m2])
        stiff = np.array([m1 * n1, m2 * n2])
        cross = np.array([m1 * gam, m2 * gam])
        out = np.empty_like(y)
        out[0], out[1] = y[2], y[3]
        # column k couples to the other column through gamma
        out[2] = damp * y[2] - stiff * y[0] - cross * y[0][:, ::-1]
        out[3] = damp * y[3] - stiff * y[1] - cross * y[1][:, ::-1]
        return out

    return rhs


def propagate_coupled(
    coeffs: CoupledCoefficients,
    B0: np.ndarray,
    Bdot0: np.ndarray,
    t0: float,
    t_end: float,
    cfg: Optional[IntegratorConfig] = None,
    t_eval: Optional[Sequence[float]] = None,
) -> Solution:
    """Integrate the 2x2 auxiliary matrix B_ik of the general quadratic Hamiltonian.

    Row i is a ladder operator, column k a coordinate:
    B''_ik = (mu_k'/mu_k) B'_ik - mu_k nu_k B_ik - mu_k gamma B_ik', k' != k.
    """
    cfg = cfg or IntegratorConfig()
    B0 = np.asarray(B0, dtype=complex)
    Bdot0 = np.asarray(Bdot0, dtype=complex)
    if B0.shape != (2, 2) or Bdot0.shape != (2, 2):
        raise ValueError("B0 and Bdot0 must be 2x2")
    return solve(_coupled_rhs(coeffs), t0, pack(B0, Bdot0), t_end, cfg, t_eval)
