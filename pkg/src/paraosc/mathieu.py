"""Canonical Mathieu form f'' + (a - 2b cos 2tau) f = 0, monodromy and Floquet exponents.

Physical time t maps to canonical time tau = Omega t / 2, so one drive period
is a canonical period of pi. Exponents are per unit canonical time; multiply
by Omega / 2 for physical units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from paraosc.integrator import IntegratorConfig, integrate_linear2
from paraosc.scenario import DriveParameters, Mode

CLASSIFY_TOL = 1e-9


@dataclass(frozen=True)
class CanonicalMathieuParams:
    a: float
    b: float


@dataclass(frozen=True)
class FloquetResult:
    monodromy: np.ndarray
    exponent: complex
    stable: bool
    marginal: bool
    multiplier_moduli: tuple

    @property
    def trace(self) -> float:
        return float(np.trace(self.monodromy))

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.monodromy))

    def physical_exponent(self, Omega: float) -> complex:
        return self.exponent * Omega / 2


def canonical_params(params: DriveParameters, mode: Mode) -> CanonicalMathieuParams:
    om, Om = params.omega, params.Omega
    a = 4 * (om**2 + mode.sign * 2 * om * params.g) / Om**2
    b = -mode.sign * 4 * om * params.delta_g / Om**2
    return CanonicalMathieuParams(a, b)


def floquet_exponent(trace):
    """Principal arccos(tr M / 2) / pi with the imaginary part reported >= 0."""
    z = np.arccos(np.asarray(trace, dtype=complex) / 2) / math.pi
    return np.where(z.imag < 0, np.conj(z), z)


def _multiplier_moduli(M: np.ndarray):
    mults = np.linalg.eigvals(M)
    mods = sorted(abs(complex(m)) for m in mults)
    return (mods[0], mods[1])


def _result(M: np.ndarray) -> FloquetResult:
    tr = float(np.trace(M))
    excess = abs(tr) - 2
    return FloquetResult(
        monodromy=M,
        exponent=complex(floquet_exponent(tr)),
        stable=bool(excess <= CLASSIFY_TOL),
        marginal=bool(abs(excess) <= CLASSIFY_TOL),
        multiplier_moduli=_multiplier_moduli(M),
    )


def monodromy_batch(a, b, cfg: Optional[IntegratorConfig] = None) -> np.ndarray:
    """Monodromy matrices for arrays of (a, b), integrated as one batch.

    Returns an array of shape ``np.shape(a) + (2, 2)``; columns are the
    fundamental solutions started from (f, f') = (1, 0) and (0, 1).
    """
    cfg = cfg or IntegratorConfig()
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    shape = a.shape
    aa = a[..., None]
    bb = b[..., None]
    f0 = np.broadcast_to(np.array([1.0, 0.0], dtype=complex), shape + (2,))
    fd0 = np.broadcast_to(np.array([0.0, 1.0], dtype=complex), shape + (2,))

    def freq_sq(tau):
        return aa - 2 * bb * math.cos(2 * tau)

    sol = integrate_linear2(freq_sq, f0, fd0, 0.0, math.pi, cfg)
    y = sol.y_eval[-1]
    M = np.empty(shape + (2, 2))
    M[..., 0, :] = y[0]
    M[..., 1, :] = y[2]
    return M


def monodromy(p: CanonicalMathieuParams, cfg: Optional[IntegratorConfig] = None) -> FloquetResult:
    return _result(monodromy_batch(p.a, p.b, cfg))


def trace_excess(a: float, b: float, cfg: Optional[IntegratorConfig] = None) -> float:
    """|tr M| - 2: positive inside an instability tongue."""
    return abs(float(np.trace(monodromy_batch(a, b, cfg)))) - 2


def bisect_root(fn, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200) -> float:
    """Locate a sign change of ``fn`` in [lo, hi] by bisection."""
    flo, fhi = fn(lo), fn(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ValueError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return 0.5 * (lo + hi)


@dataclass
class ModeLine:
    """Floquet data sampled along the line g -> (a(g), b(g)) for both modes."""

    g: np.ndarray
    a_minus: np.ndarray
    b_minus: np.ndarray
    F_minus: np.ndarray
    stable_minus: np.ndarray
    a_plus: np.ndarray
    b_plus: np.ndarray
    F_plus: np.ndarray
    stable_plus: np.ndarray

    def unstable_intervals(self, mode: Mode) -> list:
        """Contiguous runs of unstable samples as (g_first, g_last) pairs."""
        stable = self.stable_minus if mode is Mode.MINUS else self.stable_plus
        runs, start = [], None
        for i, s in enumerate(stable):
            if not s and start is None:
                start = i
            if s and start is not None:
                runs.append((self.g[start], self.g[i - 1]))
                start = None
        if start is not None:
            runs.append((self.g[start], self.g[-1]))
        return runs

    def rows(self):
        for i in range(len(self.g)):
            yield (
                self.g[i],
                self.a_minus[i], self.b_minus[i], self.F_minus[i].real, self.F_minus[i].imag,
                bool(self.stable_minus[i]),
                self.a_plus[i], self.b_plus[i], self.F_plus[i].real, self.F_plus[i].imag,
                bool(self.stable_plus[i]),
            )


def _line_params(params: DriveParameters, g, delta_ratio: Optional[float]):
    dg = params.delta_g if delta_ratio is None else delta_ratio * g
    om, Om = params.omega, params.Omega
    out = {}
    for mode in Mode:
        a = 4 * (om**2 + mode.sign * 2 * om * g) / Om**2
        b = -mode.sign * 4 * om * dg / Om**2 * np.ones_like(g)
        out[mode] = (a, b)
    return out


def mode_line(
    params: DriveParameters,
    g_range: Sequence[float],
    n: int,
    delta_ratio: Optional[float] = None,
    cfg: Optional[IntegratorConfig] = None,
) -> ModeLine:
    """Sample both modes along g in [g_min, g_max].

    With ``delta_ratio`` the drive amplitude follows delta_g = ratio * g;
    otherwise ``params.delta_g`` is held fixed.
    """
    g_min, g_max = g_range
    if not 0 <= g_min < g_max:
        raise ValueError("g_range: need 0 <= g_min < g_max")
    if n < 2:
        raise ValueError("n: need at least two samples")
    g = np.linspace(g_min, g_max, n)
    lines = _line_params(params, g, delta_ratio)
    data = {}
    for mode in Mode:
        a, b = lines[mode]
        M = monodromy_batch(a, b, cfg)
        tr = np.trace(M, axis1=-2, axis2=-1)
        data[mode] = (a, b, floquet_exponent(tr), np.abs(tr) - 2 <= CLASSIFY_TOL)
    am, bm, Fm, sm = data[Mode.MINUS]
    ap, bp, Fp, sp = data[Mode.PLUS]
    return ModeLine(g, am, bm, Fm, sm, ap, bp, Fp, sp)


def line_trace_excess(params: DriveParameters, mode: Mode, g: float,
                      delta_ratio: Optional[float] = None,
                      cfg: Optional[IntegratorConfig] = None) -> float:
    a, b = _line_params(params, np.asarray(g, dtype=float), delta_ratio)[mode]
    return trace_excess(float(a), float(b), cfg)


@dataclass
class StabilityChart:
    a: np.ndarray  # shape (n_b, n_a) grid, rows follow b
    b: np.ndarray
    stable: np.ndarray
    imF: np.ndarray

    def rows(self):
        for i in range(self.a.shape[0]):
            for j in range(self.a.shape[1]):
                yield self.a[i, j], self.b[i, j], bool(self.stable[i, j]), self.imF[i, j]


def stability_chart(a_range, b_range, resolution, cfg: Optional[IntegratorConfig] = None,
                    chunk: int = 4096) -> StabilityChart:
    """Row-major (b outer, a inner) stability grid of the canonical Mathieu equation."""
    if isinstance(resolution, int):
        n_a = n_b = resolution
    else:
        n_a, n_b = resolution
    if n_a < 2 or n_b < 2:
        raise ValueError("resolution: need at least 2 points per axis")
    for name, rng in (("a_range", a_range), ("b_range", b_range)):
        if not (np.all(np.isfinite(rng)) and rng[0] < rng[1]):
            raise ValueError(f"{name}: need finite lo < hi")
    a_axis = np.linspace(a_range[0], a_range[1], n_a)
    b_axis = np.linspace(b_range[0], b_range[1], n_b)
    A, B = np.meshgrid(a_axis, b_axis)
    tr = np.empty(A.size)
    fa, fb = A.ravel(), B.ravel()
    for start in range(0, fa.size, chunk):
        sl = slice(start, start + chunk)
        tr[sl] = np.trace(monodromy_batch(fa[sl], fb[sl], cfg), axis1=-2, axis2=-1)
    tr = tr.reshape(A.shape)
    return StabilityChart(A, B, np.abs(tr) - 2 <= CLASSIFY_TOL, floquet_exponent(tr).imag)
