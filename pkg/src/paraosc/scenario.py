"""Physical scenario: two oscillators of frequency omega coupled through
gamma(t) = g + delta_g * cos(Omega * t).

Natural units (hbar = 1) throughout.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np


class ScenarioError(ValueError):
    """Invalid drive parameters. ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class Mode(enum.Enum):
    """Normal mode selector. MINUS is the soft mode eps_-^2 = omega^2 - 2 omega gamma."""

    MINUS = "minus"
    PLUS = "plus"

    @property
    def sign(self) -> int:
        return -1 if self is Mode.MINUS else 1


_KEYS = ("omega", "g", "delta_g", "Omega", "t0")


@dataclass(frozen=True)
class DriveParameters:
    omega: float = 1.0
    g: float = 0.4
    delta_g: float = 0.04
    Omega: float = 1.0
    t0: float = 0.0

    def __post_init__(self):
        for key in _KEYS:
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ScenarioError(key, f"expected a number, got {value!r}")
            if not math.isfinite(value):
                raise ScenarioError(key, "must be finite")
            object.__setattr__(self, key, float(value))
        if self.omega <= 0:
            raise ScenarioError("omega", "must be > 0")
        if self.Omega <= 0:
            raise ScenarioError("Omega", "must be > 0")
        if self.delta_g < 0:
            raise ScenarioError("delta_g", "must be >= 0")
        # gamma(t) must keep its sign so that |gamma| = gamma
        if self.g == 0 and self.delta_g == 0:
            return
        if not self.g > self.delta_g:
            raise ScenarioError("g", "must exceed delta_g so that gamma(t) > 0 for all t")

    @property
    def period(self) -> float:
        return 2 * math.pi / self.Omega

    @property
    def critical_coupling(self) -> float:
        return self.omega / 2

    def replace(self, **changes) -> "DriveParameters":
        data = asdict(self)
        data.update(changes)
        return DriveParameters(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DriveParameters":
        unknown = set(data) - set(_KEYS)
        if unknown:
            key = sorted(unknown)[0]
            raise ScenarioError(key, "unknown key")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "DriveParameters":
        data = json.loads(Path(path).read_text())
        if not isinstance(data, dict):
            raise ScenarioError("<root>", "config must be a JSON object")
        return cls.from_dict(data)


def coupling_at(params: DriveParameters, t):
    """gamma(t) = g + delta_g cos(Omega t). Accepts scalars or arrays."""
    return params.g + params.delta_g * np.cos(params.Omega * np.asarray(t, dtype=float))[()]


def mode_frequency_squared(params: DriveParameters, mode: Mode, t):
    """eps_-/+(t)^2 = omega^2 -/+ 2 omega gamma(t); negative values are legal."""
    return params.omega ** 2 + mode.sign * 2 * params.omega * coupling_at(params, t)


def mode_energy(params: DriveParameters, mode: Mode, t) -> complex:
    """Principal complex square root of the squared mode frequency."""
    return complex(np.sqrt(complex(mode_frequency_squared(params, mode, t))))
