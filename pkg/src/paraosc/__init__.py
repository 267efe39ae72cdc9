"""Entanglement dynamics of two parametrically driven, linearly coupled oscillators.

The auxiliary (Lewis-Riesenfeld) parameters of the two normal modes are
obtained by integrating Mathieu-type equations; every Gaussian observable of
the reduced one-oscillator state is built from them.
"""

from paraosc.scenario import DriveParameters, Mode, coupling_at, mode_frequency_squared
from paraosc.integrator import IntegratorConfig, IntegrationError, OscState

__version__ = "0.1.0"

__all__ = [
    "DriveParameters",
    "Mode",
    "coupling_at",
    "mode_frequency_squared",
    "IntegratorConfig",
    "IntegrationError",
    "OscState",
    "__version__",
]
