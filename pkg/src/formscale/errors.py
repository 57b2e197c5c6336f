"""Exception hierarchy shared by all formscale modules.

Configuration problems (bad layouts, gains, scenario files) raise
``ConfigError`` subclasses; the CLI maps these to exit code 2.  Failures
that occur while a valid scenario is running (singular actuation, barrier
violations, diverging integration, failed certificates) raise
``RuntimeFailure`` subclasses, mapped to exit code 3.
"""


class FormscaleError(Exception):
    """Base class for all formscale errors."""


class ConfigError(FormscaleError):
    """Invalid configuration value or scenario file."""


class LayoutError(ConfigError):
    """Group layout violates its invariants (e.g. a one-robot subgroup)."""


class ShapeMismatchError(FormscaleError):
    """Vector or matrix dimensions inconsistent with the group layout."""


class RuntimeFailure(FormscaleError):
    """A valid scenario failed while running."""


class SingularActuationError(RuntimeFailure):
    """A wheel-torque map B_i is numerically singular for some robot."""


class BarrierViolationError(RuntimeFailure):
    """Two robots closed within the hard safety distance."""

    def __init__(self, pair, distance, time=None):
        self.pair = tuple(pair)
        self.distance = float(distance)
        self.time = time
        at = f" at t={time:.6g}s" if time is not None else ""
        super().__init__(
            f"robots {self.pair[0]} and {self.pair[1]} are {self.distance:.6g} m "
            f"apart{at}, inside the safety distance"
        )


class IntegrationError(RuntimeFailure):
    """Non-finite state or derivative encountered during integration."""


class CertificateError(RuntimeFailure):
    """A stability certificate could not be established."""
