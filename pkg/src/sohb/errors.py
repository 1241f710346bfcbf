"""Exception hierarchy shared across the package."""


class SohbError(Exception):
    """Base class for all package-specific errors."""


class DegenerateAverage(SohbError):
    """The averaged orientation is too degenerate to define a target.

    Raised when a matrix average has det <= det_floor (no well-defined
    polar rotation) or a Q-tensor average has an eigenvalue gap <= gap_floor
    (no unique leading eigenvector).
    """


class BoxTooSmall(SohbError):
    """A periodic box edge is shorter than twice the interaction radius."""


class NoConvergence(SohbError):
    """An iterative solve failed to reach its residual tolerance."""


class DomainError(SohbError):
    """An argument lies outside the mathematical domain of the function."""


class SignDiscontinuity(SohbError):
    """Adjacent quaternion nodes are not sign-continuous (lift is broken)."""


class CflViolation(SohbError):
    """The requested time step violates the CFL-like stability bound."""


class ConfigError(SohbError):
    """Base class for configuration loading problems."""


class ParseError(ConfigError):
    """The configuration file is not valid JSON."""


class SchemaError(ConfigError):
    """The configuration violates the JSON schema.

    Attributes:
        path: dotted path of the offending field ("" for the document root).
    """

    def __init__(self, message, path=""):
        super().__init__(message)
        self.path = path


class TooFewSamples(SohbError):
    """A statistical estimator received fewer samples than it supports."""
