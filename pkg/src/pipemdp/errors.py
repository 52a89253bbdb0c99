"""Exception types shared across the toolkit."""


class PipeMdpError(Exception):
    """Base class for all toolkit errors."""


class DomainError(PipeMdpError):
    """An argument lies outside the mathematical domain of an operation."""


class SingularityError(DomainError):
    """A hazard rate was requested at a point where it diverges."""


class IntegrationError(PipeMdpError):
    """The ODE solver failed to produce a solution within tolerance."""


class InvalidStateError(PipeMdpError):
    """A pipe state violates its own consistency invariants."""


class ShapeError(PipeMdpError):
    """Neural-policy weight matrices do not compose."""


class FormatError(PipeMdpError):
    """A parameter, config, or weight file is malformed."""


class ConfigError(PipeMdpError):
    """An environment configuration violates its invariants."""
